"""Mathematics of Arrays with psi reduction, applied to conjugate gradient."""

from .core import (
    DenseArray,
    array,
    concat,
    drop,
    gamma,
    inner_product,
    iota,
    pointwise,
    psi,
    ravel,
    reduce_add,
    scalar,
    shape,
    take,
    tau,
    transpose,
    vector,
)
from .cg import CgState, SolveOptions, SolveReport, cg_init, cg_solve, cg_step, residual_norm
from .expr import evaluate, infer_shape, parse_expr, to_text
from .onf import OnfProgram, emit_pseudocode, eval_onf
from .reduce import Target, reduce_cg, reduce_to_onf

__version__ = "0.1.0"
