"""Psi reduction: lowering symbolic MoA expressions to operational normal form.

The pipeline runs four rule groups in a fixed order, each to a fixpoint:

1. transpose elimination: a transpose of a rank 0 or 1 operand is dropped;
2. index simplification: temporal indices become row numbers of the two-row
   window (``<i>`` to ``<0>``, ``<i+1>`` to ``<1>``), nested psi selections
   merge into one and the empty index disappears;
3. expansion: inner products and additive reductions become ``Sum`` nodes
   over their contracted axis;
4. flattening: every full index into a named array becomes a row-major
   offset into its ravel.

A final pass moves a lone buffer element that multiplies a sum inside it,
``P[i] * sum(j, ...)`` to ``sum(j, P[i] * ...)``, and sum variables are
renamed by nesting height (innermost ``j``, then ``i``, ``h`` ...).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

from .errors import ReductionError, ShapeError
from .expr import (
    N,
    ArrayRef,
    Expr,
    IndexLiteral,
    InnerProduct,
    Pointwise,
    Psi,
    ReduceAdd,
    ScalarLiteral,
    Temporal,
    Transpose,
    array_refs,
    infer_shape,
    to_text,
)
from .onf import (
    Affine,
    Assign,
    BinOp,
    Checkpoint,
    Const,
    FlatRef,
    OnfProgram,
    Sum,
    rename_vars,
)

__all__ = [
    "Target",
    "eliminate_transposes",
    "simplify_indices",
    "normalize",
    "reduce_to_onf",
    "cg_expressions",
    "reduce_cg",
]

OUTPUT_VARS = ("k", "l", "m", "o", "q", "s", "t", "u")
SUM_VARS = ("j", "i", "h", "g", "f", "e", "d", "c")


@dataclass(frozen=True)
class Target:
    """Destination ``psi(prefix, name)`` of an assignment, ``name`` having ``shape``."""

    name: str
    shape: tuple
    prefix: tuple = ()


# ---------------------------------------------------------------------------
# expression-level rules


def _rebuild(e: Expr, fn) -> Expr:
    if isinstance(e, Psi):
        return Psi(fn(e.index), fn(e.array))
    if isinstance(e, Transpose):
        return Transpose(fn(e.operand))
    if isinstance(e, ReduceAdd):
        return ReduceAdd(fn(e.operand))
    if isinstance(e, InnerProduct):
        return InnerProduct(fn(e.left), fn(e.right))
    if isinstance(e, Pointwise):
        return Pointwise(e.op, fn(e.left), fn(e.right))
    return e


def eliminate_transposes(e: Expr) -> Expr:
    e = _rebuild(e, eliminate_transposes)
    if isinstance(e, Transpose) and len(infer_shape(e.operand)) <= 1:
        return e.operand
    return e


def simplify_indices(e: Expr) -> Expr:
    e = _rebuild(e, simplify_indices)
    if isinstance(e, IndexLiteral):
        return IndexLiteral(e.resolved())
    if isinstance(e, Psi) and isinstance(e.index, IndexLiteral):
        if not e.index.components:
            return e.array
        inner = e.array
        if isinstance(inner, Psi) and isinstance(inner.index, IndexLiteral):
            merged = IndexLiteral(inner.index.components + e.index.components)
            return simplify_indices(Psi(merged, inner.array))
    return e


def normalize(e: Expr) -> Expr:
    """Run the expression-level rule groups to a fixpoint."""
    infer_shape(e)
    for rule in (eliminate_transposes, simplify_indices):
        while True:
            nxt = rule(e)
            if nxt == e:
                break
            e = nxt
    return e


# ---------------------------------------------------------------------------
# expansion and flattening


def _gamma(index: Sequence[Affine], shape: Sequence) -> Affine:
    off = Affine()
    for i, extent in zip(index, shape):
        off = off * Affine.extent(extent) + i
    return off


class _Lowerer:
    def __init__(self):
        self.count = 0

    def fresh(self) -> str:
        self.count += 1
        return f"_s{self.count}"

    def lower(self, e: Expr, index: tuple):
        shp = infer_shape(e)
        if len(index) != len(shp):
            raise ReductionError(f"index of length {len(index)} for rank {len(shp)} in {to_text(e)}")
        if isinstance(e, ArrayRef):
            return FlatRef(e.name, _gamma(index, e.shape))
        if isinstance(e, ScalarLiteral):
            return Const(e.value)
        if isinstance(e, Psi):
            prefix = tuple(Affine.const(c) for c in e.index.resolved())
            return self.lower(e.array, prefix + index)
        if isinstance(e, Transpose):
            return self.lower(e.operand, index[::-1])
        if isinstance(e, Pointwise):
            li = index if infer_shape(e.left) else ()
            ri = index if infer_shape(e.right) else ()
            return BinOp(e.op, self.lower(e.left, li), self.lower(e.right, ri))
        if isinstance(e, ReduceAdd):
            (extent,) = infer_shape(e.operand)
            v = self.fresh()
            return Sum(v, Affine.extent(extent), self.lower(e.operand, (Affine.var(v),)))
        if isinstance(e, InnerProduct):
            ls = infer_shape(e.left)
            split = len(ls) - 1
            v = self.fresh()
            kv = (Affine.var(v),)
            body = BinOp(
                "*",
                self.lower(e.left, index[:split] + kv),
                self.lower(e.right, kv + index[split:]),
            )
            return Sum(v, Affine.extent(ls[-1]), body)
        raise ReductionError(f"cannot reduce node {to_text(e)}")


def _distribute(node):
    if isinstance(node, BinOp):
        left, right = _distribute(node.left), _distribute(node.right)
        if node.op == "*" and isinstance(left, FlatRef) and isinstance(right, Sum):
            if right.var not in left.offset.variables:
                return Sum(right.var, right.extent, _distribute(BinOp("*", left, right.body)))
        return BinOp(node.op, left, right)
    if isinstance(node, Sum):
        return Sum(node.var, node.extent, _distribute(node.body))
    return node


def _height(node) -> int:
    if isinstance(node, BinOp):
        return max(_height(node.left), _height(node.right))
    if isinstance(node, Sum):
        return 1 + _height(node.body)
    return 0


def _sum_name(height: int) -> str:
    return SUM_VARS[height] if height < len(SUM_VARS) else f"j{height}"


def _canonical_names(node):
    if isinstance(node, BinOp):
        return BinOp(node.op, _canonical_names(node.left), _canonical_names(node.right))
    if isinstance(node, Sum):
        body = _canonical_names(node.body)
        name = _sum_name(_height(body))
        return Sum(name, node.extent, rename_vars(body, {node.var: name}))
    return node


def finalize(node):
    """Distribute buffer elements into sums, then rename sum variables."""
    while True:
        nxt = _distribute(node)
        if nxt == node:
            break
        node = nxt
    return _canonical_names(node)


def _buffer_length(shape) -> Affine:
    total = Affine.const(1)
    for extent in shape:
        total = total * Affine.extent(extent)
    return total


def reduce_to_onf(
    e: Expr,
    target: Union[Target, Sequence[Target], None] = None,
) -> OnfProgram:
    """Lower ``e`` to a one-statement program assigning it to ``target``.

    Without a target the value is written to a fresh buffer ``out`` of the
    expression's shape. Several targets give a chained assignment.
    """
    result_shape = infer_shape(e)
    if target is None:
        targets = (Target("out", result_shape),)
    elif isinstance(target, Target):
        targets = (target,)
    else:
        targets = tuple(target)
    if not targets:
        raise ReductionError("reduction needs at least one target")
    loop_shape = None
    for t in targets:
        prefix = tuple(c.resolve() if isinstance(c, Temporal) else int(c) for c in t.prefix)
        slab = tuple(t.shape[len(prefix):])
        if slab != tuple(result_shape):
            raise ShapeError(
                f"target {t.name} slab of shape {slab} cannot hold a value of shape "
                f"{result_shape}"
            )
        loop_shape = slab
    if len(loop_shape) > len(OUTPUT_VARS):
        raise ReductionError(f"result rank {len(loop_shape)} is too large")
    names = OUTPUT_VARS[: len(loop_shape)]
    loop_index = tuple(Affine.var(v) for v in names)
    loops = tuple((v, Affine.extent(x)) for v, x in zip(names, loop_shape))

    rhs = finalize(_Lowerer().lower(normalize(e), loop_index))

    flat_targets = []
    for t in targets:
        prefix = tuple(
            Affine.const(c.resolve() if isinstance(c, Temporal) else int(c)) for c in t.prefix
        )
        flat_targets.append(FlatRef(t.name, _gamma(prefix + loop_index, t.shape)))

    buffers = {name: _buffer_length(s) for name, s in array_refs(e).items()}
    for t in targets:
        buffers.setdefault(t.name, _buffer_length(t.shape))
    return OnfProgram(tuple(buffers.items()), (Assign(loops, tuple(flat_targets), rhs),))


# ---------------------------------------------------------------------------
# the conjugate gradient iteration


def cg_expressions() -> dict:
    """The CG recurrence as MoA expressions over two-row buffers.

    Returns a mapping from statement name to ``(expression, targets)``. The
    step size and direction coefficient are written inline at each use.
    """
    two_rows = (2, N)
    X, R, P = (ArrayRef(name, two_rows) for name in "XRP")
    A = ArrayRef("A", (N, N))
    b = ArrayRef("b", (N,))
    now, nxt = IndexLiteral((Temporal(0),)), IndexLiteral((Temporal(1),))

    def row(index, arr):
        return Psi(index, arr)

    def dot(u, v):
        return InnerProduct(Transpose(u), v)

    def alpha():
        return Pointwise(
            "/",
            dot(row(now, R), row(now, R)),
            dot(row(now, P), InnerProduct(A, row(now, P))),
        )

    def beta():
        return Pointwise("/", dot(row(nxt, R), row(nxt, R)), dot(row(now, R), row(now, R)))

    def at(name, index):
        return Target(name, two_rows, (index,))

    zero, one = Temporal(0), Temporal(1)
    base = Pointwise("-", b, InnerProduct(A, Psi(IndexLiteral((0,)), X)))
    x_update = Pointwise("+", row(now, X), Pointwise("*", row(now, P), alpha()))
    r_update = Pointwise(
        "-", row(now, R), Pointwise("*", alpha(), InnerProduct(A, row(now, P)))
    )
    p_update = Pointwise("+", row(nxt, R), Pointwise("*", row(now, P), beta()))
    return {
        "base": (base, (at("P", zero), at("R", zero))),
        "x_update": (x_update, (at("X", one),)),
        "r_update": (r_update, (at("R", one),)),
        "p_update": (p_update, (at("P", one),)),
        "x_rotate": (row(nxt, X), (at("X", zero),)),
        "r_rotate": (row(nxt, R), (at("R", zero),)),
        "p_rotate": (row(nxt, P), (at("P", zero),)),
    }


def reduce_cg() -> OnfProgram:
    """Reduce the whole CG solver: base case plus the repeated step.

    The step updates row 1 of X, R and P, marks the convergence test after
    the residual update and finally copies row 1 back to row 0.
    """
    exprs = cg_expressions()

    def statement(name):
        e, targets = exprs[name]
        return reduce_to_onf(e, targets).statements[0]

    init = (statement("base"),)
    body = (
        statement("x_update"),
        statement("r_update"),
        Checkpoint(),
        statement("p_update"),
        statement("x_rotate"),
        statement("r_rotate"),
        statement("p_rotate"),
    )
    two_n = _buffer_length((2, N))
    buffers = (
        ("A", _buffer_length((N, N))),
        ("b", _buffer_length((N,))),
        ("X", two_n),
        ("R", two_n),
        ("P", two_n),
    )
    return OnfProgram(buffers, body, init=init, repeat=True)
