import random
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moapsi.errors import OnfError, ReductionError, ShapeError
from moapsi.expr import (
    N,
    ArrayRef,
    IndexLiteral,
    InnerProduct,
    Pointwise,
    Psi,
    ReduceAdd,
    ScalarLiteral,
    Temporal,
    Transpose,
    evaluate,
    parse_expr,
    to_text,
)
from moapsi.onf import (
    Affine,
    Assign,
    BinOp,
    Checkpoint,
    FlatRef,
    OnfProgram,
    Sum,
    emit_pseudocode,
    eval_onf,
    walk,
)
from moapsi.reduce import (
    Target,
    cg_expressions,
    finalize,
    normalize,
    reduce_cg,
    reduce_to_onf,
)

from exprgen import ExprGen

GOLDEN = Path(__file__).parent / "golden" / "cg_pseudocode.txt"

R2 = ArrayRef("R", (2, N))


def rhs(program):
    (statement,) = program.statements
    return statement.rhs


def relative_error(got, want):
    got, want = np.asarray(got, dtype=float), np.asarray(want, dtype=float)
    scale = max(1.0, float(np.max(np.abs(want))) if want.size else 0.0)
    return float(np.max(np.abs(got - want))) / scale if want.size else 0.0


def check_sound(e, env):
    try:
        want = evaluate(e, env)
    except ZeroDivisionError:
        return None
    out = eval_onf(reduce_to_onf(e), env)["out"]
    return relative_error(out, want.data)


# ---------------------------------------------------------------------------
# examples


def test_reduce_squared_norm_of_row_zero():
    row = Psi(IndexLiteral((0,)), R2)
    program = reduce_to_onf(InnerProduct(row, row))
    j = Affine.var("j")
    assert rhs(program) == Sum("j", Affine.n(), BinOp("*", FlatRef("R", j), FlatRef("R", j)))
    assert emit_pseudocode(program) == "out[0] := sum(j, 0, n-1, R[j] * R[j])\n"


def test_reduce_squared_norm_of_row_one():
    row = Psi(IndexLiteral((Temporal(1),)), R2)
    program = reduce_to_onf(InnerProduct(Transpose(row), row))
    off = Affine.n() + Affine.var("j")
    assert rhs(program) == Sum("j", Affine.n(), BinOp("*", FlatRef("R", off), FlatRef("R", off)))
    assert "R[n + j] * R[n + j]" in emit_pseudocode(program)


def test_reduce_quadratic_form():
    P, A = ArrayRef("P", (2, N)), ArrayRef("A", (N, N))
    p0 = Psi(IndexLiteral((0,)), P)
    program = reduce_to_onf(InnerProduct(Transpose(p0), InnerProduct(A, p0)))
    i, j = Affine.var("i"), Affine.var("j")
    expected = Sum(
        "i",
        Affine.n(),
        Sum(
            "j",
            Affine.n(),
            BinOp(
                "*",
                FlatRef("P", i),
                BinOp("*", FlatRef("A", i * Affine.n() + j), FlatRef("P", j)),
            ),
        ),
    )
    assert rhs(program) == expected
    assert "sum(i, 0, n-1, sum(j, 0, n-1, P[i] * A[i*n + j] * P[j]))" in emit_pseudocode(program)


def test_reduce_vector_identity_and_matvec():
    v = ArrayRef("v", (N,))
    assert emit_pseudocode(reduce_to_onf(v)) == "for k in [0, n):\n  out[k] := v[k]\n"
    e = InnerProduct(ArrayRef("A", (N, N)), ArrayRef("p", (N,)))
    assert emit_pseudocode(reduce_to_onf(e)) == (
        "for k in [0, n):\n  out[k] := sum(j, 0, n-1, A[k*n + j] * p[j])\n"
    )


def test_reduce_rank_two_transpose_reverses_index():
    m = ArrayRef("M", (2, 3))
    text = emit_pseudocode(reduce_to_onf(Transpose(m)))
    assert text == "for k in [0, 3):\n  for l in [0, 2):\n    out[2*k + l] := M[3*l + k]\n"


# ---------------------------------------------------------------------------
# the CG program


def _hand_encoded_cg():
    n = Affine.n()
    k, j, i = Affine.var("k"), Affine.var("j"), Affine.var("i")

    def ref(name, off):
        return FlatRef(name, off)

    def mul(a, b):
        return BinOp("*", a, b)

    def sum_j(body):
        return Sum("j", n, body)

    rr0 = sum_j(mul(ref("R", j), ref("R", j)))
    rr1 = sum_j(mul(ref("R", n + j), ref("R", n + j)))
    pap = Sum("i", n, sum_j(mul(ref("P", i), mul(ref("A", i * n + j), ref("P", j)))))
    alpha = BinOp("/", rr0, pap)
    loop = (("k", n),)

    def assign(targets, value):
        return Assign(loop, tuple(targets), value)

    base = assign(
        [ref("P", k), ref("R", k)],
        BinOp("-", ref("b", k), sum_j(mul(ref("A", k * n + j), ref("X", j)))),
    )
    body = (
        assign([ref("X", n + k)], BinOp("+", ref("X", k), mul(ref("P", k), alpha))),
        assign(
            [ref("R", n + k)],
            BinOp(
                "-",
                ref("R", k),
                mul(alpha, sum_j(mul(ref("A", k * n + j), ref("P", j)))),
            ),
        ),
        Checkpoint(),
        assign(
            [ref("P", n + k)],
            BinOp("+", ref("R", n + k), mul(ref("P", k), BinOp("/", rr1, rr0))),
        ),
        assign([ref("X", k)], ref("X", n + k)),
        assign([ref("R", k)], ref("R", n + k)),
        assign([ref("P", k)], ref("P", n + k)),
    )
    two_n = Affine.const(2) * n
    buffers = (("A", n * n), ("b", n), ("X", two_n), ("R", two_n), ("P", two_n))
    return OnfProgram(buffers, body, init=(base,), repeat=True)


def test_reduce_cg_matches_hand_encoded_structure():
    assert reduce_cg() == _hand_encoded_cg()


def test_reduce_cg_rendered_statements():
    text = emit_pseudocode(reduce_cg())
    assert "P[k] := R[k] := b[k] - sum(j, 0, n-1, A[k*n + j] * X[j])" in text
    assert "X[n + k] := X[k] + P[k] *" in text
    assert "sum(j, 0, n-1, R[n + j] * R[n + j]) / sum(j, 0, n-1, R[j] * R[j])" in text
    assert "X[k] := X[n + k]" in text


def test_reduce_cg_matches_golden_file():
    assert emit_pseudocode(reduce_cg()) == GOLDEN.read_text()


EXAMPLE = {
    "A": [4.0, 1.0, 1.0, 3.0],
    "b": [1.0, 2.0],
    "X": [2.0, 1.0, 0.0, 0.0],
    "R": [0.0] * 4,
    "P": [0.0] * 4,
}


def test_eval_onf_base_case_on_the_example():
    out = eval_onf(reduce_cg().base_case(), EXAMPLE, 2)
    assert out["R"][:2].tolist() == [-8.0, -3.0]
    assert out["P"][:2].tolist() == [-8.0, -3.0]


def test_eval_onf_first_update_on_the_example():
    program = reduce_cg()
    state = eval_onf(program.base_case(), EXAMPLE, 2)
    x_update = OnfProgram(program.buffers, program.statements[:1])
    out = eval_onf(x_update, state, 2)
    assert out["X"][2:] == pytest.approx([0.2356, 0.3384], abs=5e-4)


def test_eval_onf_zero_system():
    buffers = {"A": [1.0], "b": [0.0], "X": [0.0, 0.0], "R": [0.0, 0.0], "P": [0.0, 0.0]}
    out = eval_onf(reduce_cg().base_case(), buffers, 1)
    for name in "XRP":
        assert out[name].tolist() == [0.0, 0.0]


def test_eval_onf_init_flag_runs_base_case_first():
    out = eval_onf(reduce_cg(), EXAMPLE, 2, init=True)
    assert out["X"][:2] == pytest.approx([0.2356, 0.3384], abs=5e-4)
    assert out["P"][:2] == pytest.approx([-0.3512, 0.7229], abs=5e-4)


def test_eval_onf_does_not_mutate_inputs():
    buffers = {k: np.array(v) for k, v in EXAMPLE.items()}
    eval_onf(reduce_cg(), buffers, 2, init=True)
    assert buffers["X"].tolist() == EXAMPLE["X"]


def test_eval_onf_errors():
    program = reduce_cg()
    missing = {k: v for k, v in EXAMPLE.items() if k != "A"}
    with pytest.raises(OnfError, match="A"):
        eval_onf(program, missing, 2)
    short = dict(EXAMPLE, b=[1.0])
    with pytest.raises(OnfError, match="length"):
        eval_onf(program, short, 2)


def test_emit_empty_program():
    assert emit_pseudocode(OnfProgram((), ())) == ""


# ---------------------------------------------------------------------------
# errors


def test_non_affine_offset_is_rejected():
    with pytest.raises(ReductionError):
        Affine.var("i") * Affine.var("j")


def test_unsupported_node_is_named():
    # an index literal is a well-shaped value but has no loop form
    e = Pointwise("+", IndexLiteral((0, 1)), ArrayRef("v", (2,)))
    assert evaluate(e, {"v": [1.0, 1.0]}).tolist() == [1.0, 2.0]
    with pytest.raises(ReductionError, match="<0 1>"):
        reduce_to_onf(e)


def test_target_shape_mismatch():
    with pytest.raises(ShapeError):
        reduce_to_onf(ArrayRef("v", (3,)), Target("out", (2,)))


# ---------------------------------------------------------------------------
# properties


def test_onf_purity_of_cg():
    program = reduce_cg()
    for st_ in program.init + program.statements:
        if isinstance(st_, Checkpoint):
            continue
        for node in walk(st_.rhs):
            assert type(node).__name__ in {"FlatRef", "Const", "BinOp", "Sum"}


def _affine_ok(off, bound_vars):
    for (var, npow), coef in off.terms:
        if var is not None and var not in bound_vars:
            return False
        if not isinstance(coef, int) or npow < 0:
            return False
    return True


def _scan_offsets(node, bound):
    if isinstance(node, FlatRef):
        yield node.offset, bound
    elif isinstance(node, Sum):
        yield from _scan_offsets(node.body, bound | {node.var})
    elif isinstance(node, BinOp):
        yield from _scan_offsets(node.left, bound)
        yield from _scan_offsets(node.right, bound)


@given(st.integers(0, 10_000))
@settings(max_examples=100)
def test_offsets_are_affine_in_bound_variables(seed):
    g = ExprGen(random.Random(seed))
    program = reduce_to_onf(g.expression())
    for stmt in program.statements:
        loops = {v for v, _ in stmt.loops}
        for target in stmt.targets:
            assert _affine_ok(target.offset, loops)
        for off, bound in _scan_offsets(stmt.rhs, frozenset(loops)):
            assert _affine_ok(off, bound)


@given(st.integers(0, 10_000))
@settings(max_examples=100)
def test_output_is_pure(seed):
    g = ExprGen(random.Random(seed))
    for node in walk(rhs(reduce_to_onf(g.expression()))):
        assert isinstance(node, (FlatRef, BinOp, Sum)) or type(node).__name__ == "Const"


@given(st.integers(0, 10_000))
@settings(max_examples=100)
def test_rule_application_is_idempotent(seed):
    g = ExprGen(random.Random(seed))
    e = g.expression()
    once = normalize(e)
    assert normalize(once) == once
    lowered = rhs(reduce_to_onf(e))
    assert finalize(lowered) == lowered
    assert reduce_to_onf(e) == reduce_to_onf(e)


@given(st.integers(0, 10_000))
@settings(max_examples=150, deadline=None)
def test_reduction_is_sound(seed):
    g = ExprGen(random.Random(seed))
    e = g.expression()
    err = check_sound(e, g.bindings())
    assert err is None or err <= 1e-12


def test_parsed_cg_terms_reduce_like_built_ones():
    for name, (e, targets) in cg_expressions().items():
        shapes = {"X": (2, N), "R": (2, N), "P": (2, N), "A": (N, N), "b": (N,)}
        again = parse_expr(to_text(e), shapes)
        assert reduce_to_onf(again, targets) == reduce_to_onf(e, targets), name


def test_reduce_add_lowering():
    v = ArrayRef("v", (4,))
    program = reduce_to_onf(ReduceAdd(v))
    out = eval_onf(program, {"v": [1.0, 2.0, 3.0, 4.0]})
    assert out["out"].tolist() == [10.0]
