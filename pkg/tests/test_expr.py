import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from moapsi import core
from moapsi.errors import ParseError, ShapeError, UnboundNameError, UnknownIdentifierError
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
    array_refs,
    evaluate,
    infer_shape,
    parse_expr,
    parse_shape,
    to_text,
)
from moapsi.reduce import cg_expressions

from exprgen import ExprGen

EXAMPLE_ENV = {
    "A": [[4, 1], [1, 3]],
    "b": [1, 2],
    "X": [[2, 1], [0, 0]],
    "R": [[-8, -3], [0, 0]],
    "P": [[-8, -3], [0, 0]],
}


def test_infer_shape_examples():
    r0 = ArrayRef("R0", (N,))
    assert infer_shape(InnerProduct(r0, r0)) == ()
    assert infer_shape(Psi(IndexLiteral((0,)), ArrayRef("X", (2, N)))) == (N,)
    assert infer_shape(InnerProduct(ArrayRef("A", (2, 2)), ArrayRef("P0", (2,)))) == (2,)


def test_infer_shape_errors_cite_subexpression():
    bad = InnerProduct(ArrayRef("u", (3,)), ArrayRef("v", (4,)))
    with pytest.raises(ShapeError, match=r"ip\(u, v\)"):
        infer_shape(Pointwise("+", ArrayRef("w", ()), bad))
    with pytest.raises(ShapeError):
        infer_shape(Psi(IndexLiteral((2,)), ArrayRef("X", (2, N))))
    with pytest.raises(ShapeError):
        infer_shape(Pointwise("+", ArrayRef("u", (3,)), ArrayRef("v", (2,))))
    with pytest.raises(ShapeError):
        infer_shape(ReduceAdd(ArrayRef("M", (2, 2))))
    with pytest.raises(ShapeError):
        infer_shape(Transpose(ArrayRef("T", (2, 2, 2))))


def test_eval_alpha_of_the_example():
    alpha = cg_expressions()["x_update"][0].right.right
    assert abs(evaluate(alpha, EXAMPLE_ENV).item() - 73 / 331) < 1e-15
    assert evaluate(alpha, EXAMPLE_ENV).item() == pytest.approx(0.220544, abs=1e-6)


def test_eval_transpose_of_vector_is_identity():
    v = ArrayRef("v", (3,))
    env = {"v": [1.0, -2.0, 3.5]}
    assert evaluate(Transpose(v), env) == evaluate(v, env)


def test_eval_initial_residual():
    e = parse_expr("b - ip(A, psi(<0>, X))", {"b": (N,), "A": (N, N), "X": (2, N)})
    assert evaluate(e, EXAMPLE_ENV) == core.vector([-8, -3])


def test_eval_errors():
    v = ArrayRef("v", (N,))
    with pytest.raises(UnboundNameError):
        evaluate(v, {})
    with pytest.raises(ShapeError):
        evaluate(Pointwise("+", v, ArrayRef("w", (N,))), {"v": [1, 2], "w": [1, 2, 3]})


def test_parse_examples():
    shapes = {"R": (2, N)}
    row = Psi(IndexLiteral((0,)), ArrayRef("R", (2, N)))
    assert parse_expr("ip(psi(<0>,R), psi(<0>,R))", shapes) == InnerProduct(row, row)
    assert parse_expr("tr psi(<0>,R)", shapes) == Transpose(row)
    assert evaluate(parse_expr("1 - (4 * 2) + 1"), {}).item() == -8
    assert evaluate(parse_expr("2 - (1 * 2) + 3"), {}).item() == -3


def test_parse_temporal_indices():
    e = parse_expr("psi(<i+1>, R) + psi(<i>, R)", {"R": (2, N)})
    assert e.left.index == IndexLiteral((Temporal(1),))
    assert e.right.index == IndexLiteral((Temporal(0),))
    assert evaluate(e, EXAMPLE_ENV) == core.vector([-8, -3])


def test_parse_errors():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_expr("ip(q, q)")
    assert info.value.position == 3
    with pytest.raises(ParseError) as info:
        parse_expr("ip(1, 2")
    assert info.value.position == 7
    with pytest.raises(ParseError):
        parse_expr("1 +")
    with pytest.raises(ParseError):
        parse_expr("psi(<0.5>, 1)")
    with pytest.raises(ParseError):
        parse_expr("1 $ 2")


def test_parse_shape():
    assert parse_shape("2,n") == (2, N)
    assert parse_shape("") == ()
    with pytest.raises(ShapeError):
        parse_shape("2,m")


def test_array_refs_rejects_conflicting_declarations():
    with pytest.raises(ShapeError):
        array_refs(Pointwise("+", ArrayRef("v", (2,)), ArrayRef("v", (3,))))


OPS = "+-*/"


@given(st.sampled_from(OPS), st.sampled_from(OPS))
def test_right_to_left_chains(op1, op2):
    shapes = {"a": (), "b": (), "c": ()}
    flat = parse_expr(f"a {op1} b {op2} c", shapes)
    grouped = parse_expr(f"a {op1} (b {op2} c)", shapes)
    assert flat == grouped


@given(st.integers(0, 10_000))
@settings(max_examples=200)
def test_eval_shape_matches_inferred_shape(seed):
    g = ExprGen(random.Random(seed), max_depth=5)
    e = g.expression()
    try:
        value = evaluate(e, g.bindings())
    except ZeroDivisionError:
        return
    assert value.shape == infer_shape(e)


@given(st.integers(0, 10_000))
@settings(max_examples=200)
def test_transpose_elimination_is_sound(seed):
    g = ExprGen(random.Random(seed), max_depth=4)
    shape = (g.extent(),) if seed % 2 else ()
    e = g.gen(shape)
    env = g.bindings()
    try:
        plain = evaluate(e, env)
    except ZeroDivisionError:
        return
    assert evaluate(Transpose(e), env) == plain


@given(st.integers(0, 10_000), st.sampled_from([0.5, -2.0, 1e-3, 12345.678]))
def test_print_parse_round_trip(seed, literal):
    g = ExprGen(random.Random(seed), max_depth=4)
    e = Pointwise("*", ScalarLiteral(literal), g.expression())
    shapes = array_refs(e)
    assert parse_expr(to_text(e), shapes) == e


def test_round_trip_of_cg_expressions():
    for e, _ in cg_expressions().values():
        assert parse_expr(to_text(e), array_refs(e)) == e
