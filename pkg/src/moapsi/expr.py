"""Symbolic MoA expressions: tree nodes, shape inference, evaluation, text form.

Extents in declared shapes are either integers or the symbol ``"n"``, the one
problem-size parameter. Index literals may hold the temporal index ``i`` with
a constant offset (``<i>``, ``<i+1>``); it is read relative to a two-row window,
so ``<i>`` addresses row 0 and ``<i+1>`` row 1.

Unparenthesised operator chains associate right to left with no precedence,
so ``1 - (4 * 2) + 1`` reads as ``1 - ((4 * 2) + 1)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping, Optional, Union

from . import core
from .core import DenseArray
from .errors import (
    ParseError,
    ShapeError,
    UnboundNameError,
    UnknownIdentifierError,
)

N = "n"
Extent = Union[int, str]

__all__ = [
    "N",
    "Temporal",
    "Expr",
    "ArrayRef",
    "ScalarLiteral",
    "IndexLiteral",
    "Psi",
    "Transpose",
    "InnerProduct",
    "Pointwise",
    "ReduceAdd",
    "infer_shape",
    "evaluate",
    "parse_expr",
    "to_text",
    "array_refs",
    "parse_shape",
]


@dataclass(frozen=True)
class Temporal:
    """The temporal index ``i`` shifted by a constant."""

    offset: int = 0

    def resolve(self) -> int:
        # i - i: the window always starts at row 0
        return self.offset

    def __str__(self):
        if self.offset == 0:
            return "i"
        sign = "+" if self.offset > 0 else "-"
        return f"i{sign}{abs(self.offset)}"


def _component_value(c) -> int:
    return c.resolve() if isinstance(c, Temporal) else int(c)


class Expr:
    """Base class of expression nodes."""

    def __str__(self):
        return to_text(self)


@dataclass(frozen=True, repr=False)
class ArrayRef(Expr):
    name: str
    shape: tuple

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(_check_extent(e) for e in self.shape))

    def __repr__(self):
        return f"ArrayRef({self.name!r}, {self.shape})"


@dataclass(frozen=True, repr=False)
class ScalarLiteral(Expr):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __repr__(self):
        return f"ScalarLiteral({self.value!r})"


@dataclass(frozen=True, repr=False)
class IndexLiteral(Expr):
    components: tuple

    def __post_init__(self):
        comps = tuple(
            c if isinstance(c, Temporal) else int(c) for c in self.components
        )
        object.__setattr__(self, "components", comps)

    def resolved(self) -> tuple:
        return tuple(_component_value(c) for c in self.components)

    def __repr__(self):
        return f"IndexLiteral({self.components})"


@dataclass(frozen=True, repr=False)
class Psi(Expr):
    index: Expr
    array: Expr

    def __repr__(self):
        return f"Psi({self.index!r}, {self.array!r})"


@dataclass(frozen=True, repr=False)
class Transpose(Expr):
    operand: Expr

    def __repr__(self):
        return f"Transpose({self.operand!r})"


@dataclass(frozen=True, repr=False)
class InnerProduct(Expr):
    left: Expr
    right: Expr

    def __repr__(self):
        return f"InnerProduct({self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class Pointwise(Expr):
    op: str
    left: Expr
    right: Expr

    def __post_init__(self):
        object.__setattr__(self, "op", core.normalize_op(self.op))

    def __repr__(self):
        return f"Pointwise({self.op!r}, {self.left!r}, {self.right!r})"


@dataclass(frozen=True, repr=False)
class ReduceAdd(Expr):
    operand: Expr

    def __repr__(self):
        return f"ReduceAdd({self.operand!r})"


def _check_extent(e) -> Extent:
    if e == N:
        return N
    if isinstance(e, str):
        e = int(e)
    if int(e) != e or e < 0:
        raise ShapeError(f"invalid extent {e!r}")
    return int(e)


def parse_shape(text: str) -> tuple:
    """Parse ``"2,n"`` into ``(2, "n")``; an empty string is the scalar shape."""
    text = text.strip()
    if not text:
        return ()
    try:
        return tuple(_check_extent(part.strip()) for part in text.split(","))
    except ValueError as exc:
        raise ShapeError(f"bad shape declaration {text!r}") from exc


def children(e: Expr) -> tuple:
    if isinstance(e, Psi):
        return (e.index, e.array)
    if isinstance(e, (Transpose, ReduceAdd)):
        return (e.operand,)
    if isinstance(e, (InnerProduct, Pointwise)):
        return (e.left, e.right)
    return ()


def array_refs(e: Expr) -> dict:
    """Map each referenced array name to its declared shape."""
    found = {}
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, ArrayRef):
            prev = found.setdefault(node.name, node.shape)
            if prev != node.shape:
                raise ShapeError(
                    f"array {node.name!r} declared with shapes {prev} and {node.shape}",
                    node,
                )
        stack.extend(children(node))
    return found


# ---------------------------------------------------------------------------
# shape inference


@lru_cache(maxsize=4096)
def infer_shape(e: Expr) -> tuple:
    """Shape of the value ``e`` denotes; may contain the symbol ``"n"``."""
    if isinstance(e, ArrayRef):
        return e.shape
    if isinstance(e, ScalarLiteral):
        return ()
    if isinstance(e, IndexLiteral):
        return (len(e.components),)
    if isinstance(e, Psi):
        if not isinstance(e.index, IndexLiteral):
            raise ShapeError(f"psi index must be an index literal in {to_text(e)}", e)
        s = infer_shape(e.array)
        idx = e.index.resolved()
        if len(idx) > len(s):
            raise ShapeError(
                f"index of length {len(idx)} exceeds rank {len(s)} in {to_text(e)}", e
            )
        for axis, (c, extent) in enumerate(zip(idx, s)):
            if c < 0 or (extent != N and c >= extent):
                raise ShapeError(
                    f"index {c} out of bounds for axis {axis} (extent {extent}) "
                    f"in {to_text(e)}",
                    e,
                )
        return s[len(idx):]
    if isinstance(e, Transpose):
        s = infer_shape(e.operand)
        if len(s) > 2:
            raise ShapeError(f"transpose of rank {len(s)} in {to_text(e)}", e)
        return s[::-1]
    if isinstance(e, InnerProduct):
        ls, rs = infer_shape(e.left), infer_shape(e.right)
        if not ls or not rs:
            raise ShapeError(f"inner product operand of rank 0 in {to_text(e)}", e)
        if ls[-1] != rs[0]:
            raise ShapeError(
                f"inner product extents {ls[-1]} and {rs[0]} differ in {to_text(e)}", e
            )
        return ls[:-1] + rs[1:]
    if isinstance(e, Pointwise):
        ls, rs = infer_shape(e.left), infer_shape(e.right)
        if ls == rs or not rs:
            return ls
        if not ls:
            return rs
        raise ShapeError(f"shapes {ls} and {rs} do not conform in {to_text(e)}", e)
    if isinstance(e, ReduceAdd):
        s = infer_shape(e.operand)
        if len(s) != 1:
            raise ShapeError(f"additive reduction of rank {len(s)} in {to_text(e)}", e)
        return ()
    raise ShapeError(f"unknown expression node {e!r}", e)


# ---------------------------------------------------------------------------
# evaluation


def resolve_n(e: Expr, env: Mapping[str, DenseArray]) -> Optional[int]:
    """Bind the symbolic extent from the shapes of the bound arrays."""
    n = None
    for name, declared in array_refs(e).items():
        if name not in env:
            raise UnboundNameError(f"no binding for array {name!r}")
        actual = core.array(env[name]).shape
        if len(actual) != len(declared):
            raise ShapeError(
                f"array {name!r} bound with shape {actual}, declared {declared}"
            )
        for d, a in zip(declared, actual):
            if d == N:
                if n is None:
                    n = a
                elif n != a:
                    raise ShapeError(f"inconsistent values {n} and {a} for n")
            elif d != a:
                raise ShapeError(
                    f"array {name!r} bound with shape {actual}, declared {declared}"
                )
    return n


def evaluate(e: Expr, env: Mapping[str, object]) -> DenseArray:
    """Evaluate ``e`` by structural recursion over the core array functions."""
    bound = {k: core.array(v) for k, v in env.items()}
    resolve_n(e, bound)
    return _eval(e, bound)


def _eval(e: Expr, env: Mapping[str, DenseArray]) -> DenseArray:
    if isinstance(e, ArrayRef):
        return env[e.name]
    if isinstance(e, ScalarLiteral):
        return core.scalar(e.value)
    if isinstance(e, IndexLiteral):
        return core.vector(e.resolved())
    if isinstance(e, Psi):
        return core.psi(_eval(e.index, env), _eval(e.array, env))
    if isinstance(e, Transpose):
        return core.transpose(_eval(e.operand, env))
    if isinstance(e, InnerProduct):
        return core.inner_product(_eval(e.left, env), _eval(e.right, env))
    if isinstance(e, Pointwise):
        return core.pointwise(e.op, _eval(e.left, env), _eval(e.right, env))
    if isinstance(e, ReduceAdd):
        return core.reduce_add(_eval(e.operand, env))
    raise TypeError(f"unknown expression node {e!r}")


# ---------------------------------------------------------------------------
# text form


def _fmt_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def _atom_text(e: Expr) -> str:
    if isinstance(e, Pointwise):
        return f"({to_text(e)})"
    return to_text(e)


def to_text(e: Expr) -> str:
    """Render ``e`` in the textual grammar accepted by :func:`parse_expr`."""
    if isinstance(e, ArrayRef):
        return e.name
    if isinstance(e, ScalarLiteral):
        return _fmt_number(e.value)
    if isinstance(e, IndexLiteral):
        return "<" + " ".join(str(c) for c in e.components) + ">"
    if isinstance(e, Psi):
        return f"psi({to_text(e.index)}, {to_text(e.array)})"
    if isinstance(e, Transpose):
        return f"tr {_atom_text(e.operand)}"
    if isinstance(e, InnerProduct):
        return f"ip({to_text(e.left)}, {to_text(e.right)})"
    if isinstance(e, ReduceAdd):
        return f"red({to_text(e.operand)})"
    if isinstance(e, Pointwise):
        # the right operand of a chain never needs parentheses
        return f"{_atom_text(e.left)} {e.op} {to_text(e.right)}"
    raise TypeError(f"unknown expression node {e!r}")


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()<>,+\-*/])
    """,
    re.VERBOSE,
)
_KEYWORDS = {"psi", "ip", "tr", "red"}


def _tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, shapes: Mapping[str, tuple]):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.shapes = shapes

    def peek(self, offset=0):
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str):
        tok = self.next()
        if tok[1] != value:
            shown = tok[1] or "end of input"
            raise ParseError(f"expected {value!r}, found {shown!r}", tok[2])
        return tok

    def parse(self) -> Expr:
        e = self.chain()
        tok = self.peek()
        if tok[0] != "eof":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def chain(self) -> Expr:
        left = self.atom()
        tok = self.peek()
        if tok[0] == "punct" and tok[1] in "+-*/":
            self.next()
            return Pointwise(tok[1], left, self.chain())
        return left

    def atom(self) -> Expr:
        kind, value, where = self.next()
        if kind == "number":
            return ScalarLiteral(float(value))
        if value == "-" and self.peek()[0] == "number":
            return ScalarLiteral(-float(self.next()[1]))
        if value == "(":
            e = self.chain()
            self.expect(")")
            return e
        if kind == "ident":
            if value == "psi":
                self.expect("(")
                idx = self.index()
                self.expect(",")
                arr = self.chain()
                self.expect(")")
                return Psi(idx, arr)
            if value == "ip":
                self.expect("(")
                left = self.chain()
                self.expect(",")
                right = self.chain()
                self.expect(")")
                return InnerProduct(left, right)
            if value == "red":
                self.expect("(")
                operand = self.chain()
                self.expect(")")
                return ReduceAdd(operand)
            if value == "tr":
                return Transpose(self.atom())
            if value not in self.shapes:
                raise UnknownIdentifierError(f"unknown identifier {value!r}", where)
            return ArrayRef(value, tuple(self.shapes[value]))
        shown = value or "end of input"
        raise ParseError(f"unexpected token {shown!r}", where)

    def index(self) -> IndexLiteral:
        self.expect("<")
        comps = []
        while True:
            kind, value, where = self.next()
            if value == ">":
                break
            if kind == "number":
                if not value.isdigit():
                    raise ParseError(f"index component {value!r} is not an integer", where)
                comps.append(int(value))
            elif kind == "ident" and value == "i":
                offset = 0
                nxt = self.peek()
                if nxt[1] in ("+", "-") and self.peek(1)[0] == "number":
                    self.next()
                    num = self.next()
                    if not num[1].isdigit():
                        raise ParseError("temporal offset must be an integer", num[2])
                    offset = int(num[1]) if nxt[1] == "+" else -int(num[1])
                comps.append(Temporal(offset))
            elif value == ",":
                continue
            else:
                shown = value or "end of input"
                raise ParseError(f"bad index component {shown!r}", where)
        return IndexLiteral(tuple(comps))


def parse_expr(text: str, shapes: Optional[Mapping[str, tuple]] = None) -> Expr:
    """Parse expression text; ``shapes`` declares every array identifier.

    >>> to_text(parse_expr("ip(psi(<0>,R), psi(<0>,R))", {"R": (2, "n")}))
    'ip(psi(<0>, R), psi(<0>, R))'
    """
    decls = {name: tuple(_check_extent(x) for x in s) for name, s in (shapes or {}).items()}
    return _Parser(text, decls).parse()
