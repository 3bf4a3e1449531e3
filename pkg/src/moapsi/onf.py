"""Operational normal form: flat-buffer loop programs, their executor and printer.

Every array access in a program is a :class:`FlatRef`, a buffer name plus an
:class:`Affine` offset. Offsets are affine in the loop variables; coefficients
may carry powers of the size parameter ``n`` (a row stride of ``<2 n>`` is
``n``), which is a run-time constant rather than a loop variable.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Union

import numpy as np

from .errors import MoADivisionError, OnfError, ReductionError

__all__ = [
    "Affine",
    "FlatRef",
    "Const",
    "BinOp",
    "Sum",
    "Assign",
    "Checkpoint",
    "OnfProgram",
    "eval_onf",
    "emit_pseudocode",
    "render_expr",
    "walk",
    "rename_vars",
]


def _term_key(item):
    # larger strides first, the constant term last
    (var, npow), coef = item
    return (-npow, var is None, -abs(coef), var or "")


@dataclass(frozen=True)
class Affine:
    """Integer combination of monomials ``var * n**p`` (``var`` may be absent)."""

    terms: tuple = ()

    @staticmethod
    def of(terms: Mapping) -> "Affine":
        kept = {k: c for k, c in terms.items() if c != 0}
        return Affine(tuple(sorted(kept.items(), key=_term_key)))

    @staticmethod
    def const(c: int) -> "Affine":
        return Affine.of({(None, 0): int(c)})

    @staticmethod
    def var(name: str) -> "Affine":
        return Affine.of({(name, 0): 1})

    @staticmethod
    def n(power: int = 1) -> "Affine":
        return Affine.of({(None, power): 1})

    @staticmethod
    def extent(e) -> "Affine":
        """Affine value of a declared extent (an int or the symbol ``"n"``)."""
        return Affine.n() if e == "n" else Affine.const(e)

    def __add__(self, other: "Affine") -> "Affine":
        acc = dict(self.terms)
        for k, c in other.terms:
            acc[k] = acc.get(k, 0) + c
        return Affine.of(acc)

    def __mul__(self, other: "Affine") -> "Affine":
        if self.variables and other.variables:
            raise ReductionError(f"non-affine offset: ({self}) * ({other})")
        acc = {}
        for (v1, p1), c1 in self.terms:
            for (v2, p2), c2 in other.terms:
                key = (v1 or v2, p1 + p2)
                acc[key] = acc.get(key, 0) + c1 * c2
        return Affine.of(acc)

    @property
    def variables(self) -> frozenset:
        return frozenset(v for (v, _), _ in self.terms if v is not None)

    @property
    def is_constant(self) -> bool:
        return all(v is None and p == 0 for (v, p), _ in self.terms)

    def evaluate(self, env: Mapping[str, int], n: Optional[int]) -> int:
        total = 0
        for (v, p), c in self.terms:
            if p and n is None:
                raise OnfError("program uses the size parameter n but none was given")
            total += c * (env[v] if v is not None else 1) * (n**p if p else 1)
        return total

    def rename(self, mapping: Mapping[str, str]) -> "Affine":
        return Affine.of({(mapping.get(v, v), p): c for (v, p), c in self.terms})

    def __str__(self):
        if not self.terms:
            return "0"
        out = ""
        for idx, ((v, p), c) in enumerate(self.terms):
            factors = ([v] if v else []) + ["n"] * p
            mag = abs(c)
            if mag != 1 or not factors:
                factors.insert(0, str(mag))
            text = "*".join(factors)
            if idx == 0:
                out = text if c > 0 else f"-{text}"
            else:
                out += f" + {text}" if c > 0 else f" - {text}"
        return out


def _upper_bound(extent: Affine) -> str:
    if extent.is_constant:
        return str(extent.evaluate({}, None) - 1)
    return f"{extent}-1"


# ---------------------------------------------------------------------------
# expression nodes


class OnfExpr:
    pass


@dataclass(frozen=True)
class FlatRef(OnfExpr):
    buffer: str
    offset: Affine = field(default_factory=Affine)


@dataclass(frozen=True)
class Const(OnfExpr):
    value: float


@dataclass(frozen=True)
class BinOp(OnfExpr):
    op: str
    left: OnfExpr
    right: OnfExpr


@dataclass(frozen=True)
class Sum(OnfExpr):
    """``sum(var, 0, extent-1, body)``, accumulated in ascending order from 0.0."""

    var: str
    extent: Affine
    body: OnfExpr


@dataclass(frozen=True)
class Assign:
    """``targets... := rhs`` inside a nest of half-open loops ``[0, extent)``."""

    loops: tuple  # ((var, Affine extent), ...) outermost first
    targets: tuple  # (FlatRef, ...)
    rhs: OnfExpr


@dataclass(frozen=True)
class Checkpoint:
    """A point where an enclosing driver may test for convergence; no-op here."""

    label: str = "exit if converged"


@dataclass(frozen=True)
class OnfProgram:
    """A list of statements over named flat buffers.

    ``init`` runs once before the first application of ``statements``; when
    ``repeat`` is set the statements form the body of a convergence loop.
    """

    buffers: tuple  # ((name, Affine length), ...)
    statements: tuple
    init: tuple = ()
    repeat: bool = False

    def base_case(self) -> "OnfProgram":
        return OnfProgram(self.buffers, self.init)

    def step(self) -> "OnfProgram":
        return OnfProgram(self.buffers, self.statements)


def walk(node) -> Iterable:
    """Yield every expression node below ``node`` (statements included)."""
    if isinstance(node, OnfProgram):
        for st in node.init + node.statements:
            yield from walk(st)
        return
    if isinstance(node, Assign):
        for t in node.targets:
            yield t
        yield from walk(node.rhs)
        return
    if isinstance(node, Checkpoint):
        return
    yield node
    if isinstance(node, BinOp):
        yield from walk(node.left)
        yield from walk(node.right)
    elif isinstance(node, Sum):
        yield from walk(node.body)


def rename_vars(node: OnfExpr, mapping: Mapping[str, str]) -> OnfExpr:
    if isinstance(node, FlatRef):
        return FlatRef(node.buffer, node.offset.rename(mapping))
    if isinstance(node, BinOp):
        return BinOp(node.op, rename_vars(node.left, mapping), rename_vars(node.right, mapping))
    if isinstance(node, Sum):
        return Sum(mapping.get(node.var, node.var), node.extent, rename_vars(node.body, mapping))
    return node


# ---------------------------------------------------------------------------
# execution

_OPS = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
}


def _free_vars(node: OnfExpr) -> frozenset:
    if isinstance(node, FlatRef):
        return node.offset.variables
    if isinstance(node, BinOp):
        return _free_vars(node.left) | _free_vars(node.right)
    if isinstance(node, Sum):
        return _free_vars(node.body) - {node.var}
    return frozenset()


def _reads(node: OnfExpr) -> frozenset:
    return frozenset(x.buffer for x in walk(node) if isinstance(x, FlatRef))


class _Executor:
    def __init__(self, buffers: dict, n: Optional[int]):
        self.buffers = buffers
        self.n = n

    def run(self, st) -> None:
        if isinstance(st, Checkpoint):
            return
        written = {t.buffer for t in st.targets}
        # sums reading nothing this statement writes are loop-invariant per binding
        self.cacheable = {}
        for node in walk(st.rhs):
            if isinstance(node, Sum) and not (_reads(node) & written):
                self.cacheable[id(node)] = tuple(sorted(_free_vars(node)))
        self.cache = {}
        names = [v for v, _ in st.loops]
        ranges = [range(ext.evaluate({}, self.n)) for _, ext in st.loops]
        for values in itertools.product(*ranges):
            env = dict(zip(names, values))
            value = self.value(st.rhs, env)
            # chained targets: every target receives the same value
            for t in reversed(st.targets):
                self.store(t, env, value)

    def locate(self, ref: FlatRef, env) -> tuple:
        try:
            buf = self.buffers[ref.buffer]
        except KeyError:
            raise OnfError(f"missing buffer {ref.buffer!r}") from None
        off = ref.offset.evaluate(env, self.n)
        if not 0 <= off < len(buf):
            raise OnfError(
                f"offset {off} outside buffer {ref.buffer!r} of length {len(buf)}"
            )
        return buf, off

    def store(self, ref: FlatRef, env, value: float) -> None:
        buf, off = self.locate(ref, env)
        buf[off] = value

    def value(self, node: OnfExpr, env) -> float:
        if isinstance(node, FlatRef):
            buf, off = self.locate(node, env)
            return buf[off]
        if isinstance(node, Const):
            return node.value
        if isinstance(node, BinOp):
            left = self.value(node.left, env)
            right = self.value(node.right, env)
            try:
                return _OPS[node.op](left, right)
            except ZeroDivisionError:
                raise MoADivisionError("division by zero in program") from None
        if isinstance(node, Sum):
            free = self.cacheable.get(id(node))
            if free is not None:
                key = (id(node),) + tuple(env[v] for v in free)
                if key in self.cache:
                    return self.cache[key]
            acc = 0.0
            inner = dict(env)
            for v in range(node.extent.evaluate(env, self.n)):
                inner[node.var] = v
                acc = acc + self.value(node.body, inner)
            if free is not None:
                self.cache[key] = acc
            return acc
        raise OnfError(f"unknown program node {node!r}")


def _read_buffers(program: OnfProgram) -> set:
    names = set()
    for st in program.init + program.statements:
        if isinstance(st, Assign):
            names |= _reads(st.rhs)
    return names


def eval_onf(
    program: OnfProgram,
    buffers: Mapping[str, object],
    n: Optional[int] = None,
    *,
    init: bool = False,
) -> dict:
    """Execute ``program`` against copies of ``buffers`` and return them.

    Statements run in order; inside each, loop nests iterate in ascending
    order and every ``Sum`` accumulates left to right from 0.0. With
    ``init=True`` the base-case statements run first. Buffers that the
    program only writes are allocated as zeros when absent.
    """
    read = _read_buffers(program)
    state = {}
    for name, length in program.buffers:
        expected = length.evaluate({}, n)
        if name not in buffers:
            if name in read:
                raise OnfError(f"missing buffer {name!r}")
            state[name] = [0.0] * expected
            continue
        data = np.asarray(buffers[name], dtype=np.float64).reshape(-1)
        if data.size != expected:
            raise OnfError(
                f"buffer {name!r} has length {data.size}, program expects {expected}"
            )
        state[name] = data.tolist()
    for name, data in buffers.items():
        state.setdefault(name, np.asarray(data, dtype=np.float64).reshape(-1).tolist())
    ex = _Executor(state, n)
    for st in (program.init if init else ()) + program.statements:
        ex.run(st)
    return {name: np.array(buf, dtype=np.float64) for name, buf in state.items()}


# ---------------------------------------------------------------------------
# printing


def _fmt_const(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def render_expr(node: OnfExpr) -> str:
    """Render with right-to-left chaining: only left operands get parentheses."""
    if isinstance(node, FlatRef):
        return f"{node.buffer}[{node.offset}]"
    if isinstance(node, Const):
        return _fmt_const(node.value)
    if isinstance(node, Sum):
        return f"sum({node.var}, 0, {_upper_bound(node.extent)}, {render_expr(node.body)})"
    if isinstance(node, BinOp):
        left = render_expr(node.left)
        if isinstance(node.left, BinOp):
            left = f"({left})"
        return f"{left} {node.op} {render_expr(node.right)}"
    raise TypeError(f"unknown program node {node!r}")


def _render_statement(st, indent: int) -> list:
    pad = "  " * indent
    if isinstance(st, Checkpoint):
        return [pad + st.label]
    lines = []
    for depth, (var, extent) in enumerate(st.loops):
        lines.append(f"{pad}{'  ' * depth}for {var} in [0, {extent}):")
    body_pad = pad + "  " * len(st.loops)
    lhs = " := ".join(render_expr(t) for t in st.targets)
    lines.append(f"{body_pad}{lhs} := {render_expr(st.rhs)}")
    return lines


def emit_pseudocode(program: OnfProgram) -> str:
    """Deterministic loop pseudocode; the empty program renders as ``""``."""
    lines = []
    for st in program.init:
        lines.extend(_render_statement(st, 0))
    if program.repeat and program.statements:
        lines.append("while not converged:")
        for st in program.statements:
            lines.extend(_render_statement(st, 1))
    else:
        for st in program.statements:
            lines.extend(_render_statement(st, 0))
    if not lines:
        return ""
    return "\n".join(lines) + "\n"
