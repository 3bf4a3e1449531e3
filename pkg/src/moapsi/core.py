"""Concrete Mathematics-of-Arrays values and the total functions over them.

Every value is a :class:`DenseArray`: a shape plus a flat row-major buffer
holding its ravel. Scalars have the empty shape and a one-element buffer.

>>> A = array([[4, 1], [1, 3]])
>>> shape(A)
(2, 2)
>>> psi([1, 0], A).item()
1.0
>>> inner_product(A, vector([-8, -3])).tolist()
[-35.0, -17.0]
"""

from __future__ import annotations

import math
import operator
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import (
    ConformanceError,
    MoADivisionError,
    MoAIndexError,
    RankError,
)

__all__ = [
    "DenseArray",
    "array",
    "scalar",
    "vector",
    "shape",
    "rank",
    "tau",
    "gamma",
    "psi",
    "take",
    "drop",
    "concat",
    "ravel",
    "iota",
    "transpose",
    "pointwise",
    "reduce_add",
    "inner_product",
    "seqsum",
]

Shape = tuple  # tuple[int, ...]


class DenseArray:
    """Immutable array value: a shape and its row-major ravel."""

    __slots__ = ("_shape", "_data")

    def __init__(self, shape: Iterable[int], data) -> None:
        shp = tuple(int(s) for s in shape)
        if any(s < 0 for s in shp):
            raise ConformanceError(f"negative extent in shape {shp}")
        buf = np.array(data, dtype=np.float64).reshape(-1)
        if buf.size != math.prod(shp):
            raise ConformanceError(
                f"buffer of length {buf.size} does not fill shape {shp}"
            )
        buf.setflags(write=False)
        self._shape = shp
        self._data = buf

    @property
    def shape(self) -> Shape:
        return self._shape

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def rank(self) -> int:
        return len(self._shape)

    def item(self) -> float:
        if self._data.size != 1:
            raise RankError(f"array of shape {self._shape} is not a single element")
        return float(self._data[0])

    def to_numpy(self) -> np.ndarray:
        return self._data.reshape(self._shape).copy()

    def tolist(self):
        if not self._shape:
            return float(self._data[0])
        return self._data.reshape(self._shape).tolist()

    def __eq__(self, other):
        if not isinstance(other, DenseArray):
            return NotImplemented
        return self._shape == other._shape and bool(
            np.array_equal(self._data, other._data)
        )

    __hash__ = None

    def __repr__(self):
        return f"DenseArray(shape={self._shape}, data={self._data.tolist()})"


def array(values) -> DenseArray:
    """Build a DenseArray from a nested sequence, numpy array or number."""
    if isinstance(values, DenseArray):
        return values
    arr = np.asarray(values, dtype=np.float64)
    return DenseArray(arr.shape, arr.reshape(-1))


def scalar(value: float) -> DenseArray:
    return DenseArray((), [value])


def vector(values: Iterable[float]) -> DenseArray:
    vals = list(values)
    return DenseArray((len(vals),), vals)


def _as_ints(idx) -> tuple:
    if isinstance(idx, DenseArray):
        if idx.rank != 1:
            raise RankError(f"index vector must have rank 1, got rank {idx.rank}")
        vals = idx.data.tolist()
        if any(v != int(v) for v in vals):
            raise ConformanceError(f"index vector has non-integer components {vals}")
        return tuple(int(v) for v in vals)
    return tuple(int(v) for v in idx)


def _require_vector(v: DenseArray, what: str) -> None:
    if v.rank != 1:
        raise RankError(f"{what} requires a rank-1 argument, got rank {v.rank}")


def seqsum(values: Iterable[float]) -> float:
    """Left-to-right sum starting from 0.0; the only summation order used here."""
    acc = 0.0
    for v in values:
        acc = acc + v
    return acc


def shape(a: DenseArray) -> Shape:
    return a.shape


def rank(a: DenseArray) -> int:
    return a.rank


def tau(a: DenseArray) -> int:
    """Total element count; 1 for a scalar."""
    return math.prod(a.shape)


def gamma(idx: Union[Sequence[int], DenseArray], s: Sequence[int]) -> int:
    """Row-major offset of a full index within shape ``s`` (Horner's rule).

    >>> gamma([2, 3, 1], [4, 5, 2])
    27
    """
    ix = _as_ints(idx)
    s = tuple(int(e) for e in s)
    if len(ix) != len(s):
        raise RankError(f"gamma needs a full index: {len(ix)} components for rank {len(s)}")
    off = 0
    for axis, (i, extent) in enumerate(zip(ix, s)):
        if not 0 <= i < extent:
            raise MoAIndexError(
                f"index {i} out of bounds for axis {axis} with extent {extent}", axis
            )
        off = off * extent + i
    return off


def psi(idx: Union[Sequence[int], DenseArray], a: DenseArray) -> DenseArray:
    """Select the sub-array of ``a`` addressed by a (possibly partial) index.

    The selection is the contiguous slab of the ravel starting at the offset of
    the index padded with zeros; an empty index returns ``a`` itself.
    """
    ix = _as_ints(idx)
    if len(ix) > a.rank:
        raise RankError(f"index of length {len(ix)} is longer than rank {a.rank}")
    if not ix:
        return a
    rest = a.shape[len(ix):]
    start = gamma(ix + (0,) * len(rest), a.shape) if all(rest) else None
    if start is None:
        # an empty trailing extent still needs its prefix bounds checked
        gamma(ix, a.shape[: len(ix)])
        return DenseArray(rest, [])
    return DenseArray(rest, a.data[start : start + math.prod(rest)])


def take(n: int, v: DenseArray) -> DenseArray:
    _require_vector(v, "take")
    length = v.shape[0]
    if abs(n) > length:
        raise ConformanceError(f"cannot take {n} from a vector of length {length}")
    part = v.data[:n] if n >= 0 else v.data[length + n :]
    return DenseArray((len(part),), part)


def drop(n: int, v: DenseArray) -> DenseArray:
    _require_vector(v, "drop")
    length = v.shape[0]
    if abs(n) > length:
        raise ConformanceError(f"cannot drop {n} from a vector of length {length}")
    part = v.data[n:] if n >= 0 else v.data[: length + n]
    return DenseArray((len(part),), part)


def concat(u: DenseArray, v: DenseArray) -> DenseArray:
    _require_vector(u, "concat")
    _require_vector(v, "concat")
    return DenseArray((u.shape[0] + v.shape[0],), np.concatenate([u.data, v.data]))


def ravel(a: DenseArray) -> DenseArray:
    return DenseArray((a.data.size,), a.data)


def iota(q: int) -> DenseArray:
    if q < 0:
        raise ConformanceError(f"iota needs a non-negative count, got {q}")
    return DenseArray((q,), np.arange(q, dtype=np.float64))


def transpose(a: DenseArray) -> DenseArray:
    """Reverse the axes of a rank-2 array; ranks 0 and 1 are left unchanged."""
    if a.rank <= 1:
        return a
    if a.rank > 2:
        raise RankError(f"transpose is only supported up to rank 2, got rank {a.rank}")
    m, n = a.shape
    return DenseArray((n, m), a.data.reshape(m, n).T.reshape(-1))


_OPS = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
}
_OP_ALIASES = {"−": "-", "×": "*", "÷": "/"}


def normalize_op(op: str) -> str:
    op = _OP_ALIASES.get(op, op)
    if op not in _OPS:
        raise ValueError(f"unknown pointwise operator {op!r}")
    return op


def pointwise(op: str, l: DenseArray, r: DenseArray) -> DenseArray:
    """Apply ``op`` elementwise, extending a scalar operand over the other."""
    op = normalize_op(op)
    if l.shape == r.shape:
        out_shape = l.shape
    elif l.rank == 0:
        out_shape = r.shape
    elif r.rank == 0:
        out_shape = l.shape
    else:
        raise ConformanceError(f"shapes {l.shape} and {r.shape} do not conform for {op}")
    if op == "/" and np.any(r.data == 0.0):
        raise MoADivisionError("division by zero in pointwise /")
    return DenseArray(out_shape, _OPS[op](l.data, r.data))


def reduce_add(v: DenseArray) -> DenseArray:
    _require_vector(v, "reduce_add")
    return scalar(seqsum(v.data.tolist()))


def inner_product(l: DenseArray, r: DenseArray) -> DenseArray:
    """Generalised +.x inner product over the last axis of ``l`` and first of ``r``.

    Each result element accumulates its products in ascending order of the
    contracted index, starting from 0.0.
    """
    if l.rank < 1 or r.rank < 1:
        raise RankError(
            f"inner product needs operands of rank >= 1, got ranks {l.rank} and {r.rank}"
        )
    q = l.shape[-1]
    if r.shape[0] != q:
        raise ConformanceError(
            f"inner product extents differ: left last extent {q}, "
            f"right first extent {r.shape[0]}"
        )
    out_shape = l.shape[:-1] + r.shape[1:]
    m, p = math.prod(l.shape[:-1]), math.prod(r.shape[1:])
    left = l.data.reshape(m, q)
    right = r.data.reshape(q, p)
    acc = np.zeros((m, p))
    for k in range(q):
        acc = acc + np.outer(left[:, k], right[k, :])
    return DenseArray(out_shape, acc.reshape(-1))
