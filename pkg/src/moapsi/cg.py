"""Conjugate gradient solver executing the ONF recurrence on two-row buffers.

X, R and P each hold two rows of length ``n``: row 0 is the current iterate
and row 1 the next one. A step fills row 1 and copies it back over row 0, so
working memory stays at ``6n`` reals however many iterations run.

Every sum accumulates left to right from 0.0 in the order the reduced
program prescribes, which makes a step bitwise identical to executing
:func:`moapsi.reduce.reduce_cg` with :func:`moapsi.onf.eval_onf`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import DenseArray, seqsum
from .errors import (
    ConformanceError,
    NotPositiveDefiniteError,
    SymmetryError,
)

__all__ = [
    "CgState",
    "SolveOptions",
    "SolveReport",
    "cg_init",
    "cg_step",
    "cg_solve",
    "residual_norm",
    "as_square_matrix",
]


@dataclass
class CgState:
    a: np.ndarray  # n*n, row-major
    b: np.ndarray
    x_buf: np.ndarray  # 2n
    r_buf: np.ndarray
    p_buf: np.ndarray
    n: int
    iteration: int = 0
    residual_norm: float = 0.0
    # coefficients of the most recent step
    alpha: float = math.nan
    beta: float = math.nan

    def row(self, buf: np.ndarray, which: int = 0) -> np.ndarray:
        return buf[which * self.n : (which + 1) * self.n]

    @property
    def x(self) -> np.ndarray:
        return self.row(self.x_buf)

    @property
    def r(self) -> np.ndarray:
        return self.row(self.r_buf)

    @property
    def p(self) -> np.ndarray:
        return self.row(self.p_buf)

    def working_size(self) -> int:
        """Number of reals held by the X, R and P recurrence buffers."""
        return self.x_buf.size + self.r_buf.size + self.p_buf.size

    def buffers(self) -> dict:
        return {"A": self.a, "b": self.b, "X": self.x_buf, "R": self.r_buf, "P": self.p_buf}

    def copy(self) -> "CgState":
        return replace(
            self,
            x_buf=self.x_buf.copy(),
            r_buf=self.r_buf.copy(),
            p_buf=self.p_buf.copy(),
        )


@dataclass
class SolveOptions:
    tolerance: float = 1e-10
    max_iterations: Optional[int] = None  # None means 2n
    initial_guess: Optional[object] = None

    def __post_init__(self):
        if not self.tolerance >= 0:
            raise ValueError(f"tolerance must be non-negative, got {self.tolerance}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError(f"max_iterations must be at least 1, got {self.max_iterations}")


@dataclass
class SolveReport:
    solution: np.ndarray
    iterations: int
    residual_history: list = field(default_factory=list)
    converged: bool = False


def as_square_matrix(a) -> np.ndarray:
    """Accept a 2-d array, a rank-2 DenseArray or a flat buffer of length n*n."""
    if isinstance(a, DenseArray):
        a = a.to_numpy()
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        n = math.isqrt(arr.size)
        if n * n != arr.size:
            raise ConformanceError(f"flat matrix of length {arr.size} is not square")
        arr = arr.reshape(n, n)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ConformanceError(f"matrix of shape {arr.shape} is not square")
    if arr.shape[0] < 1:
        raise ConformanceError("matrix must have at least one row")
    return arr


def _check_symmetric(m: np.ndarray) -> None:
    scale = float(np.max(np.abs(m))) if m.size else 0.0
    gap = float(np.max(np.abs(m - m.T)))
    if gap > 1e-12 * scale:
        raise SymmetryError(f"matrix is not symmetric: max |a - a^T| = {gap:.3e}")


def _matvec_rows(a: np.ndarray, v: np.ndarray, n: int) -> np.ndarray:
    # out[k] = sum_j a[k*n + j] * v[j], j ascending for every k at once
    acc = np.zeros(n)
    for j in range(n):
        acc = acc + a[j::n] * v[j]
    return acc


def _dot_self(v: np.ndarray) -> float:
    return seqsum((v * v).tolist())


def _quadratic_form(a: np.ndarray, p: np.ndarray, n: int) -> float:
    # sum_i sum_j p[i] * (a[i*n + j] * p[j])
    inner = np.zeros(n)
    for j in range(n):
        inner = inner + p * (a[j::n] * p[j])
    return seqsum(inner.tolist())


def cg_init(a, b, options: Optional[SolveOptions] = None) -> CgState:
    """Set up the base case: ``P[k] = R[k] = b[k] - sum_j A[k*n + j] * X[j]``."""
    options = options or SolveOptions()
    m = as_square_matrix(a)
    n = m.shape[0]
    _check_symmetric(m)
    rhs = np.asarray(b.data if isinstance(b, DenseArray) else b, dtype=np.float64).reshape(-1)
    if rhs.size != n:
        raise ConformanceError(f"right-hand side has length {rhs.size}, matrix is {n}x{n}")
    flat = m.reshape(-1).copy()
    x_buf = np.zeros(2 * n)
    if options.initial_guess is not None:
        g = options.initial_guess
        guess = np.asarray(g.data if isinstance(g, DenseArray) else g, dtype=np.float64)
        guess = guess.reshape(-1)
        if guess.size != n:
            raise ConformanceError(f"initial guess has length {guess.size}, expected {n}")
        x_buf[:n] = guess
    r_buf = np.zeros(2 * n)
    p_buf = np.zeros(2 * n)
    r0 = rhs - _matvec_rows(flat, x_buf[:n], n)
    r_buf[:n] = r0
    p_buf[:n] = r0
    return CgState(flat, rhs.copy(), x_buf, r_buf, p_buf, n, 0, math.sqrt(_dot_self(r0)))


def cg_step(s: CgState) -> CgState:
    """One iteration on a copy of ``s``: fill row 1 of X, R, P, then rotate."""
    n = s.n
    out = s.copy()
    x0, r0, p0 = s.x, s.r, s.p
    rr = _dot_self(r0)
    if rr == 0.0:
        return out
    pap = _quadratic_form(s.a, p0, n)
    if not pap > 0.0:
        raise NotPositiveDefiniteError(
            f"p.Ap = {pap!r} at iteration {s.iteration}; the matrix is not positive definite"
        )
    x1 = x0 + p0 * (rr / pap)
    r1 = r0 - (rr / pap) * _matvec_rows(s.a, p0, n)
    rr1 = _dot_self(r1)
    p1 = r1 + p0 * (rr1 / rr)
    out.x_buf[n:] = x1
    out.r_buf[n:] = r1
    out.p_buf[n:] = p1
    out.x_buf[:n] = out.x_buf[n:]
    out.r_buf[:n] = out.r_buf[n:]
    out.p_buf[:n] = out.p_buf[n:]
    out.iteration = s.iteration + 1
    out.alpha = rr / pap
    out.beta = rr1 / rr
    out.residual_norm = math.sqrt(rr1)
    return out


def residual_norm(s: CgState) -> float:
    return s.residual_norm


def cg_solve(a, b, options: Optional[SolveOptions] = None) -> SolveReport:
    """Iterate until ``||r|| <= tol * ||b||`` (absolute when ``b`` is zero).

    Running out of iterations is reported through ``converged=False``.
    """
    options = options or SolveOptions()
    state = cg_init(a, b, options)
    limit = options.max_iterations or 2 * state.n
    b_norm = math.sqrt(_dot_self(state.b))
    threshold = options.tolerance * b_norm if b_norm > 0 else options.tolerance
    history = [state.residual_norm]
    converged = state.residual_norm <= threshold
    while not converged and state.iteration < limit:
        state = cg_step(state)
        history.append(state.residual_norm)
        converged = state.residual_norm <= threshold
    return SolveReport(state.x.copy(), state.iteration, history, converged)
