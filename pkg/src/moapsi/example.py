"""The worked 2x2 example and its reference values.

The demo command and the acceptance tests both check against the constants
defined here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cg import SolveOptions, cg_init, cg_step

A = ((4.0, 1.0), (1.0, 3.0))
B = (1.0, 2.0)
GUESS = (2.0, 1.0)

R0 = (-8.0, -3.0)
ALPHA = 73.0 / 331.0
X1 = (0.2356, 0.3384)
R1 = (-0.2810, 0.7492)
P1 = (-0.3512, 0.7229)
# reference values are given to four decimals
REFERENCE_TOL = 5e-4
# the exact solution 1/11 * <1 7>
SOLUTION = (1.0 / 11.0, 7.0 / 11.0)


@dataclass
class Check:
    label: str
    text: str
    passed: bool
    expected: str = ""

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        if self.expected and self.expected not in self.text:
            return f"{self.text} {verdict} (expected {self.expected})"
        return f"{self.text} {verdict}"


def _fmt_vec(v) -> str:
    vals = [float(x) for x in v]
    if all(x.is_integer() for x in vals):
        return "<" + " ".join(str(int(x)) for x in vals) + ">"
    return "<" + " ".join(f"{x:.4f}" for x in vals) + ">"


def _close(got, want, tol) -> bool:
    return bool(np.all(np.abs(np.asarray(got, dtype=float) - np.asarray(want)) <= tol))


def run_first_step():
    """Return ``(initial state, alpha, state after one step)`` for the example."""
    s0 = cg_init(np.array(A), np.array(B), SolveOptions(initial_guess=np.array(GUESS)))
    s1 = cg_step(s0)
    return s0, s1.alpha, s1


def check_example(tol: float = REFERENCE_TOL) -> list:
    s0, alpha, s1 = run_first_step()
    return [
        Check(
            "r0",
            f"r0 = p0 = {_fmt_vec(s0.r)}",
            _close(s0.r, R0, tol) and _close(s0.p, R0, tol),
        ),
        Check("alpha", f"alpha = {alpha:.6f} (73/331)", abs(alpha - ALPHA) <= tol),
        Check("x1", f"x1 = {_fmt_vec(s1.x)}", _close(s1.x, X1, tol), _fmt_vec(X1)),
        Check("r1", f"r1 = {_fmt_vec(s1.r)}", _close(s1.r, R1, tol), _fmt_vec(R1)),
        Check("p1", f"p1 = {_fmt_vec(s1.p)}", _close(s1.p, P1, tol), _fmt_vec(P1)),
    ]
