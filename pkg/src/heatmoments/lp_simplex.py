"""Two-phase revised simplex method for standard-form linear programs.

Solves ``min c^T x  s.t.  A x = b, x >= 0`` and returns a basic (vertex)
optimal solution, so an optimum never has more than ``m`` nonzeros.

The basis inverse is kept explicitly and updated by elementary row
operations after each pivot; it is recomputed from the basis columns every
``refactor_every`` pivots to stop drift.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "LPProblem",
    "LPSolution",
    "IterationLimitError",
    "solve",
    "write_iteration_log",
]

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


class IterationLimitError(RuntimeError):
    """The simplex method hit ``max_iters`` before reaching a verdict."""


@dataclass(frozen=True)
class LPProblem:
    cost: np.ndarray
    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.cost, dtype=float).reshape(-1)
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).reshape(-1)
        m, n = A.shape
        if m < 1:
            raise ValueError("need at least one equality constraint")
        if c.shape[0] != n or b.shape[0] != m:
            raise ValueError(f"shape mismatch: A is {m}x{n}, c has {c.shape[0]}, b has {b.shape[0]}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b)) and np.all(np.isfinite(c))):
            raise ValueError("LP data must be finite")
        object.__setattr__(self, "cost", c)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True)
class LPSolution:
    status: str
    x: np.ndarray
    objective: float
    basis: list[int]
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    history: list[tuple[int, float, int, int]] = field(default_factory=list, repr=False)
    # basic solution before roundoff-level negatives are clamped to zero
    x_raw: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


class _Revised:
    """Working state of one solve: the augmented matrix plus the basis with its inverse."""

    def __init__(self, A, b, pivot_tol, max_iters, refactor_every, record):
        m, n = A.shape
        self.m, self.n = m, n
        self.W = np.hstack([A, np.eye(m)])
        self.b = b
        self.pivot_tol = pivot_tol
        self.max_iters = max_iters
        self.refactor_every = refactor_every
        self.basis = np.arange(n, n + m)
        self.Binv = np.eye(m)
        self.is_basic = np.zeros(n + m, dtype=bool)
        self.is_basic[n:] = True
        self.iters = 0
        self.since_refactor = 0
        self.record = record
        self.history: list[tuple[int, float, int, int]] = []

    def refactor(self):
        self.Binv = np.linalg.inv(self.W[:, self.basis])
        self.since_refactor = 0

    def basic_values(self) -> np.ndarray:
        return self.Binv @ self.b

    def pivot(self, r: int, q: int, u: np.ndarray):
        leaving = int(self.basis[r])
        row = self.Binv[r] / u[r]
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row
        self.is_basic[leaving] = False
        self.is_basic[q] = True
        self.basis[r] = q
        self.since_refactor += 1
        if self.since_refactor >= self.refactor_every:
            self.refactor()
        return leaving

    def run(self, costs: np.ndarray, allowed: np.ndarray) -> str:
        """Iterate to optimality for ``costs``; returns OPTIMAL or UNBOUNDED."""
        m, n = self.m, self.n
        stall_limit = 3 * (n + m)
        best = np.inf
        stall = 0
        bland = False
        while True:
            if self.iters >= self.max_iters:
                raise IterationLimitError(f"simplex exceeded {self.max_iters} iterations")
            xb = self.basic_values()
            cb = costs[self.basis]
            obj = float(cb @ xb)
            if obj < best - 1e-12 * (1.0 + abs(best) if np.isfinite(best) else 1.0):
                best, stall = obj, 0
            else:
                stall += 1
                if stall > stall_limit and not bland:
                    log.debug("no progress in %d iterations, switching to Bland's rule", stall)
                    bland = True
            y = cb @ self.Binv
            d = costs - y @ self.W
            d[self.is_basic | ~allowed] = 0.0
            cand = np.flatnonzero(d < -self.pivot_tol)
            if cand.size == 0:
                return OPTIMAL
            q = int(cand[0]) if bland else int(cand[np.argmin(d[cand])])
            u = self.Binv @ self.W[:, q]
            rows = np.flatnonzero(u > self.pivot_tol)
            if rows.size == 0:
                return UNBOUNDED
            ratios = np.maximum(xb[rows], 0.0) / u[rows]
            theta = ratios.min()
            tied = rows[ratios <= theta + 1e-12 * max(1.0, theta)]
            # lowest basic variable index among ties
            r = int(tied[np.argmin(self.basis[tied])])
            leaving = self.pivot(r, q, u)
            self.iters += 1
            if self.record:
                self.history.append((self.iters, obj, q, leaving))


def _refined_solve(B: np.ndarray, b: np.ndarray, rounds: int = 3) -> np.ndarray:
    """``B^-1 b`` with iterative refinement on an extended-precision residual.

    Ill-conditioned bases (Vandermonde columns at clustered nodes) otherwise
    leave basic variables that should vanish at the 1e-12 level.
    """
    x = np.linalg.solve(B, b)
    Bl, bl = B.astype(np.longdouble), b.astype(np.longdouble)
    for _ in range(rounds):
        r = bl - Bl @ x.astype(np.longdouble)
        dx = np.linalg.solve(B, r.astype(float))
        if not np.all(np.isfinite(dx)):
            break
        x = (x.astype(np.longdouble) + dx).astype(float)
    return x


def solve(
    problem: LPProblem,
    pivot_tol: float = 1e-9,
    max_iters: int | None = None,
    refactor_every: int = 50,
    record: bool = False,
) -> LPSolution:
    """Two-phase simplex. Status is ``optimal``, ``infeasible`` or ``unbounded``.

    Raises :class:`IterationLimitError` when ``max_iters`` (default
    ``10 (n + m)``) pivots are exhausted.
    """
    m, n = problem.shape
    if max_iters is None:
        max_iters = 10 * (n + m)
    A = problem.A.copy()
    b = problem.b.copy()
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0
    feas_tol = 1e-8 * (1.0 + float(np.max(np.abs(b))))

    st = _Revised(A, b, pivot_tol, max_iters, refactor_every, record)

    # phase 1: drive the artificial variables to zero
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    st.run(c1, np.ones(n + m, dtype=bool))
    st.refactor()
    xb = st.basic_values()
    infeas = float(np.sum(xb[st.basis >= n]))
    if infeas > feas_tol:
        x = np.zeros(n)
        orig = st.basis < n
        x[st.basis[orig]] = np.maximum(xb[orig], 0.0)
        return LPSolution(INFEASIBLE, x, float("nan"), [int(j) for j in st.basis], iterations=st.iters,
                          history=st.history)

    # pivot remaining (zero-level) artificials out where a structural column can replace them
    for r in range(m):
        if st.basis[r] < n:
            continue
        row = st.Binv[r] @ A
        row[st.is_basic[:n]] = 0.0
        j = int(np.argmax(np.abs(row)))
        if abs(row[j]) > st.pivot_tol:
            u = st.Binv @ st.W[:, j]
            st.pivot(r, j, u)
        # otherwise the row is redundant and its artificial stays basic at zero

    # phase 2 on the true costs; artificials may not re-enter
    c2 = np.concatenate([problem.cost, np.zeros(m)])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status = st.run(c2, allowed)

    B = st.W[:, st.basis]
    xb = _refined_solve(B, b)
    st.refactor()
    x_raw = np.zeros(n)
    orig = st.basis < n
    x_raw[st.basis[orig]] = xb[orig]
    x = np.maximum(x_raw, 0.0)
    basis = [int(j) for j in st.basis]
    if status == UNBOUNDED:
        return LPSolution(UNBOUNDED, x, float("-inf"), basis, iterations=st.iters, history=st.history,
                          x_raw=x_raw)

    y = np.linalg.solve(B.T, c2[st.basis])
    y[flip] *= -1.0
    reduced = problem.cost - problem.A.T @ y
    return LPSolution(
        OPTIMAL,
        x,
        float(problem.cost @ x),
        basis,
        duals=y,
        reduced_costs=reduced,
        iterations=st.iters,
        history=st.history,
        x_raw=x_raw,
    )


def write_iteration_log(solution: LPSolution, path) -> None:
    """CSV ``iter,objective,entering,leaving`` (needs ``record=True``)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", "objective", "entering", "leaving"])
        for it, obj, q, r in solution.history:
            w.writerow([it, "%.17g" % obj, q, r])
