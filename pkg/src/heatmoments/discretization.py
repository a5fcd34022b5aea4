"""Candidate meshes and the l1 recovery LP over their Vandermonde constraints."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .lp_simplex import LPProblem, LPSolution, solve
from .measures import AtomicMeasure, MomentVector, multi_index_set
from .moment_dynamics import build_A, invert_moments
from .quadrature import ObservedMoments

__all__ = [
    "Mesh",
    "ConstraintSystem",
    "RecoveryResult",
    "UnisolvenceError",
    "uniform_mesh",
    "padua_points",
    "explicit_mesh",
    "vandermonde",
    "is_unisolvent",
    "assemble_lp",
    "recover",
    "recover_initial",
    "auto_select_k",
    "satisfies_apriori_bound",
    "ATOM_THRESHOLD",
]

ATOM_THRESHOLD = 1e-12
RANK_RTOL = 1e-10


class UnisolvenceError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Finite candidate support inside the box ``[-R, R]^d``."""

    dim: int
    points: np.ndarray
    kind: str
    R: float

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"mesh points must have shape (N, {self.dim})")
        if pts.shape[0] < 1:
            raise ValueError("mesh needs at least one point")
        if self.kind not in ("uniform_grid", "padua", "explicit"):
            raise ValueError(f"unknown mesh kind {self.kind!r}")
        if np.any(np.abs(pts) > self.R * (1 + 1e-12)):
            raise ValueError(f"mesh points leave the box [-{self.R}, {self.R}]^{self.dim}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


def uniform_mesh(R: float, n_per_axis: int, d: int = 1) -> Mesh:
    """Tensor grid with ``n_per_axis`` equispaced points per axis, endpoints included."""
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    if n_per_axis < 1:
        raise ValueError(f"n_per_axis must be >= 1, got {n_per_axis}")
    axis = np.linspace(-R, R, n_per_axis) if n_per_axis > 1 else np.zeros(1)
    pts = np.array(list(itertools.product(axis, repeat=d)), dtype=float).reshape(-1, d)
    return Mesh(d, pts, "uniform_grid", float(R))


def padua_points(k: int, R: float = 1.0) -> Mesh:
    """Padua-type points of even degree k in ``[-R, R]^2``; there are C(k+2, 2) of them."""
    if k < 2 or k % 2:
        raise ValueError(f"Padua points need an even degree k >= 2, got {k}")
    pts = []
    for i in range(k + 1):
        x = math.cos(i * math.pi / k)
        for j in range(k // 2 + 1):
            if i % 2:
                y = math.cos(2 * j * math.pi / (k + 1))
            else:
                y = math.cos((2 * j + 1) * math.pi / (k + 1))
            pts.append((x, y))
    return Mesh(2, R * np.array(pts), "padua", float(R))


def explicit_mesh(points, R: float | None = None) -> Mesh:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if R is None:
        R = max(float(np.max(np.abs(pts))), 1e-300)
    return Mesh(pts.shape[1], pts, "explicit", float(R))


def vandermonde(points, k: int, scale: float = 1.0) -> np.ndarray:
    """``B[alpha, i] = (x_i / scale)^alpha``, rows in canonical multi-index order."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    d = pts.shape[1]
    z = pts / scale
    powers = np.ones((d, k + 1, z.shape[0]))
    for p in range(1, k + 1):
        powers[:, p, :] = powers[:, p - 1, :] * z.T
    alphas = multi_index_set(d, k)
    B = np.ones((len(alphas), z.shape[0]))
    for r, alpha in enumerate(alphas):
        for j, aj in enumerate(alpha):
            if aj:
                B[r] *= powers[j, aj]
    return B


def _full_row_rank(B: np.ndarray) -> bool:
    m = B.shape[0]
    if B.shape[1] < m:
        return False
    colmax = np.max(np.abs(B), axis=0)
    colmax[colmax == 0] = 1.0
    s = np.linalg.svd(B / colmax, compute_uv=False)
    return bool(s[0] > 0 and s[m - 1] > RANK_RTOL * s[0])


def is_unisolvent(mesh, k: int) -> bool:
    """True iff the degree-k Vandermonde matrix of the mesh has full row rank."""
    if isinstance(mesh, Mesh):
        pts, R = mesh.points, mesh.R
    else:
        pts = np.asarray(mesh, dtype=float)
        pts = pts.reshape(-1, 1) if pts.ndim == 1 else pts
        R = max(float(np.max(np.abs(pts))), 1.0) if pts.size else 1.0
    return _full_row_rank(vandermonde(pts, k, scale=R))


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """``B m = rhs`` with ``B`` in mesh coordinates scaled by ``R``.

    Row ``alpha`` of the unscaled system is row ``alpha`` here times
    ``R^|alpha|``; the amplitudes ``m`` are the same in both.
    """

    B: np.ndarray
    rhs: MomentVector
    order: int
    mesh: Mesh

    @property
    def row_scale(self) -> np.ndarray:
        return np.array([self.mesh.R ** sum(a) for a in multi_index_set(self.mesh.dim, self.order)])

    @classmethod
    def build(cls, mesh: Mesh, rhs: MomentVector) -> "ConstraintSystem":
        if rhs.dim != mesh.dim:
            raise ValueError(f"moments are {rhs.dim}-D but the mesh is {mesh.dim}-D")
        return cls(vandermonde(mesh.points, rhs.order, scale=mesh.R), rhs.to_float(), rhs.order, mesh)

    def scaled_rhs(self) -> np.ndarray:
        return self.rhs.values / self.row_scale

    def residual(self, m: np.ndarray) -> float:
        """``max_alpha |sum_i x_i^alpha m_i - rhs_alpha|`` in unscaled units."""
        Bu = vandermonde(self.mesh.points, self.order)
        return float(np.max(np.abs(Bu @ m - self.rhs.values)))


def assemble_lp(B: np.ndarray, rhs, order: int | None = None, check: bool = True) -> LPProblem:
    """``min 1^T (m+ + m-)`` subject to ``B (m+ - m-) = rhs``, ``m+, m- >= 0``.

    ``order`` only labels the error raised for a rank-deficient ``B``.
    """
    B = np.atleast_2d(np.asarray(B, dtype=float))
    rhs = np.asarray(rhs, dtype=float).reshape(-1)
    if check and not _full_row_rank(B):
        raise UnisolvenceError(f"mesh not unisolvent at degree {'k' if order is None else order}")
    n = B.shape[1]
    return LPProblem(np.ones(2 * n), np.hstack([B, -B]), rhs)


@dataclass(frozen=True)
class RecoveryResult:
    measure: AtomicMeasure
    tv: float
    residual: float
    order: int
    rhs_inf: float
    status: str = "optimal"
    iterations: int = 0

    @property
    def atom_count(self) -> int:
        return len(self.measure)

    @property
    def relative_residual(self) -> float:
        return self.residual / max(1.0, self.rhs_inf)


def recover_initial(
    z: MomentVector,
    mesh: Mesh,
    pivot_tol: float = 1e-9,
    max_iters: int | None = None,
) -> RecoveryResult:
    """Minimal-TV atomic measure on ``mesh`` whose moments equal ``z``."""
    system = ConstraintSystem.build(mesh, z)
    lp = assemble_lp(system.B, system.scaled_rhs(), order=z.order)
    sol: LPSolution = solve(lp, pivot_tol=pivot_tol, max_iters=max_iters)
    # full row rank makes the LP feasible, and the l1 cost is bounded below
    if sol.status != "optimal":
        raise RuntimeError(f"recovery LP ended with status {sol.status}")
    n = len(mesh)
    # the unclamped basic values satisfy the equalities to roundoff; a tiny
    # negative m+ entry is just part of the signed amplitude
    m = sol.x_raw[:n] - sol.x_raw[n:]
    keep = np.abs(m) > ATOM_THRESHOLD
    mu = AtomicMeasure(mesh.points[keep], m[keep], dim=mesh.dim)
    return RecoveryResult(
        measure=mu,
        tv=float(np.sum(np.abs(m[keep]))),
        residual=system.residual(np.where(keep, m, 0.0)),
        order=z.order,
        rhs_inf=float(np.max(np.abs(system.rhs.values))),
        status=sol.status,
        iterations=sol.iterations,
    )


def recover(
    observed: ObservedMoments | MomentVector,
    mesh: Mesh,
    T: float | None = None,
    pivot_tol: float = 1e-9,
    max_iters: int | None = None,
) -> RecoveryResult:
    """Invert observed terminal moments to time zero and solve the recovery LP."""
    if isinstance(observed, ObservedMoments):
        y, T = observed.y, observed.T if T is None else T
    else:
        y = observed
        if T is None:
            raise ValueError("T is required when passing a bare moment vector")
    z = invert_moments(y, T, build_A(y.dim, y.order))
    return recover_initial(z, mesh, pivot_tol=pivot_tol, max_iters=max_iters)


def auto_select_k(tvs, rho: float = 5.0) -> int:
    """Largest k before the first jump ``TV[k+1] > rho * TV[k]``.

    ``tvs[k]`` is the recovered total variation at order k; a failed run
    (NaN or inf) counts as a jump.
    """
    tvs = [float(t) for t in tvs]
    if not tvs:
        raise ValueError("need at least one TV value")
    if rho <= 1:
        raise ValueError(f"jump ratio must exceed 1, got {rho}")
    for k in range(len(tvs) - 1):
        nxt = tvs[k + 1]
        if not np.isfinite(nxt) or nxt > rho * tvs[k]:
            return k
    return len(tvs) - 1


def satisfies_apriori_bound(result: RecoveryResult, d: int, R: float) -> bool:
    """``TV <= exp(2 d k / R) * ||rhs||_inf`` for the recovered measure."""
    bound = math.exp(2.0 * d * result.order / R) * result.rhs_inf
    return result.tv <= bound * (1 + 1e-12)
