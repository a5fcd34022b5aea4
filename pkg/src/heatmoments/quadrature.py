"""Sensor layouts and moment observation by uniform or Gauss-Hermite quadrature."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .measures import MomentVector, multi_index_set

__all__ = [
    "QuadratureRule",
    "ObservedMoments",
    "ObservationError",
    "hermite_rule",
    "uniform_sensors",
    "gh_sensors",
    "observe_moments",
    "write_rule_csv",
    "DEFAULT_SENSOR_BUDGET",
]

DEFAULT_SENSOR_BUDGET = 10**6
MAX_HERMITE_DEGREE = 200


class ObservationError(ValueError):
    """Raised when a quadrature sum cannot be formed in double precision."""


def _hermite_initial_guesses(n: int) -> np.ndarray:
    """Tricomi approximations of the positive Hermite zeros, ascending."""
    m = n // 2
    if m == 0:
        return np.empty(0)
    a = 0.5 if n % 2 else -0.5
    nu = 4 * m + 2 * a + 2
    idx = np.arange(1, m + 1)
    # solve theta - sin(theta) = rhs; largest rhs gives the smallest zero
    rhs = (4 * m - 4 * idx + 3) / nu * np.pi
    theta = np.full(m, np.pi / 2)
    for _ in range(10):
        theta -= (theta - np.sin(theta) - rhs) / (1 - np.cos(theta))
    t = np.cos(theta / 2) ** 2
    return np.sqrt(np.abs(nu * t - (5.0 / (4 * (1 - t) ** 2) - 1.0 / (1 - t) - 1 + 3 * a * a) / 3 / nu))


def _hermite_eval(x: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal Hermite polynomials p_n(x), p_{n-1}(x) for weight exp(-x^2)."""
    p_prev = np.zeros_like(x)
    p = np.full_like(x, np.pi ** -0.25)
    for j in range(1, n + 1):
        p_prev, p = p, x * math.sqrt(2.0 / j) * p - math.sqrt((j - 1) / j) * p_prev
    return p, p_prev


def _newton_hermite(x: np.ndarray, n: int, tol: float = 1e-15, max_iter: int = 100) -> np.ndarray:
    for _ in range(max_iter):
        p, p_prev = _hermite_eval(x, n)
        dx = p / (math.sqrt(2.0 * n) * p_prev)
        x = x - dx
        if np.all(np.abs(dx) <= tol * np.maximum(1.0, np.abs(x))):
            break
    else:
        raise RuntimeError(f"Newton iteration for Hermite zeros (n={n}) did not converge")
    return x


def _hermite_rule_log(n: int) -> tuple[np.ndarray, np.ndarray]:
    if not (isinstance(n, (int, np.integer)) and 1 <= n <= MAX_HERMITE_DEGREE):
        raise ValueError(f"Hermite degree must be an integer in [1, {MAX_HERMITE_DEGREE}], got {n}")
    n = int(n)
    pos = _newton_hermite(_hermite_initial_guesses(n), n)
    if pos.size and (np.any(np.diff(pos) <= 0) or pos[0] <= 0):
        raise RuntimeError(f"Hermite zeros for n={n} did not separate")
    if n % 2:
        pos = np.concatenate([[0.0], pos])
    _, p_prev = _hermite_eval(pos, n)
    logw = math.log(2.0) - 2.0 * np.log(np.abs(math.sqrt(2.0 * n) * p_prev))
    if n % 2:
        nodes = np.concatenate([-pos[:0:-1], pos])
        logw = np.concatenate([logw[:0:-1], logw])
    else:
        nodes = np.concatenate([-pos[::-1], pos])
        logw = np.concatenate([logw[::-1], logw])
    return nodes, logw


def hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite nodes (ascending) and weights for the weight ``exp(-z^2)``.

    Zeros come from Newton's method on the normalised three-term recurrence,
    started from Tricomi's asymptotic approximations; weights are
    ``2 / (sqrt(2n) p_{n-1}(z))^2`` with orthonormal ``p``.
    """
    nodes, logw = _hermite_rule_log(n)
    return nodes, np.exp(logw)


@dataclass(frozen=True)
class QuadratureRule:
    """Sensor positions with quadrature weights.

    For Gauss-Hermite rules ``weights`` are the tensor products of the base
    weights (no Jacobian); ``log_weights`` carries the same numbers in log
    form for overflow-safe evaluation.
    """

    kind: str
    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)
    log_weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "gauss_hermite"):
            raise ValueError(f"unknown quadrature kind {self.kind!r}")
        if self.nodes.shape[0] != self.weights.shape[0]:
            raise ValueError("nodes and weights differ in length")

    def __len__(self) -> int:
        return self.nodes.shape[0]

    def summary(self) -> str:
        items = ",".join(f"{k}={v}" for k, v in sorted(self.meta.items()))
        return f"{self.kind}(d={self.dim},{items})"


def _tensor(points_1d: np.ndarray, d: int) -> np.ndarray:
    return np.array(list(itertools.product(points_1d, repeat=d)), dtype=float).reshape(-1, d)


def _check_budget(n: int, d: int, budget: int) -> None:
    if n**d > budget:
        raise ValueError(f"{n}^{d} = {n ** d} sensors exceeds the sensor budget {budget}")


def uniform_sensors(
    L: float,
    n: int,
    d: int = 1,
    budget: int = DEFAULT_SENSOR_BUDGET,
    placement: str = "endpoints",
) -> QuadratureRule:
    """Tensor grid of ``n^d`` sensors over ``[-L, L]^d`` with weights ``(2L/n)^d``.

    ``placement="endpoints"`` puts n equispaced sensors including both
    endpoints; ``"midpoints"`` uses the centres of n equal cells.
    """
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if n < 2:
        raise ValueError(f"need n >= 2 sensors per axis, got {n}")
    _check_budget(n, d, budget)
    if placement == "endpoints":
        axis = np.linspace(-L, L, n)
    elif placement == "midpoints":
        axis = -L + (np.arange(n) + 0.5) * (2.0 * L / n)
    else:
        raise ValueError(f"unknown placement {placement!r}")
    nodes = _tensor(axis, d)
    w = np.full(nodes.shape[0], (2.0 * L / n) ** d)
    return QuadratureRule("uniform", d, nodes, w, {"L": L, "n": n, "placement": placement})


def gh_sensors(n: int, T: float, d: int = 1, budget: int = DEFAULT_SENSOR_BUDGET) -> QuadratureRule:
    """Tensor Gauss-Hermite sensors ``2 sqrt(T) (z_i1, ..., z_id)``."""
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    _check_budget(n, d, budget)
    z, logw = _hermite_rule_log(n)
    sigma = 2.0 * math.sqrt(T)
    base = _tensor(z, d)
    logw_t = _tensor(logw, d).sum(axis=1)
    return QuadratureRule(
        "gauss_hermite", d, sigma * base, np.exp(logw_t), {"n": n, "T": T}, log_weights=logw_t
    )


@dataclass(frozen=True)
class ObservedMoments:
    y: MomentVector
    rule: str
    T: float


def _moment_sums(points: np.ndarray, terms: np.ndarray, k: int) -> np.ndarray:
    """``fsum_i points_i^alpha * terms_i`` for every alpha in canonical order."""
    d = points.shape[1]
    powers = np.ones((d, k + 1, points.shape[0]))
    for p in range(1, k + 1):
        powers[:, p, :] = powers[:, p - 1, :] * points.T
    alphas = multi_index_set(d, k)
    out = np.empty(len(alphas))
    for r, alpha in enumerate(alphas):
        mono = terms.copy()
        for j, aj in enumerate(alpha):
            if aj:
                mono = mono * powers[j, aj]
        out[r] = math.fsum(mono)
    return out


def observe_moments(rule: QuadratureRule, samples, k: int, T: float) -> ObservedMoments:
    """Approximate the moments of ``u(., T)`` up to degree k from sensor values."""
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if samples.shape[0] != len(rule):
        raise ValueError(f"{samples.shape[0]} samples for {len(rule)} sensors")
    if not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    if k < 0:
        raise ValueError(f"order must be >= 0, got {k}")
    bad = np.flatnonzero(~np.isfinite(samples))
    if bad.size:
        raise ObservationError(f"non-finite sample at sensor {rule.nodes[bad[0]].tolist()}")
    d = rule.dim
    alphas = multi_index_set(d, k)

    if rule.kind == "uniform":
        sums = _moment_sums(rule.nodes, samples, k)
        vals = rule.weights[0] * sums
    else:
        rule_T = rule.meta.get("T")
        if rule_T is not None and not math.isclose(rule_T, T, rel_tol=1e-12):
            raise ValueError(f"Gauss-Hermite sensors were placed for T={rule_T}, not T={T}")
        sigma = 2.0 * math.sqrt(T)
        z = rule.nodes / sigma
        nz = samples != 0.0
        logt = np.full(samples.shape, -np.inf)
        logt[nz] = rule.log_weights[nz] + np.sum(z[nz] ** 2, axis=1) + np.log(np.abs(samples[nz]))
        top = np.max(logt) if nz.any() else -np.inf
        if top > 709.0:
            i = int(np.argmax(logt))
            raise ObservationError(
                f"weighted sample overflows at sensor {rule.nodes[i].tolist()} "
                f"(log magnitude {top:.1f})"
            )
        keep = logt > top - 690.0  # relative magnitude 1e-300
        terms = np.zeros(samples.shape)
        terms[keep] = np.sign(samples[keep]) * np.exp(logt[keep])
        sums = _moment_sums(z, terms, k)
        scale = np.array([sigma ** (sum(a) + d) for a in alphas])
        vals = scale * sums
    if not np.all(np.isfinite(vals)):
        raise ObservationError("moment sums overflowed")
    return ObservedMoments(MomentVector(d, k, vals), rule.summary(), float(T))


def write_rule_csv(rule: QuadratureRule, path) -> None:
    """Header ``x1,...,xd,weight``."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(rule.dim)] + ["weight"])
        for x, wt in zip(rule.nodes, rule.weights):
            w.writerow(["%.17g" % v for v in x] + ["%.17g" % wt])
