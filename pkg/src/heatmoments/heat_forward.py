"""Exact forward heat evolution of atomic initial data on R^d."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from pathlib import Path

import numpy as np

from .measures import AtomicMeasure, MomentVector, multi_index_set

__all__ = [
    "HeatSample",
    "heat_kernel",
    "heat_solution",
    "heat_moments_exact",
    "sample_readings",
    "write_readings_csv",
    "read_readings_csv",
]

_INT64_MAX = 2**63 - 1


@dataclass(frozen=True)
class HeatSample:
    position: tuple[float, ...]
    time: float
    value: float

    def __post_init__(self):
        if not self.time > 0:
            raise ValueError(f"sample time must be positive, got {self.time}")


def _check_time(t: float) -> None:
    if not t > 0:
        raise ValueError(f"heat kernel needs t > 0, got {t}")


def heat_kernel(x, t: float):
    """Gaussian heat kernel ``(4 pi t)^(-d/2) exp(-|x|^2 / (4t))``.

    ``x`` is a single d-vector or an array of points with shape (n, d);
    a scalar is treated as a point in R^1.
    """
    _check_time(t)
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    d = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    val = (4.0 * np.pi * t) ** (-d / 2.0) * np.exp(-r2 / (4.0 * t))
    return float(val) if np.ndim(val) == 0 else val


def heat_solution(mu0: AtomicMeasure, x, T: float):
    """Value of the heat flow of ``mu0`` at point(s) ``x`` and time ``T``."""
    _check_time(T)
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    pts = x.reshape(1, -1) if single else x
    if x.ndim == 0:
        pts = x.reshape(1, 1)
    if pts.shape[1] != mu0.dim:
        raise ValueError(f"point dimension {pts.shape[1]} != measure dimension {mu0.dim}")
    out = np.zeros(pts.shape[0])
    for xi, mi in zip(mu0.positions, mu0.amplitudes):
        out += mi * heat_kernel(pts - xi, T)
    return float(out[0]) if single else out


def _axis_coefficients(a: int) -> list[tuple[int, int]]:
    """Pairs (b, C(a,b) (b-1)!!) for even b <= a."""
    out = []
    dfact = 1  # (b-1)!! with (-1)!! = 1
    for b in range(0, a + 1, 2):
        if b > 0:
            dfact *= b - 1
        c = comb(a, b) * dfact
        if c > _INT64_MAX:
            raise OverflowError(f"moment coefficient for order {a} exceeds 64-bit range")
        out.append((b, c))
    return out


def heat_moments_exact(mu0: AtomicMeasure, k: int, T: float, exact: bool = False) -> MomentVector:
    """Closed-form moments of the heat flow of ``mu0`` at time ``T``.

    Uses the Gaussian moment expansion per axis. Only meant as a test oracle
    and right-hand-side generator; the recovery pipeline works from
    pointwise samples. ``exact=True`` returns ``Fraction`` values computed
    from the exact rational values of the float inputs.
    """
    _check_time(T)
    if k < 0:
        raise ValueError(f"order must be >= 0, got {k}")
    d = mu0.dim
    alphas = multi_index_set(d, k)
    coeffs = [_axis_coefficients(a) for a in range(k + 1)]

    if exact:
        two_t = 2 * Fraction(T)
        pos = [[Fraction(float(v)) for v in row] for row in mu0.positions]
        amp = [Fraction(float(a)) for a in mu0.amplitudes]
        # axis[i][j][a] = 1-D Gaussian moment of order a centred at x_ij
        axis = [
            [
                [sum(c * xj ** (a - b) * two_t ** (b // 2) for b, c in coeffs[a]) for a in range(k + 1)]
                for xj in x
            ]
            for x in pos
        ]
        vals = np.empty(len(alphas), dtype=object)
        for r, alpha in enumerate(alphas):
            total = Fraction(0)
            for i, m in enumerate(amp):
                term = m
                for j, aj in enumerate(alpha):
                    term *= axis[i][j][aj]
                total += term
            vals[r] = total
        return MomentVector(d, k, vals)

    two_t = 2.0 * T
    n = len(mu0)
    axis = np.zeros((d, k + 1, n))
    xpow = np.ones((k + 1, d, n))
    for p in range(1, k + 1):
        xpow[p] = xpow[p - 1] * mu0.positions.T
    for a in range(k + 1):
        for b, c in coeffs[a]:
            axis[:, a, :] += float(c) * xpow[a - b] * two_t ** (b // 2)
    vals = np.empty(len(alphas))
    for r, alpha in enumerate(alphas):
        prod = np.ones(n)
        for j, aj in enumerate(alpha):
            prod = prod * axis[j, aj]
        vals[r] = np.dot(prod, mu0.amplitudes)
    return MomentVector(d, k, vals)


def sample_readings(
    mu0: AtomicMeasure,
    nodes,
    T: float,
    noise: float = 0.0,
    seed: int | None = None,
) -> np.ndarray:
    """Synthetic sensor readings ``u(node, T)``.

    ``noise > 0`` adds i.i.d. uniform noise on ``[-noise, noise]`` drawn
    from a generator seeded with ``seed``.
    """
    vals = heat_solution(mu0, np.atleast_2d(np.asarray(nodes, dtype=float)), T)
    if noise > 0:
        rng = np.random.default_rng(seed)
        vals = vals + rng.uniform(-noise, noise, size=vals.shape)
    return vals


def write_readings_csv(nodes, T: float, values, path) -> None:
    """Readings CSV with header ``x1,...,xd,t,value``."""
    nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
    d = nodes.shape[1]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(d)] + ["t", "value"])
        for x, v in zip(nodes, values):
            w.writerow(["%.17g" % c for c in x] + ["%.17g" % T, "%.17g" % v])


def read_readings_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(nodes, times, values)`` from a readings CSV."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-2:] != ["t", "value"]:
        raise ValueError(f"{path}: expected header x1,...,xd,t,value")
    d = len(rows[0]) - 2
    if d < 1:
        raise ValueError(f"{path}: no coordinate columns")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, d + 2)
    if np.any(data[:, d] <= 0):
        raise ValueError(f"{path}: sample times must be positive")
    return data[:, :d], data[:, d], data[:, d + 1]
