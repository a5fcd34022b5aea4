"""Atomic signed measures and their exact moments over multi-index sets."""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from pathlib import Path

import numpy as np

__all__ = [
    "AtomicMeasure",
    "MomentVector",
    "multi_index_set",
    "multi_index_position",
    "num_moments",
    "total_variation",
    "exact_moments",
    "read_atoms_csv",
    "write_atoms_csv",
    "read_moments_csv",
    "write_moments_csv",
]


def num_moments(d: int, k: int) -> int:
    """Number of multi-indices alpha in N^d with |alpha|_1 <= k."""
    return comb(k + d, d)


@lru_cache(maxsize=None)
def _multi_indices(d: int, k: int) -> tuple[tuple[int, ...], ...]:
    out = []
    for degree in range(k + 1):
        # ascending lexicographic order within one degree
        same = [a for a in itertools.product(range(degree + 1), repeat=d) if sum(a) == degree]
        out.extend(sorted(same))
    return tuple(out)


def multi_index_set(d: int, k: int) -> list[tuple[int, ...]]:
    """All multi-indices of total degree <= k in graded lexicographic order.

    This is the single ordering used for every moment vector, the moment
    generator and the Vandermonde matrix.

    >>> multi_index_set(2, 1)
    [(0, 0), (0, 1), (1, 0)]
    """
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if k < 0:
        raise ValueError(f"order must be >= 0, got {k}")
    return list(_multi_indices(d, k))


@lru_cache(maxsize=None)
def _position_table(d: int, k: int) -> dict[tuple[int, ...], int]:
    return {a: i for i, a in enumerate(_multi_indices(d, k))}


def multi_index_position(d: int, k: int) -> dict[tuple[int, ...], int]:
    """Map multi-index -> row index in the canonical ordering."""
    return _position_table(d, k)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite signed sum of Dirac masses ``sum_i m_i delta_{x_i}``.

    ``positions`` has shape ``(n_atoms, dim)``; zero amplitudes are dropped
    on construction. Duplicate positions are allowed until
    :meth:`canonicalize` merges them.
    """

    positions: np.ndarray
    amplitudes: np.ndarray

    def __init__(self, positions, amplitudes, dim: int | None = None):
        amp = np.asarray(amplitudes, dtype=float).reshape(-1)
        pos = np.asarray(positions, dtype=float)
        if pos.ndim == 1:
            if dim is None or dim == 1:
                pos = pos.reshape(-1, 1)
            else:
                pos = pos.reshape(-1, dim)
        if pos.ndim != 2:
            raise ValueError("positions must be a 2-D array (n_atoms, dim)")
        if dim is not None and pos.shape[1] != dim and pos.shape[0] > 0:
            raise ValueError(f"positions have dimension {pos.shape[1]}, expected {dim}")
        if pos.shape[0] != amp.shape[0]:
            raise ValueError(
                f"{pos.shape[0]} positions but {amp.shape[0]} amplitudes"
            )
        if pos.shape[0] == 0 and dim is not None:
            pos = pos.reshape(0, dim)
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(amp))):
            raise ValueError("positions and amplitudes must be finite")
        keep = amp != 0.0
        pos = np.ascontiguousarray(pos[keep])
        amp = np.ascontiguousarray(amp[keep])
        pos.setflags(write=False)
        amp.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return self.amplitudes.shape[0]

    @property
    def mass(self) -> float:
        return float(np.sum(self.amplitudes))

    def canonicalize(self) -> "AtomicMeasure":
        """Merge atoms at identical positions; drop atoms that cancel out.

        Atoms are returned sorted lexicographically by position.
        """
        if len(self) == 0:
            return self
        uniq, inverse = np.unique(self.positions, axis=0, return_inverse=True)
        amp = np.zeros(uniq.shape[0])
        np.add.at(amp, inverse.reshape(-1), self.amplitudes)
        return AtomicMeasure(uniq, amp, dim=self.dim)

    def scaled(self, c: float) -> "AtomicMeasure":
        return AtomicMeasure(self.positions, c * self.amplitudes, dim=self.dim)

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        if other.dim != self.dim:
            raise ValueError("cannot add measures of different dimension")
        return AtomicMeasure(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.amplitudes, other.amplitudes]),
            dim=self.dim,
        )

    def __neg__(self) -> "AtomicMeasure":
        return self.scaled(-1.0)

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return self + (-other)


def total_variation(mu: AtomicMeasure) -> float:
    """Sum of absolute amplitudes."""
    return float(np.sum(np.abs(mu.amplitudes)))


@dataclass(frozen=True)
class MomentVector:
    """Moments indexed by the canonical multi-index ordering.

    ``values`` is a float array, or an object array of ``Fraction`` when the
    moments are carried in exact rational arithmetic.
    """

    dim: int
    order: int
    values: np.ndarray

    def __post_init__(self):
        n = num_moments(self.dim, self.order)
        if self.values.shape != (n,):
            raise ValueError(
                f"moment vector of dim={self.dim}, order={self.order} needs "
                f"{n} values, got shape {self.values.shape}"
            )

    @property
    def exact(self) -> bool:
        return self.values.dtype == object

    @property
    def indices(self) -> list[tuple[int, ...]]:
        return multi_index_set(self.dim, self.order)

    def __getitem__(self, alpha) -> float:
        if isinstance(alpha, int):
            alpha = (alpha,)
        return self.values[multi_index_position(self.dim, self.order)[tuple(alpha)]]

    def to_float(self) -> "MomentVector":
        if not self.exact:
            return self
        return MomentVector(self.dim, self.order, np.array([float(v) for v in self.values]))

    def truncate(self, k: int) -> "MomentVector":
        """Keep moments of degree <= k (a prefix in graded order)."""
        if k > self.order:
            raise ValueError(f"cannot truncate order {self.order} moments to {k}")
        return MomentVector(self.dim, k, self.values[: num_moments(self.dim, k)].copy())


def exact_moments(mu: AtomicMeasure, k: int, exact: bool = False) -> MomentVector:
    """Moments ``sum_i m_i x_i^alpha`` of an atomic measure up to degree k.

    With ``exact=True`` the float positions and amplitudes are converted to
    rationals and the moments are returned as ``Fraction`` objects.
    """
    if k < 0:
        raise ValueError(f"order must be >= 0, got {k}")
    d = mu.dim
    alphas = multi_index_set(d, k)
    if exact:
        pos = [[Fraction(float(v)) for v in row] for row in mu.positions]
        amp = [Fraction(float(a)) for a in mu.amplitudes]
        vals = np.empty(len(alphas), dtype=object)
        for r, alpha in enumerate(alphas):
            total = Fraction(0)
            for x, m in zip(pos, amp):
                term = m
                for xj, aj in zip(x, alpha):
                    term *= xj**aj
                total += term
            vals[r] = total
        return MomentVector(d, k, vals)

    # per-axis power tables, shape (d, k+1, n_atoms)
    powers = np.ones((d, k + 1, len(mu)))
    for p in range(1, k + 1):
        powers[:, p, :] = powers[:, p - 1, :] * mu.positions.T
    vals = np.empty(len(alphas))
    for r, alpha in enumerate(alphas):
        mono = np.ones(len(mu))
        for j, aj in enumerate(alpha):
            mono = mono * powers[j, aj]
        vals[r] = np.dot(mono, mu.amplitudes)
    return MomentVector(d, k, vals)


# -- CSV I/O -----------------------------------------------------------------

def _fmt(x: float) -> str:
    return "%.17g" % x


def write_atoms_csv(mu: AtomicMeasure, path) -> None:
    """One atom per row, header ``x1,...,xd,amplitude``."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(mu.dim)] + ["amplitude"])
        for x, m in zip(mu.positions, mu.amplitudes):
            w.writerow([_fmt(v) for v in x] + [_fmt(m)])


def read_atoms_csv(path) -> AtomicMeasure:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][-1] != "amplitude":
        raise ValueError(f"{path}: expected header x1,...,xd,amplitude")
    d = len(rows[0]) - 1
    if d < 1:
        raise ValueError(f"{path}: no coordinate columns")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, d + 1)
    return AtomicMeasure(data[:, :d], data[:, d], dim=d)


def write_moments_csv(y: MomentVector, path) -> None:
    """Header ``alpha,value``; alpha is the comma-joined exponent tuple."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha", "value"])
        for alpha, v in zip(y.indices, y.values):
            w.writerow([",".join(str(a) for a in alpha), _fmt(float(v))])


def read_moments_csv(path) -> MomentVector:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["alpha", "value"]:
        raise ValueError(f"{path}: expected header alpha,value")
    alphas = [tuple(int(a) for a in r[0].split(",")) for r in rows[1:]]
    if not alphas:
        raise ValueError(f"{path}: no moments")
    d = len(alphas[0])
    k = max(sum(a) for a in alphas)
    if alphas != multi_index_set(d, k):
        raise ValueError(f"{path}: multi-indices are not the canonical set of order {k}")
    return MomentVector(d, k, np.array([float(r[1]) for r in rows[1:]]))
