"""Moment ODE generator and its nilpotent propagator, with growth and error bounds.

The moments of a heat flow satisfy ``dM/dt = A M`` where ``A`` is the matrix
of the Laplacian acting on monomials. ``A`` lowers the degree by two, so it
is nilpotent and ``exp(-T A)`` is a finite polynomial in ``T``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .measures import MomentVector, multi_index_position, multi_index_set

__all__ = [
    "MomentMatrix",
    "Propagator",
    "GrowthBound",
    "build_A",
    "backward_propagator",
    "invert_moments",
    "growth_bound",
    "jackson_error_constant",
    "error_bound",
    "apriori_tv_bound",
    "write_propagator_csv",
]

# propagator entries above this are refused (double range safety margin)
MAX_PROPAGATOR_ENTRY = 1e300
_INT_GUARD = float(2**62)


@dataclass(frozen=True, eq=False)
class MomentMatrix:
    """Integer generator ``A`` of the moment ODE in canonical ordering."""

    dim: int
    order: int
    entries: np.ndarray
    _powers: list = field(default_factory=list, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def nilpotency_index(self) -> int:
        """Smallest p with A^p = 0 guaranteed: floor(k/2) + 1."""
        return self.order // 2 + 1

    def powers(self) -> list[sp.csr_matrix]:
        """Exact integer powers ``A^0 .. A^(floor(k/2))`` as sparse int64."""
        if not self._powers:
            a = sp.csr_matrix(self.entries)
            a_f = a.astype(float)
            cur = sp.identity(self.size, dtype=np.int64, format="csr")
            cur_f = sp.identity(self.size, dtype=float, format="csr")
            out = [cur]
            for _ in range(self.order // 2):
                nxt_f = cur_f @ a_f
                # entries are nonnegative, so the float product bounds the int one
                if nxt_f.nnz and nxt_f.max() > _INT_GUARD:
                    raise OverflowError("power of the moment generator exceeds 64-bit range")
                cur = (cur @ a).tocsr()
                cur_f = nxt_f
                out.append(cur)
            self._powers.extend(out)
        return self._powers

    def matrix_power(self, p: int) -> np.ndarray:
        """Dense exact integer power A^p (zero for p beyond the nilpotency index)."""
        if p < 0:
            raise ValueError("negative power")
        pw = self.powers()
        if p < len(pw):
            return pw[p].toarray()
        if p == len(pw):
            # A^(floor(k/2)+1) computed rather than assumed
            return (pw[-1] @ sp.csr_matrix(self.entries)).toarray()
        return np.zeros_like(self.entries)


def build_A(d: int, k: int) -> MomentMatrix:
    """Generator with ``A[alpha, alpha - 2 e_i] = alpha_i (alpha_i - 1)``."""
    alphas = multi_index_set(d, k)
    pos = multi_index_position(d, k)
    n = len(alphas)
    a = np.zeros((n, n), dtype=np.int64)
    for r, alpha in enumerate(alphas):
        for i, ai in enumerate(alpha):
            if ai >= 2:
                lower = alpha[:i] + (ai - 2,) + alpha[i + 1 :]
                a[r, pos[lower]] = ai * (ai - 1)
    a.setflags(write=False)
    return MomentMatrix(d, k, a)


@dataclass(frozen=True)
class Propagator:
    """``exp(-horizon * A)`` as a dense matrix (float, or Fraction objects)."""

    dim: int
    order: int
    horizon: float
    matrix: np.ndarray

    @property
    def exact(self) -> bool:
        return self.matrix.dtype == object

    def __matmul__(self, other: "Propagator") -> np.ndarray:
        return self.matrix @ other.matrix


def backward_propagator(A: MomentMatrix, T, exact: bool = False) -> Propagator:
    """Truncated series ``sum_j (-T)^j A^j / j!`` for ``j <= floor(k/2)``.

    Entries of distinct powers never overlap (A^j only links degrees that
    differ by 2j), so each float entry is one integer times one coefficient.
    ``T`` may be negative, which propagates forward in time.
    """
    powers = A.powers()
    n = A.size
    if exact:
        t = Fraction(T)
        mat = np.full((n, n), Fraction(0), dtype=object)
        for j, pw in enumerate(powers):
            coef = (-t) ** j / math.factorial(j)
            coo = pw.tocoo()
            for r, c, v in zip(coo.row, coo.col, coo.data):
                mat[r, c] += coef * int(v)
        return Propagator(A.dim, A.order, float(T), mat)

    t = float(T)
    mat = np.zeros((n, n))
    for j, pw in enumerate(powers):
        if pw.nnz == 0:
            continue
        if j > 0 and t != 0.0:
            log_entry = j * math.log(abs(t)) - math.lgamma(j + 1) + math.log(float(pw.max()))
            if log_entry > math.log(MAX_PROPAGATOR_ENTRY):
                raise OverflowError(
                    f"propagator for k={A.order}, T={t:g} has entries near "
                    f"1e{log_entry / math.log(10):.0f}, beyond double-precision range"
                )
        coef = float((-Fraction(t)) ** j / math.factorial(j))
        coo = pw.tocoo()
        mat[coo.row, coo.col] += coef * coo.data.astype(float)
    return Propagator(A.dim, A.order, t, mat)


def invert_moments(y: MomentVector, T, A: MomentMatrix | None = None) -> MomentVector:
    """Map terminal moments to initial moments: ``exp(-T A) y``.

    Float input is reduced row by row with ``math.fsum``; ``Fraction`` input
    (``y.exact``) is propagated exactly.
    """
    if A is None:
        A = build_A(y.dim, y.order)
    elif (A.dim, A.order) != (y.dim, y.order):
        raise ValueError(
            f"generator is for (d={A.dim}, k={A.order}) but moments are "
            f"(d={y.dim}, k={y.order})"
        )
    if y.exact:
        P = backward_propagator(A, T, exact=True).matrix
        return MomentVector(y.dim, y.order, P.dot(y.values))
    P = backward_propagator(A, T).matrix
    vals = np.array([math.fsum(row * y.values) for row in P])
    return MomentVector(y.dim, y.order, vals)


class GrowthBound(NamedTuple):
    sum: float
    majorant: float


def growth_bound(k: int, T: float) -> GrowthBound:
    """Backward amplification ``sum_j k^j (k-1)^j T^j / j!`` and its Stirling majorant."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    h = k // 2
    s = math.fsum((k * (k - 1) * T) ** j / math.factorial(j) for j in range(h + 1))
    maj = math.sqrt(k / math.pi) * math.exp(k + 0.5 * k * math.log(k)) * max(T**h, 1.0)
    return GrowthBound(s, maj)


def jackson_error_constant(d: int, R: float, k: int, jackson_const: float = 1.0) -> float:
    """``(sqrt(k/pi) + C_d R / sqrt(pi k)) exp(k (1 + 2d/R + ln sqrt(k)))``."""
    return (math.sqrt(k / math.pi) + jackson_const * R / math.sqrt(math.pi * k)) * math.exp(
        k * (1.0 + 2.0 * d / R + 0.5 * math.log(k))
    )


def error_bound(
    d: int,
    R: float,
    k: int,
    T: float,
    eps_inf: float,
    tv_true: float,
    jackson_const: float = 1.0,
) -> float:
    """Upper bound on the Kantorovich error of a recovery at order k.

    ``jackson_const`` is the dimension-dependent constant of the multivariate
    Jackson theorem, which has no known closed value; the result is a
    diagnostic only.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if R <= 0:
        raise ValueError(f"R must be positive, got {R}")
    first = jackson_const * R * tv_true / k
    if eps_inf == 0:
        return first
    return first + jackson_error_constant(d, R, k, jackson_const) * max(T ** (k // 2), 1.0) * eps_inf


def apriori_tv_bound(z_inf: float, d: int, k: int, r: float) -> float:
    """Minimal TV of a moment-matching measure on a domain containing [-r, r]^d."""
    return math.exp(2.0 * d * k / r) * z_inf


def write_propagator_csv(P: Propagator, path) -> None:
    """Row-major dump with multi-index labels in the header."""
    labels = [",".join(map(str, a)) for a in multi_index_set(P.dim, P.order)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["alpha"] + labels)
        for lab, row in zip(labels, P.matrix):
            w.writerow([lab] + ["%.17g" % float(v) for v in row])
