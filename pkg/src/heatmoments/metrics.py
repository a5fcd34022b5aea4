"""Transport distances between atomic measures and amplitude-weighted clustering."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.spatial.distance import cdist

from .lp_simplex import LPProblem, solve
from .measures import AtomicMeasure

__all__ = [
    "TransportPlan",
    "MassMismatchError",
    "transport_plan",
    "w1_distance",
    "kantorovich_norm",
    "cluster",
    "ground_distance",
]

MASS_RTOL = 1e-9
# mass gaps below this many ulps of the summed amplitudes are representation roundoff
MASS_ULPS = 64
NET_AMPLITUDE_FLOOR = 1e-12


class MassMismatchError(ValueError):
    """W1 is only defined between measures of equal total mass."""


def ground_distance(a: np.ndarray, b: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    if metric == "euclidean":
        return cdist(a, b)
    if metric in ("linf", "chebyshev"):
        return cdist(a, b, metric="chebyshev")
    raise ValueError(f"unknown ground metric {metric!r}")


@dataclass(frozen=True)
class TransportPlan:
    """Optimal flow from the positive to the negative part of ``mu1 - mu2``."""

    sources: np.ndarray
    targets: np.ndarray
    flow: np.ndarray
    cost: float


def _split(mu1: AtomicMeasure, mu2: AtomicMeasure):
    if mu1.dim != mu2.dim and len(mu1) and len(mu2):
        raise ValueError(f"measures live in different dimensions ({mu1.dim} vs {mu2.dim})")
    m1, m2 = mu1.mass, mu2.mass
    scale = np.sum(np.abs(mu1.amplitudes)) + np.sum(np.abs(mu2.amplitudes))
    tol = max(MASS_RTOL * max(1.0, abs(m1)), MASS_ULPS * np.finfo(float).eps * scale)
    if abs(m1 - m2) > tol:
        raise MassMismatchError(
            f"masses differ ({m1:.17g} vs {m2:.17g}); W1 is undefined for unequal "
            "masses, use kantorovich_norm of the difference instead"
        )
    diff = (mu1 - mu2).canonicalize()
    pos = diff.amplitudes > 0
    return diff.positions[pos], diff.amplitudes[pos], diff.positions[~pos], -diff.amplitudes[~pos]


def transport_plan(mu1: AtomicMeasure, mu2: AtomicMeasure, metric: str = "euclidean") -> TransportPlan:
    """Balanced transport LP between the positive and negative parts of ``mu1 - mu2``.

    Co-located mass cancels first. The negative part is rescaled to the mass
    of the positive part so the LP is exactly balanced; the rescaling is
    within the mass tolerance of the precondition.
    """
    P, p, Q, q = _split(mu1, mu2)
    d = mu1.dim if len(mu1) else mu2.dim
    if p.size == 0 or q.size == 0:
        return TransportPlan(P.reshape(-1, d), Q.reshape(-1, d), np.zeros((p.size, q.size)), 0.0)
    q = q * (p.sum() / q.sum())
    C = ground_distance(P, Q, metric)
    n_p, n_q = p.size, q.size
    A = np.zeros((n_p + n_q, n_p * n_q))
    for i in range(n_p):
        A[i, i * n_q : (i + 1) * n_q] = 1.0
    for j in range(n_q):
        A[n_p + j, j::n_q] = 1.0
    sol = solve(LPProblem(C.ravel(), A, np.concatenate([p, q])))
    if not sol.optimal:
        raise RuntimeError(f"transport LP ended with status {sol.status}")
    flow = sol.x.reshape(n_p, n_q)
    return TransportPlan(P, Q, flow, float(np.sum(flow * C)))


def w1_distance(mu1: AtomicMeasure, mu2: AtomicMeasure, metric: str = "euclidean") -> float:
    """Wasserstein-1 distance between two signed atomic measures of equal mass."""
    return max(transport_plan(mu1, mu2, metric).cost, 0.0)


def kantorovich_norm(mu: AtomicMeasure, metric: str = "euclidean") -> float:
    """``sup { sum_i v_i m_i : |v| <= 1, Lip(v) <= 1 }`` over the support.

    Solved through the dual LP: ``min sum_i |a_i| + sum_ij f_ij |x_i - x_j|``
    with ``m_i = a_i + sum_j f_ij - sum_j f_ji`` and ``f >= 0``, i.e. mass is
    either moved at transport cost or created/annihilated at unit cost. On a
    finite support this equals the norm over any larger domain, since a
    1-Lipschitz function bounded by 1 on the support extends (McShane,
    then clipped to [-1, 1]) without increasing either constant.
    """
    mu = mu.canonicalize()
    n = len(mu)
    if n == 0:
        return 0.0
    m = mu.amplitudes
    if n == 1:
        return float(abs(m[0]))
    D = ground_distance(mu.positions, mu.positions, metric)
    pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
    A = np.zeros((n, 2 * n + len(pairs)))
    A[:, :n] = np.eye(n)
    A[:, n : 2 * n] = -np.eye(n)
    cost = np.ones(2 * n + len(pairs))
    for c, (i, j) in enumerate(pairs):
        A[i, 2 * n + c] = 1.0
        A[j, 2 * n + c] = -1.0
        cost[2 * n + c] = D[i, j]
    sol = solve(LPProblem(cost, A, m))
    if not sol.optimal:
        raise RuntimeError(f"Kantorovich LP ended with status {sol.status}")
    return max(sol.objective, 0.0)


def _merge_once(mu: AtomicMeasure, threshold: float, metric: str):
    n = len(mu)
    if n < 2:
        return mu, False
    D = ground_distance(mu.positions, mu.positions, metric)
    adj = D < threshold
    n_comp, labels = connected_components(adj, directed=False)
    if n_comp == n:
        return mu, False
    pos, amp = [], []
    for c in range(n_comp):
        idx = np.flatnonzero(labels == c)
        total = float(np.sum(mu.amplitudes[idx]))
        if abs(total) <= NET_AMPLITUDE_FLOOR:
            warnings.warn(
                f"dropping a cluster of {idx.size} atoms near {mu.positions[idx[0]].tolist()} "
                f"with net amplitude {total:.3g}",
                RuntimeWarning,
                stacklevel=3,
            )
            continue
        pos.append(mu.amplitudes[idx] @ mu.positions[idx] / total)
        amp.append(total)
    merged = AtomicMeasure(np.array(pos).reshape(-1, mu.dim), np.array(amp), dim=mu.dim)
    return merged, True


def cluster(mu: AtomicMeasure, threshold: float, metric: str = "euclidean") -> AtomicMeasure:
    """Single-linkage merge of atoms closer than ``threshold``.

    Each group becomes one atom at its amplitude-weighted barycenter carrying
    the summed amplitude. Merging repeats until no two atoms are closer than
    ``threshold``, which makes the operation idempotent.
    """
    if not threshold > 0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    cur = mu.canonicalize()
    changed = True
    while changed:
        cur, changed = _merge_once(cur, threshold, metric)
        cur = cur.canonicalize()
    return cur
