"""Brute-force reference solvers for small linear programs."""

import itertools

import numpy as np


def enumerate_vertices(A, b, tol=1e-9):
    """All basic feasible solutions of ``A x = b, x >= 0`` (A of full row rank)."""
    m, n = A.shape
    out = []
    for cols in itertools.combinations(range(n), m):
        B = A[:, cols]
        if abs(np.linalg.det(B)) < 1e-12:
            continue
        xb = np.linalg.solve(B, b)
        if np.all(xb >= -tol):
            x = np.zeros(n)
            x[list(cols)] = np.maximum(xb, 0.0)
            out.append(x)
    return out


def lp_min_bruteforce(c, A, b):
    """Minimum of ``c^T x`` over vertices after dropping dependent rows."""
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    # keep a maximal independent set of rows
    rows = []
    for i in range(A.shape[0]):
        if np.linalg.matrix_rank(A[rows + [i]]) > len(rows):
            rows.append(i)
    verts = enumerate_vertices(A[rows], b[rows])
    if not verts:
        return None
    return min(float(c @ x) for x in verts)


def transport_bruteforce(p, q, C):
    """Exact optimal balanced transport cost by vertex enumeration."""
    n_p, n_q = len(p), len(q)
    A = np.zeros((n_p + n_q, n_p * n_q))
    for i in range(n_p):
        A[i, i * n_q:(i + 1) * n_q] = 1
    for j in range(n_q):
        A[n_p + j, j::n_q] = 1
    return lp_min_bruteforce(np.asarray(C, float).ravel(), A, np.concatenate([p, q]))


def l1_min_bruteforce(B, rhs):
    """min ||m||_1 s.t. B m = rhs, via supports of size rank(B)."""
    m_rows, n = B.shape
    best = np.inf
    for cols in itertools.combinations(range(n), m_rows):
        S = B[:, cols]
        if abs(np.linalg.det(S)) < 1e-12:
            continue
        x = np.linalg.solve(S, rhs)
        best = min(best, float(np.sum(np.abs(x))))
    return best
