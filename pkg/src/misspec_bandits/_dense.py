"""Pivoted Gaussian elimination for the small dense systems used throughout.

Everything here works on float64 numpy arrays of size at most a few dozen.
A pivot whose magnitude is at or below ``PIVOT_TOL`` marks the matrix singular.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import SingularDesign

PIVOT_TOL = 1e-10


def lu_factor(a, tol=PIVOT_TOL):
    """Partial-pivoting LU of a square matrix.

    Returns ``(lu, perm, sign, singular)``; ``lu`` holds L below the diagonal
    (unit diagonal implied) and U on and above it.  Elimination stops at the
    first pivot with magnitude ``<= tol`` and reports ``singular=True``.
    """
    lu = np.array(a, dtype=float, copy=True)
    n = lu.shape[0]
    if lu.shape != (n, n):
        raise ValueError(f"expected a square matrix, got shape {lu.shape}")
    perm = np.arange(n)
    sign = 1.0
    for k in range(n):
        p = k + int(np.argmax(np.abs(lu[k:, k])))
        if abs(lu[p, k]) <= tol:
            return lu, perm, sign, True
        if p != k:
            lu[[k, p]] = lu[[p, k]]
            perm[[k, p]] = perm[[p, k]]
            sign = -sign
        lu[k + 1:, k] /= lu[k, k]
        lu[k + 1:, k + 1:] -= np.outer(lu[k + 1:, k], lu[k, k + 1:])
    return lu, perm, sign, False


def lu_solve(lu, perm, b):
    b = np.asarray(b, dtype=float)
    x = b[perm].copy()
    n = lu.shape[0]
    for i in range(1, n):
        x[i] -= lu[i, :i] @ x[:i]
    for i in range(n - 1, -1, -1):
        x[i] = (x[i] - lu[i, i + 1:] @ x[i + 1:]) / lu[i, i]
    return x


def solve(a, b, tol=PIVOT_TOL):
    """Solve ``a x = b``; raises :class:`SingularDesign` on a small pivot."""
    lu, perm, _, singular = lu_factor(a, tol)
    if singular:
        raise SingularDesign("matrix is numerically singular (pivot <= %g)" % tol)
    return lu_solve(lu, perm, b)


def det(a, tol=0.0):
    """Determinant via elimination.  Returns 0.0 once a pivot is ``<= tol``."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] == 0:
        return 1.0
    lu, _, sign, singular = lu_factor(a, tol)
    if singular:
        return 0.0
    return sign * float(np.prod(np.diag(lu)))


def is_nonsingular(a, tol=PIVOT_TOL):
    a = np.asarray(a, dtype=float)
    _, _, _, singular = lu_factor(a, tol)
    return not singular


def rank(a, tol=PIVOT_TOL):
    """Numerical rank by row reduction with full pivoting."""
    m = np.array(a, dtype=float, copy=True)
    rows, cols = m.shape
    r = 0
    for _ in range(min(rows, cols)):
        sub = np.abs(m[r:, r:])
        if sub.size == 0:
            break
        i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
        if sub[i, j] <= tol:
            break
        i += r
        j += r
        m[[r, i]] = m[[i, r]]
        m[:, [r, j]] = m[:, [j, r]]
        m[r + 1:, r:] -= np.outer(m[r + 1:, r] / m[r, r], m[r, r:])
        r += 1
    return r


def exceeds_min_eig(a, c) -> bool:
    """True when ``a - c I`` is positive definite, i.e. ``lambda_min(a) > c``.

    Plain scalar Cholesky so the simulation kernels can mirror it exactly.
    """
    n = len(a)
    low = [[0.0] * n for _ in range(n)]
    for j in range(n):
        s = float(a[j][j]) - c
        for k in range(j):
            s -= low[j][k] * low[j][k]
        if not s > 0.0:
            return False
        low[j][j] = math.sqrt(s)
        for i in range(j + 1, n):
            s = float(a[i][j])
            for k in range(j):
                s -= low[i][k] * low[j][k]
            low[i][j] = s / low[j][j]
    return True
