"""Dense two-phase simplex for small standard-form linear programs.

Solves ``min c.x  s.t.  A x = b, x >= 0`` with a full tableau and Bland's
rule, which is plenty for the handful of rows the region and Chebyshev
problems produce.  The dual multipliers of the final basis are returned so
callers can certify optimality through the duality gap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._dense import solve

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None = None
    objective: float = float("nan")
    duals: np.ndarray | None = None
    basis: tuple = ()


def _pivot(tab, row, col):
    tab[row] /= tab[row, col]
    for i in range(tab.shape[0]):
        if i != row and tab[i, col] != 0.0:
            tab[i] -= tab[i, col] * tab[row]


def _run(tab, basis, cost, allowed, tol, max_iter):
    m = tab.shape[0]
    for _ in range(max_iter):
        reduced = cost[:-1] - cost[basis] @ tab[:, :-1]
        entering = -1
        for j in np.flatnonzero(allowed):
            if reduced[j] < -tol:
                entering = int(j)
                break
        if entering < 0:
            return OPTIMAL
        col = tab[:, entering]
        best, leave = np.inf, -1
        for i in range(m):
            if col[i] > tol:
                ratio = tab[i, -1] / col[i]
                if ratio < best - 1e-15 or (abs(ratio - best) <= 1e-15 and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            return UNBOUNDED
        _pivot(tab, leave, entering)
        basis[leave] = entering
    raise RuntimeError("simplex iteration limit reached")


def linprog_eq(c, a_eq, b_eq, tol=1e-11, feas_tol=1e-9, max_iter=10_000):
    """Minimise ``c.x`` subject to ``a_eq x = b_eq`` and ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    a = np.array(a_eq, dtype=float, copy=True)
    b = np.array(b_eq, dtype=float, copy=True)
    m, n = a.shape
    neg = b < 0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # phase I: artificial identity block appended after the structural columns
    tab = np.hstack([a, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    cost1 = np.concatenate([np.zeros(n), np.ones(m), [0.0]])
    allowed = np.ones(n + m, dtype=bool)
    status = _run(tab, basis, cost1, allowed, tol, max_iter)
    if status != OPTIMAL:  # pragma: no cover - phase I is bounded below by 0
        raise RuntimeError("phase I failed: " + status)
    scale = 1.0 + float(np.abs(b).max(initial=0.0))
    if tab[:, -1] @ cost1[basis] > feas_tol * scale:
        return LPResult(INFEASIBLE)

    # drive zero-level artificials out of the basis; drop rows that are redundant
    keep = []
    for i in range(m):
        if basis[i] >= n:
            nz = np.flatnonzero(np.abs(tab[i, :n]) > 1e-9)
            if nz.size == 0:
                continue
            _pivot(tab, i, int(nz[0]))
            basis[i] = int(nz[0])
        keep.append(i)
    tab = tab[keep]
    basis = [basis[i] for i in keep]
    a_kept = a[keep]

    cost2 = np.concatenate([c, np.zeros(m), [0.0]])
    allowed = np.concatenate([np.ones(n, dtype=bool), np.zeros(m, dtype=bool)])
    status = _run(tab, basis, cost2, allowed, tol, max_iter)
    if status != OPTIMAL:
        return LPResult(status)

    x = np.zeros(n)
    x[basis] = tab[:, -1]
    x[x < 0.0] = 0.0
    # simplex multipliers y solve B^T y = c_B, in the sign convention of the kept rows
    bmat = a_kept[:, basis]
    y_kept = solve(bmat.T, c[basis], tol=1e-14)
    y = np.zeros(m)
    y[keep] = y_kept
    y[neg] *= -1.0
    return LPResult(OPTIMAL, x=x, objective=float(c @ x), duals=y, basis=tuple(basis))


def feasible_point(a_ge, b_ge):
    """Find ``z`` with ``a_ge z >= b_ge`` (``z`` free), or ``None`` if none exists."""
    a_ge = np.asarray(a_ge, dtype=float)
    b_ge = np.asarray(b_ge, dtype=float)
    m, d = a_ge.shape
    # z = p - q with p, q >= 0; surplus s >= 0 turns >= into =
    a_eq = np.hstack([a_ge, -a_ge, -np.eye(m)])
    res = linprog_eq(np.zeros(2 * d + m), a_eq, b_ge)
    if res.status != OPTIMAL:
        return None
    return res.x[:d] - res.x[d:2 * d]
