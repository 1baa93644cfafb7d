"""Weighted least squares, basic solutions and the misspecification error.

The estimator behind every result in this package is the weighted
least-squares parameter

    theta(lam, y) = argmin_theta  sum_i lam_i (phi_i . theta - y_i)^2,

and the key structural fact is that it is always a convex combination of the
*basic solutions* ``Phi_J^{-1} y_J`` taken over the nonsingular d x d row
blocks ``J`` of the feature matrix, with determinant weights
(:func:`forsgren_weights`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb
from typing import Sequence

import numpy as np

from . import _dense
from ._dense import PIVOT_TOL
from .errors import SingularDesign
from .simplex import OPTIMAL, linprog_eq

WEIGHT_SUM_TOL = 1e-12
MAX_SUBSETS = 1_000_000


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FeatureMatrix:
    """K x d feature matrix of full column rank; row ``i`` is arm ``i``'s feature."""

    data: np.ndarray

    def __post_init__(self):
        a = np.array(self.data, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if a.ndim != 2 or a.shape[0] == 0 or a.shape[1] == 0:
            raise ValueError(f"feature matrix must be 2-D and non-empty, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("feature matrix has non-finite entries")
        k, d = a.shape
        if k < d:
            raise ValueError(f"need at least as many arms as dimensions (K={k}, d={d})")
        if _dense.rank(a) != d:
            raise ValueError("feature matrix does not have full column rank")
        a.setflags(write=False)
        object.__setattr__(self, "data", a)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def __getitem__(self, i):
        return self.data[i]

    def __len__(self):
        return self.rows

    def max_row_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.data, axis=1)))


@dataclass(frozen=True)
class RewardInstance:
    """Vector of true mean rewards, one per arm (or per context-arm pair)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("reward vector has non-finite entries")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    @property
    def optimal_arm(self):
        """Index of the strict maximum, or the string ``"tied"``."""
        k = int(np.argmax(self.values))
        if np.count_nonzero(self.values == self.values[k]) > 1:
            return "tied"
        return k


@dataclass(frozen=True)
class SamplingWeights:
    """A point on the probability simplex; the diagonal of the weight matrix."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float).reshape(-1)
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise ValueError("sampling weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"sampling weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_counts(cls, counts):
        c = np.asarray(counts, dtype=float)
        w = c / c.sum()
        w[-1] = 1.0 - w[:-1].sum()
        return cls(np.clip(w, 0.0, None))

    @classmethod
    def uniform(cls, k):
        return cls(np.full(k, 1.0 / k))

    def __len__(self):
        return self.weights.shape[0]

    def design(self, phi: FeatureMatrix) -> np.ndarray:
        x = phi.data
        return x.T @ (self.weights[:, None] * x)

    def design_invertible(self, phi: FeatureMatrix) -> bool:
        return _dense.is_nonsingular(self.design(phi))


@dataclass(frozen=True)
class BasicSolution:
    subset: tuple
    theta: np.ndarray
    det_phi: float


@dataclass(frozen=True)
class BasicSolutionSet:
    entries: tuple = field(default_factory=tuple)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def thetas(self) -> np.ndarray:
        return np.array([e.theta for e in self.entries])

    def subsets(self):
        return [e.subset for e in self.entries]


def _as_features(phi) -> FeatureMatrix:
    return phi if isinstance(phi, FeatureMatrix) else FeatureMatrix(phi)


def _as_values(y) -> np.ndarray:
    if isinstance(y, RewardInstance):
        return y.values
    return np.asarray(y, dtype=float).reshape(-1)


def _as_weights(lam) -> np.ndarray:
    if isinstance(lam, SamplingWeights):
        return lam.weights
    return np.asarray(lam, dtype=float).reshape(-1)


def weighted_lse(phi, lam, y) -> np.ndarray:
    """Weighted least-squares parameter ``(Phi' L Phi)^{-1} Phi' L y``.

    ``lam`` may be a :class:`SamplingWeights` or any nonnegative weight
    vector (play counts give the same minimiser).
    """
    phi = _as_features(phi)
    w = _as_weights(lam)
    y = _as_values(y)
    x = phi.data
    design = x.T @ (w[:, None] * x)
    try:
        return _dense.solve(design, x.T @ (w * y))
    except SingularDesign:
        raise SingularDesign("weighted design matrix is singular for these sampling weights") from None


def regularized_model_estimate(phi, lam, y, ridge: float) -> np.ndarray:
    """Ridge-regularised weighted estimate ``(Phi' L Phi + ridge I)^{-1} Phi' L y``."""
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    phi = _as_features(phi)
    w = _as_weights(lam)
    y = _as_values(y)
    x = phi.data
    design = x.T @ (w[:, None] * x) + ridge * np.eye(phi.cols)
    return _dense.solve(design, x.T @ (w * y), tol=0.0)


def augment_ridge(phi, lam, y, ridge: float):
    """Stack ``sqrt(ridge) I`` under ``Phi``, unit weights under ``lam``, zeros under ``y``.

    Weighted least squares on the returned triple (weights used verbatim)
    reproduces :func:`regularized_model_estimate` on the original one.
    Returns ``(features, weights, rewards)``; the weights are not renormalised.
    """
    if not ridge > 0:
        raise ValueError("ridge must be positive")
    phi = _as_features(phi)
    d = phi.cols
    x = np.vstack([phi.data, np.sqrt(ridge) * np.eye(d)])
    w = np.concatenate([_as_weights(lam), np.ones(d)])
    yy = np.concatenate([_as_values(y), np.zeros(d)])
    return FeatureMatrix(x), w, yy


def enumerate_subsets(k: int, d: int):
    n = comb(k, d)
    if n > MAX_SUBSETS:
        raise ValueError(f"C({k},{d}) = {n} subsets exceeds the enumeration limit {MAX_SUBSETS}")
    return combinations(range(k), d)


def enumerate_basic_solutions(phi, mu, exclude: Sequence[tuple] = ()) -> BasicSolutionSet:
    """All basic solutions ``Phi_J^{-1} mu_J`` over nonsingular d-row subsets ``J``.

    Subsets come out in lexicographic order.  ``exclude`` drops specific
    subsets (the pure-regulariser block in the ridge characterisation).
    """
    phi = _as_features(phi)
    mu = _as_values(mu)
    if mu.shape[0] != phi.rows:
        raise ValueError(f"reward vector has length {mu.shape[0]}, expected {phi.rows}")
    skip = {tuple(sorted(j)) for j in exclude}
    out = []
    for subset in enumerate_subsets(phi.rows, phi.cols):
        if subset in skip:
            continue
        block = phi.data[list(subset)]
        lu, perm, sign, singular = _dense.lu_factor(block, PIVOT_TOL)
        if singular:
            continue
        det_j = sign * float(np.prod(np.diag(lu)))
        if abs(det_j) <= PIVOT_TOL:
            continue
        theta = _dense.lu_solve(lu, perm, mu[list(subset)])
        theta.setflags(write=False)
        out.append(BasicSolution(subset, theta, det_j))
    return BasicSolutionSet(tuple(out))


def forsgren_weights(phi, lam) -> dict:
    """Convex weights expressing the weighted LSE over the basic solutions.

    ``weight(J) = det(L_J) det(Phi_J)^2 / sum_K det(L_K) det(Phi_K)^2``, where
    ``det(L_J)`` is the product of the sampling weights of the rows in ``J``.
    """
    phi = _as_features(phi)
    w = _as_weights(lam)
    if not _dense.is_nonsingular(phi.data.T @ (w[:, None] * phi.data)):
        raise SingularDesign("weighted design matrix is singular for these sampling weights")
    raw = {}
    for subset in enumerate_subsets(phi.rows, phi.cols):
        dl = float(np.prod(w[list(subset)]))
        if dl == 0.0:
            raw[subset] = 0.0
            continue
        dp = _dense.det(phi.data[list(subset)])
        if abs(dp) <= PIVOT_TOL:
            continue
        raw[subset] = dl * dp * dp
    total = sum(raw.values())
    return {j: v / total for j, v in raw.items()}


@dataclass(frozen=True)
class ChebyshevFit:
    rho: float
    theta: np.ndarray
    duality_gap: float


def chebyshev_fit(phi, mu, gap_tol=1e-8) -> ChebyshevFit:
    """l_inf distance from ``mu`` to the range of ``Phi`` and a minimising parameter.

    Solved through the dual LP ``max mu.w  s.t.  Phi' w = 0, |w|_1 <= 1``
    written as ``w = v - u`` with ``u, v >= 0``; the primal parameter is read
    off the simplex multipliers, and the gap between the two objectives is
    checked against ``gap_tol`` (relative to ``1 + |mu|_inf``).
    """
    phi = _as_features(phi)
    mu = _as_values(mu)
    k, d = phi.rows, phi.cols
    x = phi.data
    # columns: u (k) then v (k); minimise mu.u - mu.v = -mu.w
    a_eq = np.vstack([np.hstack([x.T, -x.T]), np.ones((1, 2 * k))])
    b_eq = np.concatenate([np.zeros(d), [1.0]])
    c = np.concatenate([mu, -mu])
    res = linprog_eq(c, a_eq, b_eq)
    if res.status != OPTIMAL:  # pragma: no cover - the dual is always feasible and bounded
        raise RuntimeError("Chebyshev LP did not reach optimality: " + res.status)
    dual_value = -res.objective
    theta = res.duals[:d].copy()
    primal_value = float(np.max(np.abs(x @ theta - mu)))
    gap = primal_value - dual_value
    scale = 1.0 + float(np.max(np.abs(mu)))
    if abs(gap) > gap_tol * scale:
        raise RuntimeError(f"Chebyshev LP duality gap {gap:.3e} exceeds tolerance")
    return ChebyshevFit(max(primal_value, 0.0), theta, gap)


def chebyshev_misspec(phi, mu) -> float:
    """Misspecification error ``rho = min_theta max_i |phi_i . theta - mu_i|``."""
    return chebyshev_fit(phi, mu).rho
