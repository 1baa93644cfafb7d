"""Epsilon-greedy and LinUCB (OFUL) agents over a linear reward model.

Both agents keep a single pooled least-squares state (:class:`LseState`).
Before the design matrix is invertible they either play a *forced basis*,
i.e. the first arm (in index order) whose feature is linearly independent of
everything pulled so far, or start from a ridge term ``lam * I``.

Agents follow a generic step protocol so the harness can drive any of them::

    arm = agent.act(x)          # x is the context (0 for plain bandits)
    agent.learn(reward)
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _dense
from ._dense import PIVOT_TOL
from ._kernel_py import EIG_RTOL
from .errors import NotMember, RidgeFallbackWarning, SingularDesign
from .linalg_core import _as_features, _as_values, enumerate_basic_solutions
from .regions import (
    ContextualInstance,
    greedy_optimal_arm,
    robust_membership,
    robust_membership_contextual,
)

FORCED, EXPLORE, EXPLOIT = 0, 1, 2


@dataclass(frozen=True)
class ForcedBasis:
    """Play d linearly independent arms before trusting the estimate."""


@dataclass(frozen=True)
class Ridge:
    lam: float = 1.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("ridge parameter must be positive")


@dataclass(frozen=True)
class EpsGreedyConfig:
    """Exploration rate 1/sqrt(t) with rounds counted from t = 1."""

    init: ForcedBasis | Ridge = field(default_factory=ForcedBasis)

    @staticmethod
    def epsilon(t: int) -> float:
        return 1.0 / math.sqrt(t)


@dataclass(frozen=True)
class LinUCBConfig:
    R: float = 0.5
    delta: float = 0.05
    init: ForcedBasis | Ridge = field(default_factory=ForcedBasis)

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError("R must be positive")
        if not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")


def beta(t, d, R, delta) -> float:
    """Squared ellipsoid radius ``2 R^2 log((1 + t/d)^{d/2} / delta)``."""
    return 2.0 * R * R * (0.5 * d * math.log(1.0 + t / d) - math.log(delta))


def suboptimal_play_bound(t, d, R, delta, gap) -> float:
    """High-probability cap on LinUCB's sub-optimal plays after ``t`` rounds."""
    log_det = 0.5 * d * math.log(1.0 + t / d) - math.log(delta)
    return 4.0 * math.sqrt(t) * R / gap * math.sqrt(log_det) * math.sqrt(d * math.log(1.0 + t / d))


class LseState:
    """Running least-squares statistics ``V = sum phi phi' (+ lam I)``, ``S = sum phi y``."""

    def __init__(self, d: int, ridge: float = 0.0):
        self.d = d
        self.ridge = float(ridge)
        self.V = ridge * np.eye(d)
        self.S = np.zeros(d)
        self.t = 0
        self.theta_hat = np.zeros(d) if ridge > 0 else None
        self._echelon = []  # (pivot, row) pairs spanning the pulled features

    def copy(self) -> "LseState":
        new = LseState.__new__(LseState)
        new.d, new.ridge, new.t = self.d, self.ridge, self.t
        new.V, new.S = self.V.copy(), self.S.copy()
        new.theta_hat = None if self.theta_hat is None else self.theta_hat.copy()
        new._echelon = list(self._echelon)
        return new

    @property
    def invertible(self) -> bool:
        return self.theta_hat is not None

    def rank(self) -> int:
        return len(self._echelon)

    def _reduce(self, phi):
        v = np.array(phi, dtype=float)
        for p, row in self._echelon:
            v -= v[p] * row
        return v

    def is_independent(self, phi) -> bool:
        phi = np.asarray(phi, dtype=float)
        v = self._reduce(phi)
        return float(np.max(np.abs(v))) > PIVOT_TOL * max(1.0, float(np.max(np.abs(phi))))

    def update(self, phi, y: float) -> "LseState":
        """In-place rank-one update; the estimate is re-solved once V is invertible."""
        phi = np.asarray(phi, dtype=float)
        self.t += 1
        if not np.any(phi):
            return self
        if self.is_independent(phi):
            v = self._reduce(phi)
            p = int(np.argmax(np.abs(v)))
            self._echelon.append((p, v / v[p]))
        self.V = self.V + np.outer(phi, phi)
        self.S = self.S + phi * y
        self.resolve()
        return self

    def add_ridge(self, lam: float):
        self.ridge += lam
        self.V = self.V + lam * np.eye(self.d)
        self.resolve()

    def resolve(self):
        try:
            self.theta_hat = _dense.solve(self.V, self.S)
        except SingularDesign:
            self.theta_hat = None

    def width(self, phi) -> float:
        """``||phi||_{V^{-1}}``."""
        z = _dense.solve(self.V, phi)
        return math.sqrt(max(float(phi @ z), 0.0))


def lse_update(state: LseState, feature, reward: float) -> LseState:
    """Functional form of :meth:`LseState.update`; the input state is left untouched."""
    return state.copy().update(feature, reward)


def _initial_state(d, init):
    return LseState(d, init.lam if isinstance(init, Ridge) else 0.0)


def forced_arm(state: LseState, rows) -> int:
    """Lowest-index arm whose feature enlarges the span of the pulled features."""
    for a, phi in enumerate(rows):
        if np.any(phi) and state.is_independent(phi):
            return a
    return 0


def greedy_arm(rows, theta) -> int:
    # np.argmax returns the first maximiser: lowest-index tie-break
    return int(np.argmax(rows @ theta))


def _rows(phi):
    if isinstance(phi, np.ndarray):
        return np.atleast_2d(phi.astype(float, copy=False))
    return _as_features(phi).data


def _eps_decide(state, config, rows, t, rng):
    coin = rng.random()
    pick = rng.random()
    if isinstance(config.init, ForcedBasis) and not state.invertible:
        return forced_arm(state, rows), FORCED
    if coin < config.epsilon(t):
        return min(int(pick * len(rows)), len(rows) - 1), EXPLORE
    if not state.invertible:
        raise SingularDesign("greedy step requested before the design matrix is invertible")
    return greedy_arm(rows, state.theta_hat), EXPLOIT


def eps_greedy_action(state, config: EpsGreedyConfig, phi, t: int, rng) -> int:
    """Round-``t`` arm: uniform with probability 1/sqrt(t), otherwise greedy."""
    if t < 1:
        raise ValueError("rounds are counted from t = 1")
    return _eps_decide(state, config, _rows(phi), t, rng)[0]


def ucb_indices(state: LseState, config: LinUCBConfig, rows, t: int) -> np.ndarray:
    """Optimistic value of each arm over the confidence ellipsoid.

    ``max_{theta in C_t} phi . theta = phi . theta_hat + sqrt(beta_t) ||phi||_{V^{-1}}``.
    """
    if not state.invertible:
        raise SingularDesign("LinUCB needs an invertible design matrix")
    radius = math.sqrt(beta(t, state.d, config.R, config.delta))
    widths = np.array([state.width(phi) for phi in rows])
    return rows @ state.theta_hat + radius * widths


def _ucb_decide(state, config, rows, t):
    if isinstance(config.init, ForcedBasis) and not state.invertible:
        return forced_arm(state, rows), FORCED
    return int(np.argmax(ucb_indices(state, config, rows, t))), EXPLOIT


def linucb_action(state, config: LinUCBConfig, phi, t: int) -> int:
    """OFUL arm choice; ``t`` is the number of observations folded into ``state``."""
    return _ucb_decide(state, config, _rows(phi), t)[0]


def contextual_action(state, config, instance: ContextualInstance, x: int, t: int, rng=None) -> int:
    """Bandit action rules restricted to the arms of context ``x``."""
    if not 0 <= x < instance.num_contexts:
        raise IndexError(f"context {x} out of range")
    rows = instance.block(x)
    if isinstance(config, LinUCBConfig):
        return _ucb_decide(state, config, rows, t)[0]
    return _eps_decide(state, config, rows, t, rng)[0]


# ---------------------------------------------------------------------------
# agents


def _feature_table(problem):
    """``(num_contexts, num_arms, d)`` array from a feature matrix or contextual instance."""
    if isinstance(problem, ContextualInstance):
        return np.stack(problem.blocks())
    return _rows(problem)[None, :, :]


class _Agent:
    def __init__(self, problem, config, rng=None):
        self.table = _feature_table(problem)
        self.config = config
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(0))
        self.state = _initial_state(self.table.shape[2], config.init)
        self.round = 0
        self.last_kind = None
        self._pending = None

    def act(self, x: int = 0) -> int:
        self.round += 1
        arm, kind = self._decide(self.table[x])
        self.last_kind = kind
        self._pending = self.table[x, arm]
        return arm

    def learn(self, reward: float):
        if self._pending is None:
            raise RuntimeError("learn() called without a preceding act()")
        self.state.update(self._pending, reward)
        self._pending = None


class EpsGreedyAgent(_Agent):
    def _decide(self, rows):
        return _eps_decide(self.state, self.config, rows, self.round, self.rng)


class LinUCBAgent(_Agent):
    """OFUL agent; after forced exploration it insists on ``lambda_min(V) >= max(1, L^2)``.

    If the forced block is too weak the agent adds ``max(1, L^2) I`` to the
    design (ridge fallback) and emits :class:`RidgeFallbackWarning`.
    """

    def __init__(self, problem, config, rng=None):
        super().__init__(problem, config, rng)
        sq_norms = np.sum(self.table.reshape(-1, self.table.shape[2]) ** 2, axis=1)
        self.required_eig = max(1.0, float(sq_norms.max()))
        self.fell_back = False

    def _decide(self, rows):
        return _ucb_decide(self.state, self.config, rows, self.state.t)

    def learn(self, reward: float):
        was_invertible = self.state.invertible
        super().learn(reward)
        if isinstance(self.config.init, ForcedBasis) and not was_invertible and self.state.invertible:
            if not _dense.exceeds_min_eig(self.state.V.tolist(), self.required_eig * (1.0 - EIG_RTOL)):
                self.state.add_ridge(self.required_eig)
                self.fell_back = True
                warnings.warn(
                    f"forced exploration left lambda_min(V) below {self.required_eig:g}; "
                    f"switching to ridge mode with lambda = {self.required_eig:g}",
                    RidgeFallbackWarning,
                    stacklevel=2,
                )


# ---------------------------------------------------------------------------
# model-space gap


def _gap_over_basics(solutions, diffs):
    vals = solutions.thetas() @ np.asarray(diffs).T
    return float(vals.min())


def model_space_gap(phi, mu) -> float:
    """Smallest modelled advantage of the best arm over any other, over all sampling laws.

    The noiseless estimate ranges over the convex hull of the basic solutions,
    so the minimum of each linear gap is attained at one of them.
    """
    phi = _as_features(phi)
    values = _as_values(mu)
    report = robust_membership(phi, values)
    if not report.is_member:
        raise NotMember("model-space gap is only defined inside the robust region")
    k = report.optimal_arm
    x = phi.data
    diffs = [x[k] - x[i] for i in range(phi.rows) if i != k]
    return _gap_over_basics(enumerate_basic_solutions(phi, values), diffs)


def model_space_gap_contextual(instance: ContextualInstance) -> float:
    report = robust_membership_contextual(instance)
    if not report.is_member:
        raise NotMember("model-space gap is only defined inside the robust region")
    diffs = []
    for x, k in enumerate(report.optimal_arm):
        block = instance.block(x)
        diffs += [block[k] - block[a] for a in range(instance.num_arms) if a != k]
    return _gap_over_basics(enumerate_basic_solutions(instance.features, instance.rewards), diffs)


def reward_gaps(mu):
    """``(delta_min, delta_max)`` over sub-optimal arms of a bandit instance."""
    values = _as_values(mu)
    k = greedy_optimal_arm(values)
    gaps = values[k] - np.delete(values, k)
    return float(gaps.min()), float(gaps.max())
