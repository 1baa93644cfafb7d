"""Seeded stochastic bandit and contextual-bandit environments.

Randomness contract
-------------------
A trial seeded with ``s`` owns three independent Philox streams obtained from
``SeedSequence(s).spawn(3)``, in this order:

``NOISE``    one standard normal per pull (reward noise),
``EXPLORE``  two uniforms per round for the agent (exploration coin, then the
             uniform-arm draw); both are consumed every round,
``CONTEXT``  one uniform per round, mapped to a context by inverse CDF.

Drawing these lazily (one call per event) or in bulk arrays yields the same
numbers, which is what lets the compiled simulation kernel reproduce the
object-level environment exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArmOutOfRange
from .linalg_core import RewardInstance
from .regions import ContextualInstance

NOISE, EXPLORE, CONTEXT = range(3)
DEFAULT_SIGMA = 0.5


def trial_streams(seed: int):
    """The three per-trial generators ``(noise, explore, context)``."""
    children = np.random.SeedSequence(seed).spawn(3)
    return tuple(np.random.Generator(np.random.Philox(c)) for c in children)


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian reward noise with standard deviation ``sigma``.

    A Gaussian with standard deviation sigma is sigma-sub-Gaussian; sigma = 0
    gives noiseless observations.
    """

    sigma: float = DEFAULT_SIGMA

    def __post_init__(self):
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ValueError("sigma must be a finite nonnegative number")


class BanditEnv:
    """K-armed environment returning ``mu[arm] + sigma * N(0, 1)``."""

    def __init__(self, mu, noise=NoiseModel(), rng=None):
        self.mu = mu if isinstance(mu, RewardInstance) else RewardInstance(mu)
        self.noise = noise if isinstance(noise, NoiseModel) else NoiseModel(noise)
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(0))
        self.pull_counts = np.zeros(len(self.mu), dtype=np.int64)
        self._best = float(np.max(self.mu.values))

    @property
    def num_arms(self):
        return len(self.mu)

    @property
    def rounds(self):
        return int(self.pull_counts.sum())

    def pull(self, arm: int) -> float:
        if not 0 <= arm < self.num_arms:
            raise ArmOutOfRange(f"arm {arm} not in [0, {self.num_arms})")
        z = self.rng.standard_normal()
        self.pull_counts[arm] += 1
        return float(self.mu.values[arm] + self.noise.sigma * z)

    def instant_regret(self, arm: int) -> float:
        if not 0 <= arm < self.num_arms:
            raise ArmOutOfRange(f"arm {arm} not in [0, {self.num_arms})")
        return self._best - float(self.mu.values[arm])


class ContextualEnv:
    """Contexts drawn i.i.d. from ``context_probs``; rewards as in :class:`BanditEnv`."""

    def __init__(self, instance: ContextualInstance, noise=NoiseModel(), rng=None, context_rng=None):
        self.instance = instance
        self.noise = noise if isinstance(noise, NoiseModel) else NoiseModel(noise)
        self.rng = rng if rng is not None else np.random.Generator(np.random.Philox(0))
        self.context_rng = context_rng if context_rng is not None else self.rng
        self.cdf = context_cdf(instance.context_probs)
        self.pull_counts = np.zeros(len(instance.rewards), dtype=np.int64)
        self._gaps = instance.gaps()

    @property
    def num_arms(self):
        return self.instance.num_arms

    def step_context(self) -> int:
        return pick_context(self.cdf, self.context_rng.random())

    def pull(self, x: int, arm: int) -> float:
        if not 0 <= arm < self.num_arms:
            raise ArmOutOfRange(f"arm {arm} not in [0, {self.num_arms})")
        row = x * self.num_arms + arm
        z = self.rng.standard_normal()
        self.pull_counts[row] += 1
        return float(self.instance.rewards.values[row] + self.noise.sigma * z)

    def instant_regret(self, arm: int, x: int) -> float:
        if not 0 <= arm < self.num_arms:
            raise ArmOutOfRange(f"arm {arm} not in [0, {self.num_arms})")
        return float(self._gaps[x * self.num_arms + arm])


def context_cdf(probs) -> np.ndarray:
    cdf = np.cumsum(np.asarray(probs, dtype=float))
    cdf[-1] = 1.0
    return cdf


def pick_context(cdf, u: float) -> int:
    x = int(np.searchsorted(cdf, u, side="right"))
    return min(x, len(cdf) - 1)
