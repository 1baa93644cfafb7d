import numpy as np
import pytest

from misspec_bandits.env import (
    BanditEnv,
    ContextualEnv,
    NoiseModel,
    context_cdf,
    pick_context,
    trial_streams,
)
from misspec_bandits.errors import ArmOutOfRange
from misspec_bandits.linalg_core import FeatureMatrix
from misspec_bandits.regions import ContextualInstance

PHI = np.array([[2.0, 3.0], [4.0, 5.0], [2.0, 1.0]])
PHI_X2 = np.array([[2.0, 3.0], [4.0, 5.0], [6.0, 7.0]])


def _ctx_instance(probs=(0.5, 0.5)):
    mu = np.array([1.0, 0.2, -0.5, 3.0, 2.0, 0.0])
    return ContextualInstance(FeatureMatrix(np.vstack([PHI, PHI_X2])), mu, np.array(probs), 2, 3)


def test_noiseless_pulls_are_exact():
    env = BanditEnv([20.0, 3.0], NoiseModel(0.0))
    assert env.pull(0) == 20.0
    assert env.pull(1) == 3.0
    assert env.pull_counts.tolist() == [1, 1]
    assert env.rounds == 2


def test_concentration():
    env = BanditEnv([20.0, 3.0], NoiseModel(0.5), rng=trial_streams(1)[0])
    rewards = np.array([env.pull(0) for _ in range(100_000)])
    assert abs(rewards.mean() - 20.0) < 0.01
    assert rewards.std() == pytest.approx(0.5, rel=0.02)


def test_identical_seeds_identical_streams():
    a = BanditEnv([1.0, 2.0], rng=trial_streams(7)[0])
    b = BanditEnv([1.0, 2.0], rng=trial_streams(7)[0])
    assert [a.pull(i % 2) for i in range(50)] == [b.pull(i % 2) for i in range(50)]


def test_streams_are_independent():
    noise, explore, context = trial_streams(3)
    draws = [g.random(5) for g in (noise, explore, context)]
    assert not np.array_equal(draws[0], draws[1])
    assert not np.array_equal(draws[1], draws[2])
    assert isinstance(noise.bit_generator, np.random.Philox)


def test_bulk_and_lazy_draws_agree():
    lazy = trial_streams(5)[0]
    bulk = trial_streams(5)[0]
    assert np.array_equal([lazy.standard_normal() for _ in range(10)], bulk.standard_normal(10))


def test_instant_regret():
    env = BanditEnv([20.0, 3.0])
    assert env.instant_regret(0) == 0.0
    assert env.instant_regret(1) == 17.0
    with pytest.raises(ArmOutOfRange):
        env.pull(2)
    with pytest.raises(IndexError):
        env.instant_regret(-1)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(-1.0)
    with pytest.raises(ValueError):
        NoiseModel(float("inf"))


def test_context_frequencies():
    env = ContextualEnv(_ctx_instance(), context_rng=trial_streams(0)[2])
    xs = np.array([env.step_context() for _ in range(100_000)])
    assert abs(np.mean(xs == 0) - 0.5) < 0.01


def test_single_context_always_zero():
    inst = ContextualInstance(FeatureMatrix(PHI), np.array([1.0, 2.0, 0.0]), np.array([1.0]), 1, 3)
    env = ContextualEnv(inst)
    assert {env.step_context() for _ in range(100)} == {0}


def test_degenerate_context_probs_rejected():
    with pytest.raises(ValueError):
        _ctx_instance((1.0, 0.0))


def test_contextual_regret_and_pulls():
    env = ContextualEnv(_ctx_instance(), NoiseModel(0.0))
    assert env.pull(1, 0) == 3.0
    assert env.instant_regret(0, 1) == 0.0
    assert env.instant_regret(2, 1) == 3.0
    assert env.instant_regret(2, 0) == 1.5
    gaps = [env.instant_regret(a, x) for x in range(2) for a in range(3)]
    assert max(gaps) <= 3.0 and min(gaps) >= 0.0
    with pytest.raises(ArmOutOfRange):
        env.pull(0, 3)


def test_pick_context_inverse_cdf():
    cdf = context_cdf([0.2, 0.3, 0.5])
    assert cdf[-1] == 1.0
    assert pick_context(cdf, 0.0) == 0
    assert pick_context(cdf, 0.2) == 1
    assert pick_context(cdf, 0.49) == 1
    assert pick_context(cdf, 0.999) == 2
