import json
import math

import numpy as np
import pytest

from misspec_bandits.errors import ConfigError, InsufficientData, NotMember
from misspec_bandits.harness import (
    ExperimentConfig,
    RegretTrace,
    compute_stats,
    emit_outputs,
    growth_exponent,
    logged_rounds,
    read_regret_csv,
    regret_csv,
    run_experiment,
)

PHI = [[2.0, 3.0], [4.0, 5.0], [2.0, 1.0]]


def _cfg(**kw):
    doc = {"features": PHI, "instance": {"mu": [4.847, 9.972, -0.8]}, "horizon": 1000, "trials": 3}
    doc.update(kw)
    return ExperimentConfig.from_dict(doc)


def test_csv_rows_and_roundtrip(tmp_path):
    result = run_experiment(_cfg())
    paths = emit_outputs(result, tmp_path)
    assert {p.name for p in paths} == {"regret.csv", "stats.txt", "regret.svg"}
    text = (tmp_path / "regret.csv").read_text()
    assert len(text.splitlines()) == 1001
    rounds, trials = read_regret_csv(tmp_path / "regret.csv")
    assert rounds[0] == 1 and rounds[-1] == 1000
    assert np.array_equal(trials, result.trace.trials)


def test_csv_mean_std_recomputable(tmp_path):
    result = run_experiment(_cfg())
    emit_outputs(result, tmp_path)
    rows = [list(map(float, r.split(","))) for r in (tmp_path / "regret.csv").read_text().splitlines()[1:]]
    arr = np.array(rows)
    trials = arr[:, 1:4]
    assert np.allclose(arr[:, 4], trials.mean(axis=1), atol=1e-12)
    assert np.allclose(arr[:, 5], trials.std(axis=1), atol=1e-12)
    assert np.allclose(arr[:, 6], arr[:, 4] - 3 * arr[:, 5])


def test_runs_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    emit_outputs(run_experiment(_cfg()), a)
    emit_outputs(run_experiment(_cfg()), b)
    for name in ("regret.csv", "stats.txt", "regret.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_jobs_do_not_change_results():
    one = run_experiment(_cfg(trials=4), jobs=1)
    two = run_experiment(_cfg(trials=4), jobs=2)
    assert np.array_equal(one.trace.trials, two.trace.trials)


def test_noiseless_single_trial_std_zero():
    result = run_experiment(_cfg(sigma=0.0, trials=1, horizon=1))
    assert result.trace.horizon == 1
    assert result.trace.std[0] == 0.0


def test_logged_rounds_thinning():
    assert logged_rounds(5).tolist() == [1, 2, 3, 4, 5]
    r = logged_rounds(250_001)
    assert r[-1] == 250_001 and len(r) <= 100_001
    assert r[0] == 3


def test_growth_exponent_known_curves():
    t = np.arange(1, 5001, dtype=float)
    assert growth_exponent(np.sqrt(t)) == pytest.approx(0.5, abs=1e-9)
    assert growth_exponent(3 * t) == pytest.approx(1.0, abs=1e-9)
    assert growth_exponent(RegretTrace(np.vstack([np.sqrt(t)] * 2))) == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(InsufficientData):
        growth_exponent(np.ones(99))
    with pytest.raises(InsufficientData):
        growth_exponent(np.zeros(500))


def test_compute_stats_scalar_example():
    s = compute_stats(np.array([[3.0], [1.0]]), np.array([20.0, 3.0]))
    assert s.rho == pytest.approx(2.75)
    assert s.delta_min == pytest.approx(17.0)
    assert s.margin == pytest.approx(3.0)  # rows reduce to mu_0 > 0 and mu_1 > 0
    assert s.model_gap == pytest.approx(6.0)
    assert s.member and s.optimal_arm == 0


def test_compute_stats_nonmember_and_tie():
    s = compute_stats(np.array(PHI), np.array([1.0, 0.0, 3.0]))
    assert not s.member and s.margin == 0.0 and s.model_gap is None
    t = compute_stats(np.array(PHI), np.array([1.0, 3.0, 3.0]))
    assert t.optimal_arm == "tied" and t.delta_min == 0.0


def test_nonmember_run_refused_unless_allowed():
    with pytest.raises(NotMember):
        run_experiment(_cfg(instance={"mu": [1.0, 0.0, 3.0]}, horizon=10))
    run_experiment(_cfg(instance={"mu": [1.0, 0.0, 3.0]}, horizon=10, allow_nonrobust=True))


def test_sampled_instance_writes_region_points(tmp_path):
    cfg = _cfg(instance={"sample": {"arm": 1, "box": [-10, 10], "seed": 0}}, horizon=200)
    paths = emit_outputs(run_experiment(cfg), tmp_path)
    assert "region_points.csv" in {p.name for p in paths}
    lines = (tmp_path / "region_points.csv").read_text().splitlines()
    assert lines[0] == "mu_0,mu_1,mu_2,accepted"
    assert len(lines) == 2001


@pytest.mark.parametrize("doc", [
    {"features": PHI, "instance": {"mu": [1, 2]}},
    {"features": PHI, "instance": {}},
    {"features": PHI, "instance": {"mu": [1, 2, 3]}, "algorithm": {"name": "thompson"}},
    {"features": PHI, "instance": {"mu": [1, 2, 3]}, "algorithm": {"init": {"ridge": -1}}},
    {"features": PHI, "instance": {"mu": [1, 2, 3]}, "horizon": 0},
    {"features": PHI, "instance": {"mu": [1, 2, 3]}, "bogus": 1},
    {"contexts": [PHI, PHI], "context_probs": [0.5, 0.4], "instance": {"mu": [0] * 6}},
])
def test_bad_configs(doc):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(doc)


def test_from_json_with_features_file(tmp_path):
    (tmp_path / "phi.json").write_text(json.dumps(PHI))
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"features_file": "phi.json", "instance": {"mu": [4.847, 9.972, -0.8]}}))
    cfg = ExperimentConfig.from_json(cfg_path, base_seed=5)
    assert cfg.base_seed == 5 and cfg.features.shape == (3, 2)


def test_stats_text_fields(tmp_path):
    emit_outputs(run_experiment(_cfg()), tmp_path)
    keys = [line.split("=")[0] for line in (tmp_path / "stats.txt").read_text().splitlines()]
    for k in ("rho", "delta_min", "margin", "model_gap", "member", "mu", "algorithm", "growth_exponent"):
        assert k in keys
    assert math.isfinite(float(dict(l.split("=", 1) for l in (tmp_path / "stats.txt").read_text().splitlines())["rho"]))
