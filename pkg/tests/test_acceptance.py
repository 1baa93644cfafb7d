"""Acceptance suite: one or more tests per criterion, summarised at the end of the run.

Run on its own with ``pytest tests/test_acceptance.py`` (or ``python3
tests/test_acceptance.py``); the terminal summary prints a PASS/FAIL line for
each criterion followed by the measured quantities.
"""
import json
import sys
import warnings
from itertools import combinations
from time import perf_counter

import numpy as np
import pytest

from misspec_bandits.algorithms import suboptimal_play_bound
from misspec_bandits.cli import main
from misspec_bandits.harness import ExperimentConfig, growth_exponent, run_experiment
from misspec_bandits.linalg_core import (
    chebyshev_misspec,
    enumerate_basic_solutions,
    forsgren_weights,
    weighted_lse,
)
from misspec_bandits.regions import (
    robust_membership,
    robust_membership_ridge,
    sample_robust_contextual,
    sample_robust_instances,
    signed_margin,
)

PHI = [[2, 3], [4, 5], [2, 1]]
PHI_X2 = [[2, 3], [4, 5], [6, 7]]
BOX = [-10, 10]
T = 20_000


def _cli_json(capsys, argv):
    code = main(argv + ["--json"])
    return code, json.loads(capsys.readouterr().out)


def _region_mask(constraints, theta):
    a = np.asarray(constraints, dtype=float)
    return np.all(theta @ a.T > 0, axis=1)


# ---------------------------------------------------------------------------
# 1


@pytest.mark.criterion(1, "weighted LSE equals the Forsgren combination of basic solutions")
def test_forsgren_identity(record_property):
    rng = np.random.default_rng(20240601)
    worst = 0.0
    start = perf_counter()
    for _ in range(1000):
        k = int(rng.integers(3, 7))
        d = int(rng.integers(1, 4))
        phi = rng.standard_normal((k, d))
        mu = 5.0 * rng.standard_normal(k)
        lam = rng.dirichlet(np.ones(k))
        theta = weighted_lse(phi, lam, mu)
        weights = forsgren_weights(phi, lam)
        basics = {b.subset: b.theta for b in enumerate_basic_solutions(phi, mu)}
        recon = sum(w * basics[j] for j, w in weights.items() if w > 0)
        worst = max(worst, float(np.max(np.abs(recon - theta)) / np.max(np.abs(theta))))
    elapsed = perf_counter() - start
    record_property("max_rel_err", f"{worst:.2e}")
    record_property("seconds", f"{elapsed:.2f}")
    assert worst <= 1e-8
    assert elapsed < 5.0


# ---------------------------------------------------------------------------
# 2

PRINTED = {
    0: lambda t1, t2: (t1 < -t2) & (t2 > 0),
    1: lambda t1, t2: ((t1 > 0) & (t2 > -t1 / 2)) | ((t1 < 0) & (t2 > -t1)),
    2: lambda t1, t2: (t2 < 0) & (t2 < -t1 / 2),
}
PRINTED_X2 = {
    0: lambda t1, t2: t1 < -t2,
    2: lambda t1, t2: t1 > -t2,
}
PRINTED_PAIRS = {
    (0, 0): PRINTED[0],
    (2, 0): lambda t1, t2: (t1 < -t2) & (t2 < 0),
    (1, 2): PRINTED[1],
    (2, 2): lambda t1, t2: (t2 < 0) & (-t1 < t2) & (t2 < -t1 / 2),
}


@pytest.mark.criterion(2, "parameter regions match the printed formulas")
def test_region_formulas(tmp_path, capsys, record_property):
    start = perf_counter()
    plain = tmp_path / "phi.json"
    plain.write_text(json.dumps(PHI))
    ctx = tmp_path / "ctx.json"
    ctx.write_text(json.dumps({"contexts": [PHI, PHI_X2], "context_probs": [0.5, 0.5]}))

    theta = np.random.default_rng(2).uniform(-10, 10, (100_000, 2))
    t1, t2 = theta[:, 0], theta[:, 1]
    disagreements = 0

    code, out = _cli_json(capsys, ["regions", str(plain)])
    assert code == 0
    for k, formula in PRINTED.items():
        disagreements += int(np.count_nonzero(_region_mask(out[str(k)]["constraints"], theta) != formula(t1, t2)))

    code, out = _cli_json(capsys, ["regions", str(ctx)])
    assert code == 0
    second = out["1:1"]
    assert second is None or second["empty"]
    for k, formula in PRINTED.items():
        disagreements += int(np.count_nonzero(_region_mask(out[f"0:{k}"]["constraints"], theta) != formula(t1, t2)))
    for k, formula in PRINTED_X2.items():
        disagreements += int(np.count_nonzero(_region_mask(out[f"1:{k}"]["constraints"], theta) != formula(t1, t2)))
    for (i, j), formula in PRINTED_PAIRS.items():
        entry = out[f"arms={i},{j}"]
        assert not entry["empty"]
        disagreements += int(np.count_nonzero(_region_mask(entry["constraints"], theta) != formula(t1, t2)))
    empty_pairs = sorted(k for k, v in out.items() if k.startswith("arms=") and v["empty"])
    assert empty_pairs == ["arms=0,1", "arms=0,2", "arms=1,0", "arms=1,1", "arms=2,1"]
    elapsed = perf_counter() - start
    record_property("disagreements", disagreements)
    record_property("seconds", f"{elapsed:.2f}")
    assert disagreements == 0
    assert elapsed < 2.0


# ---------------------------------------------------------------------------
# 3


@pytest.mark.criterion(3, "worked two-arm example numbers")
def test_worked_example(tmp_path, capsys, record_property):
    phi = tmp_path / "phi.json"
    phi.write_text(json.dumps([[3], [1]]))
    _, a = _cli_json(capsys, ["stats", str(phi), "20,3"])
    _, b = _cli_json(capsys, ["stats", str(phi), "20,18"])
    record_property("rho_20_3", a["rho"])
    record_property("rho_20_18", b["rho"])
    record_property("gap_20_18", b["delta_min"])
    assert a["rho"] == pytest.approx(2.75, abs=1e-6)
    assert b["rho"] == pytest.approx(8.5, abs=1e-6)
    assert b["delta_min"] == pytest.approx(2.0, abs=1e-6)


# ---------------------------------------------------------------------------
# 4


def _simplex_grid(n, k=3):
    pts = [(i, j, n - i - j) for i in range(n + 1) for j in range(n + 1 - i)]
    return np.array(pts, dtype=float)[:, :k] / n


def _brute_force_member(phi, mu, weights, k):
    """Every weight vector must yield an estimate whose strict best arm is ``k``."""
    design = np.einsum("gi,ij,il->gjl", weights, phi, phi)
    rhs = np.einsum("gi,ij,i->gj", weights, phi, mu)
    theta = np.linalg.solve(design, rhs[..., None])[..., 0]
    vals = theta @ phi.T
    others = np.delete(vals, k, axis=1)
    return bool(np.all(vals[:, k] > others.max(axis=1)))


@pytest.mark.criterion(4, "membership agrees with a brute-force sampling-law oracle")
def test_membership_brute_force(record_property, quiet):
    start = perf_counter()
    phi = np.array(PHI, dtype=float)
    grid = _simplex_grid(140)
    grid = grid[np.count_nonzero(grid > 0, axis=1) >= 2]  # single-row designs are singular
    eps = 1e-6
    near = []
    for subset in combinations(range(3), 2):
        w = np.full(3, eps)
        w[list(subset)] = (1 - eps) / 2
        near.append(w)
    weights = np.vstack([grid, near])

    rng = np.random.default_rng(4)
    checked = disagreements = members = skipped = 0
    while checked < 200:
        mu = rng.uniform(-10, 10, 3)
        if abs(signed_margin(phi, mu)) < 1e-6:
            skipped += 1
            continue
        report = robust_membership(phi, mu)
        oracle = _brute_force_member(phi, mu, weights, int(np.argmax(mu)))
        disagreements += int(report.is_member != oracle)
        members += int(report.is_member)
        checked += 1
    elapsed = perf_counter() - start
    record_property("instances", checked)
    record_property("members", members)
    record_property("skipped", skipped)
    record_property("disagreements", disagreements)
    record_property("seconds", f"{elapsed:.2f}")
    assert disagreements == 0
    assert elapsed < 30.0


# ---------------------------------------------------------------------------
# 5


def _band_ok(result, t_from=1000):
    t = np.arange(1, result.trace.horizon + 1)
    line = 5.0 * result.stats.delta_max * np.sqrt(t)
    return bool(np.all(result.trace.hi3[t_from - 1:] < line[t_from - 1:]))


@pytest.mark.criterion(5, "epsilon-greedy regret grows sublinearly")
def test_eps_greedy_sublinear(record_property):
    start = perf_counter()
    exps, ratios, bands = [], [], []
    for i in range(5):
        cfg = ExperimentConfig.from_dict({
            "features": PHI,
            "instance": {"sample": {"arm": 1, "box": BOX, "seed": 0, "index": i}},
            "horizon": T, "trials": 10, "sigma": 0.5,
        })
        result = run_experiment(cfg)
        assert result.stats.member
        mean = result.trace.mean
        exps.append(growth_exponent(result.trace))
        ratios.append(float(mean[-1] / mean[T // 4 - 1]))
        bands.append(_band_ok(result))
    elapsed = perf_counter() - start
    record_property("exponents", "/".join(f"{e:.3f}" for e in exps))
    record_property("ratios", "/".join(f"{r:.3f}" for r in ratios))
    record_property("seconds", f"{elapsed:.1f}")
    assert max(exps) <= 0.70
    assert max(ratios) <= 2.6
    assert all(bands)
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 6


@pytest.mark.criterion(6, "LinUCB sub-optimal plays stay under the high-probability bound")
def test_linucb_suboptimal_plays(record_property):
    start = perf_counter()
    cfg = ExperimentConfig.from_dict({
        "features": PHI,
        "instance": {"sample": {"arm": 1, "box": BOX, "seed": 0}},
        "algorithm": {"name": "linucb", "R": 0.5, "delta": 0.05},
        "horizon": T, "trials": 20, "sigma": 0.5,
    })
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = run_experiment(cfg)
    gap = result.stats.model_gap
    bound = suboptimal_play_bound(T, 2, 0.5, 0.05, gap)
    plays = result.suboptimal_plays()
    within = int(np.count_nonzero(plays < bound))
    elapsed = perf_counter() - start
    record_property("model_gap", f"{gap:.4f}")
    record_property("bound", f"{bound:.1f}")
    record_property("max_plays", int(plays.max()))
    record_property("runs_within", f"{within}/20")
    record_property("seconds", f"{elapsed:.1f}")
    assert within >= 19
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 7


@pytest.mark.criterion(7, "contextual epsilon-greedy regret grows sublinearly")
def test_contextual_sublinear(record_property):
    exps, excess = [], []
    for i in range(5):
        cfg = ExperimentConfig.from_dict({
            "contexts": [PHI, PHI_X2], "context_probs": [0.5, 0.5],
            "instance": {"sample": {"arms": [0, 0], "box": BOX, "seed": 0, "index": i}},
            "horizon": T, "trials": 10, "sigma": 0.5,
        })
        result = run_experiment(cfg)
        assert result.stats.member
        exps.append(growth_exponent(result.trace))
        excess.append(result.stats.rho > result.stats.delta_min)
    record_property("exponents", "/".join(f"{e:.3f}" for e in exps))
    record_property("rho_gt_delta_min", f"{sum(excess)}/5")
    assert max(exps) <= 0.70
    if not any(excess):
        blocks = [np.array(PHI, float), np.array(PHI_X2, float)]
        found = False
        for inst in sample_robust_contextual(blocks, [0, 0], *BOX, seed=1, n=1000, max_draws=1_000_000):
            grid = inst.rewards.values.reshape(2, 3)
            gaps = (grid.max(axis=1, keepdims=True) - grid)
            if chebyshev_misspec(inst.features, inst.rewards) > gaps[gaps > 0].min():
                found = True
                break
        pytest.fail("none of the five instances has rho > delta_min; "
                    + ("a later draw does" if found else "no draw within 10^6 does"))


# ---------------------------------------------------------------------------
# 8


@pytest.mark.criterion(8, "ridge characterisation is consistent with the plain one")
def test_ridge_limit_membership(record_property, quiet):
    phi = np.array(PHI, dtype=float)
    rng = np.random.default_rng(8)
    disagreements = 0
    for _ in range(500):
        mu = rng.uniform(-10, 10, 3)
        plain = robust_membership(phi, mu).is_member
        ridge = robust_membership_ridge(phi, mu, 1e-9).is_member
        disagreements += int(plain != ridge)
    record_property("disagreements", f"{disagreements}/500")
    assert disagreements == 0


@pytest.mark.criterion(8, "ridge characterisation is consistent with the plain one")
def test_ridge_eps_greedy_sublinear(record_property):
    cfg = ExperimentConfig.from_dict({
        "features": PHI,
        "instance": {"sample": {"arm": 1, "box": BOX, "seed": 0}},
        "algorithm": {"name": "eps_greedy", "init": {"ridge": 1.0}},
        "horizon": T, "trials": 10, "sigma": 0.5,
    })
    result = run_experiment(cfg)
    exponent = growth_exponent(result.trace)
    record_property("mu", ",".join(f"{v:.3f}" for v in result.mu))
    record_property("exponent", f"{exponent:.3f}")
    assert result.stats.member
    assert exponent <= 0.70


# ---------------------------------------------------------------------------
# 9


def _noiseless_greedy_regret(doc, mu, seed):
    cfg = ExperimentConfig.from_dict({**doc, "instance": {"mu": list(map(float, mu))},
                                      "horizon": 2000, "trials": 1, "sigma": 0.0, "base_seed": seed})
    result = run_experiment(cfg)
    return float(result.greedy_regret()[0]), int(np.count_nonzero(result.records[0].kinds == 2))


@pytest.mark.criterion(9, "noiseless greedy rounds never pick a sub-optimal arm")
def test_noiseless_greedy(record_property, quiet):
    phi = np.array(PHI, dtype=float)
    bandit = [m.values for k in range(3) for m in sample_robust_instances(phi, k, *BOX, seed=100 + k, n=17)][:50]
    blocks = [phi, np.array(PHI_X2, dtype=float)]
    contextual = [c.rewards.values for arms in [(0, 0), (2, 0), (1, 2)]
                  for c in sample_robust_contextual(blocks, arms, *BOX, seed=5, n=17)][:50]
    regret, greedy_rounds = 0.0, 0
    for i, mu in enumerate(bandit):
        r, g = _noiseless_greedy_regret({"features": PHI}, mu, i)
        regret += r
        greedy_rounds += g
    for i, mu in enumerate(contextual):
        r, g = _noiseless_greedy_regret({"contexts": [PHI, PHI_X2]}, mu, i)
        regret += r
        greedy_rounds += g
    record_property("instances", len(bandit) + len(contextual))
    record_property("greedy_rounds", greedy_rounds)
    record_property("greedy_regret", regret)
    assert len(bandit) == 50 and len(contextual) == 50
    assert regret == 0.0


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
