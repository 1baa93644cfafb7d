"""Seeded multi-trial regret experiments, instance statistics and file outputs.

An experiment is described by a JSON document::

    {
      "features": [[2, 3], [4, 5], [2, 1]],          # or "contexts": [block, ...]
      "context_probs": [0.5, 0.5],                    # contextual only
      "instance": {"mu": [1.0, 3.2, -1.5]},           # or {"sample": {...}}
      "algorithm": {"name": "eps_greedy", "init": "forced"},
      "horizon": 20000, "trials": 10, "base_seed": 0, "sigma": 0.5
    }

``instance.sample`` takes ``arm`` (or ``arms``, one per context), ``box``
(``[lo, hi]``), ``seed`` and an optional ``index`` choosing the i-th accepted
draw.  ``algorithm.init`` is ``"forced"`` or ``{"ridge": lam}``; LinUCB also
reads ``R`` and ``delta``.  Trial ``i`` uses seed ``base_seed + i``.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernel
from .algorithms import model_space_gap, model_space_gap_contextual
from .env import DEFAULT_SIGMA, context_cdf, trial_streams
from .errors import (
    BoundaryWarning,
    ConfigError,
    InsufficientData,
    NotMember,
    RidgeFallbackWarning,
    TiedOptimum,
)
from .linalg_core import FeatureMatrix, RewardInstance, chebyshev_misspec
from .regions import (
    ContextualInstance,
    observation_constraints,
    observation_constraints_contextual,
    observation_constraints_ridge,
    robust_membership,
    robust_membership_contextual,
    robust_membership_ridge,
    sample_region_points,
    sample_robust_contextual,
    sample_robust_instances,
    sample_robust_instances_ridge,
)

CSV_MAX_ROWS = 100_000
REGION_POINTS = 2000


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class AlgorithmSpec:
    name: str = "eps_greedy"
    ridge: float = 0.0  # 0 means forced-basis initialisation
    R: float = DEFAULT_SIGMA
    delta: float = 0.05

    @property
    def code(self) -> int:
        return kernel.EPS_GREEDY if self.name == "eps_greedy" else kernel.LINUCB

    @property
    def init_label(self) -> str:
        return f"ridge({self.ridge!r})" if self.ridge > 0 else "forced"


@dataclass(frozen=True)
class ExperimentConfig:
    features: np.ndarray  # stacked (C * A) x d
    num_contexts: int = 1
    context_probs: tuple = (1.0,)
    mu: tuple | None = None
    sample: dict | None = None
    algorithm: AlgorithmSpec = field(default_factory=AlgorithmSpec)
    horizon: int = 20_000
    trials: int = 10
    base_seed: int = 0
    sigma: float = DEFAULT_SIGMA
    allow_nonrobust: bool = False
    out: str | None = None

    @property
    def contextual(self) -> bool:
        return self.num_contexts > 1

    @property
    def num_arms(self) -> int:
        return self.features.shape[0] // self.num_contexts

    @classmethod
    def from_json(cls, path, **overrides) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        doc.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(doc, base_dir=path.parent)

    @classmethod
    def from_dict(cls, doc: dict, base_dir=Path(".")) -> "ExperimentConfig":
        known = {"features", "features_file", "contexts", "context_probs", "instance", "algorithm",
                 "horizon", "trials", "base_seed", "sigma", "allow_nonrobust", "out"}
        extra = set(doc) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        feats, num_contexts, probs = load_features(doc, base_dir)

        inst = doc.get("instance")
        if not isinstance(inst, dict) or ("mu" in inst) == ("sample" in inst):
            raise ConfigError("instance must hold exactly one of 'mu' or 'sample'")
        mu = sample = None
        if "mu" in inst:
            mu = tuple(float(v) for v in inst["mu"])
            if len(mu) != feats.shape[0]:
                raise ConfigError(f"mu has {len(mu)} entries, features have {feats.shape[0]} rows")
        else:
            sample = dict(inst["sample"])
            if "box" not in sample or len(sample["box"]) != 2:
                raise ConfigError("sample.box must be [lo, hi]")
            arms = sample.get("arms", sample.get("arm"))
            if arms is None:
                raise ConfigError("sample needs 'arm' (or 'arms' per context)")
            arms = [int(a) for a in np.atleast_1d(arms)]
            if len(arms) != num_contexts:
                raise ConfigError("sample needs one target arm per context")
            sample["arms"] = arms
            sample.setdefault("seed", 0)
            sample.setdefault("index", 0)

        alg = doc.get("algorithm", {})
        if isinstance(alg, str):
            alg = {"name": alg}
        name = alg.get("name", "eps_greedy")
        if name not in ("eps_greedy", "linucb"):
            raise ConfigError(f"unknown algorithm {name!r}")
        init = alg.get("init", "forced")
        if init == "forced":
            ridge = 0.0
        elif isinstance(init, dict) and "ridge" in init and float(init["ridge"]) > 0:
            ridge = float(init["ridge"])
        else:
            raise ConfigError("algorithm.init must be 'forced' or {'ridge': positive number}")
        spec = AlgorithmSpec(name, ridge, float(alg.get("R", DEFAULT_SIGMA)), float(alg.get("delta", 0.05)))
        if not spec.R > 0 or not 0 < spec.delta < 1:
            raise ConfigError("LinUCB needs R > 0 and 0 < delta < 1")

        cfg = cls(
            features=feats,
            num_contexts=num_contexts,
            context_probs=probs,
            mu=mu,
            sample=sample,
            algorithm=spec,
            horizon=int(doc.get("horizon", 20_000)),
            trials=int(doc.get("trials", 10)),
            base_seed=int(doc.get("base_seed", 0)),
            sigma=float(doc.get("sigma", DEFAULT_SIGMA)),
            allow_nonrobust=bool(doc.get("allow_nonrobust", False)),
            out=doc.get("out"),
        )
        if cfg.horizon < 1 or cfg.trials < 1:
            raise ConfigError("horizon and trials must be at least 1")
        if not (cfg.sigma >= 0 and math.isfinite(cfg.sigma)):
            raise ConfigError("sigma must be finite and nonnegative")
        return cfg

    def echo(self) -> dict:
        return {
            "algorithm": self.algorithm.name,
            "init": self.algorithm.init_label,
            "R": self.algorithm.R,
            "delta": self.algorithm.delta,
            "horizon": self.horizon,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "sigma": self.sigma,
            "num_contexts": self.num_contexts,
            "num_arms": self.num_arms,
            "context_probs": list(self.context_probs),
        }


def load_features(doc, base_dir=Path(".")):
    """``(stacked features, num_contexts, context_probs)`` from a config-like document.

    Accepts a bare matrix, ``{"features": ...}``, ``{"features_file": path}``
    or ``{"contexts": [block, ...], "context_probs": [...]}``.
    """
    if isinstance(doc, list):
        doc = {"features": doc}
    if "features_file" in doc:
        try:
            sub = json.loads((Path(base_dir) / doc["features_file"]).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read features file: {exc}") from exc
        return load_features(sub, base_dir)
    try:
        if "contexts" in doc:
            blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in doc["contexts"]]
            if not blocks or any(b.shape != blocks[0].shape for b in blocks):
                raise ConfigError("all context blocks must have the same shape")
            feats = np.vstack(blocks)
            c = len(blocks)
            probs = doc.get("context_probs") or [1.0 / c] * c
        elif "features" in doc:
            feats = np.asarray(doc["features"], dtype=float)
            if feats.ndim == 1:
                feats = feats[:, None]
            c, probs = 1, [1.0]
        else:
            raise ConfigError("no 'features' or 'contexts' entry")
        FeatureMatrix(feats)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid feature matrix: {exc}") from exc
    probs = tuple(float(p) for p in probs)
    if len(probs) != c or any(p <= 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
        raise ConfigError("context_probs must be positive, one per context, summing to 1")
    return feats, c, probs


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True)
class RegretTrace:
    """Per-trial cumulative regret, shape ``(trials, T)``, with population-std bands."""

    trials: np.ndarray

    @property
    def horizon(self) -> int:
        return self.trials.shape[1]

    @property
    def mean(self) -> np.ndarray:
        return self.trials.mean(axis=0)

    @property
    def std(self) -> np.ndarray:
        return self.trials.std(axis=0)  # ddof=0

    @property
    def lo3(self) -> np.ndarray:
        return self.mean - 3.0 * self.std

    @property
    def hi3(self) -> np.ndarray:
        return self.mean + 3.0 * self.std


@dataclass(frozen=True)
class InstanceStats:
    rho: float
    delta_min: float
    delta_max: float
    margin: float
    model_gap: float | None
    member: bool
    optimal_arm: object

    def items(self):
        out = [("rho", self.rho), ("delta_min", self.delta_min), ("delta_max", self.delta_max),
               ("margin", self.margin)]
        if self.model_gap is not None:
            out.append(("model_gap", self.model_gap))
        out += [("member", self.member), ("optimal_arm", self.optimal_arm)]
        return out


@dataclass
class TrialRecord:
    seed: int
    contexts: np.ndarray
    actions: np.ndarray
    kinds: np.ndarray
    cum_regret: np.ndarray
    fell_back: bool


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    mu: np.ndarray
    trace: RegretTrace
    stats: InstanceStats
    records: list
    optimal: np.ndarray  # per context

    def suboptimal_plays(self) -> np.ndarray:
        return np.array([int(np.count_nonzero(r.actions != self.optimal[r.contexts])) for r in self.records])

    def greedy_regret(self) -> np.ndarray:
        """Regret accumulated on exploit rounds only, per trial."""
        out = []
        for r in self.records:
            inst = np.diff(np.concatenate([[0.0], r.cum_regret]))
            out.append(float(inst[r.kinds == kernel.EXPLOIT].sum()))
        return np.array(out)


# ---------------------------------------------------------------------------
# statistics


def _gap_range(mu, num_contexts):
    mu = np.asarray(mu, dtype=float).reshape(num_contexts, -1)
    gaps = (mu.max(axis=1, keepdims=True) - mu).reshape(-1)
    positive = gaps[gaps > 0]
    if positive.size == 0:
        return 0.0, 0.0
    return float(positive.min()), float(positive.max())


def compute_stats(phi, mu, ridge: float | None = None, contextual: ContextualInstance | None = None,
                  num_contexts: int = 1) -> InstanceStats:
    """rho, reward gaps, interior margin, model-space gap and membership of one instance.

    Non-members report ``margin = 0`` and no model gap; the model gap is also
    left out in ridge mode, where the plain basic-solution hull does not apply.
    """
    values = np.asarray(contextual.rewards.values if contextual is not None else mu, dtype=float).reshape(-1)
    feats = contextual.features if contextual is not None else phi
    rho = chebyshev_misspec(feats, values)
    if contextual is not None:
        num_contexts = contextual.num_contexts
    mu_grid = values.reshape(num_contexts, -1)
    tied = any(np.count_nonzero(r == r.max()) > 1 for r in mu_grid)
    if tied:
        # a tie makes the smallest gap 0 and excludes the instance from every region
        return InstanceStats(rho, 0.0, float((mu_grid.max(axis=1, keepdims=True) - mu_grid).max()),
                             0.0, None, False, "tied")
    dmin, dmax = _gap_range(values, num_contexts)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BoundaryWarning)
        if contextual is not None:
            report = robust_membership_contextual(contextual)
        elif ridge:
            report = robust_membership_ridge(phi, values, ridge)
        else:
            report = robust_membership(phi, values)
        gap = None
        if report.is_member and not ridge:
            gap = model_space_gap_contextual(contextual) if contextual is not None else model_space_gap(phi, values)
    arm = report.optimal_arm
    if isinstance(arm, tuple):
        arm = ",".join(map(str, arm))
    return InstanceStats(rho, dmin, dmax, report.margin if report.is_member else 0.0, gap, report.is_member, arm)


def growth_exponent(trace, tail_fraction: float = 0.5) -> float:
    """Log-log OLS slope of mean cumulative regret over the last ``tail_fraction`` of rounds."""
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    mean = trace.mean if isinstance(trace, RegretTrace) else np.asarray(trace, dtype=float)
    T = mean.shape[0]
    if T < 100:
        raise InsufficientData(f"need at least 100 rounds, got {T}")
    start = T - max(int(math.ceil(tail_fraction * T)), 2)
    t = np.arange(start + 1, T + 1, dtype=float)
    r = mean[start:]
    keep = r > 0
    if np.count_nonzero(keep) < 2:
        raise InsufficientData("fewer than two rounds with positive regret in the tail")
    slope, _ = np.polyfit(np.log(t[keep]), np.log(r[keep]), 1)
    return float(slope)


# ---------------------------------------------------------------------------
# running


def resolve_instance(cfg: ExperimentConfig):
    """The reward vector the experiment runs on (drawing it if the config asks to sample)."""
    if cfg.mu is not None:
        return np.array(cfg.mu)
    s = cfg.sample
    lo, hi = (float(v) for v in s["box"])
    n = int(s["index"]) + 1
    ridge = cfg.algorithm.ridge
    if cfg.contextual:
        blocks = np.split(cfg.features, cfg.num_contexts)
        drawn = sample_robust_contextual(blocks, s["arms"], lo, hi, s["seed"], n, np.array(cfg.context_probs))
        return drawn[-1].rewards.values.copy()
    if ridge:
        drawn = sample_robust_instances_ridge(cfg.features, s["arms"][0], ridge, lo, hi, s["seed"], n)
    else:
        drawn = sample_robust_instances(cfg.features, s["arms"][0], lo, hi, s["seed"], n)
    return drawn[-1].values.copy()


def _run_one(args):
    table, gaps, mu, spec, sigma, min_eig, cdf, horizon, seed = args
    noise_rng, explore_rng, context_rng = trial_streams(seed)
    explore = explore_rng.random((horizon, 2))
    noise = noise_rng.standard_normal(horizon)
    ctx_u = context_rng.random(horizon)
    contexts, actions, cum, kinds, fell_back = kernel.run_trial(
        table, gaps, mu, spec.code, spec.ridge, spec.R, spec.delta, sigma, min_eig,
        explore, noise, ctx_u, cdf)
    return TrialRecord(seed, contexts, actions, kinds, cum, fell_back)


def run_experiment(cfg: ExperimentConfig, jobs: int = 1) -> ExperimentResult:
    """Run ``cfg.trials`` seeded trials; results do not depend on ``jobs``."""
    mu = resolve_instance(cfg)
    if cfg.contextual:
        try:
            inst = ContextualInstance(FeatureMatrix(cfg.features), mu, np.array(cfg.context_probs),
                                      cfg.num_contexts, cfg.num_arms)
        except TiedOptimum:
            if not cfg.allow_nonrobust:
                raise
            inst = None
        if inst is None:
            stats = compute_stats(cfg.features, mu, num_contexts=cfg.num_contexts)
        else:
            stats = compute_stats(None, mu, contextual=inst)
    else:
        stats = compute_stats(cfg.features, mu, ridge=cfg.algorithm.ridge or None)
    if not stats.member and not cfg.allow_nonrobust:
        raise NotMember("instance is not in the robust observation region (set allow_nonrobust to run anyway)")

    table = cfg.features.reshape(cfg.num_contexts, cfg.num_arms, -1).copy()
    grid = mu.reshape(cfg.num_contexts, cfg.num_arms)
    gaps = (grid.max(axis=1, keepdims=True) - grid).reshape(-1)
    optimal = grid.argmax(axis=1)
    spec = cfg.algorithm
    min_eig = 0.0
    if spec.name == "linucb" and spec.ridge == 0:
        min_eig = max(1.0, float(np.max(np.sum(cfg.features ** 2, axis=1))))
    cdf = context_cdf(cfg.context_probs)
    work = [(table, gaps, mu, spec, cfg.sigma, min_eig, cdf, cfg.horizon, cfg.base_seed + i)
            for i in range(cfg.trials)]
    if jobs > 1 and cfg.trials > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(_run_one, work))
    else:
        records = [_run_one(w) for w in work]
    if any(r.fell_back for r in records):
        warnings.warn(
            f"forced exploration left lambda_min(V) below {min_eig:g}; ran in ridge mode with lambda = {min_eig:g}",
            RidgeFallbackWarning, stacklevel=2)
    trace = RegretTrace(np.vstack([r.cum_regret for r in records]))
    return ExperimentResult(cfg, mu, trace, stats, records, optimal)


# ---------------------------------------------------------------------------
# outputs


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def logged_rounds(T: int) -> np.ndarray:
    """1-based rounds written to the CSV: all of them up to 10^5, else every ceil(T / 10^5)."""
    step = 1 if T <= CSV_MAX_ROWS else math.ceil(T / CSV_MAX_ROWS)
    rounds = np.arange(step, T + 1, step)
    if rounds[-1] != T:
        rounds = np.append(rounds, T)
    return rounds


def regret_csv(trace: RegretTrace) -> str:
    n = trace.trials.shape[0]
    header = ["round"] + [f"trial_{i}" for i in range(n)] + ["mean", "std", "lo3", "hi3"]
    cols = np.vstack([trace.trials, trace.mean, trace.std, trace.lo3, trace.hi3])
    lines = [",".join(header)]
    for t in logged_rounds(trace.horizon):
        lines.append(str(int(t)) + "," + ",".join(repr(float(v)) for v in cols[:, t - 1]))
    return "\n".join(lines) + "\n"


def read_regret_csv(path):
    """Parse a ``regret.csv`` back into ``(rounds, trials array)``."""
    rows = Path(path).read_text().splitlines()
    header = rows[0].split(",")
    n = sum(h.startswith("trial_") for h in header)
    data = [[float(v) for v in r.split(",")] for r in rows[1:]]
    arr = np.array(data)
    return arr[:, 0].astype(int), arr[:, 1:1 + n].T


def stats_text(result: ExperimentResult) -> str:
    lines = []
    for k, v in result.stats.items():
        lines.append(f"{k}={_fmt(v)}")
    lines.append("mu=" + ",".join(repr(float(m)) for m in result.mu))
    for k, v in result.config.echo().items():
        lines.append(f"{k}={_fmt(v)}")
    lines.append(f"final_mean_regret={float(result.trace.mean[-1])!r}")
    lines.append(f"final_std_regret={float(result.trace.std[-1])!r}")
    try:
        lines.append(f"growth_exponent={growth_exponent(result.trace)!r}")
    except InsufficientData:
        pass
    lines.append(f"mean_suboptimal_plays={float(result.suboptimal_plays().mean())!r}")
    lines.append(f"ridge_fallback_trials={sum(r.fell_back for r in result.records)}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def regret_svg(trace: RegretTrace, width=640, height=400, title="cumulative regret") -> str:
    """Mean cumulative regret with a shaded 3-sigma band as a static SVG."""
    T = trace.horizon
    idx = np.unique(np.linspace(0, T - 1, min(T, 1000)).astype(int))
    t = idx + 1.0
    mean, lo, hi = trace.mean[idx], np.maximum(trace.lo3[idx], 0.0), trace.hi3[idx]
    pad = 50
    ymax = float(hi.max()) if hi.max() > 0 else 1.0

    def sx(v):
        return pad + (v - 1.0) / max(T - 1.0, 1.0) * (width - 2 * pad)

    def sy(v):
        return height - pad - v / ymax * (height - 2 * pad)

    band = [f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, hi)]
    band += [f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t[::-1], lo[::-1])]
    line = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t, mean))
    return "\n".join([
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="24" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width - pad}" y="{height - pad + 18}" text-anchor="end" font-size="11">t = {T}</text>',
        f'<text x="{pad - 6}" y="{pad}" text-anchor="end" font-size="11">{ymax:.4g}</text>',
        f'<polygon points="{" ".join(band)}" fill="steelblue" fill-opacity="0.25" stroke="none"/>',
        f'<polyline points="{line}" fill="none" stroke="steelblue" stroke-width="1.5"/>',
        "</svg>",
    ]) + "\n"


def region_points_csv(cfg: ExperimentConfig) -> str | None:
    """Accepted/rejected box draws for the sampled region, or ``None`` without sampling."""
    if cfg.sample is None:
        return None
    s = cfg.sample
    arms = s["arms"]
    if cfg.contextual:
        cons = observation_constraints_contextual(cfg.features, cfg.num_contexts, cfg.num_arms, arms)
    elif cfg.algorithm.ridge:
        cons = observation_constraints_ridge(cfg.features, arms[0], cfg.algorithm.ridge)
    else:
        cons = observation_constraints(cfg.features, arms[0])
    lo, hi = (float(v) for v in s["box"])
    pts, accepted = sample_region_points(cons, lo, hi, s["seed"], REGION_POINTS)
    header = [f"mu_{i}" for i in range(pts.shape[1])] + ["accepted"]
    lines = [",".join(header)]
    for p, a in zip(pts, accepted):
        lines.append(",".join(repr(float(v)) for v in p) + f",{int(a)}")
    return "\n".join(lines) + "\n"


def emit_outputs(result: ExperimentResult, out_dir) -> list:
    """Write regret.csv, stats.txt, regret.svg (and region_points.csv); returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        "regret.csv": regret_csv(result.trace),
        "stats.txt": stats_text(result),
        "regret.svg": regret_svg(result.trace),
    }
    points = region_points_csv(result.config)
    if points is not None:
        files["region_points.csv"] = points
    written = []
    for name, text in files.items():
        path = out / name
        _atomic_write(path, text)
        written.append(path)
    return written
