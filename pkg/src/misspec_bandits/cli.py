"""Command-line entry point: ``misspec-bandits <command> ...``.

Exit codes: 0 success, 2 bad input or config, 3 region or membership failure
(non-member, tie, empty region, sampler exhausted), 4 any other runtime error.
Results go to stdout; warnings and diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import sys
import warnings
from math import comb
from pathlib import Path

import numpy as np

from . import kernel
from .errors import (
    ConfigError,
    DegenerateRegion,
    EmptyRegion,
    InsufficientData,
    NotMember,
    RegionTooThin,
    TiedOptimum,
)
from .harness import ExperimentConfig, compute_stats, emit_outputs, growth_exponent, load_features, run_experiment
from .linalg_core import FeatureMatrix, MAX_SUBSETS
from .regions import (
    ContextualInstance,
    all_region_systems,
    param_region,
    robust_membership,
    robust_membership_contextual,
    robust_membership_ridge,
    sample_robust_contextual,
    sample_robust_instances,
    sample_robust_instances_ridge,
)

EXIT_OK, EXIT_CONFIG, EXIT_REGION, EXIT_RUNTIME = 0, 2, 3, 4
REGION_ERRORS = (NotMember, RegionTooThin, EmptyRegion, TiedOptimum, DegenerateRegion)


class _Problem:
    """Features loaded from a JSON file, plain or contextual."""

    def __init__(self, path):
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read {path}: {exc}") from exc
        self.features, self.num_contexts, self.context_probs = load_features(doc, path.parent)
        self.num_arms = self.features.shape[0] // self.num_contexts
        k, d = self.features.shape
        if comb(k, d) > MAX_SUBSETS:
            raise ConfigError(f"C({k},{d}) subsets exceeds the enumeration limit {MAX_SUBSETS}")

    @property
    def contextual(self):
        return self.num_contexts > 1

    def blocks(self):
        return np.split(self.features, self.num_contexts)

    def instance(self, mu):
        return ContextualInstance(FeatureMatrix(self.features), mu, np.array(self.context_probs),
                                  self.num_contexts, self.num_arms)


def parse_vector(text: str) -> np.ndarray:
    """``"20,3"``, a JSON list, or the path of a JSON file holding a list."""
    p = Path(text)
    try:
        if p.suffix == ".json" and p.exists():
            return np.asarray(json.loads(p.read_text()), dtype=float).reshape(-1)
        if text.strip().startswith("["):
            return np.asarray(json.loads(text), dtype=float).reshape(-1)
        return np.array([float(v) for v in text.split(",")])
    except (ValueError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot parse reward vector {text!r}: {exc}") from exc


def _check_len(mu, problem):
    if mu.shape[0] != problem.features.shape[0]:
        raise ConfigError(f"reward vector has {mu.shape[0]} entries, features have {problem.features.shape[0]} rows")


def _fmt_row(a):
    terms = [f"{v:g}*theta{j}" for j, v in enumerate(a) if v != 0]
    return " + ".join(terms).replace("+ -", "- ") + " > 0"


def _system_lines(prefix, system):
    if system is None:
        return [f"{prefix} degenerate=true empty=true"]
    lines = [f"{prefix} empty={str(system.is_empty()).lower()} constraints={len(system)}"]
    lines += [f"  {_fmt_row(a)}" for a in system.constraints]
    return lines


def cmd_regions(args):
    prob = _Problem(args.phi)
    out = {}
    lines = []
    if not prob.contextual:
        for k in range(prob.num_arms):
            try:
                system = param_region(prob.features, k)
            except DegenerateRegion:
                system = None
            lines += _system_lines(f"arm={k}", system)
            out[str(k)] = None if system is None else {"constraints": system.constraints.tolist(),
                                                       "empty": system.is_empty()}
    else:
        per_context, inter = all_region_systems(prob.blocks())
        for x, row in enumerate(per_context):
            for a, system in enumerate(row):
                lines += _system_lines(f"context={x} arm={a}", system)
                out[f"{x}:{a}"] = None if system is None else {"constraints": system.constraints.tolist(),
                                                               "empty": system.is_empty()}
        for arms, (system, empty) in inter.items():
            tag = ",".join(map(str, arms))
            if system is None:
                lines.append(f"arms={tag} degenerate=true empty=true")
            else:
                lines.append(f"arms={tag} empty={str(empty).lower()}")
            out["arms=" + tag] = {"empty": empty, "constraints": None if system is None else system.constraints.tolist()}
    print(json.dumps(out, indent=2) if args.json else "\n".join(lines))
    return EXIT_OK


def cmd_member(args):
    prob = _Problem(args.phi)
    mu = parse_vector(args.mu)
    _check_len(mu, prob)
    if args.contextual and not prob.contextual:
        raise ConfigError("--contextual needs a features file with a 'contexts' list")
    if prob.contextual:
        if args.ridge:
            raise ConfigError("--ridge is not supported for contextual problems")
        report = robust_membership_contextual(prob.instance(mu))
    elif args.ridge:
        report = robust_membership_ridge(prob.features, mu, args.ridge)
    else:
        report = robust_membership(prob.features, mu)
    print(json.dumps(report.to_dict(), indent=2) if args.json else report.to_text())
    return EXIT_OK if report.is_member else EXIT_REGION


def cmd_sample(args):
    prob = _Problem(args.phi)
    try:
        lo, hi = (float(v) for v in args.box.split(","))
        arms = [int(a) for a in args.arm.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad --box or --arm: {exc}") from exc
    if len(arms) != prob.num_contexts:
        raise ConfigError("give one --arm per context, comma separated")
    if prob.contextual:
        drawn = [c.rewards.values for c in
                 sample_robust_contextual(prob.blocks(), arms, lo, hi, args.seed, args.n, np.array(prob.context_probs))]
    elif args.ridge:
        drawn = [m.values for m in sample_robust_instances_ridge(prob.features, arms[0], args.ridge, lo, hi, args.seed, args.n)]
    else:
        drawn = [m.values for m in sample_robust_instances(prob.features, arms[0], lo, hi, args.seed, args.n)]
    if args.json:
        print(json.dumps([d.tolist() for d in drawn]))
    else:
        for d in drawn:
            print(",".join(repr(float(v)) for v in d))
    return EXIT_OK


def _stats_lines(stats):
    out = []
    for k, v in stats.items():
        if isinstance(v, bool):
            v = str(v).lower()
        elif isinstance(v, float):
            v = repr(v)
        out.append(f"{k}={v}")
    return out


def cmd_stats(args):
    prob = _Problem(args.phi)
    mu = parse_vector(args.mu)
    _check_len(mu, prob)
    if prob.contextual:
        try:
            stats = compute_stats(None, mu, contextual=prob.instance(mu))
        except TiedOptimum:
            stats = compute_stats(prob.features, mu, num_contexts=prob.num_contexts)
    else:
        stats = compute_stats(prob.features, mu, ridge=args.ridge)
    if args.json:
        print(json.dumps(dict(stats.items())))
    else:
        print("\n".join(_stats_lines(stats)))
    return EXIT_OK


def cmd_run(args):
    cfg = ExperimentConfig.from_json(args.config, base_seed=args.seed)
    result = run_experiment(cfg, jobs=args.jobs)
    out_dir = args.out or cfg.out or "results"
    written = emit_outputs(result, out_dir)
    trace = result.trace
    rows = [("backend", kernel.BACKEND), ("trials", cfg.trials), ("horizon", cfg.horizon)]
    rows += [(k, v) for k, v in result.stats.items()]
    rows += [("final_mean_regret", float(trace.mean[-1])), ("final_std_regret", float(trace.std[-1]))]
    try:
        rows.append(("growth_exponent", growth_exponent(trace)))
    except InsufficientData:
        rows.append(("growth_exponent", "n/a"))
    rows.append(("mean_suboptimal_plays", float(result.suboptimal_plays().mean())))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        v = f"{v:.6g}" if isinstance(v, float) else (str(v).lower() if isinstance(v, bool) else v)
        print(f"{k:<{width}}  {v}")
    for p in written:
        print(f"wrote {p}", file=sys.stderr)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="misspec-bandits", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--json", action="store_true", help="machine-readable output")
        p.add_argument("--jobs", type=int, default=1, help="parallel trial workers")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="seed (run: overrides base_seed)")
        return p

    p = common(sub.add_parser("regions", help="print the parameter region of every arm"))
    p.add_argument("phi", help="features JSON")
    p.set_defaults(func=cmd_regions)

    p = common(sub.add_parser("member", help="robust-region membership of a reward vector"))
    p.add_argument("phi")
    p.add_argument("mu", help="comma-separated rewards, JSON list or .json file (use -- before negatives)")
    p.add_argument("--ridge", type=float, default=None)
    p.add_argument("--contextual", action="store_true")
    p.set_defaults(func=cmd_member)

    p = common(sub.add_parser("sample", help="rejection-sample instances from a robust region"))
    p.add_argument("phi")
    p.add_argument("--arm", required=True, help="target arm (comma-separated, one per context)")
    p.add_argument("--box", required=True, help="lo,hi (write --box=-10,10 for a negative lower bound)")
    p.add_argument("-n", type=int, default=1)
    p.add_argument("--ridge", type=float, default=None)
    p.set_defaults(func=cmd_sample)

    p = common(sub.add_parser("run", help="run a regret experiment from a JSON config"))
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = common(sub.add_parser("stats", help="misspecification error, gaps and margin of an instance"))
    p.add_argument("phi")
    p.add_argument("mu")
    p.add_argument("--ridge", type=float, default=None)
    p.set_defaults(func=cmd_stats)
    return ap


def _warn_line(message, category, filename, lineno, line=None):
    return f"warning: {category.__name__}: {message}\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "sample" and args.seed is None:
        args.seed = 0
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    warnings.formatwarning = _warn_line
    try:
        return args.func(args)
    except REGION_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REGION
    except (ConfigError, ValueError, IndexError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
