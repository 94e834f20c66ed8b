"""Command-line entry point: ``mompair <verb> ...``.

Exit codes: 0 on success, 1 on bad input (unreadable file, malformed
config, invalid flag), 2 when the requested confidence level is outside a
planner's admissible range.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import secrets
import sys
from fractions import Fraction
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import bounds, experiments
from .errors import ComplexityCap, InsufficientData, InvalidArgument, OutOfRange
from .kernels import abs_diff_kernel, variance_kernel
from .learning import metric, tournament
from .sampling import derive_generator

VERBS = ("estimate", "plan", "risk-table", "quantile-curves", "coverage", "metric-learn", "tournament")
KERNELS = {"variance": variance_kernel, "abs-diff": abs_diff_kernel}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for infeasible plans
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fraction(text: str) -> float:
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _resolve_seed(seed: Optional[int]) -> int:
    if seed is None:
        seed = secrets.randbits(63)
        print(f"seed: {seed} (generated)", file=sys.stderr)
    return seed


def load_sample(path) -> np.ndarray:
    """One observation per line; comma separated columns make vectors.

    Blank lines and lines starting with ``#`` are skipped, and a
    non-numeric first line is taken as a header.
    """
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidArgument(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            cells = [c.strip() for c in row]
            if not cells or not any(cells) or cells[0].startswith("#"):
                continue
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                if lineno == 1:
                    continue
                raise InvalidArgument(f"{path}:{lineno}: non-numeric value")
    if not rows:
        raise InvalidArgument(f"{path}: no observations")
    if len({len(r) for r in rows}) != 1:
        raise InvalidArgument(f"{path}: rows have different numbers of columns")
    x = np.array(rows)
    if not np.all(np.isfinite(x)):
        raise InvalidArgument(f"{path}: non-finite value")
    return x[:, 0] if x.shape[1] == 1 else x


def _plan_from_args(args, n, sample=None, kernel=None, rng=None):
    t = experiments.parse_estimator(
        args.estimator + (f":{args.tau!r}" if args.tau is not None else "")
        + (f":{args.scheme}" if args.scheme else "")
    )
    if t.kind in experiments.PAIR_KINDS and kernel is None:
        kernel = KERNELS[args.kernel]()
    plan = None
    if getattr(args, "plugin", False) and sample is not None and t.kind != "moiu":
        name = {"mom": "MoM", "morm": "MoRM", "mou": "MoU", "moru": "MoRU",
                "mou_split": "MoM-split-pairs"}[t.kind]
        plan = bounds.plan_with_plugin(name, sample, args.delta, t.tau, kernel, rng=rng)
    elif t.kind == "mom":
        plan = bounds.plan_mom(n, args.delta, args.sigma)
    elif t.kind == "morm":
        plan = bounds.plan_morm(n, args.delta, t.tau, args.sigma, scheme=t.scheme)
    elif t.kind == "mou":
        plan = bounds.plan_mou(n, args.delta, args.sigma1_sq, args.sigma2_sq)
    elif t.kind == "moru":
        plan = bounds.plan_moru(n, args.delta, t.tau, args.sigma1_sq, args.sigma2_sq)
    elif t.kind == "mou_split":
        plan = bounds.plan_mom_split_pairs(n, args.delta, args.sigma1_sq, args.sigma2_sq)
    else:
        plan = bounds.plan_moiu(n, args.delta, t.tau, M=args.pairs, scheme=t.scheme)
    return t, plan, kernel


def _plan_dict(plan) -> dict:
    return {
        "estimator": plan.estimator, "n": plan.n, "delta": plan.delta, "K": plan.K, "B": plan.B,
        "tau": plan.tau, "M": plan.M, "scheme": plan.scheme, "radius": plan.radius,
        "variance_inputs": dict(plan.variance_inputs), "note": plan.note,
    }


def _json_line(d: dict) -> str:
    def enc(v):
        if isinstance(v, float):
            return None if not math.isfinite(v) else float(format(v, ".17g"))
        if isinstance(v, dict):
            return {k: enc(w) for k, w in v.items()}
        return v
    return json.dumps(enc(d), sort_keys=True)


def cmd_plan(args) -> int:
    _, plan, _ = _plan_from_args(args, args.n)
    print(_json_line(_plan_dict(plan)))
    size = f"M={plan.M} pairs" if plan.M else f"B={plan.B}"
    rad = "no radius (variance inputs missing)" if plan.radius is None else f"radius {plan.radius:.6g}"
    print(f"{plan.estimator}: K={plan.K} blocks, {size}; {rad}")
    return 0


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args.seed)
    x = load_sample(args.input)
    rng = derive_generator(seed, 0)
    t, plan, kernel = _plan_from_args(args, x.shape[0], x, rng=derive_generator(seed, 1))
    est = bounds.run_plan(plan, x, kernel, rng)
    result = {"value": est.value, "seed": seed, **_plan_dict(plan)}
    print(_json_line(result))
    size = f"M={plan.M} pairs each" if plan.M else f"size B={plan.B}"
    print(f"{t.label} estimate {est.value:.10g} from K={plan.K} blocks of {size}")
    print("certified radius: " + ("n/a" if plan.radius is None else f"{plan.radius:.6g} at delta={plan.delta:g}"))
    if args.output:
        out = Path(args.output)
        _write(out, _json_line(result) + "\n")
        _write(out.with_name(out.name + ".config.ini"), _estimate_ini(args, seed))
    return 0


def _estimate_ini(args, seed) -> str:
    keys = ("estimator", "input", "kernel", "delta", "tau", "scheme", "sigma", "sigma1_sq",
            "sigma2_sq", "pairs", "plugin")
    lines = ["[estimate]"] + [f"{k} = {'' if getattr(args, k) is None else getattr(args, k)}" for k in keys]
    lines.append(f"seed = {seed}")
    return "\n".join(lines) + "\n"


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise InvalidArgument(f"cannot write {path}: {exc.strerror}") from exc


def _summary(report) -> str:
    cells = [r for r in report.rows if r.metric_name in ("quadratic_risk", "exceedance", "infeasible",
                                                          "deviation_quantile")]
    w_law = max([len("law")] + [len(r.law) for r in cells])
    w_est = max([len("estimator")] + [len(r.estimator) for r in cells])
    out = [f"{'law':<{w_law}}  {'estimator':<{w_est}}  {'delta':>10}  {'metric':<18}  value"]
    for r in cells:
        value = "infeasible" if r.metric_name == "infeasible" else f"{r.value:.6g}"
        if r.stderr is not None:
            value += f" +/- {r.stderr:.2g}"
        out.append(f"{r.law:<{w_law}}  {r.estimator:<{w_est}}  {r.delta:>10.4g}  {r.metric_name:<18}  {value}")
    return "\n".join(out)


_RUNNERS = {
    "risk-table": experiments.run_quadratic_risk,
    "quantile-curves": experiments.run_quantile_curves,
    "coverage": experiments.run_coverage,
}


def cmd_experiment(args) -> int:
    from dataclasses import replace

    section, _, config = experiments.load_config(args.config, args.section)
    seed = args.seed if args.seed is not None else config.seed
    overrides = {"seed": seed}
    if args.replications is not None:
        overrides["replications"] = args.replications
    config = replace(config, **overrides)
    report = _RUNNERS[args.verb](config, threads=args.threads)
    out = Path(args.output)
    try:
        experiments.write_report(report, out, args.format)
    except OSError as exc:
        raise InvalidArgument(str(exc)) from exc
    _write(out.with_name(out.name + ".config.ini"), experiments.config_to_ini(config, section, args.verb))
    print(_summary(report))
    print(f"report: {out}  config hash {config.digest()}  seed {config.seed}")
    return 0


def _read_section(path, section):
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
    names = parser.sections()
    section = section or (names[0] if len(names) == 1 else None)
    if section not in parser:
        raise InvalidArgument(f"config {path}: pick a section among {names}")
    return section, parser[section]


METRIC_DEFAULTS = {
    "n": "200", "contamination": "0.05", "outlier_scale": "10", "K": "11", "B": "2",
    "steps": "500", "step_size": "0.1", "margin": "1.0", "points": "", "pairs": "", "seed": "",
}


def cmd_metric_learn(args) -> int:
    cfg = dict(METRIC_DEFAULTS)
    section = "metric_learn"
    if args.config:
        section, sec = _read_section(args.config, args.section)
        unknown = set(sec) - set(METRIC_DEFAULTS)
        if unknown:
            raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
        cfg.update({k: v.strip() for k, v in sec.items()})
    flags = {"K": args.K, "B": args.B, "steps": args.steps, "points": args.points, "pairs": args.pairs}
    cfg.update({k: str(v) for k, v in flags.items() if v is not None})
    seed = args.seed if args.seed is not None else (int(cfg["seed"]) if cfg["seed"] else None)
    seed = _resolve_seed(seed)
    cfg["seed"] = str(seed)
    try:
        K, B, steps = int(cfg["K"]), int(cfg["B"]), int(cfg["steps"])
        step_size, margin = float(cfg["step_size"]), float(cfg["margin"])
    except ValueError as exc:
        raise InvalidArgument(f"bad metric-learn setting: {exc}") from exc
    if cfg["points"]:
        X = metric.load_points_csv(cfg["points"])
        if not cfg["pairs"]:
            raise InvalidArgument("a points file needs a pair-label file (pairs = ...)")
        data = metric.PairLabelDataset(X, pairs=metric.load_pair_labels_csv(cfg["pairs"]))
    else:
        data = metric.make_two_cluster_data(
            int(cfg["n"]), float(cfg["contamination"]), float(cfg["outlier_scale"]),
            rng=derive_generator(seed, 0),
        )
    model = metric.MahalanobisModel.identity(data.points.shape[1], margin=margin, step_size=step_size)
    result = metric.moru_minibatch_gd(data, model, K, B, steps, derive_generator(seed, 1))
    out = Path(args.output)
    try:
        metric.write_trace(result, out)
    except OSError as exc:
        raise InvalidArgument(f"cannot write {out}: {exc.strerror}") from exc
    ini = [f"[{section}]"] + [f"{k} = {cfg[k]}" for k in METRIC_DEFAULTS]
    _write(out.with_name(out.name + ".config.ini"), "\n".join(ini) + "\n")
    risks = result.full_risks
    print(f"initial risk {result.initial_risk:.6g}, final risk {risks[-1]:.6g} after {steps} steps")
    print(f"spikes (> 3x trailing-20 median): {metric.count_spikes(risks)}")
    print("M =", np.array2string(result.model.M, precision=4))
    return 0


def cmd_tournament(args) -> int:
    seed = _resolve_seed(args.seed)
    x = load_sample(args.input)
    if x.ndim != 1:
        raise InvalidArgument("tournament input must be one value per line")
    cands = tournament.constant_shift_candidates(args.centers)
    state = tournament.run_tournament(x, cands, args.beta, args.r, args.K, args.K2,
                                      rng=derive_generator(seed, 0))
    result = {
        "champions": [c.name for c in state.champions],
        "matches": {f"{a} vs {b}": w for (a, b), w in sorted(state.match_results.items())},
        "seed": seed,
    }
    print(json.dumps(result, sort_keys=True))
    print("champions: " + ", ".join(result["champions"]))
    if args.output:
        out = Path(args.output)
        _write(out, json.dumps(result, sort_keys=True, indent=2) + "\n")
        ini = (f"[tournament]\ninput = {args.input}\ncenters = {', '.join(repr(c) for c in args.centers)}\n"
               f"beta = {args.beta!r}\nr = {args.r!r}\nK = {args.K}\nK2 = {args.K2}\nseed = {seed}\n")
        _write(out.with_name(out.name + ".config.ini"), ini)
    return 0


def _estimator_flags(p, need_n=False):
    p.add_argument("--estimator", required=True, help="mom, morm, mou, moru, mou_split or moiu")
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--tau", type=_fraction, help="randomized schemes, in (0, 1/2); fractions allowed")
    p.add_argument("--scheme", choices=("swor", "mc"))
    p.add_argument("--kernel", choices=sorted(KERNELS), default="variance")
    p.add_argument("--sigma", type=float, help="standard deviation, for the mean radius")
    p.add_argument("--sigma1-sq", dest="sigma1_sq", type=float)
    p.add_argument("--sigma2-sq", dest="sigma2_sq", type=float)
    p.add_argument("--pairs", type=int, help="pairs per subsample for moiu")
    if need_n:
        p.add_argument("--n", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mompair", description="Median-based robust estimation of means and pairwise means.")
    sub = parser.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    p = sub.add_parser("estimate", help="estimate from a sample file")
    _estimator_flags(p)
    p.add_argument("--input", required=True)
    p.add_argument("--plugin", action="store_true", help="plug-in variance estimates for the radius")
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("plan", help="print block counts, sizes and radius")
    _estimator_flags(p, need_n=True)
    p.set_defaults(func=cmd_plan)

    for verb in _RUNNERS:
        p = sub.add_parser(verb, help=f"{verb} experiment from a config file")
        p.add_argument("--config", required=True)
        p.add_argument("--section")
        p.add_argument("--output", required=True)
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--seed", type=int)
        p.add_argument("--replications", type=int)
        p.add_argument("--threads", type=int, default=1)
        p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("metric-learn", help="robust metric learning demo")
    p.add_argument("--config")
    p.add_argument("--section")
    p.add_argument("--points")
    p.add_argument("--pairs")
    p.add_argument("--K", type=int)
    p.add_argument("--B", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_metric_learn)

    p = sub.add_parser("tournament", help="tournament among constant predictors of |X - X'|")
    p.add_argument("--input", required=True)
    p.add_argument("--centers", type=float, nargs="+", required=True)
    p.add_argument("--beta", type=float, default=1.5)
    p.add_argument("--r", type=float, default=0.2)
    p.add_argument("--K", type=int, default=5)
    p.add_argument("--K2", type=int, default=11)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_tournament)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OutOfRange as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except (InvalidArgument, InsufficientData, ComplexityCap) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
