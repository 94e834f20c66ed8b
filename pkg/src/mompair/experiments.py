"""Monte-Carlo harness: quadratic risks, deviation quantiles and coverage.

Randomness is keyed, not sequential.  Replication ``r`` of law ``L`` draws
its data from ``derive_generator(seed, code(L), r)`` and estimator ``E``
uses ``derive_generator(seed, code(L), r, code(E), j)`` where ``j`` indexes
the confidence level.  Codes are CRC32 hashes of the labels, so a report
cell does not depend on the order of laws or estimators in the config, nor
on the order in which replications execute.
"""
from __future__ import annotations

import configparser
import csv
import hashlib
import io
import json
import math
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import bounds
from .distributions import LawSpec, draw, law_by_name
from .errors import InvalidArgument, OutOfRange
from .kernels import variance_kernel
from .sampling import derive_generator

__all__ = [
    "EstimatorTemplate",
    "ExperimentConfig",
    "ReportRow",
    "ExperimentReport",
    "parse_estimator",
    "default_delta_grid",
    "plan_for",
    "run_quadratic_risk",
    "run_quantile_curves",
    "run_coverage",
    "write_report",
    "load_config",
    "config_to_ini",
]

CSV_COLUMNS = ("law", "estimator", "delta", "tau", "K", "B", "metric_name", "value", "stderr", "seed")
MEAN_KINDS = ("mom", "morm")
PAIR_KINDS = ("mou", "moru", "mou_split", "moiu")


def _code(label: str) -> int:
    return zlib.crc32(label.encode())


def _fmt_tau(tau: float) -> str:
    frac = Fraction(tau).limit_denominator(100)
    return f"{frac.numerator}/{frac.denominator}" if abs(float(frac) - tau) < 1e-12 else repr(tau)


@dataclass(frozen=True)
class EstimatorTemplate:
    """An estimator family, re-planned at each confidence level."""

    kind: str
    tau: Optional[float] = None
    scheme: Optional[str] = None

    @property
    def label(self) -> str:
        parts = {
            "mom": ["MoM"], "morm": ["MoRM"], "mou": ["MoU_Partition"],
            "moru": ["MoRU"], "mou_split": ["MoU_1/2;1/2"], "moiu": ["MoIU"],
        }[self.kind]
        if self.tau is not None:
            parts.append(_fmt_tau(self.tau))
        if self.scheme is not None:
            parts.append("SWoR" if self.scheme == "swor" else "MC")
        return "_".join(parts)

    @property
    def spec(self) -> str:
        out = self.kind
        if self.tau is not None:
            out += ":" + _fmt_tau(self.tau)
        if self.scheme is not None:
            out += ":" + self.scheme
        return out


def parse_estimator(text: str) -> EstimatorTemplate:
    """Parse ``kind[:tau][:scheme]``, e.g. ``morm:9/20:swor`` or ``mou``."""
    parts = [p.strip() for p in text.strip().split(":") if p.strip()]
    if not parts:
        raise InvalidArgument("empty estimator spec")
    kind = parts[0].lower().replace("-", "_")
    if kind not in MEAN_KINDS + PAIR_KINDS:
        raise InvalidArgument(f"unknown estimator {parts[0]!r}")
    tau = scheme = None
    for p in parts[1:]:
        if p.lower() in ("swor", "mc"):
            scheme = p.lower()
        else:
            try:
                tau = float(Fraction(p))
            except (ValueError, ZeroDivisionError) as exc:
                raise InvalidArgument(f"bad tau {p!r} in {text!r}") from exc
    if kind in ("morm", "moru", "moiu") and tau is None:
        raise InvalidArgument(f"{kind} needs a tau, e.g. {kind}:9/20")
    if kind == "morm" and scheme is None:
        scheme = "swor"
    if kind == "moiu" and scheme is None:
        scheme = "mc"
    if kind == "moru":
        scheme = scheme or "swor"
        if scheme != "swor":
            raise InvalidArgument("moru blocks are drawn without replacement")
    return EstimatorTemplate(kind, tau, scheme)


def default_delta_grid(points: int = 20, high: float = 0.5, low: float = 1e-3):
    return tuple(float(d) for d in np.geomspace(high, low, points))


@dataclass(frozen=True)
class ExperimentConfig:
    n: int = 1000
    replications: int = 5000
    laws: Sequence[LawSpec] = ()
    estimators: Sequence[EstimatorTemplate] = ()
    delta: float = 0.001
    delta_grid: Sequence[float] = field(default_factory=default_delta_grid)
    seed: int = 0
    task: str = "mean"
    mom_k_rule: str = "log"
    moiu_pairs: Optional[int] = None

    def __post_init__(self):
        if self.replications < 1:
            raise InvalidArgument("replications must be >= 1")
        if self.n < 2:
            raise InvalidArgument("n must be >= 2")
        grid = list(self.delta_grid)
        if any(not 0 < d < 1 for d in grid) or any(a <= b for a, b in zip(grid, grid[1:])):
            raise InvalidArgument("delta_grid must be strictly decreasing within (0, 1)")
        if not 0 < self.delta < 1:
            raise InvalidArgument("delta must lie in (0, 1)")
        if self.task not in ("mean", "variance"):
            raise InvalidArgument(f"task must be 'mean' or 'variance', got {self.task!r}")
        if self.mom_k_rule not in ("log", "prop2"):
            raise InvalidArgument("mom_k_rule must be 'log' or 'prop2'")
        for t in self.estimators:
            if (t.kind in MEAN_KINDS) != (self.task == "mean"):
                raise InvalidArgument(f"estimator {t.spec} does not fit task {self.task!r}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "replications": self.replications,
            "laws": [law.name for law in self.laws],
            "estimators": [t.spec for t in self.estimators],
            "delta": self.delta,
            "delta_grid": list(self.delta_grid),
            "seed": self.seed,
            "task": self.task,
            "mom_k_rule": self.mom_k_rule,
            "moiu_pairs": self.moiu_pairs,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class ReportRow:
    law: str
    estimator: str
    delta: Optional[float]
    tau: Optional[float]
    K: Optional[int]
    B: Optional[int]
    metric_name: str
    value: float
    stderr: Optional[float]
    seed: int


@dataclass
class ExperimentReport:
    rows: List[ReportRow] = field(default_factory=list)
    config: Optional[ExperimentConfig] = None
    kind: str = ""

    @property
    def provenance(self) -> dict:
        if self.config is None:
            return {"kind": self.kind}
        return {"kind": self.kind, "config_hash": self.config.digest(), "seed": self.config.seed}

    def cell(self, law: str, estimator: str, metric: str, delta=None) -> ReportRow:
        for row in self.rows:
            if (row.law, row.estimator, row.metric_name) == (law, estimator, metric) and (
                delta is None or (row.delta is not None and math.isclose(row.delta, delta))
            ):
                return row
        raise KeyError((law, estimator, metric, delta))


def plan_for(template: EstimatorTemplate, n: int, delta: float, config: Optional[ExperimentConfig] = None,
             law: Optional[LawSpec] = None) -> bounds.EstimatorPlan:
    """Plan ``template`` at (n, delta); variance inputs come from ``law`` if given."""
    k = template.kind
    sigma = s1 = s2 = None
    if law is not None:
        sigma = math.sqrt(law.true_variance)
        s1, s2 = law.variance_kernel_components()
        if not (math.isfinite(s1) and math.isfinite(s2)):
            s1 = s2 = None
    if k == "mom":
        plan = bounds.plan_mom(n, delta, sigma)
        if config is not None and config.mom_k_rule == "prop2":
            K = max(1, math.ceil(4.5 * math.log(1 / delta)))
            if K > n:
                raise OutOfRange(f"K={K} exceeds n={n}")
            from dataclasses import replace
            plan = replace(plan, K=K, B=n // K, radius=None, note="K = ceil(9/2 log(1/delta))")
        return plan
    if k == "morm":
        return bounds.plan_morm(n, delta, template.tau, sigma, scheme=template.scheme)
    if k == "mou":
        return bounds.plan_mou(n, delta, s1, s2)
    if k == "moru":
        return bounds.plan_moru(n, delta, template.tau, s1, s2)
    if k == "mou_split":
        return bounds.plan_mom_split_pairs(n, delta, s1, s2)
    if k == "moiu":
        M = config.moiu_pairs if config is not None else None
        return bounds.plan_moiu(n, delta, template.tau, M=M, scheme=template.scheme)
    raise InvalidArgument(f"unknown estimator kind {k!r}")


def _target(law: LawSpec, task: str) -> float:
    return law.true_mean if task == "mean" else law.true_variance


def _errors(config, law, template, plan, delta_index, threads):
    """Signed errors of ``template`` over all replications."""
    kernel = variance_kernel() if config.task == "variance" else None
    theta = _target(law, config.task)
    lcode, ecode = _code(law.name), _code(template.label)

    def one(r):
        x = draw(law, config.n, derive_generator(config.seed, lcode, r))
        g = derive_generator(config.seed, lcode, r, ecode, delta_index)
        return bounds.run_plan(plan, x, kernel, g).value - theta

    reps = range(config.replications)
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return np.fromiter(pool.map(one, reps), float, config.replications)
    return np.fromiter(map(one, reps), float, config.replications)


def _base(law, template, plan, delta, seed):
    return dict(
        law=law.name, estimator=template.label, delta=delta, tau=template.tau,
        K=plan.K if plan else None, B=(plan.M if plan and plan.M else plan.B) if plan else None,
        seed=seed,
    )


def _infeasible(law, template, delta, seed, exc):
    return ReportRow(law.name, template.label, delta, template.tau, None, None,
                     "infeasible", float("nan"), None, seed)


def run_quadratic_risk(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Quadratic risk (mean and sd of squared error) per (law, estimator).

    Besides ``quadratic_risk`` the report carries ``quadratic_risk_sd`` (the
    spread of the squared errors), ``bias`` and ``variance`` of the estimate
    ensemble; ``quadratic_risk = bias^2 + variance``.
    """
    report = ExperimentReport(config=config, kind="risk-table")
    R = config.replications
    for law in config.laws:
        for t in config.estimators:
            try:
                plan = plan_for(t, config.n, config.delta, config)
            except (OutOfRange, InvalidArgument) as exc:
                report.rows.append(_infeasible(law, t, config.delta, config.seed, exc))
                continue
            e = _errors(config, law, t, plan, 0, threads)
            sq = e**2
            qr = float(np.mean(sq))
            sd = float(np.std(sq))
            base = _base(law, t, plan, config.delta, config.seed)
            report.rows += [
                ReportRow(**base, metric_name="quadratic_risk", value=qr, stderr=sd / math.sqrt(R)),
                ReportRow(**base, metric_name="quadratic_risk_sd", value=sd, stderr=None),
                ReportRow(**base, metric_name="bias", value=float(np.mean(e)), stderr=float(np.std(e)) / math.sqrt(R)),
                ReportRow(**base, metric_name="variance", value=float(np.var(e)), stderr=None),
            ]
    return report


def run_quantile_curves(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """(1 - delta)-quantile of |error| with the estimator re-planned at every delta."""
    report = ExperimentReport(config=config, kind="quantile-curves")
    for law in config.laws:
        for t in config.estimators:
            for j, delta in enumerate(config.delta_grid):
                try:
                    plan = plan_for(t, config.n, delta, config)
                except (OutOfRange, InvalidArgument) as exc:
                    report.rows.append(_infeasible(law, t, delta, config.seed, exc))
                    continue
                err = np.abs(_errors(config, law, t, plan, j, threads))
                q = float(np.quantile(err, 1 - delta, method="inverted_cdf"))
                report.rows.append(
                    ReportRow(**_base(law, t, plan, delta, config.seed),
                              metric_name="deviation_quantile", value=q, stderr=None)
                )
    return report


def run_coverage(config: ExperimentConfig, threads: int = 1) -> ExperimentReport:
    """Exceedance frequency of each plan's certified radius at ``config.delta``.

    Variance inputs are the law's analytic values.  Cells whose radius is
    undefined (infinite fourth moment for pairwise kernels) are infeasible.
    """
    report = ExperimentReport(config=config, kind="coverage")
    R = config.replications
    for law in config.laws:
        for t in config.estimators:
            try:
                plan = plan_for(t, config.n, config.delta, config, law=law)
                if plan.radius is None:
                    raise InvalidArgument("no certified radius for this cell")
            except (OutOfRange, InvalidArgument) as exc:
                report.rows.append(_infeasible(law, t, config.delta, config.seed, exc))
                continue
            err = np.abs(_errors(config, law, t, plan, 0, threads))
            p = float(np.mean(err > plan.radius))
            base = _base(law, t, plan, config.delta, config.seed)
            report.rows += [
                ReportRow(**base, metric_name="radius", value=plan.radius, stderr=None),
                ReportRow(**base, metric_name="exceedance", value=p, stderr=math.sqrt(p * (1 - p) / R)),
            ]
    return report


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else format(v, ".17g")
    return str(v)


def _json_value(v) -> str:
    if v is None or (isinstance(v, float) and not math.isfinite(v)):
        return "null"
    if isinstance(v, float):
        return format(v, ".17g")
    return json.dumps(v)


def _json_obj(d: dict) -> str:
    return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(v)}" for k, v in d.items()) + "}"


def render_report(report: ExperimentReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in report.rows:
            w.writerow([_fmt(getattr(row, c)) for c in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        lines = ["{", f'  "provenance": {_json_obj(report.provenance)},']
        cfg = report.config.to_dict() if report.config else {}
        lines.append(f'  "config": {json.dumps(cfg, sort_keys=True)},')
        lines.append('  "rows": [')
        body = [f"    {_json_obj(asdict(r))}" for r in report.rows]
        lines.append(",\n".join(body))
        lines += ["  ]", "}"]
        return "\n".join(lines) + "\n"
    raise InvalidArgument(f"unknown report format {fmt!r}")


def write_report(report: ExperimentReport, path, fmt: str = "csv") -> None:
    """Write ``report`` as CSV or JSON; identical reports give identical bytes."""
    text = render_report(report, fmt)
    path = Path(path)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write report to {path}: {exc}") from exc


def _split(value: str) -> List[str]:
    return [p.strip() for p in value.replace("\n", ",").split(",") if p.strip()]


def _parse_grid(value: str):
    value = value.strip()
    if value.startswith("geom"):
        _, high, low, points = value.split(":")
        return default_delta_grid(int(points), float(high), float(low))
    return tuple(float(v) for v in _split(value))


def config_from_section(sec) -> ExperimentConfig:
    kwargs = {}
    if "n" in sec:
        kwargs["n"] = sec.getint("n")
    if "replications" in sec:
        kwargs["replications"] = sec.getint("replications")
    if "delta" in sec:
        kwargs["delta"] = sec.getfloat("delta")
    if "delta_grid" in sec:
        kwargs["delta_grid"] = _parse_grid(sec["delta_grid"])
    if "seed" in sec:
        kwargs["seed"] = sec.getint("seed")
    if "task" in sec:
        kwargs["task"] = sec["task"].strip()
    if "mom_k_rule" in sec:
        kwargs["mom_k_rule"] = sec["mom_k_rule"].strip()
    if sec.get("moiu_pairs", "").strip():
        kwargs["moiu_pairs"] = sec.getint("moiu_pairs")
    kwargs["laws"] = tuple(law_by_name(v) for v in _split(sec.get("laws", "normal")))
    kwargs["estimators"] = tuple(parse_estimator(v) for v in _split(sec.get("estimators", "")))
    unknown = set(sec.keys()) - {
        "n", "replications", "delta", "delta_grid", "seed", "task", "mom_k_rule",
        "moiu_pairs", "laws", "estimators", "kind",
    }
    if unknown:
        raise InvalidArgument(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(**kwargs)


def load_config(path, section: Optional[str] = None):
    """Read one experiment section of a key=value config file.

    Returns ``(section_name, kind, config)``; ``kind`` is the optional
    ``kind`` key (``risk-table``, ``quantile-curves`` or ``coverage``).
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InvalidArgument(f"cannot read config {path}: {exc}") from exc
    names = parser.sections()
    if section is None:
        if len(names) != 1:
            raise InvalidArgument(f"config {path} has sections {names}; pick one with --section")
        section = names[0]
    if section not in parser:
        raise InvalidArgument(f"no section [{section}] in {path}")
    sec = parser[section]
    return section, sec.get("kind", "").strip(), config_from_section(sec)


def config_to_ini(config: ExperimentConfig, section: str = "experiment", kind: str = "") -> str:
    """Resolved config (every default expanded) in the loader's format."""
    d = config.to_dict()
    lines = [f"[{section}]"]
    if kind:
        lines.append(f"kind = {kind}")
    for key in ("n", "replications", "delta", "seed", "task", "mom_k_rule"):
        v = d[key]
        lines.append(f"{key} = {_fmt(v) if isinstance(v, float) else v}")
    lines.append(f"moiu_pairs = {'' if d['moiu_pairs'] is None else d['moiu_pairs']}")
    lines.append("laws = " + ", ".join(d["laws"]))
    lines.append("estimators = " + ", ".join(d["estimators"]))
    lines.append("delta_grid = " + ", ".join(_fmt(v) for v in d["delta_grid"]))
    return "\n".join(lines) + "\n"
