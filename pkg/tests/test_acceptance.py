"""Acceptance criteria, each run at its stated tolerance.

Every test prints one ``criterion N PASS|FAIL`` line; the lines are repeated
in the pytest terminal summary.  Run on its own with

    pytest tests/test_acceptance.py -v
"""
import dataclasses
import itertools
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import integrate, stats

from mompair import cli
from mompair.experiments import (
    load_config,
    parse_estimator,
    run_coverage,
    run_quadratic_risk,
)
from mompair.kernels import (
    abs_diff_kernel,
    block_ustats,
    complete_ustat,
    estimate_components,
    incomplete_ustat,
    variance_kernel,
)
from mompair.learning import (
    MahalanobisModel,
    PairLabelDataset,
    block_risk_and_gradient,
    constant_shift_candidates,
    contamination_demo,
    count_spikes,
    pairwise_loss,
    pairwise_loss_gradient,
    run_tournament,
)
from mompair.mean_estimators import block_means
from mompair.sampling import derive_generator, sample_pairs
from mompair.ustat_estimators import MultiSampleSpec, mogu, moru, mou

from conftest import all_subsets, brute_ustat

CONFIGS = Path(__file__).resolve().parents[1] / "configs" / "experiments"


def _kernels():
    return [variance_kernel(), variance_kernel(fast=False), abs_diff_kernel()]


def _config(name, section=None, **changes):
    _, _, cfg = load_config(CONFIGS / name, section)
    if "estimators" in changes:
        changes["estimators"] = tuple(parse_estimator(s) for s in changes["estimators"])
    return dataclasses.replace(cfg, **changes)


def _qr(report, law, label):
    return report.cell(law, label, "quadratic_risk").value


def _qr_sd(report, law, label):
    return report.cell(law, label, "quadratic_risk_sd").value


def test_c01_oracle_equivalence(criterion, small_corpus):
    t0 = time.perf_counter()
    worst = 0.0
    for x in small_corpus:
        n = len(x)
        for h in _kernels():
            ref = brute_ustat(x, lambda a, b: float(h(np.array(a), np.array(b))))
            rng = np.random.default_rng(n)
            got = [
                complete_ustat(x, h),
                mou(x, h, K=1, rng=rng).value,
                moru(x, h, K=1, B=n, rng=rng).value,
                mogu(MultiSampleSpec([x], [2], lambda a, b: float(h(np.array(a), np.array(b)))), K=1,
                     rng=rng).value,
            ]
            worst = max(worst, max(abs(g - ref) for g in got))
    elapsed = time.perf_counter() - t0
    criterion(1, "oracle equivalence n <= 8", worst <= 1e-12 and elapsed < 1.0,
              f"max |diff| = {worst:.2e} (tol 1e-12), {elapsed:.2f} s (limit 1 s)")


def test_c02_conditional_unbiasedness(criterion, small_corpus):
    t0 = time.perf_counter()
    worst = 0.0
    h = variance_kernel()
    for x in small_corpus:
        n = len(x)
        if n > 6:
            continue
        for B in range(1, min(n, 4) + 1):
            blocks = all_subsets(n, B)
            worst = max(worst, abs(np.mean(block_means(x, blocks)) - np.mean(x)))
            if B >= 2:
                for k in _kernels():
                    worst = max(worst, abs(np.mean(block_ustats(x, k, blocks)) - complete_ustat(x, k)))
    elapsed = time.perf_counter() - t0
    criterion(2, "conditional unbiasedness over all SWoR blocks", worst <= 1e-12 and elapsed < 1.0,
              f"max |diff| = {worst:.2e} (tol 1e-12), {elapsed:.2f} s (limit 1 s)")


TOY_LAWS = [
    (np.array([0.0, 1.0, 3.0]), np.array([0.2, 0.5, 0.3])),
    (np.array([-1.0, 2.0]), np.array([0.7, 0.3])),
    (np.array([0.0, 1.0, 2.0, 10.0]), np.array([0.4, 0.3, 0.2, 0.1])),
]


def _exact_components(support, p, h):
    H = np.asarray(h(support[:, None], support[None, :]), dtype=float)
    theta = p @ H @ p
    h1 = H @ p - theta
    s1 = p @ h1**2
    s = p @ (H - theta) ** 2 @ p
    return theta, s1, s - 2 * s1


def _exact_var_one_block(support, p, h, n, B):
    """E[(U(block) - theta)^2] over all n-samples (weighted) and all SWoR blocks."""
    theta, _, _ = _exact_components(support, p, h)
    idx = np.array(list(itertools.product(range(len(support)), repeat=n)))
    weights = np.prod(p[idx], axis=1)
    X = support[idx]
    blocks = all_subsets(n, B)
    I, J = np.triu_indices(B, 1)
    Xb = X[:, blocks]
    U = np.asarray(h(Xb[..., I], Xb[..., J]), dtype=float).mean(axis=-1)
    return float(weights @ ((U - theta) ** 2).mean(axis=1))


def test_c03_randomized_u_variance_identity(criterion):
    t0 = time.perf_counter()
    worst = 0.0
    for support, p in TOY_LAWS:
        for h in (variance_kernel(fast=False), abs_diff_kernel()):
            _, s1, s2 = _exact_components(support, p, h)
            for B in (3, 4, 5):
                for n in range(B, 8):
                    if len(support) ** n > 20000:
                        continue
                    exact = _exact_var_one_block(support, p, h, n, B)
                    closed = 4 * s1 / B + 2 * s2 / (B * (B - 1))
                    worst = max(worst, abs(exact - closed))
    elapsed = time.perf_counter() - t0
    criterion(3, "Var of one randomized block U-statistic", worst <= 1e-9 and elapsed < 10.0,
              f"max |diff| = {worst:.2e} (tol 1e-9), {elapsed:.2f} s (limit 10 s)")


def test_c04_gaussian_hoeffding_components(criterion):
    rng = np.random.default_rng(4)
    x = rng.standard_normal(10**6)
    # O(n^2) pair sums: components are computed on a 10^4 subsample
    c = estimate_components(x, variance_kernel(), max_n=10**4, rng=rng)
    ok = 0.95 <= c.theta <= 1.05 and 0.45 <= c.sigma1_sq <= 0.55 and 0.9 <= c.sigma2_sq <= 1.1
    criterion(4, "Gaussian Hoeffding components (subsample cap 1e4)", ok,
              f"theta = {c.theta:.4f}, sigma1^2 = {c.sigma1_sq:.4f}, sigma2^2 = {c.sigma2_sq:.4f}")


@pytest.mark.slow
def test_c05_bound_coverage(criterion):
    rows = []
    for section in ("coverage", "coverage_pairwise"):
        report = run_coverage(_config("coverage.ini", section))
        rows += [r for r in report.rows if r.metric_name in ("exceedance", "infeasible")]
    expected = {"MoM", "MoRM_1/6_SWoR", "MoRM_3/10_SWoR", "MoRM_9/20_SWoR",
                "MoU_Partition", "MoRU_1/6_SWoR", "MoRU_3/10_SWoR", "MoRU_9/20_SWoR"}
    seen = {r.estimator for r in rows if r.metric_name == "exceedance"}
    ok = seen == expected and all(r.value <= 0.01 for r in rows if r.metric_name == "exceedance")
    detail = ", ".join(f"{r.estimator} {r.value:.4f}" for r in rows)
    criterion(5, "certified radius exceedance <= 0.01 (n=1000, 1e4 reps)", ok, detail)


@pytest.mark.slow
def test_c06_table1_light_tails(criterion):
    labels = ("MoM", "MoRM_9/20_SWoR", "MoRM_1/6_SWoR")
    report = run_quadratic_risk(_config("table1.ini", estimators=("mom", "morm:9/20:swor", "morm:1/6:swor")))
    mom_n, morm_n = _qr(report, "normal", "MoM"), _qr(report, "normal", "MoRM_9/20_SWoR")
    checks = [0.0007 <= mom_n <= 0.003, 0.0005 <= morm_n <= 0.002]
    parts = [f"normal MoM {mom_n:.5f} in [0.0007, 0.003]", f"normal MoRM(9/20) {morm_n:.5f} in [0.0005, 0.002]"]
    for law in ("normal", "student3", "lognormal"):
        a, b, c = (_qr(report, law, lab) for lab in labels)
        checks.append(b < a < c)
        parts.append(f"{law} order {'ok' if b < a < c else 'BROKEN'} (MoRM9/20 {b:.5f}, MoM {a:.5f}, MoRM1/6 {c:.5f})")
    pareto = ", ".join(f"{lab} {_qr(report, 'pareto3', lab):.5f}" for lab in labels)
    parts.append(f"pareto3 not gated ({pareto})")
    criterion(6, "mean-estimator quadratic risks", all(checks), "; ".join(parts))


@pytest.mark.slow
def test_c07_table2_partition_mou(criterion):
    report = run_quadratic_risk(_config("table2.ini", estimators=("mou", "mou_split")))
    part, split = "MoU_Partition", "MoU_1/2;1/2"
    qr = _qr(report, "normal", part)
    checks = [0.0015 <= qr <= 0.006, qr < _qr(report, "normal", split)]
    parts = [f"normal QR {qr:.5f} in [0.0015, 0.006]",
             f"normal QR vs split {qr:.5f} < {_qr(report, 'normal', split):.5f}"]
    for law in ("student3", "lognormal", "pareto3"):
        a, b = _qr_sd(report, law, part), _qr_sd(report, law, split)
        checks.append(a < b)
        parts.append(f"{law} sd {a:.4f} {'<' if a < b else '>='} {b:.4f}")
    criterion(7, "partition MoU against the split-pairs baseline", all(checks), "; ".join(parts))


def test_c08_incomplete_u_variance_law(criterion):
    n, R = 100, 10**4
    h = variance_kernel()
    var_un = 4 * 0.5 / n + 2 * 1.0 / (n * (n - 1))
    sigma_sq = 2 * 0.5 + 1.0
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    ok, parts = True, []
    for M in (10, 50, 200):
        vals = np.empty(R)
        for r in range(R):
            x = rng.standard_normal(n)
            vals[r] = incomplete_ustat(x, h, sample_pairs(n, M, "mc", rng))
        target = (1 - 1 / M) * var_un + sigma_sq / M
        rel = abs(np.var(vals, ddof=1) / target - 1)
        ok &= rel <= 0.10
        parts.append(f"M={M}: rel err {rel:.3f}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    criterion(8, "incomplete U-statistic variance law (10%)", ok, ", ".join(parts) + f", {elapsed:.1f} s")


def test_c09_gradient_check(criterion):
    rng = np.random.default_rng(9)
    eps = 1e-6
    t0 = time.perf_counter()
    worst, done = 0.0, 0
    while done < 100:
        d = int(rng.integers(1, 5))
        A = rng.standard_normal((d, d))
        M = A @ A.T + 0.1 * np.eye(d)
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        label = bool(rng.integers(2))
        model = MahalanobisModel(M, margin=float(rng.uniform(0.5, 3)))
        D = x - y
        if abs(model.margin - D @ M @ D) < 1e-3:
            continue  # hinge kink: no derivative
        G = pairwise_loss_gradient(model, x, y, label)
        for a in range(d):
            for b in range(a, d):
                E = np.zeros((d, d))
                E[a, b] = E[b, a] = eps
                up = pairwise_loss(dataclasses.replace(model, M=M + E), x, y, label)
                dn = pairwise_loss(dataclasses.replace(model, M=M - E), x, y, label)
                fd = (up - dn) / (2 * eps)
                an = G[a, a] if a == b else G[a, b] + G[b, a]
                worst = max(worst, abs(fd - an))
        done += 1
    # block risk: central differences along a random symmetric direction
    pts = rng.standard_normal((12, 3))
    data = PairLabelDataset(pts, classes=rng.integers(0, 2, 12))
    model = MahalanobisModel(np.eye(3) * 0.3)
    idx = np.arange(12)
    _, G = block_risk_and_gradient(model, data, idx)
    for _ in range(10):
        S = rng.standard_normal((3, 3))
        S = (S + S.T) / 2
        up, _ = block_risk_and_gradient(dataclasses.replace(model, M=model.M + eps * S), data, idx)
        dn, _ = block_risk_and_gradient(dataclasses.replace(model, M=model.M - eps * S), data, idx)
        worst = max(worst, abs((up - dn) / (2 * eps) - np.sum(G * S)))
    elapsed = time.perf_counter() - t0
    criterion(9, "loss gradient vs central differences", worst <= 1e-4 and elapsed < 1.0,
              f"max |diff| = {worst:.2e} (tol 1e-4), {elapsed:.2f} s (limit 1 s)")


def test_c10_robust_gd(criterion):
    _, sec = cli._read_section(CONFIGS / "metric_learning.ini", None)
    seed = int(sec["seed"])
    t0 = time.perf_counter()
    spikes = {K: count_spikes(contamination_demo(seed, K, 0.05).full_risks) for K in (1, 11)}
    clean = {K: contamination_demo(seed, K, 0.0) for K in (1, 11)}
    ratio = {K: clean[K].full_risks[-1] / clean[K].initial_risk for K in (1, 11)}
    elapsed = time.perf_counter() - t0
    ok = spikes[11] == 0 and spikes[1] >= 1 and max(ratio.values()) <= 0.10 and elapsed < 60
    criterion(10, "MoRU gradient descent under contamination", ok,
              f"spikes K=11: {spikes[11]}, K=1: {spikes[1]}; clean final/initial risk "
              f"K=1 {ratio[1]:.4f}, K=11 {ratio[11]:.4f}; {elapsed:.1f} s")


def _student3_mean_abs_diff():
    # E|X - X'| = 2 * integral of F (1 - F)
    law = stats.t(3)
    val, _ = integrate.quad(lambda u: law.cdf(u) * law.sf(u), -np.inf, np.inf)
    return 2 * val


def test_c11_tournament(criterion):
    c_star = _student3_mean_abs_diff()
    cands = constant_shift_candidates([c_star, c_star + 0.5, c_star + 1.5])
    best, worst = cands[0].name, cands[2].name
    t0 = time.perf_counter()
    best_wins = worst_out = 0
    runs = 200
    for seed in range(runs):
        x = derive_generator(seed, 0).standard_t(3, size=1000)
        state = run_tournament(x, cands, beta=1.5, r=0.2, K=5, K2=11, rng=derive_generator(seed, 1))
        best_wins += best in state.champion_names
        worst_out += worst not in state.champion_names
    elapsed = time.perf_counter() - t0
    ok = best_wins >= 0.95 * runs and worst_out >= 0.90 * runs and elapsed < 120
    criterion(11, "tournament selection on Student(3)", ok,
              f"minimizer champion {best_wins}/{runs} (need >= 95%), worst excluded {worst_out}/{runs} "
              f"(need >= 90%), {elapsed:.1f} s")


CLI_EXPERIMENT = """[small]
n = 200
replications = {reps}
delta = 0.01
delta_grid = 0.2, 0.05, 0.01
seed = 5
task = {task}
laws = normal, student3
estimators = {estimators}
"""


def _cli_runs(tmp):
    sample = tmp / "sample.txt"
    sample.write_text("\n".join(repr(float(v)) for v in np.random.default_rng(3).standard_normal(300)) + "\n")
    mean_ini = tmp / "mean.ini"
    mean_ini.write_text(CLI_EXPERIMENT.format(reps=20, task="mean", estimators="mom, morm:9/20:swor"))
    pair_ini = tmp / "pair.ini"
    pair_ini.write_text(CLI_EXPERIMENT.format(reps=10, task="variance", estimators="mou, moru:9/20, moiu:3/10:mc"))
    return {
        "estimate": ["estimate", "--input", str(sample), "--estimator", "morm", "--tau", "9/20", "--delta", "0.01", "--seed", "11"],
        "estimate-pairwise": ["estimate", "--input", str(sample), "--estimator", "moiu", "--tau", "3/10",
                              "--kernel", "variance", "--delta", "0.01", "--seed", "11"],
        "risk-table": ["risk-table", "--config", str(mean_ini), "--seed", "2"],
        "risk-table-json": ["risk-table", "--config", str(pair_ini), "--format", "json", "--threads", "2"],
        "quantile-curves": ["quantile-curves", "--config", str(pair_ini)],
        "coverage": ["coverage", "--config", str(mean_ini)],
        "metric-learn": ["metric-learn", "--steps", "60", "--seed", "4"],
        "tournament": ["tournament", "--input", str(sample), "--centers", "1.1", "1.6", "3", "--seed", "9"],
    }


def test_c12_cli_determinism(criterion, tmp_path, capsys):
    differing = []
    for name, argv in _cli_runs(tmp_path).items():
        outputs = []
        for attempt in (1, 2):
            out = tmp_path / f"{name}.{attempt}.out"
            assert cli.main(argv + ["--output", str(out)]) == 0, name
            cfg = out.with_name(out.name + ".config.ini")
            outputs.append((out.read_bytes(), cfg.read_bytes() if cfg.exists() else b""))
        if outputs[0] != outputs[1]:
            differing.append(name)
    capsys.readouterr()
    runs = len(_cli_runs(tmp_path))
    criterion(12, "byte-identical CLI reports", not differing,
              f"{runs - len(differing)}/{runs} verbs reproducible" + (f", differing: {differing}" if differing else ""))
