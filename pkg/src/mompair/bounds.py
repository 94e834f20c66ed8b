"""Parameter planners (K, B) and certified deviation radii.

Every planner takes the sample size ``n``, a confidence level ``delta`` and,
where relevant, the trade-off parameter ``tau`` in (0, 1/2).  Variance
inputs are optional: without them the plan still fixes ``K`` and ``B`` but
carries ``radius=None``.  All logarithms are natural.

Each radius ``r`` certifies ``P(|estimate - theta| > r) <= delta`` under the
corresponding concentration result, with ``sigma`` the standard deviation of
the observations (mean estimators) or ``sigma1_sq``/``sigma2_sq`` the
Hoeffding variances of the kernel (pairwise estimators).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgument, OutOfRange
from .sampling import as_generator, derive_generator

__all__ = [
    "EstimatorPlan",
    "plan_mom",
    "plan_morm",
    "plan_mou",
    "plan_moru",
    "plan_mom_split_pairs",
    "plan_moiu",
    "plan_mogu",
    "plan_morgu",
    "morm_constants",
    "moru_constants",
    "plan_with_plugin",
    "coverage_check",
]

# relative slack when snapping floor/ceil arguments that sit on an integer
_SNAP = 1e-12


def _floor(v: float) -> int:
    return math.floor(v + _SNAP * abs(v))


def _ceil(v: float) -> int:
    return math.ceil(v - _SNAP * abs(v))


@dataclass(frozen=True)
class EstimatorPlan:
    estimator: str
    n: int
    delta: float
    K: int
    B: int
    tau: Optional[float] = None
    radius: Optional[float] = None
    variance_inputs: dict = field(default_factory=dict)
    M: Optional[int] = None
    scheme: Optional[str] = None
    note: str = ""


def _check_delta(delta):
    if not 0 < delta < 1:
        raise OutOfRange(f"delta must lie in (0, 1), got {delta}")


def _check_tau(tau):
    if tau is None or not 0 < tau < 0.5:
        raise InvalidArgument(f"tau must lie in (0, 1/2), got {tau}")


def _check_n(n, low=1):
    if int(n) != n or n < low:
        raise InvalidArgument(f"n must be an integer >= {low}, got {n!r}")
    return int(n)


def plan_mom(n: int, delta: float, sigma: Optional[float] = None) -> EstimatorPlan:
    """K = ceil(log(1/delta)), B = n // K, admissible for delta >= e^(1 - n/2)."""
    n = _check_n(n)
    _check_delta(delta)
    floor_ = math.exp(1 - n / 2)
    if delta < floor_:
        raise OutOfRange(
            f"MoM requires delta >= e^(1 - n/2) = {floor_:.6g} for n={n}, got {delta:g}"
        )
    L = math.log(1 / delta)
    K = max(1, _ceil(L))
    radius = None
    if sigma is not None:
        radius = 2 * math.sqrt(2) * math.e * sigma * math.sqrt((1 + L) / n)
    return EstimatorPlan("MoM", n, delta, K, n // K, radius=radius,
                         variance_inputs={} if sigma is None else {"sigma": sigma})


def morm_constants(tau: float) -> float:
    """Leading constant 3 sqrt(3) / (2 tau^(3/2)) of the randomized-means radius."""
    return 3 * math.sqrt(3) / (2 * tau**1.5)


def _randomized_shape(n, delta, tau, label):
    _check_delta(delta)
    _check_tau(tau)
    L = math.log(2 / delta)
    floor_ = 2 * math.exp(-8 * tau**2 * n / 9)
    K = _ceil(L / (2 * (0.5 - tau) ** 2))
    B = _floor(8 * tau**2 * n / (9 * L))
    if delta < floor_ or B < 1:
        raise OutOfRange(
            f"{label} requires delta >= 2 e^(-8 tau^2 n / 9) = {floor_:.6g} "
            f"(n={n}, tau={tau}) so that B >= 1; got delta={delta:g}"
        )
    return L, K, B


def plan_morm(n: int, delta: float, tau: float, sigma: Optional[float] = None,
              scheme: str = "swor") -> EstimatorPlan:
    """K = ceil(log(2/delta) / (2 (1/2 - tau)^2)), B = floor(8 tau^2 n / (9 log(2/delta)))."""
    n = _check_n(n)
    L, K, B = _randomized_shape(n, delta, tau, "MoRM")
    radius = None
    if sigma is not None:
        radius = morm_constants(tau) * sigma * math.sqrt(L / n)
    note = "" if scheme == "swor" else "no deviation guarantee for with-replacement blocks"
    return EstimatorPlan("MoRM", n, delta, K, B, tau=tau, radius=radius,
                         variance_inputs={} if sigma is None else {"sigma": sigma},
                         scheme=scheme, note=note)


def _two_term(c1, c2, L, n, denom):
    return math.sqrt(c1 * L / n + c2 * L**2 / (n * denom))


def plan_mou(n: int, delta: float, sigma1_sq: Optional[float] = None,
             sigma2_sq: Optional[float] = None) -> EstimatorPlan:
    """K = ceil(9/2 log(1/delta)) blocks of size n // K; delta >= e^(1 - 2n/9)."""
    n = _check_n(n, 2)
    _check_delta(delta)
    L = math.log(1 / delta)
    floor_ = math.exp(1 - 2 * n / 9)
    if delta < floor_ or 2 * n <= 9 * L:
        raise OutOfRange(
            f"MoU requires delta >= e^(1 - 2n/9) = {floor_:.6g} for n={n}, got {delta:g}"
        )
    K = max(1, _ceil(4.5 * L))
    radius = None
    inputs = {}
    if sigma1_sq is not None and sigma2_sq is not None:
        radius = _two_term(108 * sigma1_sq, 486 * sigma2_sq, L, n, 2 * n - 9 * L)
        inputs = {"sigma1_sq": sigma1_sq, "sigma2_sq": sigma2_sq}
    return EstimatorPlan("MoU", n, delta, K, n // K, radius=radius, variance_inputs=inputs)


def moru_constants(tau: float, sigma1_sq: float, sigma2_sq: float):
    """(C1(tau), C2(tau)) = (27 s1^2 / (2 tau^3), 243 s2^2 / (4 tau^3))."""
    return 27 * sigma1_sq / (2 * tau**3), 243 * sigma2_sq / (4 * tau**3)


def plan_moru(n: int, delta: float, tau: float, sigma1_sq: Optional[float] = None,
              sigma2_sq: Optional[float] = None) -> EstimatorPlan:
    """Randomized-block shape of :func:`plan_morm` with the two-term radius."""
    n = _check_n(n, 2)
    L, K, B = _randomized_shape(n, delta, tau, "MoRU")
    if B < 2:
        raise OutOfRange(
            f"MoRU needs blocks of size >= 2 but the plan gives B={B} "
            f"(n={n}, delta={delta:g}, tau={tau})"
        )
    radius = None
    inputs = {}
    if sigma1_sq is not None and sigma2_sq is not None:
        c1, c2 = moru_constants(tau, sigma1_sq, sigma2_sq)
        radius = _two_term(c1, c2, L, n, 8 * n - 9 * L)
        inputs = {"sigma1_sq": sigma1_sq, "sigma2_sq": sigma2_sq}
    return EstimatorPlan("MoRU", n, delta, K, B, tau=tau, radius=radius, variance_inputs=inputs)


def plan_mom_split_pairs(n: int, delta: float, sigma1_sq: Optional[float] = None,
                         sigma2_sq: Optional[float] = None) -> EstimatorPlan:
    """MoM applied to the n // 2 independent pairs (i, i + n // 2)."""
    n = _check_n(n, 2)
    half = n // 2
    base = plan_mom(half, delta)
    radius = None
    inputs = {}
    if sigma1_sq is not None and sigma2_sq is not None:
        sigma_h = math.sqrt(2 * sigma1_sq + sigma2_sq)
        radius = 2 * math.sqrt(2) * math.e * sigma_h * math.sqrt((1 + math.log(1 / delta)) / half)
        inputs = {"sigma1_sq": sigma1_sq, "sigma2_sq": sigma2_sq}
    return EstimatorPlan("MoM-split-pairs", n, delta, base.K, base.B, radius=radius,
                         variance_inputs=inputs)


def plan_moiu(n: int, delta: float, tau: float, M: Optional[int] = None,
              scheme: str = "mc") -> EstimatorPlan:
    """K from the randomized-block shape, ``M`` pairs per subsample (default n).

    No deviation bound is available for this estimator; ``radius`` is None.
    """
    n = _check_n(n, 2)
    _, K, _ = _randomized_shape(n, delta, tau, "MoIU")
    M = n if M is None else int(M)
    return EstimatorPlan("MoIU", n, delta, K, 2, tau=tau, M=M, scheme=scheme,
                         note="K reuses the randomized-block shape; no guarantee")


def _min_ratio(ns, ds):
    ratios = [n / d for n, d in zip(ns, ds)]
    return min(ratios)


def plan_mogu(ns: Sequence[int], ds: Sequence[int], delta: float,
              sigma1_sq: Optional[float] = None, sigma2_sq: Optional[float] = None) -> EstimatorPlan:
    """T-sample analogue of :func:`plan_mou` (partition blocks)."""
    _check_delta(delta)
    ratio = _min_ratio(ns, ds)
    n_min = min(ns)
    L = math.log(1 / delta)
    floor_ = math.exp(1 - 2 * ratio / 9)
    if delta < floor_:
        raise OutOfRange(f"MoGU requires delta >= {floor_:.6g}, got {delta:g}")
    K = max(1, _ceil(4.5 * L))
    if any(K * (d + 1) > n for n, d in zip(ns, ds)):
        raise OutOfRange(f"K={K} blocks do not fit every sample (need K <= n_t/(d_t+1))")
    radius = None
    inputs = {}
    if sigma1_sq is not None and sigma2_sq is not None and 2 * n_min > 9 * L:
        radius = _two_term(108 * sigma1_sq, 486 * sigma2_sq, L, n_min, 2 * n_min - 9 * L)
        inputs = {"sigma1_sq": sigma1_sq, "sigma2_sq": sigma2_sq}
    return EstimatorPlan("MoGU", n_min, delta, K, min(n // K for n in ns), radius=radius,
                         variance_inputs=inputs,
                         note=f"block sizes {[n // K for n in ns]}")


def plan_morgu(ns: Sequence[int], ds: Sequence[int], delta: float, tau: float,
               sigma1_sq: Optional[float] = None, sigma2_sq: Optional[float] = None) -> EstimatorPlan:
    """T-sample analogue of :func:`plan_moru`; per-sample sizes in ``note``."""
    _check_delta(delta)
    _check_tau(tau)
    ratio = _min_ratio(ns, ds)
    n_min = min(ns)
    L = math.log(2 / delta)
    floor_ = 2 * math.exp(-8 * tau**2 * ratio / 9)
    if delta < floor_:
        raise OutOfRange(f"MoRGU requires delta >= {floor_:.6g}, got {delta:g}")
    K = _ceil(L / (2 * (0.5 - tau) ** 2))
    sizes = [_floor(8 * tau**2 * n / (9 * L)) for n in ns]
    for b, d in zip(sizes, ds):
        if b < d:
            raise OutOfRange(
                f"MoRGU block size {b} falls below the kernel degree {d}; "
                f"increase n or delta"
            )
    radius = None
    inputs = {}
    if sigma1_sq is not None and sigma2_sq is not None:
        c1, c2 = moru_constants(tau, sigma1_sq, sigma2_sq)
        radius = _two_term(c1, c2, L, n_min, 8 * n_min - 9 * L)
        inputs = {"sigma1_sq": sigma1_sq, "sigma2_sq": sigma2_sq}
    return EstimatorPlan("MoRGU", n_min, delta, K, min(sizes), tau=tau, radius=radius,
                         variance_inputs=inputs, note=f"block sizes {sizes}")


def plan_with_plugin(estimator: str, sample, delta: float, tau: Optional[float] = None,
                     kernel=None, max_n: int = 2000, rng=None) -> EstimatorPlan:
    """Plan with variance inputs estimated from ``sample`` itself.

    The concentration results assume known variances; radii produced here
    are plug-in approximations and are labelled as such in ``note``.
    """
    from .kernels import estimate_components

    x = np.asarray(sample, dtype=float)
    n = x.shape[0]
    if estimator in ("MoM", "MoRM"):
        sigma = float(np.std(x, ddof=1)) if n > 1 else 0.0
        plan = plan_mom(n, delta, sigma) if estimator == "MoM" else plan_morm(n, delta, tau, sigma)
    else:
        comp = estimate_components(x, kernel, max_n=max_n, rng=rng)
        s1, s2 = comp.sigma1_sq, comp.sigma2_sq
        if estimator == "MoU":
            plan = plan_mou(n, delta, s1, s2)
        elif estimator == "MoRU":
            plan = plan_moru(n, delta, tau, s1, s2)
        elif estimator == "MoM-split-pairs":
            plan = plan_mom_split_pairs(n, delta, s1, s2)
        else:
            raise InvalidArgument(f"no plug-in planner for {estimator!r}")
    return _replace_note(plan, "plug-in variance estimates; outside the bound's assumptions")


def _replace_note(plan, note):
    from dataclasses import replace

    return replace(plan, note=(plan.note + "; " if plan.note else "") + note)


def run_plan(plan: EstimatorPlan, sample, kernel=None, rng=None):
    """Apply the estimator a plan describes to ``sample``."""
    from . import mean_estimators as me
    from . import ustat_estimators as ue

    rng = as_generator(rng)
    name = plan.estimator
    if name == "MoM":
        return me.mom(sample, plan.K, rng, plan=plan)
    if name == "MoRM":
        return me.morm(sample, plan.K, plan.B, plan.scheme or "swor", rng, plan=plan)
    if kernel is None:
        raise InvalidArgument(f"{name} needs a kernel")
    if name == "MoU":
        return ue.mou(sample, kernel, plan.K, rng, plan=plan)
    if name == "MoRU":
        return ue.moru(sample, kernel, plan.K, plan.B, rng, plan=plan)
    if name == "MoM-split-pairs":
        return ue.mom_on_split_pairs(sample, kernel, plan.K, rng, plan=plan)
    if name == "MoIU":
        return ue.moiu(sample, kernel, plan.K, plan.M, plan.scheme or "mc", rng, plan=plan)
    raise InvalidArgument(f"cannot run plan for {name!r}")


def coverage_check(plan: EstimatorPlan, law, replications: int, rng=None, kernel=None,
                   seed: Optional[int] = None) -> float:
    """Fraction of replications with ``|estimate - theta| > plan.radius``.

    ``theta`` is the law's mean for mean estimators and its variance for
    pairwise ones (``kernel`` is then expected to be the variance kernel).
    The bounds are conservative, so values far below ``delta`` are normal;
    this function reports and never asserts.
    """
    from .distributions import draw

    if replications < 100:
        raise InvalidArgument("coverage_check needs at least 100 replications")
    if plan.radius is None:
        raise InvalidArgument("plan carries no radius; supply variance inputs")
    pairwise = plan.estimator not in ("MoM", "MoRM")
    theta = law.true_variance if pairwise else law.true_mean
    if seed is None:
        seed = int(as_generator(rng).integers(2**63))
    misses = 0
    for r in range(replications):
        g = derive_generator(seed, r)
        x = draw(law, plan.n, g)
        est = run_plan(plan, x, kernel, g)
        misses += abs(est.value - theta) > plan.radius
    return misses / replications
