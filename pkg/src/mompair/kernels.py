"""Symmetric pairwise kernels and degree-two U-statistics.

A kernel's ``func`` is vectorised over leading axes: given two arrays of
observations with matching shapes ``(m,)`` (scalar data) or ``(m, d)``
(vector data) it returns the ``m`` kernel values.  Kernels may also carry a
closed form ``block_ustat`` mapping a ``(K, B, ...)`` array of blocks to the
``K`` within-block U-statistics; estimators use it when present.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InsufficientData, InvalidArgument
from .sampling import PairSubsample, as_generator

__all__ = [
    "Kernel",
    "HoeffdingComponents",
    "variance_kernel",
    "abs_diff_kernel",
    "clustering_kernel",
    "ranking_kernel",
    "complete_ustat",
    "split_pairs_values",
    "split_pairs_estimate",
    "incomplete_ustat",
    "block_ustats",
    "estimate_components",
]

# kernel evaluations materialised at once when summing over pairs
_CHUNK = 2_000_000


@dataclass(frozen=True)
class Kernel:
    func: Callable
    name: str = "kernel"
    block_ustat: Optional[Callable] = None

    def __call__(self, x, y):
        return self.func(x, y)


@dataclass(frozen=True)
class HoeffdingComponents:
    theta: float
    sigma1_sq: float
    sigma2_sq: float
    sigma_sq: float

    @property
    def clipping_slack(self) -> float:
        """``sigma_sq - 2 sigma1_sq - sigma2_sq``; zero unless sigma2_sq was clipped."""
        return self.sigma_sq - 2.0 * self.sigma1_sq - self.sigma2_sq


def _half_sq_diff(x, y):
    return (x - y) ** 2 / 2


def _block_sample_variance(xb):
    # U-statistic of (x - y)^2 / 2 over a block is its unbiased sample variance
    return np.var(xb, axis=1, ddof=1)


def variance_kernel(fast: bool = True) -> Kernel:
    """h(x, y) = (x - y)^2 / 2, whose expectation is Var(X) (scalar data)."""
    return Kernel(_half_sq_diff, "variance", _block_sample_variance if fast else None)


def _abs_diff(x, y):
    return np.abs(x - y)


def abs_diff_kernel() -> Kernel:
    """h(x, y) = |x - y| (Gini mean difference)."""
    return Kernel(_abs_diff, "abs_diff")


def clustering_kernel(metric: Callable, partition: Callable) -> Kernel:
    """D(x, y) * 1{x and y fall in the same cell}.

    ``metric(x, y)`` is a vectorised dissimilarity and ``partition(x)`` maps
    observations to integer cell labels.
    """

    def h(x, y):
        same = np.asarray(partition(x)) == np.asarray(partition(y))
        return np.asarray(metric(x, y), dtype=float) * same

    return Kernel(h, "clustering")


def ranking_kernel(rule: Callable, loss: Callable) -> Kernel:
    """loss(-r(x, x') * (y - y')) on labelled observations.

    Observations are vectors whose last coordinate is the label ``y``; the
    ranking ``rule`` acts on the feature part and must be anti-symmetric
    (values in {-1, 0, 1}).
    """

    def h(a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        r = np.asarray(rule(a[..., :-1], b[..., :-1]), dtype=float)
        return loss(-r * (a[..., -1] - b[..., -1]))

    return Kernel(h, "ranking")


def _as_sample(sample) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    if x.ndim == 0:
        raise InvalidArgument("sample must be one- or two-dimensional")
    return x


def _pair_chunks(x, h):
    """Yield ``(i, j, h(x_i, x_j))`` over all pairs i < j in row chunks."""
    n = x.shape[0]
    step = max(1, _CHUNK // n)
    cols = np.arange(n)
    for start in range(0, n - 1, step):
        stop = min(n - 1, start + step)
        ii, jj = np.nonzero(np.arange(start, stop)[:, None] < cols[None, :])
        ii = ii + start
        yield ii, jj, np.asarray(h(x[ii], x[jj]), dtype=float)


def complete_ustat(sample, h: Kernel) -> float:
    """Average of ``h`` over all ``n(n-1)/2`` pairs of distinct observations."""
    x = _as_sample(sample)
    n = x.shape[0]
    if n < 2:
        raise InsufficientData(f"a U-statistic needs n >= 2, got n={n}")
    # chunk sums are combined exactly so the total does not drift for large n
    total = math.fsum(float(np.sum(v)) for _, _, v in _pair_chunks(x, h))
    return total / (n * (n - 1) / 2)


def split_pairs_values(sample, h: Kernel) -> np.ndarray:
    """The ``n // 2`` i.i.d. values h(X_i, X_{i + n//2})."""
    x = _as_sample(sample)
    n = x.shape[0]
    if n < 2:
        raise InsufficientData(f"need n >= 2, got n={n}")
    half = n // 2
    return np.asarray(h(x[:half], x[half : 2 * half]), dtype=float)


def split_pairs_estimate(sample, h: Kernel) -> float:
    return float(np.mean(split_pairs_values(sample, h)))


def incomplete_ustat(sample, h: Kernel, pairs: PairSubsample) -> float:
    """Average of ``h`` over the sampled pairs."""
    x = _as_sample(sample)
    p = np.asarray(pairs.pairs)
    if pairs.n != x.shape[0]:
        raise InvalidArgument(f"pairs drawn for n={pairs.n}, sample has n={x.shape[0]}")
    if p.size == 0:
        raise InvalidArgument("empty pair subsample")
    if p.min() < 0 or p.max() >= x.shape[0]:
        raise InvalidArgument("pair index out of range")
    return float(np.mean(np.asarray(h(x[p[:, 0]], x[p[:, 1]]), dtype=float)))


def block_ustats(sample, h: Kernel, blocks) -> np.ndarray:
    """Complete U-statistic of ``h`` inside each row of ``blocks``."""
    x = _as_sample(sample)
    blocks = np.asarray(blocks)
    K, B = blocks.shape
    if B < 2:
        raise InsufficientData(f"blocks need at least 2 points, got B={B}")
    if h.block_ustat is not None:
        return np.asarray(h.block_ustat(x[blocks]), dtype=float)
    P = B * (B - 1) // 2
    if P > _CHUNK:
        return np.array([complete_ustat(x[b], h) for b in blocks])
    I, J = np.triu_indices(B, 1)
    out = np.empty(K)
    step = max(1, _CHUNK // P)
    for start in range(0, K, step):
        xb = x[blocks[start : start + step]]
        vals = np.asarray(h(xb[:, I], xb[:, J]), dtype=float)
        out[start : start + step] = np.mean(vals, axis=1)
    return out


def estimate_components(sample, h: Kernel, max_n: Optional[int] = None, rng=None) -> HoeffdingComponents:
    """Plug-in estimates of theta(h) and the Hoeffding variances.

    The cost is O(n^2) kernel evaluations.  With ``max_n`` set and
    ``n > max_n``, the estimates are computed on a uniform subsample of
    ``max_n`` observations drawn with ``rng``.
    """
    x = _as_sample(sample)
    if max_n is not None and x.shape[0] > max_n:
        x = x[as_generator(rng).choice(x.shape[0], size=max_n, replace=False)]
    n = x.shape[0]
    if n < 4:
        raise InsufficientData(f"component estimates need n >= 4, got n={n}")
    n_pairs = n * (n - 1) / 2
    sums = []
    row_tot = np.zeros(n)
    for ii, jj, v in _pair_chunks(x, h):
        sums.append(float(np.sum(v)))
        row_tot += np.bincount(ii, v, minlength=n) + np.bincount(jj, v, minlength=n)
    theta = math.fsum(sums) / n_pairs
    h1 = row_tot / (n - 1) - theta
    sigma1_sq = float(np.mean(h1**2))
    # second pass: deviations around theta, avoids cancellation in sum(h^2) - N theta^2
    sigma_sq = math.fsum(
        float(np.sum((v - theta) ** 2)) for _, _, v in _pair_chunks(x, h)
    ) / n_pairs
    sigma2_sq = max(0.0, sigma_sq - 2.0 * sigma1_sq)
    return HoeffdingComponents(theta, sigma1_sq, sigma2_sq, sigma_sq)
