"""Median-based estimators of pairwise expectations theta(h) = E h(X, X').

All estimators return a :class:`PairwiseEstimate` whose ``value`` is the
lower median of ``block_values``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ComplexityCap, InsufficientData, InvalidArgument
from .kernels import Kernel, block_ustats, split_pairs_values
from .mean_estimators import mom as _mom
from .mean_estimators import median
from .sampling import as_generator, partition_blocks, sample_pair_blocks, swor_blocks

__all__ = [
    "PairwiseEstimate",
    "MultiSampleSpec",
    "mou",
    "moru",
    "mom_on_split_pairs",
    "moiu",
    "mogu",
    "generalized_ustat",
    "DEFAULT_TUPLE_CAP",
]

DEFAULT_TUPLE_CAP = 10_000_000


@dataclass(frozen=True)
class PairwiseEstimate:
    value: float
    block_values: np.ndarray
    pairs_per_block: int
    plan: Optional[object] = None


@dataclass(frozen=True)
class MultiSampleSpec:
    """T independent samples and a kernel of ``sum(degrees)`` arguments.

    ``kernel`` is called with the arguments flattened sample by sample:
    ``kernel(x1_1, ..., x1_d1, x2_1, ..., xT_dT)``.
    """

    samples: Sequence
    degrees: Sequence[int]
    kernel: Callable
    _arrays: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        arrays = tuple(np.asarray(s, dtype=float) for s in self.samples)
        if len(arrays) != len(self.degrees) or not arrays:
            raise InvalidArgument("need one degree per sample and at least one sample")
        for t, (a, d) in enumerate(zip(arrays, self.degrees)):
            if int(d) != d or d < 1:
                raise InvalidArgument(f"degree d_{t} must be a positive integer")
            if a.shape[0] < d:
                raise InsufficientData(f"sample {t} has n={a.shape[0]} < degree {d}")
        object.__setattr__(self, "_arrays", arrays)

    @property
    def sizes(self):
        return [a.shape[0] for a in self._arrays]


def _pairwise(values, plan, P) -> PairwiseEstimate:
    return PairwiseEstimate(median(values), values, P, plan)


def mou(sample, h: Kernel, K: int, rng=None, shuffle: bool = True, plan=None) -> PairwiseEstimate:
    """Median of complete U-statistics over a partition into ``K`` blocks."""
    x = np.asarray(sample, dtype=float)
    n = x.shape[0]
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K!r}")
    if n // K < 2:
        raise InsufficientData(f"blocks of size n // K = {n // K} < 2 (n={n}, K={K})")
    blocks = partition_blocks(n, K, rng, shuffle=shuffle).blocks
    B = blocks.shape[1]
    return _pairwise(block_ustats(x, h, blocks), plan, B * (B - 1) // 2)


def moru(sample, h: Kernel, K: int, B: int, rng=None, plan=None) -> PairwiseEstimate:
    """Median of complete U-statistics over ``K`` SWoR blocks of size ``B``.

    Each block value averages ``h`` over its ``B(B-1)/2`` unordered pairs,
    so that its conditional expectation given the sample is U_n(h).
    """
    x = np.asarray(sample, dtype=float)
    if int(B) != B or B < 2:
        raise InsufficientData(f"randomized U-statistics need B >= 2, got B={B}")
    blocks = swor_blocks(x.shape[0], K, B, rng).blocks
    return _pairwise(block_ustats(x, h, blocks), plan, B * (B - 1) // 2)


def mom_on_split_pairs(sample, h: Kernel, K: int, rng=None, shuffle: bool = True, plan=None) -> PairwiseEstimate:
    """MoM over the ``n // 2`` independent values h(X_i, X_{i + n//2})."""
    values = split_pairs_values(sample, h)
    est = _mom(values, K, rng, shuffle=shuffle)
    return PairwiseEstimate(est.value, est.block_values, values.shape[0] // K, plan)


def moiu(sample, h: Kernel, K: int, M: int, scheme: str = "mc", rng=None, plan=None) -> PairwiseEstimate:
    """Median of ``K`` incomplete U-statistics, each over ``M`` sampled pairs."""
    x = np.asarray(sample, dtype=float)
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K!r}")
    pairs = sample_pair_blocks(x.shape[0], int(K), M, scheme, rng)
    vals = np.asarray(h(x[pairs[..., 0]], x[pairs[..., 1]]), dtype=float)
    return _pairwise(vals.mean(axis=1), plan, int(M))


def generalized_ustat(samples, degrees, kernel, cap: int = DEFAULT_TUPLE_CAP) -> float:
    """Complete T-sample U-statistic by exhaustive enumeration of index tuples."""
    samples = [np.asarray(s, dtype=float) for s in samples]
    count = 1
    for s, d in zip(samples, degrees):
        if s.shape[0] < d:
            raise InsufficientData(f"block of size {s.shape[0]} smaller than degree {d}")
        count *= math.comb(s.shape[0], d)
    if count > cap:
        raise ComplexityCap(f"{count} index tuples exceed the cap of {cap}")
    per_sample = [list(itertools.combinations(range(s.shape[0]), d)) for s, d in zip(samples, degrees)]
    vals = np.empty(count)
    for m, combo in enumerate(itertools.product(*per_sample)):
        args = [samples[t][i] for t, idx in enumerate(combo) for i in idx]
        vals[m] = kernel(*args)
    return float(np.mean(vals))


def mogu(
    spec: MultiSampleSpec,
    K: int,
    randomized: bool = False,
    block_sizes: Optional[Sequence[int]] = None,
    rng=None,
    shuffle: bool = True,
    cap: int = DEFAULT_TUPLE_CAP,
    plan=None,
) -> PairwiseEstimate:
    """Median of generalized U-statistics over K blocks per sample.

    With ``randomized=False`` every sample is partitioned into ``K`` blocks of
    size ``n_t // K`` (at least ``d_t``); otherwise block ``k`` of sample ``t`` is an SWoR draw
    of size ``block_sizes[t]``.
    """
    rng = as_generator(rng)
    arrays = spec._arrays
    degrees = [int(d) for d in spec.degrees]
    if int(K) != K or K < 1:
        raise InvalidArgument(f"K must be a positive integer, got {K!r}")
    K = int(K)
    if randomized:
        if block_sizes is None or len(block_sizes) != len(arrays):
            raise InvalidArgument("randomized blocks need one block size per sample")
        per_sample = []
        for a, d, b in zip(arrays, degrees, block_sizes):
            if b < d:
                raise InsufficientData(f"block size {b} below degree {d}")
            per_sample.append(swor_blocks(a.shape[0], K, b, rng).blocks)
    else:
        # the planner's K <= n_t / (d_t + 1) is a guarantee condition; the
        # estimator itself only needs every block to hold d_t points
        for a, d in zip(arrays, degrees):
            if a.shape[0] // K < d:
                raise InsufficientData(
                    f"block size n_t // K = {a.shape[0] // K} below degree {d} (K={K})"
                )
        per_sample = [partition_blocks(a.shape[0], K, rng, shuffle=shuffle).blocks for a in arrays]
    values = np.array(
        [
            generalized_ustat([a[blk[k]] for a, blk in zip(arrays, per_sample)], degrees, spec.kernel, cap)
            for k in range(K)
        ]
    )
    n_tuples = math.prod(math.comb(blk.shape[1], d) for blk, d in zip(per_sample, degrees))
    return PairwiseEstimate(median(values), values, n_tuples, plan)
