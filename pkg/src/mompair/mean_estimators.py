"""Median-of-Means and Median-of-Randomized-Means for a scalar expectation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidArgument
from .sampling import as_generator, mc_blocks, partition_blocks, swor_blocks

__all__ = ["MeanEstimate", "median", "lower_median", "mom", "morm", "block_means"]


@dataclass(frozen=True)
class MeanEstimate:
    value: float
    block_values: np.ndarray
    plan: Optional[object] = None


def lower_median(values, axis=-1):
    """Lower median along ``axis``: the order statistic of 1-based rank
    ``(m + 1) / 2`` for odd ``m`` and ``m / 2`` for even ``m``.

    This is the one median used throughout the package.  It always returns
    an element of its input, never an average of two.
    """
    a = np.asarray(values, dtype=float)
    m = a.shape[axis]
    if m == 0:
        raise InvalidArgument("median of an empty list")
    k = (m - 1) // 2
    return np.take(np.partition(a, k, axis=axis), k, axis=axis)


def median(values) -> float:
    a = np.asarray(values, dtype=float).ravel()
    return float(lower_median(a))


def block_means(sample, blocks) -> np.ndarray:
    x = np.asarray(sample, dtype=float)
    return x[np.asarray(blocks)].mean(axis=1)


def mom(sample, K: int, rng=None, shuffle: bool = True, plan=None) -> MeanEstimate:
    """Median of the means of ``K`` disjoint blocks of size ``n // K``."""
    x = np.asarray(sample, dtype=float)
    blocks = partition_blocks(x.shape[0], K, rng, shuffle=shuffle).blocks
    values = block_means(x, blocks)
    return MeanEstimate(median(values), values, plan)


def morm(sample, K: int, B: int, scheme: str = "swor", rng=None, plan=None) -> MeanEstimate:
    """Median of ``K`` means over randomized blocks of size ``B``.

    ``scheme="swor"`` draws each block without replacement, ``"mc"`` with
    replacement.
    """
    x = np.asarray(sample, dtype=float)
    rng = as_generator(rng)
    if scheme == "swor":
        blocks = swor_blocks(x.shape[0], K, B, rng).blocks
    elif scheme == "mc":
        blocks = mc_blocks(x.shape[0], K, B, rng).blocks
    else:
        raise InvalidArgument(f"unknown block scheme {scheme!r}")
    values = block_means(x, blocks)
    return MeanEstimate(median(values), values, plan)
