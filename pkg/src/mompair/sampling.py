"""Block and pair sampling schemes.

Every sampler takes a ``numpy.random.Generator`` (or anything accepted by
:func:`as_generator`) and returns index arrays, never data.  Blocks are
stored as a ``(K, B)`` integer array so estimators can gather
``sample[blocks]`` in one shot.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "BlockAssignment",
    "PairSubsample",
    "as_generator",
    "derive_generator",
    "partition_blocks",
    "swor_blocks",
    "mc_blocks",
    "sample_pairs",
    "pair_from_rank",
    "sample_pair_blocks",
]

# rejection sampling for SWoR is used while its acceptance rate stays above this
_MIN_ACCEPT = 0.25
# max K*n random keys materialised at once by the fallback SWoR path
_KEY_CHUNK = 4_000_000


def as_generator(rng=None) -> np.random.Generator:
    """Return a Generator from a Generator, a seed, a SeedSequence or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def derive_generator(seed: int, *key: int) -> np.random.Generator:
    """Counter-based child stream: the same ``(seed, key)`` always yields the
    same generator, regardless of how many other streams were derived."""
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))
    )


@dataclass(frozen=True)
class BlockAssignment:
    n: int
    blocks: np.ndarray  # (K, B) indices into 0..n-1
    scheme: str

    @property
    def K(self) -> int:
        return self.blocks.shape[0]

    @property
    def B(self) -> int:
        return self.blocks.shape[1]


@dataclass(frozen=True)
class PairSubsample:
    n: int
    pairs: np.ndarray  # (M, 2), pairs[:, 0] < pairs[:, 1]
    scheme: str

    @property
    def M(self) -> int:
        return self.pairs.shape[0]


def _check_count(name, value, low=1):
    if int(value) != value or value < low:
        raise InvalidArgument(f"{name} must be an integer >= {low}, got {value!r}")
    return int(value)


def partition_blocks(n: int, K: int, rng=None, shuffle: bool = True) -> BlockAssignment:
    """Split ``0..n-1`` into ``K`` disjoint blocks of size ``n // K``.

    Indices are shuffled first unless ``shuffle=False``, in which case the
    blocks are contiguous runs of the original order.  The ``n mod K``
    trailing indices of the (possibly shuffled) order are left out.
    """
    n = _check_count("n", n)
    if int(K) != K or not 1 <= K <= n:
        raise InvalidArgument(f"K must satisfy 1 <= K <= n={n}, got {K!r}")
    K = int(K)
    B = n // K
    order = as_generator(rng).permutation(n) if shuffle else np.arange(n)
    return BlockAssignment(n, order[: K * B].reshape(K, B), "partition")


def swor_blocks(n: int, K: int, B: int, rng=None) -> BlockAssignment:
    """``K`` independent uniform draws of a size-``B`` subset of ``0..n-1``."""
    n = _check_count("n", n)
    K = _check_count("K", K)
    if int(B) != B or not 1 <= B <= n:
        raise InvalidArgument(f"B must satisfy 1 <= B <= n={n}, got {B!r}")
    B = int(B)
    rng = as_generator(rng)
    # P(B uniform draws are all distinct)
    log_accept = sum(math.log1p(-t / n) for t in range(B))
    if log_accept >= math.log(_MIN_ACCEPT):
        blocks = _swor_rejection(n, K, B, rng)
    else:
        blocks = _swor_random_keys(n, K, B, rng)
    return BlockAssignment(n, blocks, "swor")


def _swor_rejection(n, K, B, rng):
    # i.i.d. uniform tuples conditioned on distinctness are uniform subsets
    blocks = rng.integers(0, n, size=(K, B))
    if B == 1:
        return blocks
    todo = np.arange(K)
    while todo.size:
        s = np.sort(blocks[todo], axis=1)
        bad = todo[np.any(s[:, 1:] == s[:, :-1], axis=1)]
        if bad.size:
            blocks[bad] = rng.integers(0, n, size=(bad.size, B))
        todo = bad
    return blocks


def _swor_random_keys(n, K, B, rng):
    rows = max(1, _KEY_CHUNK // n)
    out = np.empty((K, B), dtype=np.int64)
    for start in range(0, K, rows):
        stop = min(K, start + rows)
        keys = rng.random((stop - start, n))
        if B < n:
            out[start:stop] = np.argpartition(keys, B - 1, axis=1)[:, :B]
        else:
            out[start:stop] = np.argsort(keys, axis=1)
    return out


def mc_blocks(n: int, K: int, B: int, rng=None) -> BlockAssignment:
    """``K`` blocks of ``B`` indices drawn uniformly with replacement."""
    n = _check_count("n", n)
    K = _check_count("K", K)
    B = _check_count("B", B)
    return BlockAssignment(n, as_generator(rng).integers(0, n, size=(K, B)), "mc")


def pair_from_rank(rank, n: int) -> np.ndarray:
    """Map ranks in ``0..n(n-1)/2 - 1`` to pairs ``(i, j)``, ``i < j``, in the
    row-major order of ``numpy.triu_indices(n, 1)``."""
    rank = np.asarray(rank, dtype=np.int64)
    # number of pairs whose first index is < i:  c(i) = i*(2n - i - 1)/2
    disc = (2 * n - 1) ** 2 - 8 * rank.astype(np.float64)
    i = np.floor(((2 * n - 1) - np.sqrt(disc)) / 2).astype(np.int64)
    i = np.clip(i, 0, n - 2)
    c = i * (2 * n - i - 1) // 2
    # float rounding can land one row off in either direction
    hi = c > rank
    i[hi] -= 1
    c = i * (2 * n - i - 1) // 2
    nxt = (i + 1) * (2 * n - i - 2) // 2
    lo = nxt <= rank
    i[lo] += 1
    c = i * (2 * n - i - 1) // 2
    j = rank - c + i + 1
    return np.stack([i, j], axis=-1)


def sample_pairs(n: int, M: int, scheme: str = "mc", rng=None) -> PairSubsample:
    """Draw ``M`` pairs from ``{(i, j): 0 <= i < j < n}``.

    ``scheme`` is ``"mc"`` (with replacement) or ``"swor"`` (without
    replacement, requires ``M <= n(n-1)/2``).
    """
    n = _check_count("n", n, low=2)
    M = _check_count("M", M)
    rng = as_generator(rng)
    total = n * (n - 1) // 2
    if scheme == "mc":
        a = rng.integers(0, n, size=M)
        b = rng.integers(0, n - 1, size=M)
        b = b + (b >= a)
        pairs = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=-1)
    elif scheme == "swor":
        if M > total:
            raise InvalidArgument(
                f"cannot draw M={M} distinct pairs out of n(n-1)/2={total}"
            )
        pairs = pair_from_rank(rng.choice(total, size=M, replace=False), n)
    else:
        raise InvalidArgument(f"unknown pair sampling scheme {scheme!r}")
    return PairSubsample(n, pairs, scheme)


def sample_pair_blocks(n: int, K: int, M: int, scheme: str = "mc", rng=None) -> np.ndarray:
    """``K`` independent pair subsamples at once, as a ``(K, M, 2)`` array.

    Same law per row as :func:`sample_pairs`, vectorized over rows.
    """
    n = _check_count("n", n, low=2)
    K = _check_count("K", K)
    M = _check_count("M", M)
    rng = as_generator(rng)
    total = n * (n - 1) // 2
    if scheme == "mc":
        a = rng.integers(0, n, size=(K, M))
        b = rng.integers(0, n - 1, size=(K, M))
        b = b + (b >= a)
        return np.stack([np.minimum(a, b), np.maximum(a, b)], axis=-1)
    if scheme == "swor":
        if M > total:
            raise InvalidArgument(f"cannot draw M={M} distinct pairs out of n(n-1)/2={total}")
        return pair_from_rank(swor_blocks(total, K, M, rng).blocks, n)
    raise InvalidArgument(f"unknown pair sampling scheme {scheme!r}")
