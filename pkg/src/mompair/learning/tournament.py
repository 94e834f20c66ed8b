"""Tournament selection over a finite candidate class with MoU matches.

A candidate ``f`` is given through its pairwise loss ``loss(x, x')`` and
``H_f = sqrt(loss)``.  The data is shuffled once and split into halves
``S`` and ``S'``.  On ``S`` the distance oracle ``Phi_S(f, g)`` (median over
blocks of the U-statistic of ``|H_f - H_g|``) decides which matches take
place: only pairs with ``Phi_S >= beta * r``.  On ``S'`` a match is decided
by ``Psi_S'(f, g)``, the median over blocks of the U-statistic of
``H_f^2 - H_g^2``; ``f`` wins iff ``Psi <= 0``.  Champions are the
candidates that lose no match they take part in.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Dict, FrozenSet, Sequence, Tuple

import numpy as np

from ..errors import InvalidArgument
from ..kernels import Kernel, block_ustats
from ..mean_estimators import median
from ..sampling import as_generator, partition_blocks

__all__ = [
    "Candidate",
    "TournamentState",
    "phi_distance_oracle",
    "psi_statistic",
    "psi_match",
    "run_tournament",
    "constant_shift_candidates",
]


@dataclass(frozen=True)
class Candidate:
    name: str
    loss: Callable  # vectorized l(f, (x, x')) >= 0

    def H(self, x, y):
        return np.sqrt(np.asarray(self.loss(x, y), dtype=float))


def _blocks(n: int, K: int):
    # contiguous blocks: callers shuffle the data beforehand, and Phi/Psi of
    # (f, g) and (g, f) must see the very same partition
    return partition_blocks(n, K, shuffle=False).blocks


def phi_distance_oracle(S, f: Candidate, g: Candidate, K: int) -> float:
    """Median over ``K`` blocks of the U-statistic of ``|H_f - H_g|``."""
    S = np.asarray(S, dtype=float)
    h = Kernel(lambda x, y: np.abs(f.H(x, y) - g.H(x, y)), "abs_H_diff")
    return median(block_ustats(S, h, _blocks(S.shape[0], K)))


def psi_statistic(S2, f: Candidate, g: Candidate, K2: int) -> float:
    S2 = np.asarray(S2, dtype=float)
    h = Kernel(
        lambda x, y: np.asarray(f.loss(x, y), dtype=float) - np.asarray(g.loss(x, y), dtype=float),
        "loss_diff",
    )
    return median(block_ustats(S2, h, _blocks(S2.shape[0], K2)))


def psi_match(S2, f: Candidate, g: Candidate, K2: int) -> Candidate:
    """Winner of the match: ``f`` iff the median block risk difference is <= 0."""
    return f if psi_statistic(S2, f, g, K2) <= 0 else g


@dataclass(frozen=True)
class TournamentState:
    candidates: Tuple[Candidate, ...]
    split: Tuple[np.ndarray, np.ndarray]
    thresholds: Tuple[float, float]
    phi: Dict[Tuple[str, str], float] = field(default_factory=dict)
    allowed_matches: FrozenSet[Tuple[str, str]] = frozenset()
    match_results: Dict[Tuple[str, str], str] = field(default_factory=dict)

    @property
    def champions(self) -> Tuple[Candidate, ...]:
        # f keeps its title iff Psi(f, g) <= 0 against every allowed g
        losers = {a for (a, _), winner in self.match_results.items() if winner != a}
        return tuple(c for c in self.candidates if c.name not in losers)

    @property
    def champion_names(self) -> FrozenSet[str]:
        return frozenset(c.name for c in self.champions)


def run_tournament(
    data,
    candidates: Sequence[Candidate],
    beta: float,
    r: float,
    K: int,
    K2: int,
    rng=None,
) -> TournamentState:
    """Play all allowed matches and return the full tournament record.

    Each ordered pair ``(f, g)`` is judged on its own, so with ties (a zero
    median) both sides may win their side of a match; the champion set
    never depends on the order of ``candidates``.
    """
    candidates = tuple(candidates)
    if not candidates:
        raise InvalidArgument("empty candidate list")
    names = [c.name for c in candidates]
    if len(set(names)) != len(names):
        raise InvalidArgument("candidate names must be unique")
    if not beta > 1 or not r > 0:
        raise InvalidArgument("need beta > 1 and r > 0")
    x = np.asarray(data, dtype=float)
    x = x[as_generator(rng).permutation(x.shape[0])]
    half = x.shape[0] // 2
    S, S2 = x[:half], x[half:]
    by_name = {c.name: c for c in candidates}
    phi, allowed, results = {}, set(), {}
    for a, b in permutations(sorted(names), 2):
        if a < b:
            phi[(a, b)] = phi[(b, a)] = phi_distance_oracle(S, by_name[a], by_name[b], K)
        if phi[(a, b)] >= beta * r:
            allowed.add((a, b))
            results[(a, b)] = psi_match(S2, by_name[a], by_name[b], K2).name
    return TournamentState(candidates, (S, S2), (beta, r), phi, frozenset(allowed), results)


def constant_shift_candidates(centers: Sequence[float]):
    """Candidates predicting the constant ``c`` for ``|x - x'|`` under squared loss.

    The risk ``E(|X - X'| - c)^2`` is minimized at ``c = E|X - X'|``.
    """
    def make(c):
        return Candidate(f"c={c!r}", lambda x, y: (np.abs(np.asarray(x) - np.asarray(y)) - c) ** 2)

    return [make(float(c)) for c in centers]
