"""Champion frequencies of the tournament over seeded Student(3) samples.

Candidates predict a constant c for |X - X'|; the risk minimizer is
c* = E|X - X'|, computed here by numerical integration (needs scipy).
"""
import argparse
import sys
from collections import Counter

from scipy import integrate, stats

from mompair.learning import constant_shift_candidates, run_tournament
from mompair.sampling import derive_generator


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--shifts", type=float, nargs="+", default=[0.0, 0.5, 1.5])
    args = ap.parse_args(argv)
    law = stats.t(3)
    half, _ = integrate.quad(lambda u: law.cdf(u) * law.sf(u), -float("inf"), float("inf"))
    c_star = 2 * half
    cands = constant_shift_candidates([c_star + s for s in args.shifts])
    wins = Counter()
    for seed in range(args.runs):
        x = derive_generator(seed, 0).standard_t(3, size=args.n)
        state = run_tournament(x, cands, beta=1.5, r=0.2, K=5, K2=11, rng=derive_generator(seed, 1))
        wins.update(state.champion_names)
    print(f"c* = {c_star:.5f}")
    for shift, cand in zip(args.shifts, cands):
        print(f"c* + {shift:<4}  champion in {wins[cand.name]}/{args.runs} runs")
    return 0


if __name__ == "__main__":
    sys.exit(main())
