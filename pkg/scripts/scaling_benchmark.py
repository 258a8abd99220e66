"""Wall time per iteration against the number of groups and against total mass.

    python3 scripts/scaling_benchmark.py [--sizes 250 500 1000 2000 4000] [--iterations 3]
"""

import argparse
import time

from pram import Group, Population, Signature, run
from pram.dsl import parse_rules

RULES = parse_rules("""
rule progression {
  when flu == s => { 0.1 : set flu = e ; 0.9 : }
  when flu == e => { 0.2 : set flu = r ; 0.8 : }
  when flu == r => { 0.05 : set flu = s ; 0.95 : }
}""")


def population(n_ids, scale=1.0):
    return Population(
        Group(Signature.make({"flu": f, "id": i}), scale * (1 + i % 7)) for i in range(n_ids) for f in "ser"
    )


def best_of(pop, iterations, repeats=5):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        run(pop, RULES, iterations)
        best = min(best, time.perf_counter() - t0)
    return best / iterations


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 500, 1000, 2000, 4000])
    ap.add_argument("--iterations", type=int, default=3)
    args = ap.parse_args()

    print(f"{'groups':>8} {'s/iter':>10} {'us/group':>10} {'x1000 mass':>11}")
    for n in args.sizes:
        t = best_of(population(n), args.iterations)
        heavy = best_of(population(n, 1000.0), args.iterations)
        print(f"{3 * n:8d} {t:10.4f} {1e6 * t / (3 * n):10.1f} {heavy / t:11.2f}")


if __name__ == "__main__":
    main()
