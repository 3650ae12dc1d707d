"""Fuzz the quadratic Gauss-sum reciprocity identity and report the worst defect."""

from __future__ import annotations

import argparse

import numpy as np

from pathint import lattice as lat


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--count", type=int, default=500)
    ap.add_argument("--max-coeff", type=int, default=60)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    hi = args.max_coeff
    worst = 0.0
    worst_triple = None
    checked = 0
    while checked < args.count:
        a = int(rng.integers(-hi, hi + 1))
        b = int(rng.integers(-hi, hi + 1))
        c = int(rng.integers(-hi, hi + 1))
        if a == 0 or c == 0 or (a * c + b) % 2 != 0:
            continue
        lhs, rhs = lat.gauss_sum_check(a, b, c)
        defect = abs(lhs - rhs) / np.sqrt(abs(c))
        if defect > worst:
            worst = defect
            worst_triple = (a, b, c)
        checked += 1
    print(f"checked {checked} triples, worst scaled defect {worst:.3e} at {worst_triple}")


if __name__ == "__main__":
    main()
