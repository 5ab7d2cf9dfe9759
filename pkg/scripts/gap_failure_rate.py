"""How often the coupling gap bound fails, and at which checkpoint.

    python3 scripts/gap_failure_rate.py --law "{1:.5,3:.5}" --runs 2000 --steps 1024
"""

import argparse
from collections import Counter

from gwclt import build_w_pool, make_stream, parse_law
from gwclt.coupling import build_coupled_pair, coupling_gap


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", default="{2:1}")
    ap.add_argument("--runs", type=int, default=500)
    ap.add_argument("--steps", type=int, default=1024)
    ap.add_argument("--alpha", type=float, default=1 / 3)
    ap.add_argument("--seed", type=int, default=5)
    a = ap.parse_args()
    dist = parse_law(a.law)
    pool = build_w_pool(dist, 10_000, 5, make_stream(a.seed, "pool"))
    bad_runs, where, on_a = 0, Counter(), 0
    for r in range(a.runs):
        run = build_coupled_pair(dist, pool, a.steps, make_stream(a.seed, "run", r))
        rows = [g for g in coupling_gap(run, a.alpha) if not g.ok]
        if rows:
            bad_runs += 1
            where[rows[0].n] += 1
            on_a += rows[0].a_n and rows[0].a_hat_n
    print(f"law={a.law} runs={a.runs} failing={bad_runs} ({100 * bad_runs / a.runs:.2f}%)")
    print(f"first failures on A_n and hat A_n: {on_a}")
    for n, c in sorted(where.items()):
        print(f"  first failure at n={n}: {c}")


if __name__ == "__main__":
    main()
