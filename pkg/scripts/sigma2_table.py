"""Estimated critical variance for a few offspring laws next to 1/eta.

For laws with p_0 = 0 the root mu^2 under IGWR averages to eta, so sigma^2
should land on 1/eta; the table shows how close the time averages get.

    python3 scripts/sigma2_table.py --walks 400 --steps 5000
"""

import argparse

from gwclt import build_w_pool, make_stream, parse_law
from gwclt.harmonic import estimate_sigma2

LAWS = ["{2:1}", "{1:.5,3:.5}", "{1:.25,2:.5,3:.25}", "{2:.5,4:.5}"]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--walks", type=int, default=400)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--pool", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    a = ap.parse_args()
    print("law,eta,eta_closed,sigma2,stderr,inverse_eta")
    for i, text in enumerate(LAWS):
        dist = parse_law(text)
        pool = build_w_pool(dist, a.pool, 30, make_stream(a.seed, "pool", i))
        est = estimate_sigma2(dist, pool, a.walks, a.steps, make_stream(a.seed, "walks", i))
        closed = 1 + dist.variance / (dist.mean**2 - dist.mean)
        print(f"{text.replace(',', ';')},{est.eta:.4f},{closed:.4f},{est.sigma2:.4f},"
              f"{est.stderr:.4f},{1 / closed:.4f}")


if __name__ == "__main__":
    main()
