"""Speed and CLT variance of the transient walk across lambda.

    python3 scripts/transient_sweep.py --law "{2:1}" --steps 10000 --walks 300
"""

import argparse

import numpy as np

from gwclt import make_stream, parse_law
from gwclt.regeneration import block_estimates, slope_speed, transient_blocks


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", default="{2:1}")
    ap.add_argument("--lambdas", default="0.25,0.5,1.0,1.5")
    ap.add_argument("--steps", type=int, default=10_000)
    ap.add_argument("--walks", type=int, default=300)
    ap.add_argument("--seed", type=int, default=9)
    a = ap.parse_args()
    dist = parse_law(a.law)
    grid = np.linspace(a.steps // 10, a.steps, 10).astype(int)
    print("lambda,v,v_stderr,v_slope,sigma2,sigma2_stderr,blocks")
    for lam in map(float, a.lambdas.split(",")):
        s = transient_blocks(dist, lam, a.steps, a.walks, make_stream(a.seed, "walks"), grid)
        e = block_estimates((s.dt, s.dx), make_stream(a.seed, "boot"))
        print(f"{lam:g},{e.v:.5f},{e.v_stderr:.5f},{slope_speed(s.grid_depths, s.grid):.5f},"
              f"{e.sigma2:.4f},{e.sigma2_stderr:.4f},{e.blocks}")


if __name__ == "__main__":
    main()
