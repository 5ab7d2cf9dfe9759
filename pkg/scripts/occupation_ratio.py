"""Mean time spent within t^alpha of the Ray, relative to t^(1/2 + alpha + eps).

    python3 scripts/occupation_ratio.py --law "{2:1}" --reps 500
"""

import argparse

from gwclt import build_w_pool, make_stream, parse_law
from gwclt.stats import occupation_near_ray


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--law", default="{2:1}")
    ap.add_argument("--alpha", type=float, default=1 / 3)
    ap.add_argument("--reps", type=int, default=500)
    ap.add_argument("--times", default="1000,10000,100000")
    ap.add_argument("--seed", type=int, default=3)
    a = ap.parse_args()
    dist = parse_law(a.law)
    pool = build_w_pool(dist, 10_000, 5, make_stream(a.seed, "pool"))
    print("t,radius,mean,stderr,bound,ratio")
    for t in map(int, a.times.split(",")):
        r = occupation_near_ray(dist, pool, a.alpha, t, a.reps, make_stream(a.seed, t))
        print(f"{t},{r.radius},{r.mean:.1f},{r.stderr:.1f},{r.bound:.1f},{r.ratio:.3f}")


if __name__ == "__main__":
    main()
