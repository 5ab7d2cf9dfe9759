"""Goodness-of-fit statistics and the Monte Carlo checks built on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import CategoryMismatch, EmptySamples
from .offspring import OffspringDistribution, WPool
from .rng import RandomStream
from .tree import Tree
from .walk import fresh_walks

ALPHA = 0.01
REPORT_HEADER = "test,statistic,p_value,n,pass,seed,context"


@dataclass
class TestReport:
    test: str
    statistic: float
    p_value: float
    n: int
    passed: bool
    seed: int | None = None
    context: str = ""
    details: dict = field(default_factory=dict, repr=False)

    def csv_row(self) -> str:
        ctx = self.context.replace(",", ";")
        seed = "" if self.seed is None else str(self.seed)
        return (f"{self.test},{self.statistic!r},{self.p_value!r},{self.n},"
                f"{str(self.passed).lower()},{seed},{ctx}")


def normal_cdf(x):
    return special.ndtr(x)


def half_normal_cdf(x, sigma2: float = 1.0):
    """P(|N(0, sigma2)| <= x)."""
    x = np.asarray(x, dtype=float)
    return np.where(x > 0, special.erf(np.maximum(x, 0) / np.sqrt(2 * sigma2)), 0.0)


def ks_statistic(samples, cdf) -> float:
    """sup_x |F_n(x) - F(x)|, evaluated on both sides of every jump of F_n."""
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = len(x)
    if n == 0:
        raise EmptySamples("no samples")
    f = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    # with ties only the last copy of a value carries the full jump
    last = np.r_[x[1:] != x[:-1], True]
    first = np.r_[True, x[1:] != x[:-1]]
    upper = np.max((i / n - f)[last])
    lower = np.max((f - (i - 1) / n)[first])
    return float(max(upper, lower, 0.0))


def ks_test(samples, cdf, name: str = "ks", threshold: float | None = None,
            seed: int | None = None, context: str = "") -> TestReport:
    """KS report; passes on `threshold` if given, else on the asymptotic p-value."""
    d = ks_statistic(samples, cdf)
    n = int(np.size(samples))
    p = float(special.kolmogorov(np.sqrt(n) * d))
    ok = d <= threshold if threshold is not None else p > ALPHA
    return TestReport(name, d, p, n, bool(ok), seed, context)


def chi_square(observed, expected, name: str = "chi_square", alpha: float = ALPHA,
               seed: int | None = None, context: str = "", min_total: int = 50) -> TestReport:
    """Pearson goodness of fit of counts against category probabilities."""
    obs = np.asarray(observed, dtype=float)
    p = np.asarray(expected, dtype=float)
    if obs.ndim != 1 or obs.shape != p.shape or len(obs) < 2:
        raise CategoryMismatch(f"need matching count/probability vectors with >= 2 "
                               f"categories, got {obs.shape} and {p.shape}")
    if np.any(p <= 0) or abs(p.sum() - 1) > 1e-9:
        raise CategoryMismatch("expected probabilities must be positive and sum to 1")
    n = obs.sum()
    if n < min_total:
        raise ValueError(f"at least {min_total} observations needed, got {n:g}")
    e = n * p
    stat = float(np.sum((obs - e) ** 2 / e))
    dof = len(obs) - 1
    pv = float(special.chdtrc(dof, stat))
    return TestReport(name, stat, pv, int(n), pv > alpha, seed, context, {"dof": dof})


def pooled_chi_square(groups, name: str = "chi_square", alpha: float = ALPHA,
                      seed: int | None = None, context: str = "") -> TestReport:
    """Sum of independent Pearson statistics over (observed, probabilities) groups."""
    stat = 0.0
    dof = 0
    total = 0
    for obs, p in groups:
        r = chi_square(obs, p, min_total=1)
        stat += r.statistic
        dof += r.details["dof"]
        total += r.n
    pv = float(special.chdtrc(dof, stat)) if dof else 1.0
    return TestReport(name, stat, pv, total, pv > alpha, seed, context, {"dof": dof})


def meta_pass_rate(reports) -> float:
    reports = list(reports)
    return sum(r.passed for r in reports) / len(reports)


def igwr_invariance_test(dist: OffspringDistribution, wpool: WPool | None, k_steps: int,
                         reps: int, rng: RandomStream, alpha: float = ALPHA,
                         seed: int | None = None) -> TestReport:
    """Root degree of the environment seen from X_k, started from IGWR, against the IGWR root law."""
    if k_steps < 1:
        raise ValueError("k_steps must be at least 1")
    tree = Tree(dist, "IGWR", wpool, rng=rng.spawn(1)[0])
    fw = fresh_walks(tree, dist.mean, reps, k_steps, [k_steps], rng)
    counts = np.array([(fw.final_degree == k).sum() for k in dist.values])
    ctx = f"dist={dist} k={k_steps}"
    if len(dist.values) < 2:
        ok = counts[0] == reps
        return TestReport("igwr_invariance", 0.0, 1.0, reps, bool(ok), seed, ctx)
    r = chi_square(counts, dist.law("igwr_root"), "igwr_invariance", alpha, seed, ctx)
    r.details["counts"] = counts
    return r


def detailed_balance_test(dist: OffspringDistribution, wpool: WPool | None, reps: int,
                          rng: RandomStream, z_max: float = 3.0,
                          seed: int | None = None) -> TestReport:
    """Compare P(root degree j, step up, new root degree k) with P(root degree k, step down, child degree j)."""
    from . import _kernels as K
    tree = Tree(dist, "IGWR", wpool, rng=rng.spawn(1)[0])
    tree.ensure_capacity(16 * tree._step_cost, spine=4)
    d0 = np.zeros(reps, np.int64)
    up = np.zeros(reps, np.bool_)
    d1 = np.zeros(reps, np.int64)
    K.one_step_pairs(tree.A, tree._law, tree._pool, int(tree.kind), tree.rng, rng,
                     dist.mean, reps, d0, up, d1)
    pairs = {}
    worst = 0.0
    # pairs outside the support are tabulated too; both sides must be 0 there
    degrees = range(1, int(dist.values.max()) + 1)
    for j in degrees:
        for k in degrees:
            e = np.count_nonzero(up & (d0 == j) & (d1 == k)) / reps
            f = np.count_nonzero(~up & (d0 == k) & (d1 == j)) / reps
            var = (e + f - (e - f) ** 2) / reps
            z = 0.0 if var == 0 else (e - f) / np.sqrt(var)
            pairs[(int(j), int(k))] = (e, f, z)
            worst = max(worst, abs(z))
    p = float(2 * special.ndtr(-worst))
    ctx = f"dist={dist} max|z| over {len(dist.values) ** 2} in-support pairs"
    return TestReport("detailed_balance", float(worst), p, reps, worst <= z_max, seed, ctx,
                      {"pairs": pairs})


@dataclass
class OccupationResult:
    t: int
    alpha: float
    radius: int
    mean: float
    stderr: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.mean / self.bound


def occupation_near_ray(dist: OffspringDistribution, wpool: WPool | None, alpha: float, t: int,
                        reps: int, rng: RandomStream, eps: float = 0.05) -> OccupationResult:
    """Mean number of times s in [1, t] with d(X_s, Ray) <= t^alpha on fresh IGW trees."""
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    radius = int(np.floor(t ** alpha + 1e-9))
    tree = Tree(dist, "IGW", wpool, rng=rng.spawn(1)[0])
    fw = fresh_walks(tree, dist.mean, reps, t, [t], rng, near=radius)
    n = fw.near_count.astype(float)
    se = float(n.std(ddof=1) / np.sqrt(reps)) if reps > 1 else float("nan")
    return OccupationResult(t, alpha, radius, float(n.mean()), se, t ** (0.5 + alpha + eps))
