"""Electric-network quantities on truncated trees and related walk diagnostics.

The edge between a vertex at depth k and its child has conductance
lambda^-k; the walk is the associated reversible chain (the root, having no
parent, moves uniformly to its children).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import BudgetExceeded
from .offspring import OffspringDistribution
from .rng import RandomStream
from .tree import Tree
from .walk import fresh_walks


@dataclass
class ConductanceReport:
    level: int
    conductance: float
    escape_prob: float
    expected_root_visits: float
    escape_mc: float = float("nan")
    escape_stderr: float = float("nan")
    visits_mc: float = float("nan")
    visits_stderr: float = float("nan")
    mc_reps: int = 0


def ball_levels(tree: Tree, level: int, root: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Materialize the subtree of `root` down to depth `level`; nodes grouped by depth."""
    root = tree.root_id if root is None else int(root)
    cur = np.array([root], dtype=np.int64)
    parts = [cur]
    for _ in range(level):
        total = int(tree._arrays["degree"][cur].sum())
        if tree.n_nodes + total > tree.node_budget:
            raise BudgetExceeded(f"depth-{level} ball needs more than {tree.node_budget} nodes",
                                 "DEPTH_BUDGET")
        tree.ensure_capacity(total)
        K.materialize_many(tree.A, tree._law, tree._pool, tree.rng, cur)
        nxt = np.empty(total, dtype=np.int64)
        K.children_of(tree.A, cur, nxt)
        cur = nxt
        parts.append(cur)
    offsets = np.cumsum([0] + [len(p) for p in parts]).astype(np.int64)
    return np.concatenate(parts), offsets


def effective_conductance(tree: Tree, level: int, lam: float, root: int | None = None) -> float:
    """Conductance between the root and the (shorted) vertices at depth `level`."""
    if level < 1:
        raise ValueError("level must be at least 1")
    nodes, offsets = ball_levels(tree, level, root)
    return float(K.conductance_reduce(tree.A, nodes, offsets, float(lam), int(level)))


def escape_stats(tree: Tree, level: int, lam: float, mc_reps: int = 0,
                 rng: RandomStream | None = None) -> ConductanceReport:
    """Escape probability P(T_level < T_o) and expected root visits, analytic and simulated.

    The walk is stopped on reaching depth `level`, so it never leaves the
    ball and rooted trees are assumed (the root moves only downward).
    """
    c = effective_conductance(tree, level, lam)
    d0 = tree.degree(tree.root_id)
    rep = ConductanceReport(level, c, c / d0, d0 / c, mc_reps=mc_reps)
    if mc_reps > 0:
        if rng is None:
            raise ValueError("Monte Carlo needs a random stream")
        out = np.zeros(mc_reps, np.bool_)
        tree.ensure_capacity(4 * tree._step_cost)
        K.first_escape(tree.A, tree._law, tree._pool, tree.rng, rng, float(lam),
                       tree.root_id, int(level), mc_reps, out)
        p = out.mean()
        rep.escape_mc = float(p)
        rep.escape_stderr = float(np.sqrt(p * (1 - p) / mc_reps))
        if p > 0:
            # each root visit starts an independent attempt: visits are geometric
            rep.visits_mc = float(1 / p)
            rep.visits_stderr = float(rep.escape_stderr / p**2)
    return rep


def cv_bound(u: float, t: float) -> float:
    """Carne-Varopoulos envelope 4 t exp(-u^2 / 2t) for P(|X_t| >= u)-type events."""
    return 4.0 * t * np.exp(-u * u / (2.0 * t))


@dataclass
class EnvelopeRow:
    u: float
    t: int
    empirical: float
    stderr: float
    bound: float

    @property
    def ok(self) -> bool:
        return self.empirical <= self.bound


def cv_envelope(dist: OffspringDistribution, lam: float, u_grid, t: int, runs: int,
                rng: RandomStream, kind: str = "GW") -> list[EnvelopeRow]:
    """Empirical P(max_{i<=t} |X_i| >= u) on fresh trees, next to the envelope."""
    tree = Tree(dist, kind, rng=rng.spawn(1)[0])
    fw = fresh_walks(tree, lam, runs, t, [t], rng)
    rows = []
    for u in u_grid:
        p = float((fw.max_depth >= u).mean())
        rows.append(EnvelopeRow(float(u), t, p, float(np.sqrt(p * (1 - p) / runs)),
                                cv_bound(u, t)))
    return rows


@dataclass
class VisitCounts:
    n: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    truncated: float
    slope: float
    slope_ci: tuple[float, float]
    reps: int

    def no_trend(self) -> bool:
        return self.slope_ci[0] <= 0.0 <= self.slope_ci[1]


def excursion_visit_counts(kind: str, dist: OffspringDistribution, n_max: int, reps: int,
                           lam: float, rng: RandomStream, cap: int = 200_000,
                           boot: int = 1000) -> VisitCounts:
    """Mean number N_o(n) of visits to depth n during one excursion from the root, n = 0..n_max.

    Excursions are cut after `cap` steps (their fraction is reported). The
    slope of the means over n = 1..n_max comes with a bootstrap 95% interval.
    N_o(0) is 0 by convention: the only root visit in (0, T_o] is the last one.
    """
    if reps < 100:
        raise ValueError("reps must be at least 100")
    tree = Tree(dist, kind, rng=rng.spawn(1)[0])
    tree.ensure_capacity(cap * tree._step_cost + 8 * tree._step_cost - tree.n_nodes,
                         spine=cap + 4 - len(tree.spine))
    counts = np.zeros((reps, n_max + 1), np.int64)
    trunc = np.zeros(reps, np.bool_)
    K.excursion_counts(tree.A, tree._law, tree._pool, int(tree.kind), tree.rng, rng,
                       float(lam), reps, n_max, cap, counts, trunc)
    tree.root_id = 0
    counts[:, 0] = 0
    mean = counts.mean(axis=0)
    se = counts.std(axis=0, ddof=1) / np.sqrt(reps)
    ns = np.arange(1, n_max + 1)

    def slope(c):
        return np.polyfit(ns, c[:, 1:].mean(axis=0), 1)[0]

    s = float(slope(counts))
    idx = rng.integers(0, reps, size=(boot, reps))
    bs = np.array([slope(counts[i]) for i in idx])
    ci = (float(np.quantile(bs, 0.025)), float(np.quantile(bs, 0.975)))
    return VisitCounts(np.arange(n_max + 1), mean, se, float(trunc.mean()), s, ci, reps)
