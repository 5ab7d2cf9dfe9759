"""The lambda-biased walk and trajectory recording."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .rng import RandomStream
from .tree import Tree

CHUNK = 1 << 16


@dataclass
class WalkRecord:
    """Trajectory of one walk. ``depths`` is |X_t| on rooted trees, d(X_t, Ray) otherwise."""

    node_ids: np.ndarray
    levels: np.ndarray
    depths: np.ndarray
    fresh_flags: np.ndarray
    seed: int | None = None
    martingale: np.ndarray | None = None
    mu2: np.ndarray | None = None

    @property
    def steps(self) -> int:
        return len(self.levels) - 1

    def trace_csv(self) -> str:
        rows = ["t,h,depth,fresh"]
        rows += [f"{t},{h},{d},{int(f)}" for t, (h, d, f) in
                 enumerate(zip(self.levels, self.depths, self.fresh_flags))]
        return "\n".join(rows) + "\n"


def transition(tree: Tree, v: int, lam: float, rng: RandomStream) -> int:
    """One step of the walk from v."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    tree.ensure_capacity(tree._step_cost, spine=1)
    return int(K.step(tree.A, tree._law, tree._pool, tree.rng, rng, int(v), float(lam),
                      tree.placeholder))


def run_walk(tree: Tree, lam: float, steps: int, rng: RandomStream, start: int | None = None,
             track_w: bool = False, seed: int | None = None) -> WalkRecord:
    """Run `steps` steps from `start` (default: the root), recording everything.

    With ``track_w`` (requires a W pool and lambda = m) the record also holds
    the martingale M_t and the conditional variances mu^2 at X_0..X_{n-1}.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if track_w and tree.wpool is None:
        raise ValueError("track_w needs a tree built with a W pool")
    v = tree.root_id if start is None else int(start)
    ids = np.empty(steps + 1, np.int64)
    lev = np.empty(steps + 1, np.int32)
    dep = np.empty(steps + 1, np.int32)
    fresh = np.zeros(steps + 1, np.bool_)
    mvals = np.zeros(steps + 1 if track_w else 1)
    mu2s = np.zeros(steps if track_w else 1)
    tree._cnt[3] += 1
    serial = int(tree._cnt[3])
    ids[0] = v
    lev[0], dep[0] = tree.node_coords(v)
    tree._arrays["mark"][v] = serial
    fresh[0] = True
    if track_w:
        tree.assign_w(v)
    t = 0
    while t < steps:
        t1 = min(steps, t + CHUNK)
        tree.reserve_steps(t1 - t)
        K.walk_chunk(tree.A, tree._law, tree._pool, tree.rng, rng, float(lam), t, t1,
                     ids, lev, dep, fresh, serial, track_w, mvals, mu2s)
        t = t1
    return WalkRecord(ids, lev, dep, fresh, seed,
                      mvals if track_w else None, mu2s if track_w else None)


def walk_checkpoints(tree: Tree, lam: float, steps: int, checkpoints, rng: RandomStream,
                     start: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Levels and depths of one walk at sorted checkpoint times only."""
    checks = np.asarray(checkpoints, dtype=np.int64)
    out_h = np.zeros(len(checks), np.int64)
    out_d = np.zeros(len(checks), np.int64)
    tree.reserve_steps(steps)
    v = tree.root_id if start is None else int(start)
    K.walk_checkpoints(tree.A, tree._law, tree._pool, tree.rng, rng, float(lam), v, steps,
                       checks, out_h, out_d)
    return out_h, out_d


def quenched_depths(tree: Tree, lam: float, steps: int, walks: int,
                    rng: RandomStream) -> np.ndarray:
    """|X_steps| for `walks` independent walks from the root of one fixed tree.

    Walk j uses the j-th child stream of `rng`; the tree keeps growing as
    the walks explore it, which does not change its law.
    """
    out = np.zeros(walks, np.int64)
    for j, wr in enumerate(rng.spawn(walks)):
        _, d = walk_checkpoints(tree, lam, steps, [steps], wr)
        out[j] = d[0]
    return out


@dataclass
class FreshWalks:
    """Per-replica summaries of walks on independently sampled trees."""

    checkpoints: np.ndarray
    levels: np.ndarray      # [reps, checkpoints]
    depths: np.ndarray      # [reps, checkpoints]
    max_depth: np.ndarray
    near_count: np.ndarray
    mean_mu2: np.ndarray
    final_degree: np.ndarray


def fresh_walks(tree: Tree, lam: float, reps: int, steps: int, checkpoints, rng: RandomStream,
                near: int = -1, track_w: bool = False) -> FreshWalks:
    """`reps` walks, each on a fresh tree drawn from ``tree``'s law (``tree`` is reused as scratch)."""
    if track_w and tree.wpool is None:
        raise ValueError("track_w needs a tree built with a W pool")
    checks = np.asarray(checkpoints, dtype=np.int64)
    out_h = np.zeros((reps, len(checks)), np.int64)
    out_d = np.zeros((reps, len(checks)), np.int64)
    maxd = np.zeros(reps, np.int64)
    nnear = np.zeros(reps, np.int64)
    mu2 = np.zeros(reps)
    deg = np.zeros(reps, np.int64)
    # every replica restarts the arena, so capacity for one walk suffices
    tree.ensure_capacity(steps * tree._step_cost + 8 * tree._step_cost - tree.n_nodes,
                         spine=steps + 4 - len(tree.spine))
    K.fresh_walks(tree.A, tree._law, tree._pool, int(tree.kind), tree.rng, rng, float(lam),
                  reps, steps, checks, near, track_w, out_h, out_d, maxd, nnear, mu2, deg)
    tree.root_id = 0
    return FreshWalks(checks, out_h, out_d, maxd, nnear, mu2, deg)
