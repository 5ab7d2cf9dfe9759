"""Harmonic coordinates: the martingale M_t, its potential S_v, the corrector
Z_t = M_t/eta - h(X_t) and the quadratic-variation estimator of sigma^2.

All of this lives at the critical bias lambda = m, where the W recursion
w_v = sum(w_child)/m makes M an exact martingale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import NotNeighbors
from .offspring import Estimate, OffspringDistribution, WPool, estimate_eta, sample_degree
from .rng import RandomStream
from .tree import Tree
from .walk import WalkRecord, fresh_walks

FORM_TOL = 1e-10


@dataclass
class MartingaleTracker:
    eta: float
    m_value: float = 0.0
    qv_sum: float = 0.0
    t: int = 0
    z_value: float = 0.0
    h: int = 0


def martingale_step(tracker: MartingaleTracker, tree: Tree, u: int, v: int) -> float:
    """Move the tracker along the edge u -> v and return the increment."""
    if tree.parent(v) == u:
        inc = tree.assign_w(v)
        dh = 1
    elif tree.parent(u) == v:
        inc = -tree.assign_w(u)
        dh = -1
    else:
        raise NotNeighbors(f"{u} and {v} are not adjacent")
    tracker.qv_sum += quadratic_variation_step(tree, u)
    tracker.m_value += inc
    tracker.h += dh
    tracker.t += 1
    tracker.z_value = tracker.m_value / tracker.eta - tracker.h
    return inc


def corrector(tracker: MartingaleTracker, tree: Tree | None = None, v: int | None = None) -> float:
    h = tracker.h if v is None else tree.node_coords(v)[0]
    return tracker.m_value / tracker.eta - h


def _child_w(tree: Tree, v: int) -> np.ndarray:
    kids = tree.materialize_children(v)
    return np.array([tree.assign_w(c) for c in kids])


def quadratic_variation_step(tree: Tree, v: int, check: bool = True) -> float:
    """mu_v^2 = (m w_v^2 + sum w_c^2)/(m + d_v), the conditional variance of the next increment.

    With ``check`` the equivalent form sum(w_c^2)/(m+d) + (sum w_c)^2/(m(m+d))
    is evaluated as well and must agree.
    """
    m = tree.dist.mean
    wc = _child_w(tree, v)
    wv = tree.assign_w(v)
    d = len(wc)
    first = (m * wv * wv + np.dot(wc, wc)) / (m + d)
    if check:
        second = np.dot(wc, wc) / (m + d) + wc.sum() ** 2 / (m * (m + d))
        if abs(first - second) > FORM_TOL * max(1.0, abs(first)):
            raise AssertionError(f"mu^2 forms disagree at node {v}: {first} vs {second}")
    return float(first)


def expected_increment(tree: Tree, v: int, lam: float | None = None) -> float:
    """E[M_{t+1} - M_t | X_t = v] under the walk kernel (0 at lambda = m off a rooted root)."""
    lam = tree.dist.mean if lam is None else lam
    wc = _child_w(tree, v)
    d = len(wc)
    if tree.parent(v) is None and not tree.is_ray(v):
        return float(wc.mean())
    wv = tree.assign_w(v)
    return float((-lam * wv + wc.sum()) / (lam + d))


def ray_anchor(tree: Tree, v: int) -> tuple[list[int], int]:
    """The geodesic from v up to its first Ray vertex R_v (or the root on rooted trees).

    Returns (vertices strictly below the anchor, anchor).
    """
    path = []
    u = v
    while True:
        if tree.is_ray(u):
            return path, u
        p = tree.parent(u)
        if p is None:
            return path, u
        path.append(u)
        u = p


def s_value(tree: Tree, v: int) -> float:
    """Potential S_v with M_t = S_{X_t} for a walk started at the root."""
    path, anchor = ray_anchor(tree, v)
    s = sum(tree.assign_w(u) for u in path)
    if anchor == tree.root_id:
        return float(s)
    spine = tree.spine
    depth = -tree.node_coords(anchor)[0]
    s -= sum(tree.assign_w(int(u)) for u in spine[:depth])
    return float(s)


def martingale_path(tree: Tree, record: WalkRecord) -> np.ndarray:
    """Accumulated increments along a recorded trajectory."""
    if record.martingale is not None:
        return record.martingale
    ids = record.node_ids
    out = np.zeros(len(ids))
    par = tree._arrays["parent"]
    for t in range(1, len(ids)):
        u, v = int(ids[t - 1]), int(ids[t])
        if par[v] == u:
            out[t] = out[t - 1] + tree.assign_w(v)
        elif par[u] == v:
            out[t] = out[t - 1] - tree.assign_w(u)
        else:
            raise NotNeighbors(f"record jumps from {u} to {v} at t={t}")
    return out


@dataclass
class Sigma2Estimate:
    sigma2: float
    stderr: float
    eta: float
    eta_stderr: float
    mean_mu2: float
    walks: int
    steps: int


def bootstrap_se(values: np.ndarray, stat, rng: RandomStream, reps: int = 400) -> float:
    n = len(values)
    idx = rng.integers(0, n, size=(reps, n))
    return float(np.std([stat(values[i]) for i in idx], ddof=1))


def estimate_sigma2(dist: OffspringDistribution, wpool: WPool, walks: int, steps: int,
                    rng: RandomStream, eta: Estimate | None = None) -> Sigma2Estimate:
    """sigma^2 = E_IGWR mu_0^2 / eta^2, from time averages of mu^2 along critical walks.

    Each walk runs on its own IGWR tree, whose law is stationary for the
    environment seen from the walker, so every time contributes an unbiased
    sample of E_IGWR mu_0^2. The stderr is a bootstrap over walks with eta
    held fixed; the uncertainty of eta is reported separately.
    """
    eta = estimate_eta(dist, wpool) if eta is None else eta
    tree = Tree(dist, "IGWR", wpool, rng=rng.spawn(1)[0])
    fw = fresh_walks(tree, dist.mean, walks, steps, [steps], rng, track_w=True)
    v = fw.mean_mu2
    e2 = eta.value ** 2
    se = bootstrap_se(v, np.mean, rng) / e2 if walks > 1 else float("nan")
    return Sigma2Estimate(float(v.mean() / e2), se, eta.value, eta.stderr, float(v.mean()),
                          walks, steps)


def w_truncated(dist: OffspringDistribution, size: int, depth: int, rng: RandomStream) -> np.ndarray:
    """Independent samples of Z_depth / m^depth, with generation sizes drawn exactly."""
    z = np.ones(size, dtype=np.int64)
    k = dist.values
    for _ in range(depth):
        counts = rng.multinomial(z, dist.probs)
        z = counts @ k
    return z / dist.mean ** depth


def root_mu2_monte_carlo(dist: OffspringDistribution, samples: int, depth: int,
                         rng: RandomStream, batch: int = 20_000) -> Estimate:
    """E_IGWR mu_0^2 by direct sampling of root neighbourhoods.

    The root degree follows (m+k)p_k/(2m) and every child's W is replaced
    by its depth-truncated normalized population.
    """
    m = dist.mean
    vals = []
    done = 0
    while done < samples:
        b = min(batch, samples - done)
        d = sample_degree(dist, "igwr_root", rng, b)
        wc = w_truncated(dist, int(d.sum()), depth, rng)
        owner = np.repeat(np.arange(b), d)
        s1 = np.bincount(owner, wc, minlength=b)
        s2 = np.bincount(owner, wc * wc, minlength=b)
        w0 = s1 / m
        vals.append((m * w0 * w0 + s2) / (m + d))
        done += b
    v = np.concatenate(vals)
    return Estimate(float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))))


def node_mu2(tree: Tree, v: int) -> float:
    """mu_v^2 through the compiled path (no form check)."""
    tree.ensure_capacity(8 * tree._step_cost, spine=1)
    return float(K.mu2(tree.A, tree._law, tree._pool, tree.rng, int(v)))
