"""Shifted coupling of a critical walk on a GW tree with one on an IGW tree.

The GW walk X is cut into excursions: each starts when X steps onto a leaf
of the explored tree U (all visited vertices plus their offspring) and ends
when X first re-enters the interior of U, necessarily at the parent of the
starting leaf. The IGW walk Y moves freely on an explored IGW skeleton
(root, Ray, and the offspring of everything explored) and, whenever it
steps onto a leaf, the next unused excursion of X is glued there and
replayed; after the replay Y steps up to the leaf's parent, mirroring X's
own step.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import _kernels as K
from .errors import ExcursionsExhausted
from .offspring import OffspringDistribution, WPool, sample_degree
from .rng import RandomStream
from .stats import TestReport, chi_square, pooled_chi_square
from .tree import Tree
from .walk import WalkRecord, run_walk

FREE, PASTED, FORCED = 0, 1, 2
MIN_X_CAP = 1 << 22


@njit(cache=True)
def _decompose(A, L, P, trng, ids, status, exc_id, tau, eta, vstart, nodes, ptr):
    T = ids.shape[0]
    cids = A[10]
    root = ids[0]
    K.materialize(A, L, P, trng, root, False)
    status[root] = 2
    for k in range(A[1][root]):
        status[cids[A[2][root] + k]] = 1
    n_exc = 0
    nn = 0
    ptr[0] = 0
    n = 1
    while True:
        while n < T and status[ids[n]] != 1:
            n += 1
        if n >= T:
            break
        tau[n_exc] = n
        vstart[n_exc] = ids[n]
        first = nn
        while n < T and status[ids[n]] != 2:
            x = ids[n]
            if status[x] != 3:
                status[x] = 3
                exc_id[x] = n_exc
                nodes[nn] = x
                nn += 1
            n += 1
        for j in range(first, nn):
            status[nodes[j]] = 2
        for j in range(first, nn):
            x = nodes[j]
            K.materialize(A, L, P, trng, x, False)
            for k in range(A[1][x]):
                c = cids[A[2][x] + k]
                if status[c] == 0:
                    status[c] = 1
        eta[n_exc] = n if n < T else -1
        n_exc += 1
        ptr[n_exc] = nn
        if n >= T:
            break
    return n_exc


@njit(cache=True)
def _child_pos(B, y, c):
    base = B[2][y]
    for k in range(B[1][y]):
        if B[10][base + k] == c:
            return k
    return -2


@njit(cache=True)
def _couple(B, LB, PB, brng, wrng, A, ids, tau, eta, vstart, nodes, ptr, n_exc, exc_id,
            mapab, lam, target, yid, ytype, ystep, tau_hat, eta_hat):
    """Build Y up to time `target`. Returns (time reached, excursions used, exhausted flag)."""
    T = ids.shape[0]
    bpar = B[0]
    bdeg = B[1]
    adeg = A[1]
    y = np.int64(B[11][0])
    t = 0
    yid[0] = y
    ytype[0] = FREE
    i = 0
    while t < target:
        nxt = K.step(B, LB, PB, brng, wrng, y, lam, True)
        ystep[t] = -1 if nxt == bpar[y] else _child_pos(B, y, nxt)
        y = nxt
        t += 1
        yid[t] = y
        ytype[t] = FREE
        if bdeg[y] != -1 or t >= target:
            continue
        if i >= n_exc:
            return t, i, True
        tau_hat[i] = t
        v = vstart[i]
        mapab[v] = y
        bdeg[y] = adeg[v]
        for j in range(ptr[i], ptr[i + 1]):
            x = nodes[j]
            bx = mapab[x]
            K.materialize(B, LB, PB, brng, bx, True)
            abase = A[2][x]
            bbase = B[2][bx]
            for k in range(adeg[x]):
                c = A[10][abase + k]
                bc = B[10][bbase + k]
                mapab[c] = bc
                if exc_id[c] == i:
                    bdeg[bc] = adeg[c]
        end = eta[i] if eta[i] >= 0 else T
        for n in range(tau[i] + 1, end):
            if t >= target:
                break
            prev = yid[t]
            nx = mapab[ids[n]]
            ystep[t] = -1 if nx == bpar[prev] else _child_pos(B, prev, nx)
            t += 1
            yid[t] = nx
            ytype[t] = PASTED
        i += 1
        if t >= target:
            break
        if eta[i - 1] < 0:
            return t, i, True
        ystep[t] = -1
        t += 1
        y = np.int64(bpar[mapab[v]])
        yid[t] = y
        ytype[t] = FORCED
        eta_hat[i - 1] = t
    return t, i, False


@dataclass
class ExcursionRecord:
    tau: int
    eta: int | None
    start_node: int
    subpath: tuple[int, int]
    subtree_ids: set[int]


@dataclass
class Decomposition:
    """Excursions in array form; eta = -1 marks an excursion still open at the record end."""

    tau: np.ndarray
    eta: np.ndarray
    start: np.ndarray
    nodes: np.ndarray
    ptr: np.ndarray
    exc_id: np.ndarray

    @property
    def count(self) -> int:
        return len(self.tau)


def _decomposition(record: WalkRecord, tree: Tree) -> Decomposition:
    ids = np.ascontiguousarray(record.node_ids, dtype=np.int64)
    T = len(ids)
    tree.ensure_capacity(T * tree.dist.max_degree + 4 * tree._step_cost)
    cap = len(tree._arrays["parent"])
    status = np.zeros(cap, np.int8)
    exc_id = np.full(cap, -1, np.int32)
    tau = np.zeros(T, np.int64)
    eta = np.zeros(T, np.int64)
    vs = np.zeros(T, np.int64)
    nodes = np.zeros(T, np.int64)
    ptr = np.zeros(T + 1, np.int64)
    n = _decompose(tree.A, tree._law, tree._pool, tree.rng, ids, status, exc_id, tau, eta,
                   vs, nodes, ptr)
    return Decomposition(tau[:n], eta[:n], vs[:n], nodes[: ptr[n]], ptr[: n + 1], exc_id)


def decompose_excursions(record: WalkRecord, tree: Tree,
                         include_open: bool = False) -> list[ExcursionRecord]:
    """Excursions of a walk started at the root of a rooted tree, in order.

    Only complete excursions are returned unless `include_open`.
    """
    dec = _decomposition(record, tree)
    out = []
    for i in range(dec.count):
        eta = int(dec.eta[i])
        if eta < 0 and not include_open:
            break
        visited = [int(x) for x in dec.nodes[dec.ptr[i]: dec.ptr[i + 1]]]
        sub = set(visited)
        for x in visited:
            sub.update(tree.children(x))
        end = eta if eta >= 0 else len(record.node_ids)
        out.append(ExcursionRecord(int(dec.tau[i]), None if eta < 0 else eta,
                                   int(dec.start[i]), (int(dec.tau[i]), end), sub))
    return out


@dataclass
class CoupledRun:
    x_record: WalkRecord
    x_tree: Tree
    igw_tree: Tree
    decomposition: Decomposition
    y_ids: np.ndarray
    y_levels: np.ndarray
    y_depths: np.ndarray
    y_on_ray: np.ndarray
    y_type: np.ndarray
    y_step: np.ndarray
    hat_taus: np.ndarray
    hat_etas: np.ndarray
    used: int
    r_n: np.ndarray
    b_n: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.y_ids) - 1


def reflected_and_backtrack(levels, on_ray) -> tuple[np.ndarray, np.ndarray]:
    """R_n = h(Y_n) - min_{i<=n} h(Y_i) and the running Ray backtrack B_n.

    B_n is the largest h(Y_t) - h(Y_s) over s < t <= n with both Y_s and Y_t
    on Ray, or 0 if that is never positive.
    """
    h = np.asarray(levels, dtype=np.int64)
    r = h - np.minimum.accumulate(h)
    on = np.asarray(on_ray, dtype=bool)
    b = np.zeros(len(h), np.int64)
    idx = np.flatnonzero(on)
    if len(idx) > 1:
        hs = h[idx]
        prior_min = np.minimum.accumulate(hs)[:-1]
        gain = np.maximum.accumulate(np.maximum(hs[1:] - prior_min, 0))
        vals = np.zeros(len(h), np.int64)
        vals[idx[1:]] = gain
        b = np.maximum.accumulate(vals)
    return r, b


def _extend_record(rec: WalkRecord, tree: Tree, lam: float, extra: int,
                   rng: RandomStream) -> WalkRecord:
    """Continue a recorded walk by `extra` steps."""
    more = run_walk(tree, lam, extra, rng, start=int(rec.node_ids[-1]))
    ids = np.r_[rec.node_ids, more.node_ids[1:]]
    fresh = np.zeros(len(ids), np.bool_)
    fresh[np.unique(ids, return_index=True)[1]] = True
    return WalkRecord(ids, np.r_[rec.levels, more.levels[1:]],
                      np.r_[rec.depths, more.depths[1:]], fresh, rec.seed)


def build_coupled_pair(dist: OffspringDistribution, wpool: WPool | None, steps: int,
                       rng: RandomStream, surplus: float = 4.0,
                       node_budget: int | None = None, max_surplus: float = 64.0) -> CoupledRun:
    """Run X for ``surplus * steps`` steps on a fresh GW tree and build Y for `steps` steps.

    The walk is critical (lambda = m). When Y runs into more leaves than X
    has supplied excursions for, X is continued (doubling its length) and Y
    is rebuilt from the same random streams, so Y's law is unaffected;
    ExcursionsExhausted is raised once X would exceed ``max_surplus * steps``
    (but never below MIN_X_CAP) steps. Excursion lengths are heavy tailed, so
    no fixed surplus rules this out.
    """
    tr, xr, yr, br = rng.spawn(4)
    lam = dist.mean
    kw = {} if node_budget is None else {"node_budget": node_budget}
    x_tree = Tree(dist, "GW", wpool, rng=tr, **kw)
    x_steps = max(int(surplus * steps), 1)
    rec = run_walk(x_tree, lam, x_steps, xr)
    yr0, br0 = copy.deepcopy(yr), copy.deepcopy(br)
    while True:
        yr, br = copy.deepcopy(yr0), copy.deepcopy(br0)
        dec = _decomposition(rec, x_tree)
        y_tree = Tree(dist, "IGW", rng=br, placeholder=True, **kw)
        y_tree.ensure_capacity(steps * (dist.max_degree + 2) + x_tree.n_nodes + 16,
                               spine=steps + 4)
        yid = np.zeros(steps + 1, np.int64)
        ytype = np.zeros(steps + 1, np.int8)
        ystep = np.zeros(steps, np.int64)
        n = dec.count
        tau_hat = np.full(n, -1, np.int64)
        eta_hat = np.full(n, -1, np.int64)
        mapab = np.full(len(x_tree._arrays["parent"]), -1, np.int64)
        ids = np.ascontiguousarray(rec.node_ids, dtype=np.int64)
        t, used, exhausted = _couple(y_tree.A, y_tree._law, y_tree._pool, y_tree.rng, yr,
                                     x_tree.A, ids, dec.tau, dec.eta, dec.start, dec.nodes,
                                     dec.ptr, n, dec.exc_id, mapab, float(lam), steps, yid,
                                     ytype, ystep, tau_hat, eta_hat)
        if not exhausted:
            break
        if 2 * rec.steps > max(max_surplus * steps, MIN_X_CAP):
            raise ExcursionsExhausted(f"Y reached time {t} of {steps} after using all {used} "
                                      f"excursions of a {rec.steps}-step X run")
        rec = _extend_record(rec, x_tree, lam, rec.steps, xr)
    # the remaining leaves of the explored skeleton root independent GW trees
    deg = y_tree._arrays["degree"]
    holes = np.flatnonzero(deg[: y_tree.n_nodes] == -1)
    deg[holes] = sample_degree(dist, "plain", y_tree.rng, len(holes))
    y_tree.placeholder = False
    lev = y_tree._arrays["h"][yid].astype(np.int64)
    dep = y_tree._arrays["dray"][yid].astype(np.int64)
    on_ray = y_tree._arrays["flag"][yid] == K.RAY
    r_n, b_n = reflected_and_backtrack(lev, on_ray)
    return CoupledRun(rec, x_tree, y_tree, dec, yid, lev, dep, on_ray, ytype, ystep,
                      tau_hat[:used], eta_hat[:used], used, r_n, b_n)


def _delta(taus: np.ndarray, etas: np.ndarray, n: int) -> int:
    """sum over excursions i with tau_i <= n of tau_i - eta_{i-1} (eta_0 = 0)."""
    k = int(np.searchsorted(taus, n, side="right"))
    if k == 0:
        return 0
    prev = np.r_[0, etas[: k - 1]]
    return int(np.sum(taus[:k] - prev))


@dataclass
class GapRow:
    n: int
    abs_x: int
    r_best: int
    delta: int
    delta_hat: int
    b_n: int
    bound: float
    ok: bool
    window_truncated: bool
    a_n: bool
    a_hat_n: bool

    @property
    def slack(self) -> float:
        return self.bound - abs(self.abs_x - self.r_best)

    def csv_row(self) -> str:
        return (f"{self.n},{self.abs_x},{self.r_best},{self.delta},{self.delta_hat},"
                f"{self.b_n},{self.bound!r},{str(self.ok).lower()}")


GAP_HEADER = "n,abs_x,r_best,delta,delta_hat,b_n,bound,ok"


def _off_excursion_ok(taus, etas, n, depth, radius) -> bool:
    k = int(np.searchsorted(taus, n, side="right"))
    prev = np.r_[0, etas[: max(k - 1, 0)]]
    for a, b in zip(prev, taus[:k]):
        if b > a and depth[a:b].max() > radius:
            return False
    return True


def coupling_gap(run: CoupledRun, alpha: float, checkpoints=None) -> list[GapRow]:
    """Check min_{|s-n| <= Delta_n + hatDelta_n} | |X_n| - R_s | <= 2 n^alpha + B_n at n = 2^k."""
    if not 0 < alpha < 0.5:
        raise ValueError("alpha must lie in (0, 1/2)")
    nmax = run.steps
    if checkpoints is None:
        checkpoints = [2**k for k in range(int(np.log2(max(nmax, 1))) + 1)]
    dec = run.decomposition
    closed = dec.eta >= 0
    taus, etas = dec.tau[closed], dec.eta[closed]
    htaus, hetas = run.hat_taus, run.hat_etas
    hclosed = hetas >= 0
    xd = run.x_record.depths
    rows = []
    for n in checkpoints:
        n = int(n)
        if n > nmax or n >= len(xd):
            continue
        d = _delta(dec.tau, np.where(closed, dec.eta, len(xd)), n)
        dh = _delta(htaus, np.where(hclosed, hetas, nmax + 1), n)
        lo, hi = max(n - d - dh, 0), n + d + dh
        trunc = hi > nmax
        window = run.r_n[lo: min(hi, nmax) + 1]
        ax = int(xd[n])
        j = int(np.argmin(np.abs(window - ax)))
        rb = int(window[j])
        bn = int(run.b_n[n])
        bound = 2 * n**alpha + bn
        radius = n**alpha
        a_n = _off_excursion_ok(taus, etas, n, xd, radius)
        a_hat = _off_excursion_ok(htaus[hclosed], hetas[hclosed], n, run.y_depths, radius)
        rows.append(GapRow(n, ax, rb, d, dh, bn, float(bound), abs(ax - rb) <= bound,
                           bool(trunc), a_n, a_hat))
    return rows


def spine_degree_counts(run: CoupledRun, skip_root: bool = True) -> np.ndarray:
    """Offspring counts of the IGW tree's Ray vertices, per support value."""
    sp = run.igw_tree.spine
    if skip_root:
        sp = sp[1:]
    deg = run.igw_tree._arrays["degree"][sp]
    return np.array([(deg == k).sum() for k in run.igw_tree.dist.values])


def spine_degree_test(counts: np.ndarray, dist: OffspringDistribution,
                      seed: int | None = None) -> TestReport:
    if len(dist.values) < 2:
        ok = counts.sum() == counts[0]
        return TestReport("spine_degree", 0.0, 1.0, int(counts.sum()), bool(ok), seed,
                          f"dist={dist}")
    return chi_square(counts, dist.law("size_biased"), "spine_degree", seed=seed,
                      context=f"dist={dist}")


def transition_counts(run: CoupledRun, types=(FREE, PASTED, FORCED)) -> dict[int, np.ndarray]:
    """Per offspring count d: [up, child 0, ..., child d-1] counts of Y's steps.

    The step from time t to t+1 is classified by the type of time t+1 (free,
    pasted or forced).
    """
    deg = run.igw_tree._arrays["degree"][run.y_ids[:-1]]
    keep = np.isin(run.y_type[1:], types)
    out = {}
    for d in np.unique(deg[keep]):
        sel = keep & (deg == d)
        st = run.y_step[sel]
        c = np.zeros(int(d) + 1, np.int64)
        c[0] = np.count_nonzero(st == -1)
        for k in range(int(d)):
            c[k + 1] = np.count_nonzero(st == k)
        out[int(d)] = c
    return out


def merge_counts(parts) -> dict[int, np.ndarray]:
    out: dict[int, np.ndarray] = {}
    for p in parts:
        for d, c in p.items():
            out[d] = out.get(d, 0) + c
    return out


def transition_test(counts: dict[int, np.ndarray], lam: float, seed: int | None = None,
                    context: str = "") -> TestReport:
    """Pooled chi-square of step directions against lambda/(lambda+d), 1/(lambda+d)."""
    groups = []
    for d, c in sorted(counts.items()):
        p = np.r_[lam, np.ones(d)] / (lam + d)
        groups.append((c, p))
    return pooled_chi_square(groups, "y_transitions", seed=seed, context=context)
