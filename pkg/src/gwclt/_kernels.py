"""Compiled tree-arena and walk kernels.

The arena is a tuple of flat arrays indexed by node id:

    0 parent  int32   (-1: none yet)
    1 degree  int32   (number of offspring; -1: placeholder leaf)
    2 cstart  int64   (offset into cids; -1: children not materialized)
    3 h       int32   (horocycle level)
    4 dray    int32   (distance to Ray; depth for rooted kinds)
    5 flag    int8    (PLAIN, TRUNK or RAY)
    6 w       float64 (NaN: unassigned)
    7 mark    int32   (serial of the last walk that visited the node)
    8 wr      int8    (pool round of the node's lineage entry; -1: none)
    9 we      int32   (pool entry index)
   10 cids    int32   (children of node v are cids[cstart[v]:cstart[v]+degree[v]])
   11 spine   int32   (spine[k] is the Ray vertex at level -k)
   12 cnt     int64[4]: nodes, cids used, spine length, walk serial

Callers guarantee capacity before entering a kernel: a walk step creates at
most ``3 * max_degree + 2`` nodes and cids and one spine entry.

The law tuple is (values, cdf_plain, cdf_size_biased, cdf_igwr_root, mean);
the pool tuple is (values, degrees, child_ptr, child_refs, weight_cdf, top,
active, anchor_values, anchor_entries, anchor_offsets). The anchor arrays list
the top-round entries grouped by degree and sorted by value within a group.
"""

import numpy as np
from numba import njit

PLAIN = 0
TRUNK = 1
RAY = 2

GW = 0
SBGW = 1
IGW = 2
IGWR = 3


@njit(cache=True)
def _uniform_index(rng, n):
    k = int(rng.random() * n)
    if k >= n:
        k = n - 1
    return k


@njit(cache=True)
def draw(values, cdf, rng):
    i = np.searchsorted(cdf, rng.random(), side="right")
    if i >= values.shape[0]:
        i = values.shape[0] - 1
    return values[i]


@njit(cache=True)
def new_node(A, par, deg, lvl, dr, fl):
    cnt = A[12]
    i = cnt[0]
    cnt[0] = i + 1
    A[0][i] = par
    A[1][i] = deg
    A[2][i] = -1
    A[3][i] = lvl
    A[4][i] = dr
    A[5][i] = fl
    A[6][i] = np.nan
    A[7][i] = 0
    A[8][i] = -1
    A[9][i] = -1
    return i


@njit(cache=True)
def _new_plain(A, L, P, trng, par, lvl, dr, r, e, scale):
    pw = P[0]
    if P[6]:
        if r < 0:
            r = P[5]
            e = _uniform_index(trng, pw.shape[1])
        i = new_node(A, par, P[1][r, e], lvl, dr, PLAIN)
        A[8][i] = r
        A[9][i] = e
        A[6][i] = pw[r, e] * scale
        return i
    return new_node(A, par, draw(L[0], L[1], trng), lvl, dr, PLAIN)


@njit(cache=True)
def _weighted_entry(P, trng):
    """Top-round entry drawn with probability proportional to its W value."""
    cdf = P[4]
    i = np.searchsorted(cdf, trng.random(), side="right")
    if i >= cdf.shape[0]:
        i = cdf.shape[0] - 1
    return i


@njit(cache=True)
def _anchor(L, P, d, wv):
    """Top-round entry with degree d whose W value is nearest to wv (-1: none)."""
    k = np.searchsorted(L[0], d)
    if k >= L[0].shape[0] or L[0][k] != d:
        return -1
    off = P[9]
    lo = off[k]
    hi = off[k + 1]
    if hi <= lo:
        return -1
    vals = P[7]
    j = lo + np.searchsorted(vals[lo:hi], wv)
    if j >= hi:
        j = hi - 1
    elif j > lo and wv - vals[j - 1] < vals[j] - wv:
        j -= 1
    return P[8][j]


@njit(cache=True)
def materialize(A, L, P, trng, v, placeholder):
    cstart = A[2]
    if cstart[v] >= 0:
        return
    degree = A[1]
    w = A[6]
    cids = A[10]
    cnt = A[12]
    d = degree[v]
    base = cnt[1]
    cstart[v] = base
    cnt[1] = base + d
    lvl = A[3][v] + 1
    dr = A[4][v] + 1
    if placeholder:
        for k in range(d):
            cids[base + k] = new_node(A, v, -1, lvl, dr, PLAIN)
        return
    trunk = A[5][v] == TRUNK
    if P[6] and not np.isnan(w[v]):
        r = A[8][v]
        e = A[9][v]
        if r < 1:
            # lineage exhausted: re-anchor at a matching top-round entry
            e2 = _anchor(L, P, d, w[v])
            if e2 >= 0:
                r = P[5]
                e = e2
        if r >= 1:
            p0 = P[2][r, e]
            s = 0.0
            for k in range(d):
                s += P[0][r - 1, P[3][p0 + k]]
            scale = L[4] * w[v] / s
            for k in range(d):
                cids[base + k] = _new_plain(A, L, P, trng, v, lvl, dr, r - 1, P[3][p0 + k], scale)
            if trunk:
                # the trunk continues through a child picked in proportion to W
                s = 0.0
                for k in range(d):
                    s += w[cids[base + k]]
                x = trng.random() * s
                j = d - 1
                for k in range(d):
                    x -= w[cids[base + k]]
                    if x < 0.0:
                        j = k
                        break
                A[5][cids[base + j]] = TRUNK
            return
    j = -1
    if trunk:
        j = _uniform_index(trng, d)
    for k in range(d):
        if k == j:
            if P[6]:
                c = _new_plain(A, L, P, trng, v, lvl, dr, P[5], _weighted_entry(P, trng), 1.0)
                A[5][c] = TRUNK
            else:
                c = new_node(A, v, draw(L[0], L[2], trng), lvl, dr, TRUNK)
        else:
            c = _new_plain(A, L, P, trng, v, lvl, dr, -1, 0, 1.0)
        cids[base + k] = c
    if P[6] and not np.isnan(w[v]):
        rescale_children(A, v, L[4])


@njit(cache=True)
def rescale_children(A, v, m):
    """Scale the children's w so that they sum to m * w[v]."""
    w = A[6]
    cids = A[10]
    base = A[2][v]
    d = A[1][v]
    s = 0.0
    for k in range(d):
        s += w[cids[base + k]]
    f = m * w[v] / s
    for k in range(d):
        w[cids[base + k]] *= f


@njit(cache=True)
def extend_spine(A, L, P, trng, placeholder):
    """Create the Ray parent of the current top spine vertex."""
    cids = A[10]
    spine = A[11]
    cnt = A[12]
    top = spine[cnt[2] - 1]
    lvl = A[3][top]
    d = draw(L[0], L[2], trng)
    s = new_node(A, -1, d, lvl - 1, 0, RAY)
    A[0][top] = s
    base = cnt[1]
    A[2][s] = base
    cnt[1] = base + d
    j = _uniform_index(trng, d)
    for k in range(d):
        if k == j:
            c = top
        elif placeholder:
            c = new_node(A, s, -1, lvl, 1, PLAIN)
        else:
            c = _new_plain(A, L, P, trng, s, lvl, 1, -1, 0, 1.0)
        cids[base + k] = c
    spine[cnt[2]] = s
    cnt[2] += 1
    return s


@njit(cache=True)
def init_tree(A, L, P, trng, kind, placeholder):
    cnt = A[12]
    cnt[0] = 0
    cnt[1] = 0
    cnt[2] = 0
    if kind == GW:
        root = _new_plain(A, L, P, trng, -1, 0, 0, -1, 0, 1.0)
    elif kind == SBGW:
        if P[6]:
            e = _weighted_entry(P, trng)
            root = _new_plain(A, L, P, trng, -1, 0, 0, P[5], e, 1.0)
            A[5][root] = TRUNK
        else:
            root = new_node(A, -1, draw(L[0], L[2], trng), 0, 0, TRUNK)
    elif kind == IGW:
        if placeholder:
            root = new_node(A, -1, draw(L[0], L[1], trng), 0, 0, RAY)
        else:
            root = _new_plain(A, L, P, trng, -1, 0, 0, -1, 0, 1.0)
            A[5][root] = RAY
    else:
        root = new_node(A, -1, draw(L[0], L[3], trng), 0, 0, RAY)
    if kind == IGW or kind == IGWR:
        A[11][0] = root
        cnt[2] = 1
        extend_spine(A, L, P, trng, placeholder)
        if placeholder:
            materialize(A, L, P, trng, root, True)
    return root


@njit(cache=True)
def assign_w(A, L, P, trng, v):
    """Assign w at v, summing over children wherever it is not yet known."""
    w = A[6]
    if not np.isnan(w[v]):
        return w[v]
    degree = A[1]
    cstart = A[2]
    cids = A[10]
    m = L[4]
    stack = [np.int64(v)]
    while len(stack) > 0:
        u = stack[-1]
        if cstart[u] < 0:
            if degree[u] > 0 and (A[8][u] >= 0 or A[5][u] != PLAIN):
                materialize(A, L, P, trng, u, False)
            else:
                # frontier node without lineage: a plain pool draw
                w[u] = P[0][P[5], _uniform_index(trng, P[0].shape[1])]
                stack.pop()
                continue
        pushed = False
        s = 0.0
        base = cstart[u]
        for k in range(degree[u]):
            c = cids[base + k]
            if np.isnan(w[c]):
                stack.append(np.int64(c))
                pushed = True
                break
            s += w[c]
        if not pushed:
            w[u] = s / m
            stack.pop()
    return w[v]


@njit(cache=True)
def step(A, L, P, trng, wrng, v, lam, placeholder):
    parent = A[0]
    d = A[1][v]
    if parent[v] < 0 and A[5][v] != RAY:
        k = _uniform_index(wrng, d)
    else:
        x = wrng.random() * (lam + d)
        if x < lam:
            p = parent[v]
            if p < 0:
                p = extend_spine(A, L, P, trng, placeholder)
            return np.int64(p)
        k = int(x - lam)
        if k >= d:
            k = d - 1
    materialize(A, L, P, trng, v, placeholder)
    return np.int64(A[10][A[2][v] + k])


@njit(cache=True)
def mu2(A, L, P, trng, v):
    """Conditional variance of the next martingale increment at v (lambda = m)."""
    w = A[6]
    assign_w(A, L, P, trng, v)
    materialize(A, L, P, trng, v, False)
    d = A[1][v]
    base = A[2][v]
    m = L[4]
    s2 = 0.0
    for k in range(d):
        c = A[10][base + k]
        wc = w[c]
        if np.isnan(wc):
            wc = assign_w(A, L, P, trng, c)
        s2 += wc * wc
    return (m * w[v] * w[v] + s2) / (m + d)


@njit(cache=True)
def walk_chunk(A, L, P, trng, wrng, lam, t0, t1, ids, lev, dep, fresh, serial,
               wtrack, mvals, mu2s):
    """Advance a recorded walk from time t0 to t1 (ids[t0] is the current node)."""
    h = A[3]
    dray = A[4]
    mark = A[7]
    parent = A[0]
    w = A[6]
    v = np.int64(ids[t0])
    for t in range(t0, t1):
        if wtrack:
            mu2s[t] = mu2(A, L, P, trng, v)
        nxt = step(A, L, P, trng, wrng, v, lam, False)
        if wtrack:
            if nxt == parent[v]:
                mvals[t + 1] = mvals[t] - w[v]
            else:
                mvals[t + 1] = mvals[t] + w[nxt]
        v = nxt
        ids[t + 1] = v
        lev[t + 1] = h[v]
        dep[t + 1] = dray[v]
        if mark[v] != serial:
            mark[v] = serial
            fresh[t + 1] = True


@njit(cache=True)
def walk_checkpoints(A, L, P, trng, wrng, lam, start, steps, checks, out_h, out_d):
    """One walk from `start`; record level and depth at the checkpoint times."""
    h = A[3]
    dray = A[4]
    v = np.int64(start)
    ci = 0
    nc = checks.shape[0]
    while ci < nc and checks[ci] == 0:
        out_h[ci] = h[v]
        out_d[ci] = dray[v]
        ci += 1
    for t in range(1, steps + 1):
        v = step(A, L, P, trng, wrng, v, lam, False)
        while ci < nc and checks[ci] == t:
            out_h[ci] = h[v]
            out_d[ci] = dray[v]
            ci += 1


@njit(cache=True)
def fresh_walks(A, L, P, kind, trng, wrng, lam, reps, steps, checks, near, wtrack,
                out_h, out_d, out_maxd, out_near, out_mu2, out_deg):
    """Independent walks, each on a freshly sampled tree.

    Per replica: level and depth at checkpoints, the maximal depth, the
    number of times 1..steps spent within distance `near` of Ray (or of the
    root), the time-average of mu^2 over times 0..steps-1 (if `wtrack`) and
    the offspring count of the final vertex.
    """
    h = A[3]
    dray = A[4]
    nc = checks.shape[0]
    for r in range(reps):
        v = init_tree(A, L, P, trng, kind, False)
        ci = 0
        while ci < nc and checks[ci] == 0:
            out_h[r, ci] = h[v]
            out_d[r, ci] = dray[v]
            ci += 1
        maxd = 0
        nnear = 0
        acc = 0.0
        for t in range(1, steps + 1):
            if wtrack:
                acc += mu2(A, L, P, trng, v)
            v = step(A, L, P, trng, wrng, v, lam, False)
            dv = dray[v]
            if dv > maxd:
                maxd = dv
            if dv <= near:
                nnear += 1
            while ci < nc and checks[ci] == t:
                out_h[r, ci] = h[v]
                out_d[r, ci] = dv
                ci += 1
        out_maxd[r] = maxd
        out_near[r] = nnear
        out_mu2[r] = acc / steps if steps > 0 else 0.0
        out_deg[r] = A[1][v]


@njit(cache=True)
def one_step_pairs(A, L, P, kind, trng, wrng, lam, reps, out_d0, out_up, out_d1):
    """Root degree, direction of the first step and the degree at X_1."""
    for r in range(reps):
        v = init_tree(A, L, P, trng, kind, False)
        out_d0[r] = A[1][v]
        nxt = step(A, L, P, trng, wrng, v, lam, False)
        out_up[r] = nxt == A[0][v]
        out_d1[r] = A[1][nxt]


@njit(cache=True)
def materialize_many(A, L, P, trng, nodes):
    for i in range(nodes.shape[0]):
        materialize(A, L, P, trng, nodes[i], False)


@njit(cache=True)
def children_of(A, nodes, out):
    """Concatenated children of already materialized nodes."""
    k = 0
    for i in range(nodes.shape[0]):
        v = nodes[i]
        base = A[2][v]
        for j in range(A[1][v]):
            out[k] = A[10][base + j]
            k += 1
    return k


@njit(cache=True)
def conductance_reduce(A, nodes, offsets, lam, level):
    """Bottom-up series/parallel reduction over a materialized ball.

    ``nodes[offsets[k]:offsets[k+1]]`` lists the vertices at relative depth
    k; the edge below a depth-k vertex has conductance lam**-k. Returns the
    effective conductance between nodes[0] and the short-circuited set of
    vertices at depth `level`.
    """
    n = A[12][0]
    cond = np.zeros(n)
    for k in range(level - 1, -1, -1):
        edge = lam ** (-k)
        for i in range(offsets[k], offsets[k + 1]):
            v = nodes[i]
            base = A[2][v]
            total = 0.0
            for j in range(A[1][v]):
                if k == level - 1:
                    total += edge
                else:
                    cc = cond[A[10][base + j]]
                    total += edge * cc / (edge + cc)
            cond[v] = total
    return cond[nodes[0]]


@njit(cache=True)
def first_escape(A, L, P, trng, wrng, lam, root, level, reps, out_escape):
    """Per trial: does the walk from the root reach depth `level` before returning?"""
    dray = A[4]
    target = dray[root] + level
    for r in range(reps):
        v = step(A, L, P, trng, wrng, np.int64(root), lam, False)
        while True:
            if dray[v] >= target:
                out_escape[r] = True
                break
            if v == root:
                out_escape[r] = False
                break
            v = step(A, L, P, trng, wrng, v, lam, False)


@njit(cache=True)
def excursion_counts(A, L, P, kind, trng, wrng, lam, reps, nmax, cap, out_counts, out_trunc):
    """Visits to each depth 0..nmax during one excursion from the root.

    Counts times 1..T_o inclusive where T_o is the first return; excursions
    longer than `cap` steps are cut and flagged.
    """
    dray = A[4]
    for r in range(reps):
        root = init_tree(A, L, P, trng, kind, False)
        v = np.int64(root)
        t = 0
        while True:
            v = step(A, L, P, trng, wrng, v, lam, False)
            t += 1
            dv = dray[v]
            if dv <= nmax:
                out_counts[r, dv] += 1
            if v == root:
                break
            if t >= cap:
                out_trunc[r] = True
                break
