"""Lazily materialized Galton-Watson trees with an optional marked ray.

Nodes live in flat arrays (see ``_kernels``); ids are stable for the life of
a tree. Children are created the first time they are needed, the ray is
extended when a walk or query climbs past its current top.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from . import _kernels as K
from .errors import BudgetExceeded, KindMismatch
from .offspring import OffspringDistribution, WPool
from .rng import RandomStream

DEFAULT_NODE_BUDGET = 50_000_000
_budget = DEFAULT_NODE_BUDGET


def set_default_node_budget(n: int) -> None:
    """Budget applied to trees created without an explicit one."""
    global _budget
    _budget = int(n)


class Kind(IntEnum):
    GW = K.GW
    SizeBiasedGW = K.SBGW
    IGW = K.IGW
    IGWR = K.IGWR

    @classmethod
    def parse(cls, kind) -> "Kind":
        if isinstance(kind, str):
            key = {"gw": "GW", "sizebiasedgw": "SizeBiasedGW", "sbgw": "SizeBiasedGW",
                   "igw": "IGW", "igwr": "IGWR"}.get(kind.lower().replace("_", ""))
            if key is None:
                raise ValueError(f"unknown tree kind {kind!r}")
            return cls[key]
        return cls(int(kind))

    @property
    def has_ray(self) -> bool:
        return self in (Kind.IGW, Kind.IGWR)


_FIELDS = (("parent", np.int32), ("degree", np.int32), ("cstart", np.int64),
           ("h", np.int32), ("dray", np.int32), ("flag", np.int8), ("w", np.float64),
           ("mark", np.int32), ("wr", np.int8), ("we", np.int32))


def pool_tuple(wpool: WPool | None, dist: OffspringDistribution):
    if wpool is None:
        return (np.ones((1, 1)), np.zeros((1, 1), np.int32), np.zeros((1, 2), np.int64),
                np.zeros(1, np.int32), np.ones(1), 0, False, np.ones(1), np.zeros(1, np.int64),
                np.zeros(len(dist.values) + 1, np.int64))
    top = wpool.lineage_depth
    vals = wpool.values[top]
    degs = wpool.degrees[top]
    order = np.lexsort((vals, degs))
    counts = np.array([(degs == k).sum() for k in dist.values])
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return (wpool.values, wpool.degrees, wpool.child_ptr, wpool.child_refs,
            wpool.weight_cdf, top, True, vals[order], order.astype(np.int64), offsets)


def law_tuple(dist: OffspringDistribution):
    return (dist.values, dist.cdf_plain, dist.cdf_size_biased, dist.cdf_igwr_root,
            float(dist.mean))


class Tree:
    """A single tree realization of kind GW, SizeBiasedGW, IGW or IGWR.

    With a ``wpool`` every plain node carries a W value from creation and
    ray vertices get theirs on demand through :meth:`assign_w`; without one
    W values are unavailable and the tree is purely structural.

    ``placeholder=True`` builds an IGW skeleton whose off-ray leaves have
    degree -1 until filled in; the coupling construction uses it.
    """

    def __init__(self, dist: OffspringDistribution, kind="GW", wpool: WPool | None = None,
                 rng: RandomStream | None = None, node_budget: int | None = None,
                 capacity: int = 4096, placeholder: bool = False):
        self.dist = dist
        self.kind = Kind.parse(kind)
        self.wpool = wpool
        self.rng = np.random.default_rng() if rng is None else rng
        self.node_budget = _budget if node_budget is None else int(node_budget)
        self.placeholder = placeholder
        self._law = law_tuple(dist)
        self._pool = pool_tuple(wpool, dist)
        self._step_cost = 3 * dist.max_degree + 2
        cap = max(int(capacity), 8 * self._step_cost)
        self._arrays = {name: np.zeros(cap, dt) for name, dt in _FIELDS}
        self._cids = np.zeros(cap, np.int32)
        self._spine = np.zeros(64, np.int32)
        self._cnt = np.zeros(4, np.int64)
        self._rebuild()
        self.root_id = int(K.init_tree(self.A, self._law, self._pool, self.rng,
                                       int(self.kind), placeholder))

    # -- arena management -------------------------------------------------
    def _rebuild(self):
        a = self._arrays
        self.A = (a["parent"], a["degree"], a["cstart"], a["h"], a["dray"], a["flag"],
                  a["w"], a["mark"], a["wr"], a["we"], self._cids, self._spine, self._cnt)

    def ensure_capacity(self, nodes: int, cids: int | None = None, spine: int = 0):
        """Make room for `nodes` more nodes (and child slots, spine entries)."""
        cids = nodes if cids is None else cids
        need = int(self._cnt[0]) + int(nodes)
        if need > self.node_budget:
            raise BudgetExceeded(f"tree would need {need} nodes, budget is {self.node_budget}")
        grown = False
        cap = len(self._arrays["parent"])
        if need > cap:
            new_cap = min(max(2 * cap, need), max(need, self.node_budget))
            for name, dt in _FIELDS:
                old = self._arrays[name]
                arr = np.zeros(new_cap, dt)
                arr[:cap] = old
                self._arrays[name] = arr
            grown = True
        need_c = int(self._cnt[1]) + int(cids)
        if need_c > len(self._cids):
            arr = np.zeros(max(2 * len(self._cids), need_c), np.int32)
            arr[: len(self._cids)] = self._cids
            self._cids = arr
            grown = True
        need_s = int(self._cnt[2]) + int(spine)
        if need_s > len(self._spine):
            arr = np.zeros(max(2 * len(self._spine), need_s), np.int32)
            arr[: len(self._spine)] = self._spine
            self._spine = arr
            grown = True
        if grown:
            self._rebuild()

    def reserve_steps(self, steps: int):
        """Capacity for a walk of `steps` steps (each creates O(max degree) nodes)."""
        self.ensure_capacity(steps * self._step_cost + 4 * self._step_cost, spine=steps + 2)

    def reset(self):
        """Discard all nodes and sample a fresh tree of the same kind."""
        self.ensure_capacity(4 * self._step_cost, spine=2)
        self.root_id = int(K.init_tree(self.A, self._law, self._pool, self.rng,
                                       int(self.kind), self.placeholder))

    # -- queries ------------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return int(self._cnt[0])

    @property
    def spine(self) -> np.ndarray:
        """Ray vertices ordered from the root (level 0) downward."""
        return self._spine[: int(self._cnt[2])].copy()

    def parent(self, v: int) -> int | None:
        p = int(self._arrays["parent"][v])
        return None if p < 0 else p

    def degree(self, v: int) -> int:
        return int(self._arrays["degree"][v])

    def is_materialized(self, v: int) -> bool:
        return self._arrays["cstart"][v] >= 0

    def children(self, v: int) -> list[int] | None:
        """Children of v if already materialized, else None."""
        s = int(self._arrays["cstart"][v])
        if s < 0:
            return None
        return [int(c) for c in self._cids[s: s + self.degree(v)]]

    def is_ray(self, v: int) -> bool:
        return int(self._arrays["flag"][v]) == K.RAY

    def on_trunk(self, v: int) -> bool:
        return int(self._arrays["flag"][v]) == K.TRUNK

    def node_coords(self, v: int) -> tuple[int, int]:
        """(horocycle level, distance to Ray); the latter is depth for rooted kinds."""
        return int(self._arrays["h"][v]), int(self._arrays["dray"][v])

    def w(self, v: int) -> float:
        return float(self._arrays["w"][v])

    # -- growth -------------------------------------------------------------
    def materialize_children(self, v: int) -> list[int]:
        if not self.is_materialized(v):
            self.ensure_capacity(self._step_cost)
            K.materialize(self.A, self._law, self._pool, self.rng, int(v), self.placeholder)
        return self.children(v)

    def extend_ray(self, target_depth: int) -> int:
        """Grow the ray until it reaches level -target_depth; return its deepest vertex."""
        if not self.kind.has_ray:
            raise KindMismatch(f"{self.kind.name} trees have no ray")
        while int(self._cnt[2]) <= target_depth:
            self.ensure_capacity(self._step_cost, spine=1)
            K.extend_spine(self.A, self._law, self._pool, self.rng, self.placeholder)
        return int(self._spine[target_depth])

    def descendants_at(self, v: int, n: int) -> int:
        """|D_n(v)|: descendants w of v with h(w) - h(v) = n."""
        if n < 0:
            raise ValueError("n must be non-negative")
        level = np.array([v], dtype=np.int64)
        degree = self._arrays["degree"]
        for _ in range(n):
            total = int(degree[level].sum())
            if int(self._cnt[0]) + total > self.node_budget:
                raise BudgetExceeded(f"level population {total} exceeds node budget",
                                     "DEPTH_BUDGET")
            self.ensure_capacity(total)
            K.materialize_many(self.A, self._law, self._pool, self.rng, level)
            nxt = np.empty(total, dtype=np.int64)
            K.children_of(self.A, level, nxt)
            level = nxt
            degree = self._arrays["degree"]
        return len(level)

    def assign_w(self, v: int) -> float:
        """W at v; the recursion w_v = sum(w_child)/m holds wherever both are set."""
        if self.wpool is None:
            raise ValueError("tree was built without a W pool")
        if np.isnan(self._arrays["w"][v]):
            # a ray vertex: everything below it is already materialized except
            # possibly its own children
            self.ensure_capacity(8 * self._step_cost)
            return float(K.assign_w(self.A, self._law, self._pool, self.rng, int(v)))
        return self.w(v)

    # -- debugging ----------------------------------------------------------
    def snapshot(self) -> str:
        """Text dump, one ``node_id,parent_id,h,degree,w`` line per node."""
        a = self._arrays
        n = self.n_nodes
        lines = ["node_id,parent_id,h,degree,w"]
        for i in range(n):
            w = a["w"][i]
            lines.append(f"{i},{a['parent'][i]},{a['h'][i]},{a['degree'][i]},"
                         f"{'' if np.isnan(w) else repr(float(w))}")
        return "\n".join(lines) + "\n"


def new_tree(dist: OffspringDistribution, kind="GW", wpool: WPool | None = None,
             rng: RandomStream | None = None, **kw) -> Tree:
    return Tree(dist, kind, wpool, rng, **kw)


def rescale_to_parent(parent_w: float, m: float, raw) -> np.ndarray:
    """Scale raw child weights so that they sum to m * parent_w."""
    raw = np.asarray(raw, dtype=float)
    return raw * (m * parent_w / raw.sum())
