import numpy as np
import pytest
from hypothesis import given, strategies as st

from gwclt import Kind, make_stream, new_tree
from gwclt.errors import BudgetExceeded, KindMismatch
from gwclt.stats import chi_square, ks_statistic
from gwclt.tree import rescale_to_parent
from gwclt.walk import run_walk

KINDS = ["GW", "SizeBiasedGW", "IGW", "IGWR"]


def _grow(tree, steps, seed):
    """Materialize a walk-shaped region and return every node id."""
    run_walk(tree, tree.dist.mean, steps, make_stream(seed, "grow"))
    return range(tree.n_nodes)


def test_gw_root(binary):
    t = new_tree(binary, "GW", rng=make_stream(0))
    assert t.degree(t.root_id) == 2
    assert t.parent(t.root_id) is None
    with pytest.raises(KindMismatch):
        t.extend_ray(3)


def test_kind_parse():
    assert Kind.parse("igwr") is Kind.IGWR
    assert Kind.parse("SizeBiasedGW") is Kind.SizeBiasedGW
    assert Kind.IGW.has_ray and not Kind.GW.has_ray
    with pytest.raises(ValueError):
        Kind.parse("nope")


def test_igw_spine_degrees_size_biased(mixed):
    t = new_tree(mixed, "IGW", rng=make_stream(1))
    degs = []
    for _ in range(10_000):
        t.reset()
        degs.append(t.degree(t.spine[1]))
    degs = np.array(degs)
    r = chi_square([np.sum(degs == 1), np.sum(degs == 3)], [0.25, 0.75])
    assert r.passed


def test_igwr_root_law(mixed):
    t = new_tree(mixed, "IGWR", rng=make_stream(2))
    degs = []
    for _ in range(10_000):
        t.reset()
        degs.append(t.degree(t.root_id))
    degs = np.array(degs)
    assert chi_square([np.sum(degs == 1), np.sum(degs == 3)], [3 / 8, 5 / 8]).passed


def test_materialize_idempotent(mixed):
    t = new_tree(mixed, "GW", rng=make_stream(3))
    a = t.materialize_children(t.root_id)
    b = t.materialize_children(t.root_id)
    assert a == b and len(a) == t.degree(t.root_id)
    assert all(t.parent(c) == t.root_id for c in a)


def test_degree_three_gets_three_children():
    from gwclt import make_distribution
    t = new_tree(make_distribution({3: 1.0}), "GW", rng=make_stream(4))
    assert len(t.materialize_children(t.root_id)) == 3


def test_spine_wiring_and_coords(mixed):
    t = new_tree(mixed, "IGW", rng=make_stream(5))
    deep = t.extend_ray(3)
    assert t.node_coords(deep) == (-3, 0)
    assert t.extend_ray(1) == t.spine[1]
    assert len(t.spine) == 4
    s = t.spine
    assert t.node_coords(t.root_id) == (0, 0)
    assert t.node_coords(s[2]) == (-2, 0)
    kids = t.materialize_children(s[2])
    assert s[1] in kids
    for c in kids:
        if c != s[1]:
            assert t.node_coords(c) == (-1, 1)
            assert not t.is_ray(c)
    assert all(t.parent(s[k]) == s[k + 1] for k in range(3))


def test_trunk_exists(mixed):
    t = new_tree(mixed, "SizeBiasedGW", rng=make_stream(6))
    v = t.root_id
    for _ in range(5):
        assert t.on_trunk(v)
        kids = t.materialize_children(v)
        trunk = [c for c in kids if t.on_trunk(c)]
        assert len(trunk) == 1
        v = trunk[0]


def test_sbgw_root_size_biased(mixed):
    t = new_tree(mixed, "SizeBiasedGW", rng=make_stream(7))
    degs = []
    for _ in range(5000):
        t.reset()
        degs.append(t.degree(t.root_id))
    degs = np.array(degs)
    assert chi_square([np.sum(degs == 1), np.sum(degs == 3)], [0.25, 0.75]).passed


def test_descendants(binary, mixed):
    t = new_tree(binary, "GW", rng=make_stream(8))
    assert t.descendants_at(t.root_id, 3) == 8
    assert t.descendants_at(t.root_id, 0) == 1
    assert t.descendants_at(t.root_id, 12) == 4096
    t = new_tree(mixed, "GW", rng=make_stream(9))
    z = []
    for _ in range(10_000):
        t.reset()
        z.append(t.descendants_at(t.root_id, 10) / 2 ** 10)
    assert np.mean(z) == pytest.approx(1.0, abs=0.05)


def test_descendants_budget(binary):
    t = new_tree(binary, "GW", rng=make_stream(10), node_budget=1000)
    with pytest.raises(BudgetExceeded) as exc:
        t.descendants_at(t.root_id, 12)
    assert exc.value.code == "DEPTH_BUDGET"


def test_walk_budget(binary):
    t = new_tree(binary, "GW", rng=make_stream(10), node_budget=500)
    with pytest.raises(BudgetExceeded) as exc:
        run_walk(t, 1.0, 10_000, make_stream(1))
    assert exc.value.code == "NODE_BUDGET"


def test_w_on_deterministic_tree(binary, binary_pool):
    t = new_tree(binary, "IGW", binary_pool, rng=make_stream(11))
    for v in _grow(t, 2000, 1):
        assert t.assign_w(v) == 1.0


def test_rescale_example():
    out = rescale_to_parent(1.2, 2.0, [0.5, 1.5])
    assert np.allclose(out, [0.6, 1.8]) and out.sum() == pytest.approx(2.4)


def test_root_w_matches_pool(mixed, mixed_pool):
    t = new_tree(mixed, "GW", mixed_pool, rng=make_stream(12))
    ws = []
    for _ in range(10_000):
        t.reset()
        ws.append(t.w(t.root_id))
    ref = np.sort(mixed_pool.samples)
    d = ks_statistic(ws, lambda x: np.searchsorted(ref, x, "right") / len(ref))
    assert d <= 0.02


@pytest.mark.parametrize("kind", KINDS)
@given(seed=st.integers(0, 2**32 - 1))
def test_structure_invariants(kind, seed, mixed, mixed_pool):
    t = new_tree(mixed, kind, mixed_pool, rng=make_stream(seed, "tree"))
    nodes = list(_grow(t, 300, seed))
    if t.kind.has_ray:
        t.extend_ray(len(t.spine) + 2)
    m = mixed.mean
    for v in range(t.n_nodes):
        kids = t.children(v)
        if kids is None:
            continue
        assert len(kids) == t.degree(v)
        h, _ = t.node_coords(v)
        for c in kids:
            assert t.parent(c) == v
            assert t.node_coords(c)[0] == h + 1
        w = t.assign_w(v)
        ws = [t.assign_w(c) for c in kids]
        assert abs(w - sum(ws) / m) <= 1e-12 * max(1.0, w)
    assert len(nodes) <= t.n_nodes


@given(seed=st.integers(0, 2**32 - 1))
def test_ids_are_stable(seed, mixed):
    t = new_tree(mixed, "IGW", rng=make_stream(seed), capacity=8)
    before = [(t.parent(v), t.node_coords(v)) for v in range(t.n_nodes)]
    run_walk(t, 2.0, 2000, make_stream(seed, 1))
    after = [(t.parent(v), t.node_coords(v)) for v in range(len(before))]
    # only the then-topmost ray vertex may gain a parent
    for (p0, c0), (p1, c1) in zip(before, after):
        assert c0 == c1
        assert p0 == p1 or p0 is None


def test_snapshot_format(binary):
    t = new_tree(binary, "GW", rng=make_stream(0))
    t.materialize_children(t.root_id)
    lines = t.snapshot().splitlines()
    assert lines[0] == "node_id,parent_id,h,degree,w"
    assert len(lines) == 1 + t.n_nodes
