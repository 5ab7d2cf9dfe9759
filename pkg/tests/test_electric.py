import numpy as np
import pytest
from hypothesis import given, strategies as st

from gwclt import make_distribution, make_stream, new_tree
from gwclt.electric import (ball_levels, cv_bound, cv_envelope, effective_conductance,
                            escape_stats, excursion_visit_counts)


def dirichlet_conductance(tree, level, lam):
    """Unit-voltage current from the root into the shorted depth-`level` set, by a linear solve."""
    nodes, offsets = ball_levels(tree, level)
    interior = nodes[1:offsets[level]]
    index = {int(v): i for i, v in enumerate(interior)}
    n = len(interior)
    a = np.zeros((n, n))
    b = np.zeros(n)
    current = 0.0
    for v in nodes[1:]:
        v = int(v)
        p = tree.parent(v)
        depth = tree.node_coords(p)[1]
        c = lam ** -depth
        iv, ip = index.get(v), index.get(p)
        for i, j in ((iv, ip), (ip, iv)):
            if i is not None:
                a[i, i] += c
                if j is not None:
                    a[i, j] -= c
        if p == tree.root_id and iv is not None:
            b[iv] += c
    x = np.linalg.solve(a, b) if n else np.zeros(0)
    for v in nodes[1:offsets[2]]:
        v = int(v)
        current += 1.0 - (x[index[v]] if v in index else 0.0)
    return current


@pytest.mark.parametrize("b,level", [(2, 4), (2, 1), (3, 5), (2, 10)])
def test_regular_tree_conductance(b, level):
    t = new_tree(make_distribution({b: 1.0}), "GW", rng=make_stream(0))
    assert abs(effective_conductance(t, level, float(b)) - b / level) <= 1e-10


def test_level_one_is_root_degree(mixed):
    t = new_tree(mixed, "GW", rng=make_stream(1))
    for lam in (0.5, 2.0, 7.0):
        assert effective_conductance(t, 1, lam) == pytest.approx(t.degree(t.root_id), abs=1e-12)


def test_path_is_pure_series(mixed):
    level = 4
    t = new_tree(mixed, "GW", rng=make_stream(2))
    while True:
        _, off = ball_levels(t, level)
        if off[-1] == level + 1:
            break
        t.reset()
    for lam in (0.7, 2.0, 3.0):
        expected = 1.0 / sum(lam ** k for k in range(level))
        assert effective_conductance(t, level, lam) == pytest.approx(expected, rel=1e-12)


@given(seed=st.integers(0, 2**32 - 1), level=st.integers(1, 6),
       lam=st.floats(0.3, 4.0))
def test_reduction_matches_linear_solve(seed, level, lam, mixed):
    t = new_tree(mixed, "GW", rng=make_stream(seed))
    assert effective_conductance(t, level, lam) == pytest.approx(
        dirichlet_conductance(t, level, lam), rel=1e-9)


@given(seed=st.integers(0, 2**32 - 1), lam=st.floats(0.3, 4.0))
def test_rayleigh_monotonicity(seed, lam, mixed):
    t = new_tree(mixed, "GW", rng=make_stream(seed))
    c = [effective_conductance(t, level, lam) for level in range(1, 9)]
    assert all(x >= y - 1e-12 for x, y in zip(c, c[1:]))


def test_escape_on_binary_tree(binary):
    t = new_tree(binary, "GW", rng=make_stream(3))
    rep = escape_stats(t, 4, 2.0, 20_000, make_stream(4))
    assert rep.escape_prob == pytest.approx(0.25, abs=1e-12)
    assert rep.expected_root_visits == pytest.approx(4.0, abs=1e-12)
    assert abs(rep.escape_mc - 0.25) <= 3 * rep.escape_stderr
    rep = escape_stats(t, 1, 2.0, 1000, make_stream(5))
    assert rep.escape_prob == 1.0 and rep.escape_mc == 1.0


@given(seed=st.integers(0, 2**32 - 1), level=st.integers(1, 8))
def test_escape_visit_product(seed, level, mixed):
    t = new_tree(mixed, "GW", rng=make_stream(seed))
    rep = escape_stats(t, level, 2.0)
    assert abs(rep.escape_prob * rep.expected_root_visits - 1) <= 1e-12


def test_escape_monte_carlo(mixed):
    for k in range(3):
        t = new_tree(mixed, "GW", rng=make_stream(6, k))
        rep = escape_stats(t, 8, 2.0, 20_000, make_stream(7, k))
        assert abs(rep.escape_mc - rep.escape_prob) <= 3 * rep.escape_stderr


def test_cv_bound_values():
    assert cv_bound(10, 10) == pytest.approx(40 * np.exp(-5))
    assert cv_bound(10, 10) == pytest.approx(0.269518, abs=1e-6)
    assert cv_bound(1, 1) == pytest.approx(2.4261, abs=1e-4)


def test_cv_envelope(mixed):
    rows = cv_envelope(mixed, 2.0, [40, 60, 80], 400, 10_000, make_stream(8))
    assert all(r.ok for r in rows)
    assert rows[0].empirical >= rows[-1].empirical


def test_visit_counts_binary(binary):
    vc = excursion_visit_counts("GW", binary, 10, 20_000, 2.0, make_stream(9))
    assert vc.mean[0] == 0
    assert abs(vc.mean[1] - 2.0) <= 3 * vc.stderr[1]
    assert vc.no_trend()


def test_visit_counts_need_reps(binary):
    with pytest.raises(ValueError):
        excursion_visit_counts("GW", binary, 3, 10, 2.0, make_stream(0))
