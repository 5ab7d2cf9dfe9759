import numpy as np
import pytest
from hypothesis import settings

from gwclt import build_w_pool, make_distribution, make_stream

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def binary():
    return make_distribution({2: 1.0})


@pytest.fixture(scope="session")
def mixed():
    return make_distribution({1: 0.5, 3: 0.5})


@pytest.fixture(scope="session")
def mixed_pool(mixed):
    return build_w_pool(mixed, 100_000, 30, make_stream(11, "pool"))


@pytest.fixture(scope="session")
def binary_pool(binary):
    return build_w_pool(binary, 10_000, 5, make_stream(11, "pool"))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


COUPLING_STEPS = 100_000
COUPLING_RUNS = 100


def coupling_summary(dist, runs=COUPLING_RUNS, steps=COUPLING_STEPS, seed=2024):
    """Per-run reductions of `runs` coupled pairs; the runs themselves are discarded."""
    from gwclt.coupling import (FREE, build_coupled_pair, coupling_gap, merge_counts,
                                spine_degree_counts, transition_counts)
    checkpoints = [2**k for k in range(17)] + [steps]
    out = {"gap_ok": [], "failures": [], "spine": 0, "moves": [], "b_scaled": [],
           "extended": 0, "pasted_ok": True}
    for r in range(runs):
        run = build_coupled_pair(dist, None, steps, make_stream(seed, r))
        out["extended"] += run.x_record.steps > 4 * steps
        rows = coupling_gap(run, 1 / 3, checkpoints)
        bad = [row for row in rows if not row.ok]
        out["gap_ok"].append(not bad)
        out["failures"] += [(r, row) for row in bad]
        out["spine"] = out["spine"] + spine_degree_counts(run)
        out["moves"].append(transition_counts(run, (FREE,)))
        out["b_scaled"].append(run.b_n[steps] / np.sqrt(steps))
        out["pasted_ok"] &= pasted_segments_match(run)
        del run
    out["moves"] = merge_counts(out["moves"])
    return out


def pasted_segments_match(run):
    """Every used excursion is replayed in Y with the same shape and the same degrees."""
    dec = run.decomposition
    xl, xid = run.x_record.levels, run.x_record.node_ids
    xdeg = run.x_tree._arrays["degree"]
    ydeg = run.igw_tree._arrays["degree"]
    for i in range(run.used):
        th, eh = int(run.hat_taus[i]), int(run.hat_etas[i])
        tau, eta = int(dec.tau[i]), int(dec.eta[i])
        if eh < 0 or eta < 0:
            continue
        if eh - th != eta - tau:
            return False
        if not np.array_equal(xl[tau:eta] - xl[tau], run.y_levels[th:eh] - run.y_levels[th]):
            return False
        if not np.array_equal(xdeg[xid[tau:eta]], ydeg[run.y_ids[th:eh]]):
            return False
    return True


@pytest.fixture(scope="session")
def coupling_mixed(mixed):
    return coupling_summary(mixed)


@pytest.fixture(scope="session")
def coupling_binary(binary):
    return coupling_summary(binary)


TRANSIENT_STEPS = 10_000
TRANSIENT_WALKS = 2000
TRANSIENT_GRID = np.linspace(1000, TRANSIENT_STEPS, 10).astype(int)


@pytest.fixture(scope="session")
def transient_binary(binary):
    from gwclt.regeneration import transient_blocks
    return transient_blocks(binary, 1.0, TRANSIENT_STEPS, TRANSIENT_WALKS,
                            make_stream(77, "transient"), TRANSIENT_GRID)


@pytest.fixture(scope="session")
def transient_mixed(mixed):
    from gwclt.regeneration import transient_blocks
    return transient_blocks(mixed, 1.0, TRANSIENT_STEPS, TRANSIENT_WALKS,
                            make_stream(78, "transient"), TRANSIENT_GRID)


@pytest.fixture(scope="session")
def igwr_meta(mixed):
    """20 meta-runs of the stationarity test at 10^5 reps, for k = 1 and k = 5."""
    from gwclt.stats import igwr_invariance_test
    return {k: [igwr_invariance_test(mixed, None, k, 100_000, make_stream(31, k, r), seed=r)
                for r in range(20)] for k in (1, 5)}


@pytest.fixture(scope="session")
def balance_mixed(mixed):
    from gwclt.stats import detailed_balance_test
    return detailed_balance_test(mixed, None, 10**6, make_stream(32), seed=32)


OCCUPATION_TIMES = (10**3, 10**4, 10**5)


@pytest.fixture(scope="session")
def occupation_binary(binary):
    from gwclt.stats import occupation_near_ray
    return [occupation_near_ray(binary, None, 1 / 3, t, 1000, make_stream(33, t))
            for t in OCCUPATION_TIMES]


ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[k])
