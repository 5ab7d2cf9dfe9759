"""Command-line front end: ``gwclt <subcommand> [options]``.

Every subcommand writes a CSV (to ``--output`` or stdout) whose rows end
with the seed and a hash of the effective configuration, and prints a
one-line summary to stderr. Exit status: 0 success, 2 a statistical check
failed, 1 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import ExperimentConfig, load_config
from .coupling import GAP_HEADER, build_coupled_pair, coupling_gap
from .electric import cv_envelope, escape_stats, excursion_visit_counts
from .errors import BudgetExceeded, ConfigError, GWError
from .harmonic import estimate_sigma2
from .offspring import build_w_pool
from .regeneration import block_estimates, transient_blocks
from .rng import make_stream
from .stats import (REPORT_HEADER, TestReport, detailed_balance_test, half_normal_cdf,
                    igwr_invariance_test, ks_test, normal_cdf, occupation_near_ray)
from .tree import Tree, set_default_node_budget
from .walk import quenched_depths, run_walk

SUBCOMMANDS = ("simulate", "estimate-sigma", "clt-test", "check-reversibility",
               "coupling-demo", "conductance", "transient", "diagnostics")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fan_out(fn, tasks, parallelism: int):
    """Map preserving task order, optionally across processes."""
    if parallelism <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=parallelism) as ex:
        return list(ex.map(fn, *zip(*tasks)))


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class Result:
    def __init__(self, header: str, summary: str = ""):
        self.header = header
        self.rows: list[str] = []
        self.passed = True
        self.summary = summary

    def add(self, *values):
        self.rows.append(",".join(_fmt(v) for v in values))

    def add_report(self, r: TestReport):
        self.rows.append(r.csv_row())
        self.passed &= r.passed


# -- simulate ----------------------------------------------------------------
def _simulate_one(cfg: ExperimentConfig, i: int, want_trace: bool):
    set_default_node_budget(cfg.node_budget)
    tree = Tree(cfg.dist, cfg.kind, rng=make_stream(cfg.seed, i, 0))
    rec = run_walk(tree, cfg.lam, cfg.steps, make_stream(cfg.seed, i, 1), seed=cfg.seed)
    row = (i, cfg.steps, int(rec.levels[-1]), int(rec.depths[-1]), int(rec.depths.max()),
           int(rec.fresh_flags.sum()))
    return row, (rec.trace_csv() if want_trace else None)


def cmd_simulate(cfg, args) -> Result:
    res = Result("replica,steps,final_h,final_depth,max_depth,fresh_count,seed")
    tasks = [(cfg, i, bool(args.trace) and i == 0) for i in range(cfg.walks)]
    out = _fan_out(_simulate_one, tasks, args.parallelism)
    for row, trace in out:
        res.add(*row, cfg.seed)
        if trace is not None:
            with open(args.trace, "w", newline="\n") as fh:
                fh.write(trace)
    speeds = np.array([r[3] for r, _ in out]) / cfg.steps
    res.summary = f"simulate: {cfg.walks} walks, mean |X_n|/n = {speeds.mean():.4f}"
    return res


# -- estimate-sigma ----------------------------------------------------------
def _require_critical(cfg, what):
    if cfg.lambda_mode != "critical":
        raise ConfigError(f"{what} runs at the critical bias; set lambda = critical")


def _sigma2(cfg, walks=None, steps=None):
    dist = cfg.dist
    pool = build_w_pool(dist, cfg.pool_size, cfg.rounds, make_stream(cfg.seed, 0))
    return estimate_sigma2(dist, pool, walks or cfg.walks, steps or cfg.steps,
                           make_stream(cfg.seed, 1))


def cmd_estimate_sigma(cfg, args) -> Result:
    _require_critical(cfg, "estimate-sigma")
    est = _sigma2(cfg)
    res = Result("dist,lambda,walks,steps,sigma2,stderr,eta,eta_stderr,seed")
    res.add(str(cfg.dist).replace(",", ";"), cfg.lam, cfg.walks, cfg.steps, est.sigma2,
            est.stderr, est.eta, est.eta_stderr, cfg.seed)
    res.summary = f"estimate-sigma: sigma2 = {est.sigma2:.4f} +- {est.stderr:.4f}"
    return res


# -- clt-test ----------------------------------------------------------------
def _tree_depths(cfg: ExperimentConfig, tree_index: int) -> np.ndarray:
    set_default_node_budget(cfg.node_budget)
    tree = Tree(cfg.dist, "GW", rng=make_stream(cfg.seed, 2, tree_index))
    return quenched_depths(tree, cfg.lam, cfg.steps, cfg.walks,
                           make_stream(cfg.seed, 3, tree_index))


def cmd_clt_test(cfg, args) -> Result:
    _require_critical(cfg, "clt-test")
    dist = cfg.dist
    if dist.variance == 0:
        s2, ctx = 1.0, "sigma2=1 (deterministic law)"
    else:
        est = _sigma2(cfg, walks=200, steps=2000)
        s2, ctx = est.sigma2, f"sigma2={est.sigma2:.5f}"
    res = Result(REPORT_HEADER)
    depths = _fan_out(_tree_depths, [(cfg, t) for t in range(cfg.trees)], args.parallelism)
    for t, d in enumerate(depths):
        x = d / np.sqrt(cfg.steps)
        r = ks_test(x, lambda y: half_normal_cdf(y, s2), "clt_ks",
                    cfg.ks_max or None, cfg.seed, f"tree={t} n={cfg.steps} {ctx}")
        res.add_report(r)
    res.summary = f"clt-test: {cfg.trees} tree(s), {'pass' if res.passed else 'FAIL'}"
    return res


# -- check-reversibility -----------------------------------------------------
def cmd_check_reversibility(cfg, args) -> Result:
    res = Result(REPORT_HEADER)
    res.add_report(igwr_invariance_test(cfg.dist, None, cfg.k_steps, cfg.reps,
                                        make_stream(cfg.seed, 4), seed=cfg.seed))
    res.add_report(detailed_balance_test(cfg.dist, None, cfg.reps, make_stream(cfg.seed, 5),
                                         seed=cfg.seed))
    res.summary = f"check-reversibility: {'pass' if res.passed else 'FAIL'}"
    return res


# -- coupling-demo -----------------------------------------------------------
def cmd_coupling_demo(cfg, args) -> Result:
    _require_critical(cfg, "coupling-demo")
    run = build_coupled_pair(cfg.dist, None, cfg.steps, make_stream(cfg.seed, 6))
    rows = coupling_gap(run, cfg.alpha)
    res = Result(GAP_HEADER + ",seed")
    for r in rows:
        res.rows.append(r.csv_row() + f",{cfg.seed}")
        res.passed &= r.ok
    res.summary = (f"coupling-demo: {sum(r.ok for r in rows)}/{len(rows)} checkpoints hold, "
                   f"{run.used} excursions pasted")
    return res


# -- conductance -------------------------------------------------------------
def cmd_conductance(cfg, args) -> Result:
    tree = Tree(cfg.dist, "GW", rng=make_stream(cfg.seed, 7))
    res = Result("level,conductance,escape_analytic,escape_mc,stderr,seed")
    for lvl in range(1, cfg.level + 1):
        rep = escape_stats(tree, lvl, cfg.lam, cfg.reps, make_stream(cfg.seed, 8, lvl))
        res.add(lvl, rep.conductance, rep.escape_prob, rep.escape_mc, rep.escape_stderr,
                cfg.seed)
        if abs(rep.escape_mc - rep.escape_prob) > 3 * max(rep.escape_stderr, 1e-12) \
                and rep.escape_stderr > 0:
            res.passed = False
    res.summary = f"conductance: levels 1..{cfg.level}"
    return res


# -- transient ---------------------------------------------------------------
def _transient_chunk(cfg, chunk, size):
    set_default_node_budget(cfg.node_budget)
    return transient_blocks(cfg.dist, cfg.lam, cfg.steps, size, make_stream(cfg.seed, 9, chunk))


def cmd_transient(cfg, args) -> Result:
    if cfg.lam >= cfg.dist.mean:
        raise ConfigError("transient needs lambda < m")
    n_chunks = max(1, min(cfg.walks, args.parallelism * 4))
    sizes = np.diff(np.linspace(0, cfg.walks, n_chunks + 1).astype(int))
    parts = _fan_out(_transient_chunk, [(cfg, c, int(s)) for c, s in enumerate(sizes) if s],
                     args.parallelism)
    dt = np.concatenate([p.dt for p in parts])
    dx = np.concatenate([p.dx for p in parts])
    final = np.concatenate([p.final for p in parts])
    est = block_estimates((dt, dx), make_stream(cfg.seed, 10))
    z = (final - est.v * cfg.steps) / np.sqrt(est.sigma2 * cfg.steps)
    r = ks_test(z, normal_cdf, "transient_ks", cfg.ks_max or None)
    res = Result("lambda,n,walks,v,v_stderr,sigma2,sigma2_stderr,ks,seed")
    res.add(cfg.lam, cfg.steps, cfg.walks, est.v, est.v_stderr, est.sigma2, est.sigma2_stderr,
            r.statistic, cfg.seed)
    res.passed = r.passed
    res.summary = (f"transient: v = {est.v:.4f}, sigma2 = {est.sigma2:.4f}, "
                   f"KS = {r.statistic:.4f} over {est.blocks} blocks")
    return res


# -- diagnostics -------------------------------------------------------------
def cmd_diagnostics(cfg, args) -> Result:
    _require_critical(cfg, "diagnostics")
    dist = cfg.dist
    res = Result(REPORT_HEADER)
    t = cfg.steps
    rows = cv_envelope(dist, cfg.lam, [2 * np.sqrt(t), 3 * np.sqrt(t), 4 * np.sqrt(t)], t,
                       cfg.walks, make_stream(cfg.seed, 11))
    for e in rows:
        res.add_report(TestReport("cv_envelope", e.empirical, float("nan"), cfg.walks, e.ok,
                                  cfg.seed, f"u={e.u:g} t={t} bound={e.bound:.6g}"))
    occ = occupation_near_ray(dist, None, cfg.alpha, t, cfg.walks, make_stream(cfg.seed, 12))
    res.add_report(TestReport("occupation_ratio", occ.ratio, float("nan"), cfg.walks,
                              occ.ratio < 1, cfg.seed,
                              f"t={t} alpha={cfg.alpha:g} mean={occ.mean:.6g}"))
    vc = excursion_visit_counts("GW", dist, cfg.level, cfg.reps, cfg.lam,
                                make_stream(cfg.seed, 13))
    res.add_report(TestReport("visit_count_slope", vc.slope, float("nan"), cfg.reps,
                              vc.no_trend(), cfg.seed,
                              f"n=1..{cfg.level} ci=[{vc.slope_ci[0]:.4g} {vc.slope_ci[1]:.4g}]"))
    res.summary = f"diagnostics: {'pass' if res.passed else 'FAIL'}"
    return res


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate-sigma": cmd_estimate_sigma,
    "clt-test": cmd_clt_test,
    "check-reversibility": cmd_check_reversibility,
    "coupling-demo": cmd_coupling_demo,
    "conductance": cmd_conductance,
    "transient": cmd_transient,
    "diagnostics": cmd_diagnostics,
}

_KEYS = ("offspring", "lambda", "kind", "steps", "walks", "trees", "reps", "level", "k_steps",
         "alpha", "pool_size", "rounds", "node_budget", "ks_max")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="gwclt", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="file of 'key = value' lines")
    p.add_argument("--output", help="CSV destination (default: stdout)")
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--trace", help="write the first walk's t,h,depth,fresh trace here")
    for k in _KEYS:
        p.add_argument(f"--{k.replace('_', '-')}", dest=k)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in _KEYS}
    overrides["seed"] = args.seed
    overrides["output_path"] = args.output
    try:
        cfg = load_config(args.config, overrides)
        set_default_node_budget(cfg.node_budget)
        res = COMMANDS[args.subcommand](cfg, args)
    except BudgetExceeded as exc:
        print(f"gwclt: {exc.code}: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, GWError) as exc:
        print(f"gwclt: {exc.code}: {exc}", file=sys.stderr)
        return 1
    digest = cfg.digest()
    text = res.header + ",config_hash\n" + "".join(f"{r},{digest}\n" for r in res.rows)
    if cfg.output_path:
        with open(cfg.output_path, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    print(res.summary, file=sys.stderr)
    return 0 if res.passed else 2


if __name__ == "__main__":
    sys.exit(main())
