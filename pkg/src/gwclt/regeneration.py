"""Regeneration structure of transient walks (lambda < m) on rooted trees.

A regeneration time is a strict running maximum of the depth that is never
undercut afterwards. The path cut at consecutive regeneration times gives
i.i.d. blocks (dt, dx); speed and CLT variance follow from renewal theory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import minimum_filter1d

from .errors import InsufficientBlocks
from .offspring import OffspringDistribution
from .rng import RandomStream
from .tree import Tree
from .walk import run_walk


@dataclass(frozen=True)
class RegenerationBlock:
    dt: int
    dx: int


def detect_regenerations(depths, confirm_horizon: int | None = None) -> np.ndarray:
    """Times t >= 1 with depths[t] > depths[s] for s < t and depths[u] >= depths[t] for later u.

    With ``confirm_horizon = H`` the future condition is checked on (t, t+H]
    only and times with t + H beyond the record are dropped as unconfirmed;
    the default checks the whole remaining record.
    """
    x = np.asarray(depths, dtype=np.int64)
    T = len(x) - 1
    if T < 1:
        return np.zeros(0, np.int64)
    prev_max = np.maximum.accumulate(x)
    strict = np.zeros(len(x), bool)
    strict[1:] = x[1:] > prev_max[:-1]
    if confirm_horizon is None:
        suffix_min = np.minimum.accumulate(x[::-1])[::-1]
        future_ok = np.ones(len(x), bool)
        future_ok[:-1] = suffix_min[1:] >= x[:-1]
    else:
        h = int(confirm_horizon)
        if h < 1:
            raise ValueError("confirm_horizon must be at least 1")
        # min over (t, t+h]: a window of size h starting at t+1
        padded = np.r_[x, np.full(h, np.iinfo(np.int64).max)]
        win = minimum_filter1d(padded, size=h, origin=-(h // 2), mode="nearest")
        future_ok = np.zeros(len(x), bool)
        future_ok[:-1] = win[1:len(x)] >= x[:-1]
        future_ok[max(T - h + 1, 0):] = False
    return np.flatnonzero(strict & future_ok).astype(np.int64)


def blocks_from_times(depths, times) -> list[RegenerationBlock]:
    """Blocks between consecutive regeneration times (the path before the first is dropped)."""
    x = np.asarray(depths, dtype=np.int64)
    t = np.asarray(times, dtype=np.int64)
    return [RegenerationBlock(int(b - a), int(x[b] - x[a])) for a, b in zip(t[:-1], t[1:])]


def block_arrays(depths, times) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(depths, dtype=np.int64)
    t = np.asarray(times, dtype=np.int64)
    return np.diff(t), np.diff(x[t])


@dataclass
class BlockEstimate:
    v: float
    sigma2: float
    v_stderr: float
    sigma2_stderr: float
    blocks: int


def _vs(dt, dx):
    v = dx.sum() / dt.sum()
    return v, np.sum((dx - v * dt) ** 2) / dt.sum()


def _batch_sums(dt, dx, batches):
    """Per-batch sums of dt, dx, dx^2, dx*dt, dt^2 over consecutive runs of blocks."""
    edges = np.linspace(0, len(dt), batches + 1).astype(np.int64)[:-1]
    cols = (dt, dx, dx * dx, dx * dt, dt * dt)
    return np.stack([np.add.reduceat(c, edges) for c in cols], axis=1)


def _vs_from_sums(s):
    sdt, sdx, sxx, sxt, stt = s
    v = sdx / sdt
    return v, (sxx - 2 * v * sxt + v * v * stt) / sdt


def block_estimates(blocks, rng: RandomStream | None = None, min_blocks: int = 30,
                    boot: int = 500, max_units: int = 5000) -> BlockEstimate:
    """Renewal estimators v = sum dx / sum dt and sigma^2 = sum (dx - v dt)^2 / sum dt.

    Standard errors come from a bootstrap over blocks; beyond `max_units`
    blocks, consecutive blocks are grouped into that many batches and the
    batches are resampled instead.
    """
    if isinstance(blocks, tuple) and len(blocks) == 2 and isinstance(blocks[0], np.ndarray):
        dt, dx = (np.asarray(b, dtype=float) for b in blocks)
    else:
        dt = np.array([b.dt for b in blocks], dtype=float)
        dx = np.array([b.dx for b in blocks], dtype=float)
    n = len(dt)
    if n < max(min_blocks, 1):
        raise InsufficientBlocks(f"{n} blocks, need at least {min_blocks}")
    v, s2 = _vs(dt, dx)
    vse = s2se = float("nan")
    if n > 1:
        rng = np.random.default_rng(0) if rng is None else rng
        units = _batch_sums(dt, dx, min(n, max_units))
        k = len(units)
        idx = rng.integers(0, k, size=(boot, k))
        sums = units[idx].sum(axis=1)
        bv, bs = _vs_from_sums(sums.T)
        vse, s2se = float(bv.std(ddof=1)), float(bs.std(ddof=1))
    return BlockEstimate(float(v), float(s2), vse, s2se, n)


def clt_series(depths, v: float, sigma2: float, n_grid) -> np.ndarray:
    """(|X_n| - v n) / sqrt(sigma2 n) at each n of the grid; depths may be [replicas, time]."""
    if sigma2 <= 0:
        raise ValueError("sigma2 must be positive")
    x = np.asarray(depths, dtype=float)
    n = np.asarray(n_grid, dtype=np.int64)
    return (x[..., n] - v * n) / np.sqrt(sigma2 * n)


@dataclass
class TransientSample:
    """Pooled blocks plus per-walk depths on a time grid (the last grid time is `steps`)."""

    dt: np.ndarray
    dx: np.ndarray
    grid: np.ndarray
    grid_depths: np.ndarray

    @property
    def final(self) -> np.ndarray:
        return self.grid_depths[:, -1]


def transient_blocks(dist: OffspringDistribution, lam: float, steps: int, walks: int,
                     rng: RandomStream, grid=None) -> TransientSample:
    """Regeneration blocks pooled over `walks` walks of `steps` steps on fresh GW trees."""
    grid = np.array([steps] if grid is None else sorted(set(grid) | {steps}), np.int64)
    dts, dxs = [], []
    depths = np.zeros((walks, len(grid)), np.int64)
    for k, s in enumerate(rng.spawn(walks)):
        tr, wr = s.spawn(2)
        tree = Tree(dist, "GW", rng=tr)
        rec = run_walk(tree, lam, steps, wr)
        t = detect_regenerations(rec.depths)
        dt, dx = block_arrays(rec.depths, t)
        dts.append(dt)
        dxs.append(dx)
        depths[k] = rec.depths[grid]
    return TransientSample(np.concatenate(dts), np.concatenate(dxs), grid, depths)


def slope_speed(depths: np.ndarray, times: np.ndarray) -> float:
    """Least-squares slope of depth against time; `depths` may be [walks, times]."""
    d = np.asarray(depths, dtype=float)
    if d.ndim == 2:
        d = d.mean(axis=0)
    return float(np.polyfit(np.asarray(times, dtype=float), d, 1)[0])
