"""Offspring laws, tilted degree samplers and the W-limit sample pool."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, NamedTuple

import numpy as np

from .errors import DistributionError

MODES = ("plain", "size_biased", "igwr_root")


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True, eq=False)
class OffspringDistribution:
    """A finite-support offspring law with p_0 = 0 and mean m > 1.

    Besides the law itself it carries cumulative tables for the three
    degree samplers used by the tree builders: plain ``p_k``, size-biased
    ``k p_k / m`` and the IGWR root law ``(m + k) p_k / (2m)``.
    """

    values: np.ndarray
    probs: np.ndarray
    mean: float
    variance: float
    cdf_plain: np.ndarray = field(repr=False)
    cdf_size_biased: np.ndarray = field(repr=False)
    cdf_igwr_root: np.ndarray = field(repr=False)

    @property
    def max_degree(self) -> int:
        return int(self.values[-1])

    def as_dict(self) -> dict[int, float]:
        return {int(k): float(p) for k, p in zip(self.values, self.probs)}

    def law(self, mode: str = "plain") -> np.ndarray:
        """Probabilities over ``values`` for a sampling mode."""
        k = self.values.astype(float)
        if mode == "plain":
            return self.probs.copy()
        if mode == "size_biased":
            return k * self.probs / self.mean
        if mode == "igwr_root":
            return (self.mean + k) * self.probs / (2 * self.mean)
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")

    def cdf(self, mode: str = "plain") -> np.ndarray:
        return {"plain": self.cdf_plain, "size_biased": self.cdf_size_biased,
                "igwr_root": self.cdf_igwr_root}[mode]

    def __str__(self) -> str:
        return ",".join(f"{int(k)}:{p:g}" for k, p in zip(self.values, self.probs))


def _cdf(p: np.ndarray) -> np.ndarray:
    c = np.cumsum(p)
    c /= c[-1]
    c[-1] = 1.0
    return c


def make_distribution(probs: Mapping[int, float]) -> OffspringDistribution:
    """Validate and normalize an offspring law given as ``{k: p_k}``."""
    items = sorted((int(k), float(p)) for k, p in probs.items())
    if not items:
        raise DistributionError("empty offspring law", "EMPTY_LAW")
    if any(k < 0 for k, _ in items) or any(p < 0 or not np.isfinite(p) for _, p in items):
        raise DistributionError("degrees and probabilities must be non-negative", "NEGATIVE_ENTRY")
    if any(k == 0 and p > 0 for k, p in items):
        raise DistributionError("p_0 must be zero", "P0_POSITIVE")
    total = sum(p for _, p in items)
    if abs(total - 1.0) > 1e-9:
        raise DistributionError(f"probabilities sum to {total!r}", "NOT_NORMALIZED")
    items = [(k, p) for k, p in items if p > 0]
    values = np.array([k for k, _ in items], dtype=np.int64)
    p = np.array([q for _, q in items]) / total
    mean = float(np.dot(values, p))
    if mean <= 1.0:
        raise DistributionError(f"mean {mean} must exceed 1", "MEAN_NOT_SUPERCRITICAL")
    variance = float(np.dot(values.astype(float) ** 2, p) - mean**2)
    variance = max(variance, 0.0)
    k = values.astype(float)
    return OffspringDistribution(
        values=values,
        probs=p,
        mean=mean,
        variance=variance,
        cdf_plain=_cdf(p),
        cdf_size_biased=_cdf(k * p / mean),
        cdf_igwr_root=_cdf((mean + k) * p / (2 * mean)),
    )


def parse_law(text: str) -> OffspringDistribution:
    """Parse ``"k1:p1,k2:p2,..."``, optionally wrapped in braces."""
    probs: dict[int, float] = {}
    try:
        for part in text.replace(" ", "").strip("{}").split(","):
            if not part:
                continue
            k, p = part.split(":")
            probs[int(k)] = probs.get(int(k), 0.0) + float(p)
    except ValueError as exc:
        raise DistributionError(f"cannot parse offspring law {text!r}", "PARSE") from exc
    return make_distribution(probs)


def sample_degree(dist: OffspringDistribution, mode: str, rng: np.random.Generator,
                  size: int | None = None):
    """Draw degrees from the plain, size-biased or IGWR-root law."""
    cdf = dist.cdf(mode)
    idx = np.searchsorted(cdf, rng.random(size), side="right")
    idx = np.minimum(idx, len(cdf) - 1)
    out = dist.values[idx]
    return int(out) if size is None else out


@dataclass(frozen=True, eq=False)
class WPool:
    """Approximate sample of the martingale limit W.

    ``samples`` is the final round of the fixed-point iteration
    W = (W_1 + ... + W_d) / m, renormalized to empirical mean 1 each round. The last ``lineage_depth`` rounds are kept
    with their genealogy: entry ``e`` of round ``r`` has degree
    ``degrees[r, e]`` and children ``child_refs[child_ptr[r, e]:child_ptr[r, e+1]]``,
    which index round ``r - 1``. Round 0 entries have no recorded children.
    Trees use this to hand out (degree, W) pairs with their exact joint law
    down ``lineage_depth`` generations.
    """

    samples: np.ndarray
    rounds: int
    pool_size: int
    values: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)
    child_ptr: np.ndarray = field(repr=False)
    child_refs: np.ndarray = field(repr=False)
    weight_cdf: np.ndarray = field(repr=False)

    @property
    def lineage_depth(self) -> int:
        return self.values.shape[0] - 1


W_FLOOR = 1e-9


def build_w_pool(dist: OffspringDistribution, pool_size: int = 100_000, rounds: int = 30,
                 rng: np.random.Generator | None = None, lineage: int = 15) -> WPool:
    """Iterate W = sum_{j<=d} W_j / m on a pool started at the constant 1."""
    if pool_size < 1000:
        raise ValueError("pool_size must be at least 1000")
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    rng = np.random.default_rng() if rng is None else rng
    keep = min(lineage, rounds)
    m = dist.mean
    cur = np.ones(pool_size)
    cur_deg = sample_degree(dist, "plain", rng, pool_size).astype(np.int32)
    vals = [cur]
    degs = [cur_deg]
    ptrs = [np.zeros(pool_size + 1, dtype=np.int64)]
    refs = [np.zeros(0, dtype=np.int32)]
    for r in range(rounds):
        d = sample_degree(dist, "plain", rng, pool_size)
        ptr = np.zeros(pool_size + 1, dtype=np.int64)
        np.cumsum(d, out=ptr[1:])
        ref = rng.integers(0, pool_size, ptr[-1], dtype=np.int32)
        nxt = np.add.reduceat(cur[ref], ptr[:-1]) / m
        np.maximum(nxt, W_FLOOR, out=nxt)
        # E W = 1 is known exactly; pinning the empirical mean stops the
        # resampling noise from accumulating over rounds
        nxt /= nxt.mean()
        cur = nxt
        vals.append(cur)
        degs.append(d.astype(np.int32))
        ptrs.append(ptr)
        refs.append(ref)
    # keep the last `keep` rounds plus the round below them as the bottom
    vals = vals[-(keep + 1):]
    degs = degs[-(keep + 1):]
    ptrs = ptrs[-(keep + 1):]
    refs = [np.zeros(0, dtype=np.int32)] + refs[-keep:] if keep else [np.zeros(0, dtype=np.int32)]
    offsets = np.cumsum([0] + [len(x) for x in refs])
    child_ptr = np.stack([p + off for p, off in zip(ptrs, offsets[:-1])])
    child_ptr[0] = 0
    top = vals[-1]
    return WPool(
        samples=top.copy(),
        rounds=rounds,
        pool_size=pool_size,
        values=np.stack(vals),
        degrees=np.stack(degs),
        child_ptr=child_ptr,
        child_refs=np.concatenate(refs).astype(np.int32),
        weight_cdf=_cdf(top),
    )


def estimate_eta(dist: OffspringDistribution, pool: WPool) -> Estimate:
    """eta = E W^2, the empirical second moment of the pool."""
    s = pool.samples
    sq = s * s
    return Estimate(float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(len(sq))))


def eta_closed_form(dist: OffspringDistribution) -> float:
    """E W^2 = 1 + Var(d) / (m^2 - m) for the Galton-Watson limit."""
    m = dist.mean
    return 1.0 + dist.variance / (m * m - m)
