"""Experiment configuration: flat ``key = value`` files overridden by flags."""

from __future__ import annotations

import hashlib
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError, DistributionError
from .offspring import OffspringDistribution, parse_law


@dataclass
class ExperimentConfig:
    offspring: str = ""
    lambda_mode: str = "critical"   # "critical" or a positive number
    kind: str = "GW"
    steps: int = 10_000
    walks: int = 200
    trees: int = 1
    reps: int = 10_000
    level: int = 8
    k_steps: int = 1
    seed: int = 0
    alpha: float = 1 / 3
    pool_size: int = 100_000
    rounds: int = 30
    node_budget: int = 50_000_000
    ks_max: float = 0.0             # 0: judge KS rows by p-value instead
    output_path: str = ""

    @property
    def dist(self) -> OffspringDistribution:
        if not self.offspring:
            raise ConfigError("missing required key 'offspring'")
        try:
            return parse_law(self.offspring)
        except DistributionError as exc:
            raise ConfigError(f"invalid 'offspring': {exc}") from exc

    @property
    def lam(self) -> float:
        if self.lambda_mode == "critical":
            return self.dist.mean
        return float(self.lambda_mode)

    def validate(self) -> "ExperimentConfig":
        self.dist
        if self.lambda_mode != "critical":
            try:
                lam = float(self.lambda_mode)
            except ValueError:
                raise ConfigError(f"'lambda' must be 'critical' or a number, "
                                  f"got {self.lambda_mode!r}") from None
            if not lam > 0:
                raise ConfigError("'lambda' must be positive")
        for name in ("steps", "walks", "trees", "reps", "level", "k_steps", "pool_size",
                     "node_budget"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"'{name}' must be positive")
        if self.rounds < 0 or self.seed < 0:
            raise ConfigError("'rounds' and 'seed' must be non-negative")
        if not 0 < self.alpha < 0.5:
            raise ConfigError("'alpha' must lie in (0, 1/2)")
        return self

    def digest(self) -> str:
        """Short hash of every field except the output location."""
        d = asdict(self)
        d.pop("output_path")
        text = "\n".join(f"{k}={d[k]!r}" for k in sorted(d))
        return hashlib.sha256(text.encode()).hexdigest()[:12]


_ALIASES = {"lambda": "lambda_mode", "output": "output_path", "seed_value": "seed"}


def _coerce(name: str, raw):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    t = types[name]
    try:
        if t == "int":
            return int(float(raw)) if isinstance(raw, str) and "e" in raw.lower() else int(raw)
        if t == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {name!r}: cannot read {raw!r} as {t}") from None
    return str(raw).strip().strip('"').strip("'")


def parse_config_text(text: str) -> dict:
    out = {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {no}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        out[key] = _coerce(key, value)
    return out


def load_config(path: str | None = None, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    if path:
        try:
            with open(path) as fh:
                values.update(parse_config_text(fh.read()))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            k = _ALIASES.get(k, k)
            values[k] = _coerce(k, v)
    return ExperimentConfig(**values).validate()
