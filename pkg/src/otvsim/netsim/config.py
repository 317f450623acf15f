"""Simulation configuration: dataclasses, validation and TOML/JSON loading.

Defaults follow the reference setup: 100 equally weighted honest nodes,
100 blocks per second, k=8, theta=2/3, a Watts-Strogatz overlay with 8
neighbours and rewiring probability 1, 0.1 s per hop, 60 s horizon.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(ValueError):
    pass


@dataclass
class TopologyConfig:
    kind: str = "watts_strogatz"  # or "complete"
    neighbours: int = 8
    rewiring: float = 1.0


@dataclass
class DelayConfig:
    kind: str = "constant"  # "constant" or "probsync"
    h: float = 0.1  # per-hop delay for "constant"
    delta: float = 0.1  # per-hop bound for "probsync"
    eps: float = 0.0  # probability of a heavy-tail delay for "probsync"


@dataclass
class AdversaryConfig:
    kind: str = "none"  # none | bait_and_switch | metastability_ii | safety_breaker
    q: float = 0.0
    start: float = 5.0
    # bait-and-switch: switch once the leading spend's honest AW reaches alpha * q
    alpha: float = 0.3
    # metastability II
    identities: int = 3
    mute_after: Optional[float] = None
    trigger: str = "defection"  # or "timer"
    timer: float = 0.05
    # safety breaker
    group_x: Optional[int] = None  # size of X; None = largest feasible
    max_hold: Optional[float] = None  # cap on how long cross-group packages are held
    confirm_wait: float = 30.0  # give up waiting for X to confirm after this long


@dataclass
class SRRSConfig:
    enabled: bool = False
    epoch: float = 5.0  # D
    d: float = 0.5  # beacon / block delivery bound
    eps: float = 0.0  # probability a node misses the beacon
    maturity: Optional[float] = None  # conflicts younger than this are ignored; None = epoch


@dataclass
class SimConfig:
    nodes: int = 100  # honest nodes
    zipf_s: float = 0.0
    lam: float = 100.0  # blocks per second, all nodes together
    k: int = 8
    theta: float = 2 / 3
    horizon: float = 60.0
    seed: int = 0
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    delay: DelayConfig = field(default_factory=DelayConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    srrs: SRRSConfig = field(default_factory=SRRSConfig)
    # honest-only double spend: two honest nodes spend one output at this time
    double_spend_at: Optional[float] = None
    # metrics
    observers: int = 10  # honest nodes used for block confirmation times
    warmup: float = 5.0
    cooldown: float = 10.0
    sample_dt: float = 0.5
    ww_growth: bool = False
    replications: int = 1
    out: Optional[str] = None

    def validate(self) -> "SimConfig":
        if self.nodes < 2:
            raise ConfigError("need at least 2 honest nodes")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if not 0.5 < self.theta <= 1:
            raise ConfigError("theta must be in (0.5, 1]")
        if self.lam <= 0 or self.horizon <= 0:
            raise ConfigError("lam and horizon must be positive")
        if self.zipf_s < 0:
            raise ConfigError("zipf_s must be >= 0")
        if not 0 <= self.adversary.q < 1:
            raise ConfigError("adversary weight q must be in [0, 1)")
        if self.adversary.kind not in ("none", "bait_and_switch", "metastability_ii", "safety_breaker"):
            raise ConfigError(f"unknown adversary {self.adversary.kind!r}")
        if self.adversary.kind != "none" and self.adversary.q <= 0:
            raise ConfigError("an adversary needs q > 0")
        if self.topology.kind not in ("watts_strogatz", "complete"):
            raise ConfigError(f"unknown topology {self.topology.kind!r}")
        if self.topology.kind == "watts_strogatz" and not 2 <= self.topology.neighbours < self.nodes:
            raise ConfigError("neighbours must be in [2, nodes)")
        if self.delay.kind not in ("constant", "probsync"):
            raise ConfigError(f"unknown delay model {self.delay.kind!r}")
        if self.delay.h <= 0 or self.delay.delta <= 0:
            raise ConfigError("delays must be positive")
        if not 0 <= self.delay.eps < 1:
            raise ConfigError("delay eps must be in [0, 1)")
        if self.srrs.enabled and (self.srrs.epoch <= 0 or not 0 < self.srrs.d < self.srrs.epoch):
            raise ConfigError("SRRS needs 0 < d < epoch")
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def replace(self, **changes) -> "SimConfig":
        return from_dict({**self.to_dict(), **changes})


_SECTIONS = {
    "topology": TopologyConfig,
    "delay": DelayConfig,
    "adversary": AdversaryConfig,
    "srrs": SRRSConfig,
}


def from_dict(raw: dict[str, Any]) -> SimConfig:
    raw = dict(raw)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        sub = raw.pop(name, None) or {}
        if isinstance(sub, cls):
            kwargs[name] = sub
            continue
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(sub) - known
        if extra:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(extra)}")
        kwargs[name] = cls(**sub)
    known = {f.name for f in dataclasses.fields(SimConfig)}
    extra = set(raw) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    try:
        cfg = SimConfig(**raw, **kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from None
    return cfg.validate()


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from None
    try:
        if path.suffix == ".json":
            raw = json.loads(text)
        else:
            raw = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse {path}: {e}") from None
    return from_dict(raw)
