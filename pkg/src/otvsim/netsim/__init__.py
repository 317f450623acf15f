"""Deterministic discrete-event simulator built on the protocol library."""

from .adversary import InfeasiblePartition, feasible_partition_sizes
from .config import ConfigError, SimConfig, from_dict, load_config
from .engine import HorizonTooShort, Simulation, simulate
from .metrics import RunReport, collect_metrics


def run(config: SimConfig) -> RunReport:
    return collect_metrics(simulate(config))


__all__ = [
    "ConfigError", "HorizonTooShort", "InfeasiblePartition", "RunReport", "SimConfig", "Simulation",
    "collect_metrics", "feasible_partition_sizes", "from_dict", "load_config", "run", "simulate",
]
