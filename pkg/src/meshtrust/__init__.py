"""Trust-augmented on-demand mesh routing, simulated deterministically."""

from .experiments import (
    ConfigError,
    MetricsReport,
    ScenarioConfig,
    load_config,
    run_scenario,
    sweep_blackhole,
    sweep_trust_interval,
)
from .simnet import BROADCAST, Flow, Simulator, StatsCollector, build_grid_topology
from .trust_engine import (
    BeliefMass,
    ForwardingStats,
    TotalConflictError,
    TrustClass,
    VACUOUS,
    bpa_from_trust,
    binary_entropy,
    classify,
    dempster_combine,
    entropy_trust,
    ewma_update,
    forwarding_probability,
    indirect_trust,
    overall_trust,
    smoothing_alpha,
)
from .watchdog import Watchdog

__all__ = [
    "BROADCAST",
    "BeliefMass",
    "ConfigError",
    "Flow",
    "ForwardingStats",
    "MetricsReport",
    "ScenarioConfig",
    "Simulator",
    "StatsCollector",
    "TotalConflictError",
    "TrustClass",
    "VACUOUS",
    "Watchdog",
    "binary_entropy",
    "bpa_from_trust",
    "build_grid_topology",
    "classify",
    "dempster_combine",
    "entropy_trust",
    "ewma_update",
    "forwarding_probability",
    "indirect_trust",
    "load_config",
    "overall_trust",
    "run_scenario",
    "smoothing_alpha",
    "sweep_blackhole",
    "sweep_trust_interval",
]
