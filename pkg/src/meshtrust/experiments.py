"""Scenario assembly, metrics reporting, parameter sweeps and CSV output.

A scenario is a 100-node square grid by default: sources drawn from the left
column, destinations from the right column, constant-bit-rate flows, and a
configurable number of blackhole nodes drawn from the interior columns.
Separate named RNG streams cover endpoint choice, flow start times, adversary
placement and link loss, so runs are reproducible per (scenario, seed) and
changing one sweep axis does not disturb the draws of another.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, fields, replace

from .routing import BlackholeNode, HonestNode
from .simnet import (
    Flow,
    FlowStats,
    SimulationError,
    Simulator,
    StatsCollector,
    build_grid_topology,
    schedule_flows,
)
from .trust_engine import smoothing_alpha

FLOW_START_LO_S = 30.0
FLOW_START_HI_S = 200.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    rows: int = 10
    cols: int = 10
    spacing_m: float = 150.0
    range_m: float = 250.0
    flow_count: int = 10
    rate_pps: float = 4.0
    max_packets: int = 300
    payload_bytes: int = 512
    sim_time_s: float = 300.0
    trust_interval_s: float = 20.0
    grace_period_s: float = 2.0
    ewma_n: int = 2
    blackhole_count: int = 0
    p_loss: float = 0.0
    seed: int = 1
    teds_enabled: bool = True

    def validate(self) -> None:
        if self.rows < 1:
            raise ConfigError("rows: must be at least 1")
        if self.cols < 2:
            raise ConfigError("cols: need separate source and destination columns")
        if self.spacing_m <= 0:
            raise ConfigError("spacing_m: must be positive")
        if self.range_m <= 0:
            raise ConfigError("range_m: must be positive")
        if self.flow_count < 0:
            raise ConfigError("flow_count: must be non-negative")
        if self.rate_pps <= 0:
            raise ConfigError("rate_pps: must be positive")
        if self.max_packets < 1:
            raise ConfigError("max_packets: must be at least 1")
        if self.payload_bytes < 1:
            raise ConfigError("payload_bytes: must be at least 1")
        if self.sim_time_s <= 0:
            raise ConfigError("sim_time_s: must be positive")
        if self.trust_interval_s <= 0:
            raise ConfigError("trust_interval_s: must be positive")
        if self.grace_period_s <= 0:
            raise ConfigError("grace_period_s: must be positive")
        if self.ewma_n < 1:
            raise ConfigError("ewma_n: must be at least 1")
        if not (0.0 <= self.p_loss <= 1.0):
            raise ConfigError("p_loss: must lie in [0, 1]")
        if self.blackhole_count < 0:
            raise ConfigError("blackhole_count: must be non-negative")
        interior = self.rows * max(self.cols - 2, 0)
        if self.blackhole_count > interior:
            raise ConfigError(
                f"blackhole_count: only {interior} interior candidate nodes exist"
            )


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}
_TRUE_WORDS = {"true", "1", "yes", "on"}
_FALSE_WORDS = {"false", "0", "no", "off"}


def _coerce(name: str, raw: str):
    ftype = _FIELD_TYPES[name]
    if ftype == "bool":
        word = raw.strip().lower()
        if word in _TRUE_WORDS:
            return True
        if word in _FALSE_WORDS:
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        if ftype == "int":
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected a {ftype}, got {raw!r}") from None


def load_config(path: str, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a flat key = value scenario file; unknown keys are rejected."""
    overrides = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {line.strip()!r}")
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
            overrides[key] = _coerce(key, raw)
    cfg = replace(base or ScenarioConfig(), **overrides)
    cfg.validate()
    return cfg


@dataclass(frozen=True)
class MetricsReport:
    pdr: float | None
    data_generated: int
    data_delivered: int
    control_total: int
    control_routing: int
    control_trust: int
    normalized_overhead: float | None
    per_flow: tuple[FlowStats, ...]
    blacklist_final: frozenset[int]
    first_detection_time_s: dict[int, float | None]
    drops: dict[str, int]
    in_flight: int


@dataclass
class RunContext:
    """Everything a test needs to poke at after (or while) a run executes."""

    config: ScenarioConfig
    sim: Simulator
    nodes: list
    flows: list[Flow]
    adversaries: tuple[int, ...]
    stats: StatsCollector


def left_column_ids(config: ScenarioConfig) -> list[int]:
    return [r * config.cols for r in range(config.rows)]


def right_column_ids(config: ScenarioConfig) -> list[int]:
    return [r * config.cols + config.cols - 1 for r in range(config.rows)]


def interior_ids(config: ScenarioConfig) -> list[int]:
    return [
        r * config.cols + c
        for r in range(config.rows)
        for c in range(1, config.cols - 1)
    ]


def build_runtime(
    config: ScenarioConfig,
    *,
    flows: list[Flow] | None = None,
    blackhole_ids: list[int] | None = None,
    record_intervals: bool = False,
    track_resolutions: bool = False,
    trace: bool = False,
) -> RunContext:
    config.validate()
    topo = build_grid_topology(config.rows, config.cols, config.spacing_m, config.range_m)
    rng_endpoints = random.Random(f"{config.seed}:endpoints")
    rng_starts = random.Random(f"{config.seed}:starts")
    rng_adversaries = random.Random(f"{config.seed}:adversaries")
    rng_loss = random.Random(f"{config.seed}:loss")

    if flows is None:
        left = left_column_ids(config)
        right = right_column_ids(config)
        start_lo = min(FLOW_START_LO_S, config.sim_time_s)
        start_hi = min(FLOW_START_HI_S, config.sim_time_s)
        flows = []
        for _ in range(config.flow_count):
            src = rng_endpoints.choice(left)
            dst = rng_endpoints.choice(right)
            start = rng_starts.uniform(start_lo, start_hi)
            flows.append(Flow(src, dst, start, config.rate_pps, config.max_packets))

    endpoints = frozenset(f.source for f in flows) | frozenset(f.destination for f in flows)
    if blackhole_ids is None:
        adversaries = tuple(sorted(rng_adversaries.sample(interior_ids(config), config.blackhole_count)))
    else:
        adversaries = tuple(sorted(blackhole_ids))
    overlap = endpoints & set(adversaries)
    if overlap:
        raise ConfigError(f"blackhole placement overlaps flow endpoints: {sorted(overlap)}")

    stats = StatsCollector(record_intervals=record_intervals)
    sim = Simulator(
        topo,
        horizon=config.sim_time_s,
        p_loss=config.p_loss,
        loss_rng=rng_loss,
        stats=stats,
        trace=trace,
    )
    alpha = smoothing_alpha(config.ewma_n)
    adversary_set = set(adversaries)
    nodes: list = []
    for nid in range(topo.node_count):
        if nid in adversary_set:
            nodes.append(BlackholeNode(nid, sim))
        else:
            nodes.append(
                HonestNode(
                    nid,
                    sim,
                    teds_enabled=config.teds_enabled,
                    alpha=alpha,
                    grace_period=config.grace_period_s,
                    exempt=endpoints,
                    track_resolutions=track_resolutions,
                )
            )
    sim.attach(nodes)
    for flow in flows:
        node = nodes[flow.source]
        end = flow.start_time + flow.max_packets / flow.rate_pps
        node.src_flows[flow.destination] = max(node.src_flows.get(flow.destination, 0.0), end)
    schedule_flows(sim, flows)
    if config.teds_enabled:
        honest_ids = [nid for nid in range(topo.node_count) if nid not in adversary_set]
        _schedule_trust_intervals(sim, nodes, honest_ids, config.trust_interval_s)
    return RunContext(config, sim, nodes, flows, adversaries, stats)


def _schedule_trust_intervals(sim: Simulator, nodes: list, honest_ids: list[int], interval: float) -> None:
    def boundary(k: int):
        def fire():
            now = sim.now
            for nid in honest_ids:
                nodes[nid].on_trust_interval(now)
            t_next = (k + 1) * interval
            if t_next <= sim.horizon:
                sim.schedule_at(t_next, boundary(k + 1))

        return fire

    if interval <= sim.horizon:
        sim.schedule_at(interval, boundary(1))


def summarize(ctx: RunContext) -> MetricsReport:
    stats = ctx.stats
    in_flight = ctx.sim.pending_data_count()
    for node in ctx.nodes:
        in_flight += node.queued_data_count()
    accounted = stats.data_delivered + stats.drops_total + in_flight
    if accounted != stats.data_generated:
        raise SimulationError(
            f"data conservation violated: generated={stats.data_generated} "
            f"delivered={stats.data_delivered} drops={dict(stats.drops)} in_flight={in_flight}"
        )
    generated = stats.data_generated
    delivered = stats.data_delivered
    pdr = delivered / generated if generated > 0 else None
    overhead = stats.control_total / delivered if delivered > 0 else None
    blacklist_union: set[int] = set()
    for node in ctx.nodes:
        if not node.malicious:
            blacklist_union |= node.blacklist
    first_detection: dict[int, float | None] = {adv: None for adv in ctx.adversaries}
    for when, _node, accused in stats.blacklist_events:
        if accused in first_detection:
            prev = first_detection[accused]
            if prev is None or when < prev:
                first_detection[accused] = when
    per_flow = tuple(
        FlowStats(f.source, f.destination, f.start_time, stats.flow_generated[i], stats.flow_delivered[i])
        for i, f in enumerate(ctx.flows)
    )
    return MetricsReport(
        pdr=pdr,
        data_generated=generated,
        data_delivered=delivered,
        control_total=stats.control_total,
        control_routing=stats.control_routing,
        control_trust=stats.control_trust,
        normalized_overhead=overhead,
        per_flow=per_flow,
        blacklist_final=frozenset(blacklist_union),
        first_detection_time_s=first_detection,
        drops=dict(stats.drops),
        in_flight=in_flight,
    )


def run_scenario(
    config: ScenarioConfig,
    *,
    flows: list[Flow] | None = None,
    blackhole_ids: list[int] | None = None,
    record_intervals: bool = False,
    track_resolutions: bool = False,
    trace: bool = False,
    keep_context: bool = False,
):
    """Execute one scenario; returns the report, plus the context on request."""
    ctx = build_runtime(
        config,
        flows=flows,
        blackhole_ids=blackhole_ids,
        record_intervals=record_intervals,
        track_resolutions=track_resolutions,
        trace=trace,
    )
    ctx.sim.run()
    report = summarize(ctx)
    if keep_context:
        return report, ctx
    return report


# -- sweeps ---------------------------------------------------------------

DEFAULT_BLACKHOLE_COUNTS = tuple(range(0, 17, 2))
DEFAULT_TRUST_INTERVALS = (10.0, 20.0, 30.0, 40.0, 50.0, 60.0)


@dataclass(frozen=True)
class PerRunRow:
    scheme: str
    blackhole_count: int
    trust_interval_s: float
    rep: int
    seed: int
    pdr: float | None
    normalized_overhead: float | None
    control_routing: int
    control_trust: int
    data_generated: int
    data_delivered: int


@dataclass(frozen=True)
class SweepRow:
    scheme: str
    blackhole_count: int
    trust_interval_s: float
    replications: int
    pdr_mean: float
    pdr_sd: float
    overhead_mean: float
    overhead_sd: float
    control_routing_mean: float
    control_trust_mean: float
    seed_base: int


def _mean_sd(values: list[float]) -> tuple[float, float]:
    defined = [v for v in values if v is not None]
    if not defined:
        return (math.nan, math.nan)
    mean = sum(defined) / len(defined)
    sd = statistics.stdev(defined) if len(defined) >= 2 else math.nan
    return (mean, sd)


def _aggregate(scheme: str, count: int, interval: float, runs: list[PerRunRow], seed_base: int) -> SweepRow:
    pdr_mean, pdr_sd = _mean_sd([r.pdr for r in runs])
    ov_mean, ov_sd = _mean_sd([r.normalized_overhead for r in runs])
    routing_mean = sum(r.control_routing for r in runs) / len(runs)
    trust_mean = sum(r.control_trust for r in runs) / len(runs)
    return SweepRow(
        scheme, count, interval, len(runs),
        pdr_mean, pdr_sd, ov_mean, ov_sd, routing_mean, trust_mean, seed_base,
    )


def _run_cell(config: ScenarioConfig, scheme: str, rep: int) -> PerRunRow:
    report = run_scenario(config)
    return PerRunRow(
        scheme=scheme,
        blackhole_count=config.blackhole_count,
        trust_interval_s=config.trust_interval_s,
        rep=rep,
        seed=config.seed,
        pdr=report.pdr,
        normalized_overhead=report.normalized_overhead,
        control_routing=report.control_routing,
        control_trust=report.control_trust,
        data_generated=report.data_generated,
        data_delivered=report.data_delivered,
    )


def sweep_blackhole(
    base: ScenarioConfig,
    counts=DEFAULT_BLACKHOLE_COUNTS,
    replications: int = 10,
    progress=None,
) -> tuple[list[SweepRow], list[PerRunRow]]:
    """Both schemes across adversary counts; arms share seeds pairwise."""
    agg: list[SweepRow] = []
    per_run: list[PerRunRow] = []
    for count in counts:
        for scheme, enabled in (("teds", True), ("aodv", False)):
            runs = []
            for rep in range(replications):
                cfg = replace(
                    base,
                    blackhole_count=count,
                    teds_enabled=enabled,
                    seed=base.seed + rep,
                )
                runs.append(_run_cell(cfg, scheme, rep))
                if progress is not None:
                    progress(runs[-1])
            per_run.extend(runs)
            agg.append(_aggregate(scheme, count, base.trust_interval_s, runs, base.seed))
    return agg, per_run


def sweep_trust_interval(
    base: ScenarioConfig,
    intervals=DEFAULT_TRUST_INTERVALS,
    replications: int = 20,
    progress=None,
) -> tuple[list[SweepRow], list[PerRunRow]]:
    """Trust-interval sweep with the trust layer on; caller fixes the adversary count."""
    agg: list[SweepRow] = []
    per_run: list[PerRunRow] = []
    for interval in intervals:
        runs = []
        for rep in range(replications):
            cfg = replace(
                base,
                trust_interval_s=interval,
                teds_enabled=True,
                seed=base.seed + rep,
            )
            runs.append(_run_cell(cfg, "teds", rep))
            if progress is not None:
                progress(runs[-1])
        per_run.extend(runs)
        agg.append(_aggregate("teds", base.blackhole_count, interval, runs, base.seed))
    return agg, per_run


# -- CSV output -----------------------------------------------------------

SWEEP_COLUMNS = (
    "scheme",
    "blackhole_count",
    "trust_interval_s",
    "replications",
    "pdr_mean",
    "pdr_sd",
    "overhead_mean",
    "overhead_sd",
    "control_routing_mean",
    "control_trust_mean",
    "seed_base",
)

PER_RUN_COLUMNS = (
    "scheme",
    "blackhole_count",
    "trust_interval_s",
    "rep",
    "seed",
    "pdr",
    "normalized_overhead",
    "control_routing",
    "control_trust",
    "data_generated",
    "data_delivered",
)


def _fmt(value) -> str:
    if value is None:
        return "nan"
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.6g}"
    return str(value)


def render_csv(rows, columns) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(getattr(row, col)) for col in columns))
    return "\n".join(lines) + "\n"


def emit_csv(rows: list[SweepRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_csv(rows, SWEEP_COLUMNS))


def emit_per_run_csv(rows: list[PerRunRow], path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_csv(rows, PER_RUN_COLUMNS))
