"""Discrete-event core: grid topology, broadcast radio, CBR traffic, metrics.

Single-threaded event loop ordered by (fire time, insertion sequence), so
equal-time events run FIFO and a run is bit-identical for a given scenario
and seed.  A transmission is scheduled as one fan-out event: every radio
neighbor of the transmitter receives a copy after the fixed hop latency,
with an independent loss draw per delivery when p_loss > 0.  Copies not
addressed to the receiving node are handed over as promiscuous overhears.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

BROADCAST = -1
HOP_LATENCY_S = 0.002


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class Topology:
    rows: int
    cols: int
    spacing_m: float
    range_m: float
    positions: tuple[tuple[float, float], ...]
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def node_count(self) -> int:
        return len(self.positions)


def build_grid_topology(rows: int, cols: int, spacing_m: float, range_m: float) -> Topology:
    """Square grid with unit-disk connectivity; node id = row * cols + col."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and one column")
    if spacing_m <= 0 or range_m <= 0:
        raise ValueError("spacing and radio range must be positive")
    positions = tuple(
        (c * spacing_m, r * spacing_m) for r in range(rows) for c in range(cols)
    )
    n = len(positions)
    limit = range_m + 1e-9  # tolerate float noise on exact-range diagonals
    adjacency: list[tuple[int, ...]] = []
    for i in range(n):
        xi, yi = positions[i]
        nbrs = []
        for j in range(n):
            if j == i:
                continue
            xj, yj = positions[j]
            if math.hypot(xi - xj, yi - yj) <= limit:
                nbrs.append(j)
        adjacency.append(tuple(nbrs))
    return Topology(rows, cols, spacing_m, range_m, positions, tuple(adjacency))


@dataclass(frozen=True)
class Flow:
    source: int
    destination: int
    start_time: float
    rate_pps: float
    max_packets: int


@dataclass(frozen=True)
class FlowStats:
    source: int
    destination: int
    start_time: float
    generated: int
    delivered: int


class StatsCollector:
    """Accumulates counters while a run executes; summarized afterwards."""

    def __init__(self, record_intervals: bool = False):
        self.data_generated = 0
        self.data_delivered = 0
        self.data_tx = 0
        self.control_tx: dict[str, int] = {}
        self.drops: dict[str, int] = {}
        self.flow_generated: list[int] = []
        self.flow_delivered: list[int] = []
        self._delivered_pids: list[set[int]] = []
        self.blacklist_events: list[tuple[float, int, int]] = []  # (time, node, accused)
        self.observations: list[tuple] | None = [] if record_intervals else None
        self.evaluations: list[tuple] | None = [] if record_intervals else None

    def register_flows(self, n: int) -> None:
        self.flow_generated = [0] * n
        self.flow_delivered = [0] * n
        self._delivered_pids = [set() for _ in range(n)]

    def count_tx(self, kind: str) -> None:
        if kind == "DATA":
            self.data_tx += 1
        else:
            self.control_tx[kind] = self.control_tx.get(kind, 0) + 1

    def packet_generated(self, flow_idx: int) -> None:
        self.data_generated += 1
        self.flow_generated[flow_idx] += 1

    def packet_delivered(self, flow_idx: int, pid: int, now: float) -> None:
        seen = self._delivered_pids[flow_idx]
        if pid in seen:
            return
        seen.add(pid)
        self.data_delivered += 1
        self.flow_delivered[flow_idx] += 1

    def drop(self, cause: str) -> None:
        self.drops[cause] = self.drops.get(cause, 0) + 1

    def blacklist_event(self, now: float, node: int, accused: int) -> None:
        self.blacklist_events.append((now, node, accused))

    def observation(self, *row) -> None:
        if self.observations is not None:
            self.observations.append(row)

    def evaluation(self, *row) -> None:
        if self.evaluations is not None:
            self.evaluations.append(row)

    @property
    def control_routing(self) -> int:
        c = self.control_tx
        return c.get("RREQ", 0) + c.get("RREP", 0) + c.get("RERR", 0)

    @property
    def control_trust(self) -> int:
        c = self.control_tx
        return c.get("TRUST_SHARE", 0) + c.get("TRUST_ALERT", 0)

    @property
    def control_total(self) -> int:
        return self.control_routing + self.control_trust

    @property
    def drops_total(self) -> int:
        return sum(self.drops.values())


# heap entry tags
_DELIVER = 0
_CALL = 1


class Simulator:
    """Event queue plus the shared radio; node handlers attach by id."""

    def __init__(
        self,
        topology: Topology,
        *,
        horizon: float,
        p_loss: float = 0.0,
        hop_latency: float = HOP_LATENCY_S,
        loss_rng: random.Random | None = None,
        stats: StatsCollector | None = None,
        trace: bool = False,
    ):
        if not (0.0 <= p_loss <= 1.0):
            raise ValueError(f"p_loss must lie in [0, 1], got {p_loss!r}")
        self.topology = topology
        self.horizon = horizon
        self.p_loss = p_loss
        self.hop_latency = hop_latency
        self.loss_rng = loss_rng if loss_rng is not None else random.Random(0)
        self.stats = stats if stats is not None else StatsCollector()
        self.trace: list[str] | None = [] if trace else None
        self.now = 0.0
        self.handlers: list = []
        self._heap: list = []
        self._seq = 0
        self._pid = 0

    def attach(self, handlers: list) -> None:
        if len(handlers) != self.topology.node_count:
            raise SimulationError("one handler per topology node is required")
        self.handlers = handlers

    def next_pid(self) -> int:
        self._pid += 1
        return self._pid

    def schedule_at(self, t: float, fn) -> None:
        if t < self.now:
            raise SimulationError(f"event scheduled in the past: {t} < {self.now}")
        heapq.heappush(self._heap, (t, self._seq, _CALL, fn))
        self._seq += 1

    def transmit(self, sender: int, link_dst: int, packet) -> None:
        """Broadcast a frame; counted once no matter how many copies land."""
        self.stats.count_tx(packet.kind)
        if self.trace is not None:
            self.trace.append(f"{self.now:.6f} {sender} {packet.kind} {packet.pid} {link_dst}")
        heapq.heappush(
            self._heap, (self.now + self.hop_latency, self._seq, _DELIVER, (sender, link_dst, packet))
        )
        self._seq += 1

    def _deliver(self, sender: int, link_dst: int, packet) -> None:
        handlers = self.handlers
        p_loss = self.p_loss
        now = self.now
        if p_loss > 0.0:
            rng_random = self.loss_rng.random
            for nb in self.topology.adjacency[sender]:
                if rng_random() < p_loss:
                    if nb == link_dst and packet.kind == "DATA":
                        self.stats.drop("radio_loss")
                    continue
                h = handlers[nb]
                if nb == link_dst:
                    h.on_receive(packet, sender, now)
                elif link_dst == BROADCAST:
                    h.on_broadcast(packet, sender, now)
                else:
                    h.on_overhear(packet, sender, now)
        else:
            for nb in self.topology.adjacency[sender]:
                h = handlers[nb]
                if nb == link_dst:
                    h.on_receive(packet, sender, now)
                elif link_dst == BROADCAST:
                    h.on_broadcast(packet, sender, now)
                else:
                    h.on_overhear(packet, sender, now)

    def run(self) -> None:
        heap = self._heap
        horizon = self.horizon
        while heap:
            entry = heapq.heappop(heap)
            t = entry[0]
            if t > horizon:
                heapq.heappush(heap, entry)  # keep unprocessed events for the in-flight scan
                break
            self.now = t
            if entry[2] == _DELIVER:
                sender, link_dst, packet = entry[3]
                self._deliver(sender, link_dst, packet)
            else:
                entry[3]()

    def pending_data_count(self) -> int:
        """Addressed data copies still sitting in undelivered fan-out events."""
        count = 0
        for entry in self._heap:
            if entry[2] == _DELIVER:
                _, link_dst, packet = entry[3]
                if packet.kind == "DATA" and link_dst != BROADCAST:
                    count += 1
        return count


def schedule_flows(sim: Simulator, flows: list[Flow]) -> None:
    sim.stats.register_flows(len(flows))
    for idx, flow in enumerate(flows):
        _schedule_tick(sim, idx, flow, 0)


def _schedule_tick(sim: Simulator, idx: int, flow: Flow, i: int) -> None:
    t = flow.start_time + i / flow.rate_pps
    if i >= flow.max_packets or t > sim.horizon:
        return

    def fire():
        pid = sim.next_pid()
        sim.stats.packet_generated(idx)
        sim.handlers[flow.source].originate_data(idx, flow, pid, sim.now)
        _schedule_tick(sim, idx, flow, i + 1)

    sim.schedule_at(t, fire)
