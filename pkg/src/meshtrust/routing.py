"""On-demand mesh routing with an optional trust layer, plus the adversary.

Honest nodes run a reduced reactive protocol: RREQ floods with duplicate
suppression, RREP unicast back along reverse routes, destination sequence
numbers deciding freshness, RERR notifications upstream when a route dies.
With the trust layer enabled each node additionally watches its next hops
promiscuously, refreshes smoothed direct trust once per trust interval,
gossips those values one hop (TRUST_SHARE), fuses direct and recommended
evidence with Dempster's rule, and floods a TRUST_ALERT the moment a
neighbor's overall trust drops below the threshold.  Blacklisted nodes are
dropped from tables and their control traffic is ignored; their radio
transmissions are still overheard, since radio is physical.

A blackhole node answers every route request immediately with a forged,
maximally fresh reply and silently drops all data handed to it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from typing import ClassVar

from .simnet import BROADCAST, Simulator, Flow
from .trust_engine import (
    TotalConflictError,
    TrustClass,
    INITIAL_TRUST,
    bpa_from_trust,
    classify,
    dempster_combine,
    entropy_trust,
    ewma_update,
    forwarding_probability,
    indirect_trust,
    overall_trust,
)
from .watchdog import Watchdog

SEQ_BOOST = 100          # forged replies claim dest_seq + 100
DATA_QUEUE_LIMIT = 64    # per-destination, drop-oldest
DATA_HOP_LIMIT = 64      # guards against transient forwarding loops
RREQ_RETRY_BASE_S = 1.0  # discovery retry backoff: 1, 2, 4, capped
RREQ_RETRY_CAP_S = 8.0


@dataclass(frozen=True, slots=True)
class DataPacket:
    kind: ClassVar[str] = "DATA"
    pid: int
    flow: int
    src: int
    dst: int
    hops: int = 0


@dataclass(frozen=True, slots=True)
class Rreq:
    kind: ClassVar[str] = "RREQ"
    pid: int
    origin: int
    bid: int
    dst: int
    dst_seq: int
    hop_count: int


@dataclass(frozen=True, slots=True)
class Rrep:
    kind: ClassVar[str] = "RREP"
    pid: int
    origin: int       # originator of the answered RREQ; routes the reply back
    dst: int
    dst_seq: int
    hop_count: int


@dataclass(frozen=True, slots=True)
class Rerr:
    kind: ClassVar[str] = "RERR"
    pid: int
    origin: int
    dests: tuple[int, ...]


@dataclass(frozen=True, slots=True)
class TrustShare:
    kind: ClassVar[str] = "TRUST_SHARE"
    pid: int
    origin: int
    items: tuple[tuple[int, float], ...]  # (subject, direct trust)


@dataclass(frozen=True, slots=True)
class TrustAlert:
    kind: ClassVar[str] = "TRUST_ALERT"
    pid: int
    origin: int
    seq: int
    accused: int


@dataclass(slots=True)
class RouteEntry:
    destination: int
    next_hop: int
    hop_count: int
    dest_seq: int
    valid: bool


@dataclass(slots=True)
class _Discovery:
    active: bool = False
    attempts: int = 0


class HonestNode:
    malicious = False

    def __init__(
        self,
        node_id: int,
        sim: Simulator,
        *,
        teds_enabled: bool,
        alpha: float,
        grace_period: float,
        exempt: frozenset[int],
        track_resolutions: bool = False,
    ):
        self.id = node_id
        self.sim = sim
        self.neighbors = sim.topology.adjacency[node_id]
        self._neighbor_set = frozenset(self.neighbors)
        self.teds = teds_enabled
        self.exempt = exempt
        self.alpha = alpha
        self.routes: dict[int, RouteEntry] = {}
        self.own_seq = 0
        self._bid = 0
        self._alert_seq = 0
        self.seen_rreq: set[tuple[int, int]] = set()
        self.seen_alert: set[tuple[int, int]] = set()
        self.queues: dict[int, deque] = {}
        self.discovery: dict[int, _Discovery] = {}
        self.upstream: dict[int, set[int]] = {}
        self.src_flows: dict[int, float] = {}  # dest -> own emission end time
        self.blacklist: set[int] = set()
        if teds_enabled:
            self.watchdog = Watchdog(grace_period, track_resolutions=track_resolutions)
            self.direct: dict[int, float] = {}
            self.observed: set[int] = set()
            self.recs: dict[int, dict[int, float]] = {}
            self.overall: dict[int, float] = {}

    # -- datapath ----------------------------------------------------------

    def originate_data(self, flow_idx: int, flow: Flow, pid: int, now: float) -> None:
        pkt = DataPacket(pid, flow_idx, self.id, flow.destination)
        self._forward_or_queue(pkt, now)

    def _usable_route(self, dest: int) -> RouteEntry | None:
        entry = self.routes.get(dest)
        if entry is None or not entry.valid:
            return None
        if entry.next_hop in self.blacklist:
            entry.valid = False
            return None
        return entry

    def _forward_or_queue(self, pkt: DataPacket, now: float) -> None:
        route = self._usable_route(pkt.dst)
        if route is not None:
            self._transmit_data(pkt, route, now)
            return
        q = self.queues.get(pkt.dst)
        if q is None:
            q = self.queues[pkt.dst] = deque()
        if len(q) >= DATA_QUEUE_LIMIT:
            q.popleft()
            self.sim.stats.drop("queue_overflow")
        q.append(pkt)
        self._ensure_discovery(pkt.dst, now)

    def _transmit_data(self, pkt: DataPacket, route: RouteEntry, now: float) -> None:
        next_hop = route.next_hop
        if self.teds and next_hop != pkt.dst and not self.watchdog.has_entry(pkt.pid):
            expiry = self.watchdog.record_sent(next_hop, pkt.pid, now)
            self.sim.schedule_at(expiry, self._sweep_watch)
        self.sim.transmit(self.id, next_hop, pkt)

    def _sweep_watch(self) -> None:
        self.watchdog.expire(self.sim.now)

    def _flush_queue(self, dest: int, now: float) -> None:
        q = self.queues.get(dest)
        if not q:
            return
        while q:
            route = self._usable_route(dest)
            if route is None:
                self._ensure_discovery(dest, now)
                return
            self._transmit_data(q.popleft(), route, now)

    def queued_data_count(self) -> int:
        return sum(len(q) for q in self.queues.values())

    # -- route discovery ---------------------------------------------------

    def _needs_route(self, dest: int) -> bool:
        q = self.queues.get(dest)
        if q:
            return True
        end = self.src_flows.get(dest)
        return end is not None and self.sim.now < end

    def _ensure_discovery(self, dest: int, now: float) -> None:
        st = self.discovery.get(dest)
        if st is not None and st.active:
            return
        if self._usable_route(dest) is not None:
            return
        self._send_rreq(dest, now)

    def _send_rreq(self, dest: int, now: float) -> None:
        st = self.discovery.get(dest)
        if st is None:
            st = self.discovery[dest] = _Discovery()
        st.active = True
        st.attempts += 1
        self._bid += 1
        self.seen_rreq.add((self.id, self._bid))
        known = self.routes[dest].dest_seq if dest in self.routes else 0
        pkt = Rreq(self.sim.next_pid(), self.id, self._bid, dest, known, 0)
        self.sim.transmit(self.id, BROADCAST, pkt)
        delay = min(RREQ_RETRY_BASE_S * 2 ** (st.attempts - 1), RREQ_RETRY_CAP_S)
        self.sim.schedule_at(now + delay, lambda d=dest: self._retry_discovery(d))

    def _retry_discovery(self, dest: int) -> None:
        st = self.discovery.get(dest)
        if st is None or not st.active:
            return
        if self._usable_route(dest) is not None:
            st.active = False
            st.attempts = 0
            return
        if self._needs_route(dest):
            self._send_rreq(dest, self.sim.now)
        else:
            st.active = False

    def _adopt_route(self, dest: int, next_hop: int, hops: int, seq: int, now: float) -> bool:
        """Install the offered route if it is fresher, or better at equal freshness."""
        if next_hop in self.blacklist:
            return False
        cur = self.routes.get(dest)
        if cur is not None and cur.valid:
            if seq < cur.dest_seq:
                return False
            if seq == cur.dest_seq and hops >= cur.hop_count:
                return False
        self.routes[dest] = RouteEntry(dest, next_hop, hops, seq, True)
        st = self.discovery.get(dest)
        if st is not None:
            st.active = False
            st.attempts = 0
        self._flush_queue(dest, now)
        return True

    # -- handler entry points ----------------------------------------------

    def on_receive(self, pkt, sender: int, now: float) -> None:
        kind = pkt.kind
        if kind == "DATA":
            if pkt.dst == self.id:
                self.sim.stats.packet_delivered(pkt.flow, pkt.pid, now)
                return
            ups = self.upstream.get(pkt.dst)
            if ups is None:
                ups = self.upstream[pkt.dst] = set()
            ups.add(sender)
            if pkt.hops + 1 > DATA_HOP_LIMIT:
                self.sim.stats.drop("hop_limit")
                return
            self._forward_or_queue(replace(pkt, hops=pkt.hops + 1), now)
        elif kind == "RREP":
            if sender not in self.blacklist:
                self._handle_rrep(pkt, sender, now)
        elif kind == "RERR":
            if sender not in self.blacklist:
                self._handle_rerr(pkt, sender, now)

    def on_broadcast(self, pkt, sender: int, now: float) -> None:
        if sender in self.blacklist:
            return
        kind = pkt.kind
        if kind == "RREQ":
            self._handle_rreq(pkt, sender, now)
        elif kind == "TRUST_ALERT":
            self._handle_alert(pkt, sender, now)
        elif kind == "TRUST_SHARE":
            self._handle_share(pkt, sender, now)

    def on_overhear(self, pkt, sender: int, now: float) -> None:
        if self.teds and pkt.kind == "DATA":
            self.watchdog.record_overheard(sender, pkt.pid, now)

    # -- control handlers --------------------------------------------------

    def _handle_rreq(self, pkt: Rreq, sender: int, now: float) -> None:
        if pkt.origin == self.id:
            return
        key = (pkt.origin, pkt.bid)
        if key in self.seen_rreq:
            return
        self.seen_rreq.add(key)
        hops = pkt.hop_count + 1
        self._adopt_route(pkt.origin, sender, hops, 0, now)  # reverse route
        if pkt.dst == self.id:
            self.own_seq = max(self.own_seq, pkt.dst_seq) + 1
            reply = Rrep(self.sim.next_pid(), pkt.origin, self.id, self.own_seq, 0)
            rev = self._usable_route(pkt.origin)
            if rev is not None:
                self.sim.transmit(self.id, rev.next_hop, reply)
        else:
            self.sim.transmit(self.id, BROADCAST, replace(pkt, hop_count=hops))

    def _handle_rrep(self, pkt: Rrep, sender: int, now: float) -> None:
        hops = pkt.hop_count + 1
        self._adopt_route(pkt.dst, sender, hops, pkt.dst_seq, now)
        if pkt.origin == self.id:
            st = self.discovery.get(pkt.dst)
            if st is not None:
                st.active = False
                st.attempts = 0
            return
        rev = self._usable_route(pkt.origin)
        if rev is not None:
            self.sim.transmit(self.id, rev.next_hop, replace(pkt, hop_count=hops))
        # no reverse-route state: the reply dies here

    def _handle_rerr(self, pkt: Rerr, sender: int, now: float) -> None:
        dead: list[int] = []
        for dest in pkt.dests:
            entry = self.routes.get(dest)
            if entry is not None and entry.valid and entry.next_hop == sender:
                entry.valid = False
                dead.append(dest)
        if not dead:
            return
        self._propagate_unreachable(dead, now)
        for dest in dead:
            if self._needs_route(dest):
                self._ensure_discovery(dest, now)

    def _propagate_unreachable(self, dests: list[int], now: float) -> None:
        by_prev: dict[int, list[int]] = {}
        for dest in dests:
            for prev in self.upstream.get(dest, ()):
                if prev not in self.blacklist:
                    by_prev.setdefault(prev, []).append(dest)
            self.upstream.pop(dest, None)
        for prev in sorted(by_prev):
            pkt = Rerr(self.sim.next_pid(), self.id, tuple(sorted(set(by_prev[prev]))))
            self.sim.transmit(self.id, prev, pkt)

    def _handle_share(self, pkt: TrustShare, sender: int, now: float) -> None:
        if not self.teds:
            return
        for subject, value in pkt.items:
            if subject == self.id or subject in self.blacklist:
                continue
            if subject not in self._neighbor_set:
                continue  # only opinions about my own neighbors are usable
            recs = self.recs.get(subject)
            if recs is None:
                recs = self.recs[subject] = {}
            recs[sender] = value

    def _handle_alert(self, pkt: TrustAlert, sender: int, now: float) -> None:
        key = (pkt.origin, pkt.seq)
        if key in self.seen_alert:
            return
        self.seen_alert.add(key)
        self._blacklist_node(pkt.accused, now)
        self.sim.transmit(self.id, BROADCAST, pkt)

    # -- trust maintenance -------------------------------------------------

    def _blacklist_node(self, accused: int, now: float) -> bool:
        if accused == self.id or accused in self.exempt or accused in self.blacklist:
            return False
        self.blacklist.add(accused)
        self.sim.stats.blacklist_event(now, self.id, accused)
        dead = [d for d, e in self.routes.items() if e.valid and e.next_hop == accused]
        for dest in dead:
            self.routes[dest].valid = False
        if dead:
            self._propagate_unreachable(dead, now)
            for dest in dead:
                if self._needs_route(dest):
                    self._ensure_discovery(dest, now)
        return True

    def on_trust_interval(self, now: float) -> None:
        if not self.teds:
            return
        stats = self.sim.stats
        wd = self.watchdog
        wd.expire(now)
        snapshot = wd.interval_stats()
        for nb in sorted(snapshot):
            if nb in self.blacklist:
                continue
            fstats = snapshot[nb]
            fp = forwarding_probability(fstats)
            measured = entropy_trust(fp)
            updated = ewma_update(measured, self.direct.get(nb, INITIAL_TRUST), self.alpha)
            self.direct[nb] = updated
            self.observed.add(nb)
            stats.observation(now, self.id, nb, fstats.sent, fstats.overheard, fp, updated)
        payload = tuple(
            (nb, self.direct[nb]) for nb in sorted(self.observed) if nb not in self.blacklist
        )
        if payload:
            self.sim.transmit(self.id, BROADCAST, TrustShare(self.sim.next_pid(), self.id, payload))
        newly: list[int] = []
        candidates = (self.observed | self.recs.keys()) - self.blacklist
        for cand in sorted(candidates):
            if cand == self.id or cand in self.exempt:
                continue
            mass = bpa_from_trust(self.direct.get(cand, INITIAL_TRUST))
            recs = self.recs.get(cand)
            if recs:
                for rec_id in sorted(recs):
                    if rec_id in self.blacklist:
                        continue
                    idt = indirect_trust(self.direct.get(rec_id, INITIAL_TRUST), recs[rec_id])
                    try:
                        mass = dempster_combine(mass, bpa_from_trust(idt))
                    except TotalConflictError:
                        continue  # contradictory recommendation carries no usable weight
            score = overall_trust(mass)
            self.overall[cand] = score
            stats.evaluation(now, self.id, cand, score)
            if classify(score) is TrustClass.UNTRUSTED:
                newly.append(cand)
        for accused in newly:
            if self._blacklist_node(accused, now):
                self._alert_seq += 1
                self.seen_alert.add((self.id, self._alert_seq))
                alert = TrustAlert(self.sim.next_pid(), self.id, self._alert_seq, accused)
                self.sim.transmit(self.id, BROADCAST, alert)


class BlackholeNode:
    """Answers every RREQ with a forged fresh route, then drops all data."""

    malicious = True

    def __init__(self, node_id: int, sim: Simulator):
        self.id = node_id
        self.sim = sim
        self.seen_rreq: set[tuple[int, int]] = set()

    def originate_data(self, flow_idx, flow, pid, now):
        raise RuntimeError("adversary placement must never coincide with a flow source")

    def on_receive(self, pkt, sender: int, now: float) -> None:
        if pkt.kind == "DATA":
            self.sim.stats.drop("blackhole")

    def on_broadcast(self, pkt, sender: int, now: float) -> None:
        if pkt.kind != "RREQ" or pkt.origin == self.id:
            return
        key = (pkt.origin, pkt.bid)
        if key in self.seen_rreq:
            return
        self.seen_rreq.add(key)
        forged = Rrep(self.sim.next_pid(), pkt.origin, pkt.dst, pkt.dst_seq + SEQ_BOOST, 1)
        self.sim.transmit(self.id, sender, forged)

    def on_overhear(self, pkt, sender: int, now: float) -> None:
        pass

    def on_trust_interval(self, now: float) -> None:
        pass

    def queued_data_count(self) -> int:
        return 0
