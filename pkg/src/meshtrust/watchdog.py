"""Promiscuous-mode forwarding monitor.

When a node hands a data packet to a neighbor for onward forwarding, it keeps
a watch entry and listens for that neighbor retransmitting the same packet.
An overheard retransmission within the grace period counts as a forward; an
entry that times out counts against the neighbor.  Counts are read and reset
once per trust interval.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .trust_engine import ForwardingStats

DEFAULT_GRACE_S = 2.0


@dataclass(slots=True)
class WatchEntry:
    next_hop: int
    packet_id: int
    created: float
    expiry: float


class Watchdog:
    """Pending-forward table plus per-neighbor interval counters.

    Every live entry is resolved exactly once, either by a matching overhear
    or by expiry.  `track_resolutions` records both outcome sets so tests can
    assert the exactly-once property over a whole run.
    """

    def __init__(self, grace_period: float = DEFAULT_GRACE_S, track_resolutions: bool = False):
        if grace_period <= 0:
            raise ValueError(f"grace period must be positive, got {grace_period!r}")
        self.grace_period = grace_period
        self._entries: dict[int, WatchEntry] = {}
        self._order: deque[tuple[float, int]] = deque()  # (expiry, packet_id), FIFO
        self._sent: dict[int, int] = {}
        self._overheard: dict[int, int] = {}
        self.matched_total = 0
        self.expired_total = 0
        self._matched_ids: set[int] | None = set() if track_resolutions else None
        self._expired_ids: set[int] | None = set() if track_resolutions else None

    def has_entry(self, packet_id: int) -> bool:
        return packet_id in self._entries

    @property
    def pending_count(self) -> int:
        return len(self._entries)

    def record_sent(self, next_hop: int, packet_id: int, now: float) -> float:
        """Register a packet handed to next_hop for forwarding; returns expiry.

        The caller must not register the packet's final destination, and a
        packet id may have at most one live entry.
        """
        if packet_id in self._entries:
            raise ValueError(f"packet {packet_id!r} already has a live watch entry")
        expiry = now + self.grace_period
        self._entries[packet_id] = WatchEntry(next_hop, packet_id, now, expiry)
        self._order.append((expiry, packet_id))
        self._sent[next_hop] = self._sent.get(next_hop, 0) + 1
        return expiry

    def record_overheard(self, transmitter: int, packet_id: int, now: float) -> bool:
        """Credit a forward if the overheard copy matches a live entry.

        The match requires the designated next hop and the exact packet id;
        anything else leaves the table untouched.
        """
        entry = self._entries.get(packet_id)
        if entry is None or entry.next_hop != transmitter or now >= entry.expiry:
            return False
        del self._entries[packet_id]
        self._overheard[transmitter] = self._overheard.get(transmitter, 0) + 1
        self.matched_total += 1
        if self._matched_ids is not None:
            self._matched_ids.add(packet_id)
        return True

    def expire(self, now: float) -> int:
        """Drop every entry whose expiry has passed; returns how many."""
        dropped = 0
        order = self._order
        entries = self._entries
        while order and order[0][0] <= now:
            expiry, pid = order.popleft()
            entry = entries.get(pid)
            if entry is None or entry.expiry > now:
                continue  # already matched, or id reused by a fresher entry
            del entries[pid]
            dropped += 1
            self.expired_total += 1
            if self._expired_ids is not None:
                self._expired_ids.add(pid)
        return dropped

    def interval_stats(self) -> dict[int, ForwardingStats]:
        """Snapshot per-neighbor counts for the closing interval and reset.

        Entries still pending (sent less than a grace period before the
        boundary) carry over: their sent count is re-attributed to the next
        interval so each entry lands in the interval where it resolves and
        overheard can never exceed sent.
        """
        pending: dict[int, int] = {}
        for entry in self._entries.values():
            pending[entry.next_hop] = pending.get(entry.next_hop, 0) + 1
        snapshot: dict[int, ForwardingStats] = {}
        for nb, sent in self._sent.items():
            resolved = sent - pending.get(nb, 0)
            if resolved >= 1:
                snapshot[nb] = ForwardingStats(resolved, self._overheard.get(nb, 0))
        self._sent = pending
        self._overheard = {}
        return snapshot

    def resolution_sets(self) -> tuple[set[int], set[int]]:
        if self._matched_ids is None or self._expired_ids is None:
            raise RuntimeError("watchdog built without track_resolutions")
        return self._matched_ids, self._expired_ids
