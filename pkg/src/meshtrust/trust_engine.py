"""Trust arithmetic: entropy-based direct trust and Dempster-Shafer fusion.

The pipeline turns watchdog forwarding counts into a trust verdict about a
neighbor: forwarding probability -> binary entropy -> direct trust ->
exponential smoothing.  Recommendations from other nodes are discounted by
the recommender's own trust, everything is expressed as belief mass over
the two-hypothesis frame {trusted, untrusted}, fused with Dempster's rule,
and the pignistic value is thresholded at 0.5.

All functions here are pure and operate on plain floats in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

# tolerance for mass normalization / range checks on computed values
MASS_TOL = 1e-9

TRUST_THRESHOLD = 0.5
INITIAL_TRUST = 0.5


class TotalConflictError(ValueError):
    """Two belief masses are in total conflict (K = 1); fusion is undefined."""


class TrustClass(Enum):
    TRUSTED = "trusted"
    UNTRUSTED = "untrusted"


@dataclass(frozen=True, slots=True)
class ForwardingStats:
    """Per-neighbor counts for one observation interval."""

    sent: int
    overheard: int

    def __post_init__(self):
        if self.sent < 0 or self.overheard < 0:
            raise ValueError("forwarding counts must be non-negative")
        if self.overheard > self.sent:
            raise ValueError(
                f"overheard ({self.overheard}) exceeds sent ({self.sent})"
            )


@dataclass(frozen=True, slots=True)
class BeliefMass:
    """Mass assignment over {T}, {UT} and the ignorance set {T, UT}."""

    m_t: float
    m_ut: float
    m_tu: float

    def __post_init__(self):
        for name, v in (("m_t", self.m_t), ("m_ut", self.m_ut), ("m_tu", self.m_tu)):
            if not (-MASS_TOL <= v <= 1.0 + MASS_TOL):
                raise ValueError(f"{name} out of range: {v!r}")
        total = self.m_t + self.m_ut + self.m_tu
        if abs(total - 1.0) > MASS_TOL:
            raise ValueError(f"masses sum to {total!r}, expected 1")


VACUOUS = BeliefMass(0.0, 0.0, 1.0)


def _check_unit(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")


def forwarding_probability(stats: ForwardingStats) -> float:
    """Fraction of packets handed to a neighbor that it was seen retransmitting.

    A zero-sample interval carries no evidence and is a caller error: skip the
    neighbor instead of calling this.
    """
    if stats.sent < 1:
        raise ValueError("forwarding probability undefined for a zero-sample interval")
    return stats.overheard / stats.sent


def binary_entropy(p: float) -> float:
    """Shannon entropy of a Bernoulli(p) variable in bits, with 0*log0 = 0."""
    _check_unit("p", p)
    if p == 0.0 or p == 1.0:
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


def entropy_trust(p: float) -> float:
    """Map a forwarding probability to direct trust in [0, 1].

    Uncertainty is highest at p = 0.5, so trust is pushed away from 0.5 in
    the direction of the evidence: 1 - H(p)/2 when p >= 0.5, else H(p)/2.
    """
    _check_unit("p", p)
    h = binary_entropy(p)
    if p >= 0.5:
        return 1.0 - 0.5 * h
    return 0.5 * h


def smoothing_alpha(n: int) -> float:
    """EWMA weight alpha = 2 / (N + 1) for an N-interval smoothing window."""
    if n < 1:
        raise ValueError(f"smoothing window must be >= 1, got {n!r}")
    return 2.0 / (n + 1.0)


def ewma_update(current: float, previous: float, alpha: float) -> float:
    """Blend the freshly measured trust with the stored value."""
    _check_unit("current", current)
    _check_unit("previous", previous)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha!r}")
    return alpha * current + (1.0 - alpha) * previous


def indirect_trust(dt_recommender: float, dt_reported: float) -> float:
    """Discount a reported trust value by the trust held in the recommender."""
    _check_unit("dt_recommender", dt_recommender)
    _check_unit("dt_reported", dt_reported)
    return dt_recommender * dt_reported


def bpa_from_trust(t: float) -> BeliefMass:
    """Build a basic probability assignment from a scalar trust value.

    Values at or above 0.5 commit mass t to {T} and the rest to ignorance;
    values below 0.5 mirror this toward {UT}.
    """
    _check_unit("t", t)
    if t >= 0.5:
        return BeliefMass(t, 0.0, 1.0 - t)
    return BeliefMass(0.0, 1.0 - t, t)


def dempster_combine(m1: BeliefMass, m2: BeliefMass) -> BeliefMass:
    """Fuse two mass assignments with Dempster's rule of combination.

    Conflict K collects the mass of contradictory intersections; the rest is
    renormalized by 1 - K.  Cross terms are grouped so the operation is
    exactly commutative in floating point.
    """
    k = m1.m_t * m2.m_ut + m1.m_ut * m2.m_t
    denom = 1.0 - k
    if denom <= 1e-12:
        raise TotalConflictError(f"total conflict between masses (K = {k!r})")
    m_t = (m1.m_t * m2.m_t + (m1.m_t * m2.m_tu + m2.m_t * m1.m_tu)) / denom
    m_ut = (m1.m_ut * m2.m_ut + (m1.m_ut * m2.m_tu + m2.m_ut * m1.m_tu)) / denom
    m_tu = (m1.m_tu * m2.m_tu) / denom
    return BeliefMass(m_t, m_ut, m_tu)


def overall_trust(m: BeliefMass) -> float:
    """Pignistic trust: committed trusted mass plus half the ignorance mass."""
    return m.m_t + 0.5 * m.m_tu


def classify(t: float) -> TrustClass:
    """Threshold an overall trust value; 0.5 and above counts as trusted."""
    _check_unit("t", t)
    if t >= TRUST_THRESHOLD:
        return TrustClass.TRUSTED
    return TrustClass.UNTRUSTED
