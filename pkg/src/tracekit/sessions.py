"""Session construction from a user's event stream.

Three policies: a fixed inactivity threshold, a per-user threshold equal to
the median inter-event gap (motivated by the heavy-tailed gap distributions
of human activity), and screen-state bounding. A session breaks when the gap
to the previous behavior event is strictly greater than the threshold; with
the median threshold, a ``>=`` rule would split at least half of all gaps,
which defeats the point of gaps signalling relatedness.

Also provides the continuous maximum-likelihood tail-exponent fit used to
diagnose whether a user's gaps are heavy-tailed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence, Union

from .events import DataError, Event, EventKind, UserTrace

DEFAULT_MIN_GAPS = 5
DEFAULT_FALLBACK_MS = 60_000
DEFAULT_CLAMP_MIN_MS = 1_000
DEFAULT_XMIN_MS = 1_000


class OrphanPolicy(str, Enum):
    DROP = "drop"
    OWN_SESSION = "own_session"


@dataclass(frozen=True, slots=True)
class FixedThreshold:
    t_ms: int

    def __post_init__(self) -> None:
        if self.t_ms <= 0:
            raise ValueError("t_ms must be positive")


@dataclass(frozen=True, slots=True)
class IndividualMedian:
    min_gaps: int = DEFAULT_MIN_GAPS
    fallback_ms: int = DEFAULT_FALLBACK_MS
    clamp_min_ms: int = DEFAULT_CLAMP_MIN_MS

    def __post_init__(self) -> None:
        if self.min_gaps < 1:
            raise ValueError("min_gaps must be >= 1")
        if self.fallback_ms <= 0 or self.clamp_min_ms <= 0:
            raise ValueError("fallback_ms and clamp_min_ms must be positive")


@dataclass(frozen=True, slots=True)
class ScreenBounded:
    orphan_policy: OrphanPolicy = OrphanPolicy.DROP


ThresholdPolicy = Union[FixedThreshold, IndividualMedian, ScreenBounded]


@dataclass(frozen=True, slots=True)
class Session:
    """A maximal run of behavior events with no qualifying interruption.

    ``first_event`` and ``n_events`` index a contiguous range into the trace's
    behavior-event sequence. ``end_ts`` includes the last event's duration when
    one is present.
    """

    user_id: str
    index: int
    start_ts: int
    end_ts: int
    first_event: int
    n_events: int

    def events(self, trace: UserTrace) -> tuple[Event, ...]:
        return trace.behavior_events[self.first_event : self.first_event + self.n_events]


@dataclass(frozen=True)
class SessionSet:
    """Sessions of one user plus the policy and resolved threshold that made them."""

    user_id: str
    policy: ThresholdPolicy
    sessions: tuple[Session, ...]
    threshold_ms: int | None = None

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self):
        return iter(self.sessions)


def _close_session(
    user_id: str, index: int, behaviors: Sequence[Event], first: int, last: int
) -> Session:
    last_ev = behaviors[last]
    end_ts = last_ev.ts + (last_ev.duration_ms or 0)
    return Session(
        user_id=user_id,
        index=index,
        start_ts=behaviors[first].ts,
        end_ts=end_ts,
        first_event=first,
        n_events=last - first + 1,
    )


def sessionize_fixed(trace: UserTrace, t_ms: int) -> SessionSet:
    """Split behavior events into sessions at gaps strictly greater than t_ms."""
    if t_ms <= 0:
        raise ValueError("t_ms must be positive")
    behaviors = trace.behavior_events
    sessions: list[Session] = []
    if behaviors:
        first = 0
        for i in range(1, len(behaviors)):
            if behaviors[i].ts - behaviors[i - 1].ts > t_ms:
                sessions.append(_close_session(trace.user_id, len(sessions), behaviors, first, i - 1))
                first = i
        sessions.append(_close_session(trace.user_id, len(sessions), behaviors, first, len(behaviors) - 1))
    return SessionSet(
        user_id=trace.user_id,
        policy=FixedThreshold(t_ms=t_ms),
        sessions=tuple(sessions),
        threshold_ms=t_ms,
    )


def _median_half_up(values: Sequence[int]) -> int:
    ordered = sorted(values)
    n = len(ordered)
    if n % 2 == 1:
        return ordered[n // 2]
    a, b = ordered[n // 2 - 1], ordered[n // 2]
    return (a + b + 1) // 2  # round half-up on the .5 case


def individual_threshold(trace: UserTrace, policy: IndividualMedian = IndividualMedian()) -> int:
    """Per-user threshold: clamped median inter-event gap, with a fixed fallback
    when the trace has fewer than ``min_gaps`` gaps."""
    from .events import inter_event_intervals

    gaps = inter_event_intervals(trace)
    if len(gaps) < policy.min_gaps:
        return policy.fallback_ms
    return max(policy.clamp_min_ms, _median_half_up(gaps))


def sessionize_individual(
    trace: UserTrace, policy: IndividualMedian = IndividualMedian()
) -> SessionSet:
    threshold = individual_threshold(trace, policy)
    fixed = sessionize_fixed(trace, threshold)
    return SessionSet(
        user_id=trace.user_id,
        policy=policy,
        sessions=fixed.sessions,
        threshold_ms=threshold,
    )


def _screen_intervals(trace: UserTrace) -> list[tuple[int, int]]:
    """Maximal [on, off) intervals; an unmatched final ScreenOn extends past the trace."""
    intervals: list[tuple[int, int]] = []
    open_ts: int | None = None
    for ev in trace.events:
        if ev.kind is EventKind.SCREEN_ON and open_ts is None:
            open_ts = ev.ts
        elif ev.kind is EventKind.SCREEN_OFF and open_ts is not None:
            intervals.append((open_ts, ev.ts))
            open_ts = None
    if open_ts is not None:
        last_ts = trace.events[-1].ts
        intervals.append((open_ts, last_ts + 1))
    return intervals


def sessionize_screen(trace: UserTrace, policy: ScreenBounded = ScreenBounded()) -> SessionSet:
    """One session per screen-on interval that contains at least one behavior.

    Behaviors outside every interval are dropped or become singleton sessions,
    per the orphan policy.
    """
    if not any(e.kind is EventKind.SCREEN_ON for e in trace.events):
        raise DataError("screen data unavailable")
    behaviors = trace.behavior_events
    intervals = _screen_intervals(trace)

    sessions: list[Session] = []
    i = 0
    for on_ts, off_ts in intervals:
        while i < len(behaviors) and behaviors[i].ts < on_ts:
            if policy.orphan_policy is OrphanPolicy.OWN_SESSION:
                sessions.append(_close_session(trace.user_id, len(sessions), behaviors, i, i))
            i += 1
        first = i
        while i < len(behaviors) and behaviors[i].ts < off_ts:
            i += 1
        if i > first:
            sessions.append(_close_session(trace.user_id, len(sessions), behaviors, first, i - 1))
    while i < len(behaviors):
        if policy.orphan_policy is OrphanPolicy.OWN_SESSION:
            sessions.append(_close_session(trace.user_id, len(sessions), behaviors, i, i))
        i += 1

    return SessionSet(user_id=trace.user_id, policy=policy, sessions=tuple(sessions))


def sessionize(trace: UserTrace, policy: ThresholdPolicy) -> SessionSet:
    if isinstance(policy, FixedThreshold):
        return sessionize_fixed(trace, policy.t_ms)
    if isinstance(policy, IndividualMedian):
        return sessionize_individual(trace, policy)
    if isinstance(policy, ScreenBounded):
        return sessionize_screen(trace, policy)
    raise TypeError(f"unknown policy {policy!r}")


@dataclass(frozen=True, slots=True)
class PowerLawFit:
    alpha: float
    n_tail: int
    xmin_ms: float


def fit_powerlaw_exponent(
    gaps: Sequence[float], xmin_ms: float = DEFAULT_XMIN_MS, min_tail: int = 10
) -> PowerLawFit:
    """Continuous MLE of the tail exponent: alpha = 1 + n / sum(ln(x / xmin)).

    Only gaps >= xmin enter the fit. Requires at least ``min_tail`` qualifying
    gaps, and a non-degenerate tail (not all gaps equal to xmin).
    """
    if xmin_ms <= 0:
        raise ValueError("xmin_ms must be positive")
    tail = [g for g in gaps if g >= xmin_ms]
    if len(tail) < min_tail:
        raise DataError(f"insufficient tail sample: {len(tail)} gaps >= xmin, need {min_tail}")
    log_sum = math.fsum(math.log(g / xmin_ms) for g in tail)
    if log_sum <= 0.0:
        raise DataError("degenerate tail: all qualifying gaps equal xmin")
    alpha = 1.0 + len(tail) / log_sum
    return PowerLawFit(alpha=alpha, n_tail=len(tail), xmin_ms=xmin_ms)
