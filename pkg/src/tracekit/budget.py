"""Time-budget metrics: prevalence, allocation inequality, and time-as-variable
helpers (bucketed counts, intervention splits, hour-of-day profiles).

Bucketing and profiles work in user-local time via the trace's fixed UTC
offset. Week buckets start Monday 00:00 local; months are calendar months.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from enum import Enum
from typing import Mapping, Sequence

from .events import (
    MS_PER_DAY,
    DataError,
    Event,
    EventKind,
    UserTrace,
    local_datetime,
)


class GroupBy(str, Enum):
    BEHAVIOR = "behavior"
    CATEGORY = "category"


class TimeUnit(str, Enum):
    HOUR = "hour"
    DAY = "day"
    WEEK = "week"
    MONTH = "month"


class Metric(str, Enum):
    COUNT = "count"
    DURATION = "duration"


@dataclass(frozen=True, slots=True)
class KeyStats:
    total_duration_ms: int
    frequency: int


@dataclass(frozen=True)
class PrevalenceReport:
    by: GroupBy
    totals: Mapping[str, KeyStats]
    unique_behaviors: int
    total_duration_ms: int
    gini: float

    def to_json_dict(self) -> dict:
        return {
            "by": self.by.value,
            "totals": {
                k: {"total_duration_ms": v.total_duration_ms, "frequency": v.frequency}
                for k, v in sorted(self.totals.items())
            },
            "unique_behaviors": self.unique_behaviors,
            "total_duration_ms": self.total_duration_ms,
            "gini": self.gini,
        }


def gini_allocation(values: Sequence[float]) -> float:
    """Gini coefficient of a non-negative allocation vector.

    G = sum_ij |x_i - x_j| / (2 n sum_i x_i), in [0, 1 - 1/n]. Raises when
    every value is zero (no allocation to measure).
    """
    if not values:
        raise DataError("no allocation")
    if any(v < 0 for v in values):
        raise ValueError("allocation values must be non-negative")
    total = math.fsum(values)
    if total == 0:
        raise DataError("no allocation")
    n = len(values)
    ordered = sorted(values)
    weighted = math.fsum((i + 1) * x for i, x in enumerate(ordered))
    return 2.0 * weighted / (n * total) - (n + 1) / n


def prevalence_metrics(
    trace: UserTrace,
    by: GroupBy = GroupBy.BEHAVIOR,
    window: tuple[int, int] | None = None,
) -> PrevalenceReport:
    """Duration and frequency per behavior (or category) within [t0, t1).

    Durations must already be present or imputed; missing ones count as zero.
    An empty window yields a report of zeros with gini 0.
    """
    totals: dict[str, KeyStats] = {}
    for ev in trace.behavior_events:
        if window is not None and not (window[0] <= ev.ts < window[1]):
            continue
        if by is GroupBy.CATEGORY:
            if ev.category_id is None:
                raise DataError(f"uncategorized behavior {ev.behavior_id!r} at ts {ev.ts}")
            key = ev.category_id
        else:
            key = ev.behavior_id
        prev = totals.get(key, KeyStats(0, 0))
        totals[key] = KeyStats(
            total_duration_ms=prev.total_duration_ms + (ev.duration_ms or 0),
            frequency=prev.frequency + 1,
        )
    durations = [s.total_duration_ms for s in totals.values()]
    if durations and any(d > 0 for d in durations):
        gini = gini_allocation(durations)
    else:
        gini = 0.0
    return PrevalenceReport(
        by=by,
        totals=totals,
        unique_behaviors=len(totals),
        total_duration_ms=sum(durations),
        gini=gini,
    )


def _floor_to_unit(dt: datetime, unit: TimeUnit) -> datetime:
    if unit is TimeUnit.HOUR:
        return dt.replace(minute=0, second=0, microsecond=0)
    day = dt.replace(hour=0, minute=0, second=0, microsecond=0)
    if unit is TimeUnit.DAY:
        return day
    if unit is TimeUnit.WEEK:
        return day - timedelta(days=day.weekday())
    if unit is TimeUnit.MONTH:
        return day.replace(day=1)
    raise ValueError(f"unknown unit {unit!r}")


def _next_bucket(dt: datetime, unit: TimeUnit) -> datetime:
    if unit is TimeUnit.HOUR:
        return dt + timedelta(hours=1)
    if unit is TimeUnit.DAY:
        return dt + timedelta(days=1)
    if unit is TimeUnit.WEEK:
        return dt + timedelta(days=7)
    if dt.month == 12:
        return dt.replace(year=dt.year + 1, month=1)
    return dt.replace(month=dt.month + 1)


@dataclass(frozen=True)
class CountSeries:
    unit: TimeUnit
    points: tuple[tuple[int, int], ...]  # (bucket start epoch ms, count)
    tz_offset_min: int = 0

    def total(self) -> int:
        return sum(c for _, c in self.points)

    def to_csv(self) -> str:
        lines = ["bucket_start_iso,count"]
        for ts, count in self.points:
            iso = local_datetime(ts, self.tz_offset_min).isoformat()
            lines.append(f"{iso},{count}")
        return "\n".join(lines) + "\n"


def regroup_counts(trace: UserTrace, unit: TimeUnit) -> CountSeries:
    """Behavior-event counts per local-time bucket, with interior gaps
    emitted as zero-count buckets."""
    behaviors = trace.behavior_events
    if not behaviors:
        return CountSeries(unit=unit, points=(), tz_offset_min=trace.tz_offset_min)
    counts: dict[int, int] = {}
    for ev in behaviors:
        bucket = _floor_to_unit(local_datetime(ev.ts, trace.tz_offset_min), unit)
        key = int(bucket.timestamp() * 1000)
        counts[key] = counts.get(key, 0) + 1
    first_ms = min(counts)
    last_ms = max(counts)
    points: list[tuple[int, int]] = []
    cursor = local_datetime(first_ms, trace.tz_offset_min)
    while True:
        key = int(cursor.timestamp() * 1000)
        points.append((key, counts.get(key, 0)))
        if key >= last_ms:
            break
        cursor = _next_bucket(cursor, unit)
    return CountSeries(unit=unit, points=tuple(points), tz_offset_min=trace.tz_offset_min)


@dataclass(frozen=True, slots=True)
class InterventionSplit:
    pre: float
    post: float
    delta: float


def intervention_split(
    trace: UserTrace,
    t0: int,
    metric: Metric = Metric.COUNT,
    balance_window_ms: int | None = None,
) -> InterventionSplit:
    """Per-day activity rate before vs at/after t0, and their difference.

    Rates divide the side's metric by its observed span in fractional days
    (first pre event to t0; t0 to last post event), which keeps the split
    robust to ragged observation windows. With a balance window, both sides
    are truncated to that width around t0 first. A straddling event's
    duration is cut at t0.
    """
    behaviors = trace.behavior_events
    pre = [e for e in behaviors if e.ts < t0]
    post = [e for e in behaviors if e.ts >= t0]
    if balance_window_ms is not None:
        pre = [e for e in pre if e.ts >= t0 - balance_window_ms]
        post = [e for e in post if e.ts < t0 + balance_window_ms]
    if not pre or not post:
        raise DataError("intervention outside observation")

    def side_value(events: list[Event]) -> float:
        if metric is Metric.COUNT:
            return float(len(events))
        total = 0
        for e in events:
            dur = e.duration_ms or 0
            if e.ts < t0:
                dur = min(dur, t0 - e.ts)
            total += dur
        return float(total)

    pre_span = max(t0 - pre[0].ts, 1)
    post_span = max(post[-1].ts - t0, 1)
    pre_rate = side_value(pre) / (pre_span / MS_PER_DAY)
    post_rate = side_value(post) / (post_span / MS_PER_DAY)
    return InterventionSplit(pre=pre_rate, post=post_rate, delta=post_rate - pre_rate)


@dataclass(frozen=True)
class TemporalProfile:
    shares: tuple[float, ...]  # 24 hour-of-day shares summing to 1
    n_events: int

    def __post_init__(self) -> None:
        if len(self.shares) != 24:
            raise ValueError("profile must have 24 hour shares")


def temporal_profile(trace: UserTrace, window: tuple[int, int]) -> TemporalProfile:
    """Distribution of behavior events over local hour of day within [t0, t1)."""
    counts = [0] * 24
    n = 0
    for ev in trace.behavior_events:
        if not (window[0] <= ev.ts < window[1]):
            continue
        hour = local_datetime(ev.ts, trace.tz_offset_min).hour
        counts[hour] += 1
        n += 1
    if n == 0:
        raise DataError("empty profile")
    return TemporalProfile(shares=tuple(c / n for c in counts), n_events=n)
