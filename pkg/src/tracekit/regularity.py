"""Macro-layer analytics: ordered session labels per local day (or day-hour),
the rate of repeated sessions across days, and the hour-of-day rhythm of
trajectory complexity split by weekday/weekend.

Sessions are anchored to the local time of their start; a session starting
23:59 belongs to that day no matter when it ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from typing import Mapping, Sequence

from .events import DataError, UserTrace, local_datetime
from .sequences import CategorySequence, DSS, PatternSet, complexity_index, turbulence
from .sessions import Session, SessionSet

DEFAULT_SLOT_WIDTH_MIN = 60
DEFAULT_WEEKEND = frozenset({5, 6})  # Monday=0 .. Sunday=6
DEFAULT_MIN_CELL_N = 5


class Scope(str, Enum):
    USER_DAY = "user_day"
    USER_DAY_HOUR = "user_day_hour"


class LabelingMode(str, Enum):
    DOMINANT_CATEGORY = "dominant_category"
    MEDOID_INDEX = "medoid_index"


class ComplexityMeasure(str, Enum):
    COMPOSITE_INDEX = "composite"
    TURBULENCE = "turbulence"


@dataclass(frozen=True)
class Trajectory:
    user_id: str
    day: date
    labels: tuple[str, ...]
    hour: int | None = None  # set for day-hour scope

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("trajectory labels must be non-empty")


def _dominant_category(session: Session, trace: UserTrace) -> str:
    """Category with the largest total duration; ties go to the category that
    occurs earliest in the session."""
    totals: dict[str, int] = {}
    first_pos: dict[str, int] = {}
    for pos, ev in enumerate(session.events(trace)):
        if ev.category_id is None:
            raise DataError(f"uncategorized behavior {ev.behavior_id!r} at ts {ev.ts}")
        totals[ev.category_id] = totals.get(ev.category_id, 0) + (ev.duration_ms or 0)
        first_pos.setdefault(ev.category_id, pos)
    best = max(totals, key=lambda c: (totals[c], -first_pos[c]))
    return best


def _session_label(
    session: Session,
    trace: UserTrace,
    labeling: LabelingMode,
    pattern_set: PatternSet | None,
) -> str:
    if labeling is LabelingMode.MEDOID_INDEX:
        if pattern_set is None:
            raise ValueError("medoid labeling requires a pattern set")
        medoid = pattern_set.assignment.get(session.index)
        if medoid is not None:
            return f"p{medoid}"
        # Single-category sessions carry no pattern; fall back to that category.
    return _dominant_category(session, trace)


def build_trajectories(
    sessions: SessionSet,
    trace: UserTrace,
    scope: Scope = Scope.USER_DAY,
    labeling: LabelingMode = LabelingMode.DOMINANT_CATEGORY,
    pattern_set: PatternSet | None = None,
) -> list[Trajectory]:
    """Group session labels by local day (and hour, for the hour scope) of
    session start, in start order."""
    groups: dict[tuple, list[str]] = {}
    for session in sessions:
        dt = local_datetime(session.start_ts, trace.tz_offset_min)
        key: tuple
        if scope is Scope.USER_DAY:
            key = (dt.date(),)
        else:
            key = (dt.date(), dt.hour)
        label = _session_label(session, trace, labeling, pattern_set)
        groups.setdefault(key, []).append(label)
    out = []
    for key in sorted(groups):
        out.append(
            Trajectory(
                user_id=trace.user_id,
                day=key[0],
                hour=key[1] if scope is Scope.USER_DAY_HOUR else None,
                labels=tuple(groups[key]),
            )
        )
    return out


def trajectory_complexity(
    t: Trajectory, measure: ComplexityMeasure = ComplexityMeasure.COMPOSITE_INDEX
) -> float:
    """Complexity of the label sequence.

    Turbulence run-collapses the labels and treats each run as a unit-duration
    spell, so only the label ordering matters.
    """
    alphabet = tuple(sorted(set(t.labels)))
    if measure is ComplexityMeasure.COMPOSITE_INDEX:
        return complexity_index(CategorySequence(symbols=t.labels, alphabet=alphabet))
    collapsed: list[str] = []
    for label in t.labels:
        if not collapsed or collapsed[-1] != label:
            collapsed.append(label)
    return turbulence(DSS(spells=tuple((c, 1.0) for c in collapsed)))


@dataclass(frozen=True)
class RRSRecord:
    user_id: str
    rrs: float
    n_sessions: int
    n_repeated: int
    slot_width_min: int
    n_observed_days: int


def rrs(
    sessions: SessionSet,
    tz_offset_min: int = 0,
    slot_width_min: int = DEFAULT_SLOT_WIDTH_MIN,
    consecutive_only: bool = False,
) -> RRSRecord | None:
    """Rate of repeated sessions: the share of sessions whose start-time slot
    is also occupied on at least one other observed local day.

    ``consecutive_only`` restricts "other day" to adjacent calendar days.
    Returns None when there are no sessions.
    """
    if 1440 % slot_width_min != 0:
        raise ValueError("slot_width_min must divide 1440")
    if not sessions.sessions:
        return None
    placements: list[tuple[date, int]] = []
    for session in sessions:
        dt = local_datetime(session.start_ts, tz_offset_min)
        slot = (dt.hour * 60 + dt.minute) // slot_width_min
        placements.append((dt.date(), slot))
    by_slot: dict[int, set[date]] = {}
    for day, slot in placements:
        by_slot.setdefault(slot, set()).add(day)
    repeated = 0
    for day, slot in placements:
        days = by_slot[slot]
        if consecutive_only:
            hit = (day + timedelta(days=1) in days) or (day - timedelta(days=1) in days)
        else:
            hit = len(days) > 1
        if hit:
            repeated += 1
    observed_days = {day for day, _ in placements}
    return RRSRecord(
        user_id=sessions.user_id,
        rrs=repeated / len(placements),
        n_sessions=len(placements),
        n_repeated=repeated,
        slot_width_min=slot_width_min,
        n_observed_days=len(observed_days),
    )


@dataclass(frozen=True)
class RhythmCell:
    n: int
    mean: float | None
    std: float | None


@dataclass(frozen=True)
class RhythmReport:
    cells: Mapping[tuple[int, str], RhythmCell]  # (hour, "weekday"|"weekend")
    min_cell_n: int

    def to_csv(self) -> str:
        lines = ["hour,daytype,mean,std,n"]
        for hour in range(24):
            for daytype in ("weekday", "weekend"):
                cell = self.cells.get((hour, daytype), RhythmCell(0, None, None))
                mean = "" if cell.mean is None else repr(cell.mean)
                std = "" if cell.std is None else repr(cell.std)
                lines.append(f"{hour},{daytype},{mean},{std},{cell.n}")
        return "\n".join(lines) + "\n"


def circadian_rhythm(
    trajectories: Sequence[Trajectory],
    complexities: Sequence[float],
    weekend_days: frozenset[int] = DEFAULT_WEEKEND,
    min_cell_n: int = DEFAULT_MIN_CELL_N,
) -> RhythmReport:
    """Mean/std of trajectory complexity per (hour of day, weekday/weekend).

    Requires hour-scoped trajectories. Cells with fewer than ``min_cell_n``
    trajectories keep their count but report no mean/std.
    """
    if len(trajectories) != len(complexities):
        raise ValueError("trajectories and complexities must be parallel")
    buckets: dict[tuple[int, str], list[float]] = {}
    for t, c in zip(trajectories, complexities):
        if t.hour is None:
            raise DataError("scope mismatch: rhythm needs day-hour trajectories")
        daytype = "weekend" if t.day.weekday() in weekend_days else "weekday"
        buckets.setdefault((t.hour, daytype), []).append(c)
    cells: dict[tuple[int, str], RhythmCell] = {}
    for key, values in buckets.items():
        n = len(values)
        if n >= min_cell_n:
            mean = math.fsum(values) / n
            var = math.fsum((v - mean) ** 2 for v in values) / n
            cells[key] = RhythmCell(n=n, mean=mean, std=math.sqrt(var))
        else:
            cells[key] = RhythmCell(n=n, mean=None, std=None)
    return RhythmReport(cells=cells, min_cell_n=min_cell_n)
