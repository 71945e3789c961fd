from __future__ import annotations

from tracekit import Event, EventKind, UserTrace


def make_trace(
    ts_list,
    behaviors=None,
    categories=None,
    durations=None,
    user="u",
    tz_offset_min=0,
) -> UserTrace:
    """Build a behavior-only trace from parallel lists, defaulting to one
    behavior id."""
    events = []
    for i, ts in enumerate(ts_list):
        events.append(
            Event(
                user_id=user,
                ts=ts,
                behavior_id=behaviors[i] if behaviors else "x",
                category_id=categories[i] if categories else None,
                duration_ms=durations[i] if durations else None,
                kind=EventKind.BEHAVIOR,
            )
        )
    return UserTrace.build(user, events, tz_offset_min=tz_offset_min)
