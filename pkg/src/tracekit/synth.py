"""Deterministic seeded generators of synthetic traces with known ground
truth, for verifying every pipeline stage.

All generators draw from ``random.Random`` (Mersenne Twister, whose stream is
stable across Python releases) and apply explicit inverse-transform sampling,
so a (spec, seed) pair pins the output exactly. Multi-user corpora derive
per-user seeds as seed XOR user ordinal.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .events import MS_PER_DAY, Event, EventKind, Taxonomy, TraceCorpus, UserTrace

DEFAULT_STEP_MS = 1000


@dataclass(frozen=True)
class ParetoGaps:
    """Trace with i.i.d. Pareto inter-event gaps and optional category
    stickiness: with probability ``stickiness`` the next behavior stays in the
    previous event's category."""

    alpha: float
    xmin_ms: int = 1000
    n_events: int = 1000
    behavior_mix: tuple[tuple[str, float], ...] = (("a", 1.0),)
    stickiness: float = 0.0
    category_of: Mapping[str, str] | None = None  # default: behavior is its own category
    user_id: str = "u0"
    tz_offset_min: int = 0
    start_ts: int = 0

    def __post_init__(self) -> None:
        if self.alpha <= 1:
            raise ValueError("alpha must exceed 1")
        if self.xmin_ms <= 0:
            raise ValueError("xmin_ms must be positive")
        if self.n_events < 1:
            raise ValueError("n_events must be >= 1")
        if not (0 <= self.stickiness < 1):
            raise ValueError("stickiness must be in [0, 1)")
        total = math.fsum(p for _, p in self.behavior_mix)
        if abs(total - 1.0) > 1e-9 or any(p <= 0 for _, p in self.behavior_mix):
            raise ValueError("behavior_mix must be positive and sum to 1")

    def category(self, behavior: str) -> str:
        if self.category_of is None:
            return behavior
        return self.category_of[behavior]

    def taxonomy(self) -> Taxonomy:
        return Taxonomy.from_pairs((b, self.category(b)) for b, _ in self.behavior_mix)


@dataclass(frozen=True)
class PriorityQueue:
    """Task queue of fixed length: each step executes the highest-priority
    task with probability p, otherwise a uniformly random one; the executed
    task's waiting time (in steps) is recorded and a fresh random-priority
    task replaces it."""

    L: int = 2
    p: float = 0.5
    steps: int = 10_000
    step_ms: int = DEFAULT_STEP_MS
    user_id: str = "u0"
    start_ts: int = 0

    def __post_init__(self) -> None:
        if self.L < 2:
            raise ValueError("L must be >= 2")
        if not (0 < self.p < 1):
            raise ValueError("p must be in (0, 1)")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass(frozen=True)
class Scheduled:
    """One session per daily slot: fixed minute-of-day starts (optionally
    jittered), a burst of closely spaced events per session, and categories
    following a per-slot script."""

    daily_slots: tuple[int, ...]
    n_days: int = 14
    events_per_session: int = 4
    category_script: str | tuple[str, ...] = "A"
    jitter_min: int = 0
    intra_gap_ms: int = 200
    start_day: int = 0  # days since epoch, local
    user_id: str = "u0"
    tz_offset_min: int = 0

    def __post_init__(self) -> None:
        if not self.daily_slots:
            raise ValueError("daily_slots must be non-empty")
        for slot in self.daily_slots:
            if not (0 <= slot < 1440):
                raise ValueError(f"slot {slot} outside 0..1439")
        if self.n_days < 1 or self.events_per_session < 1:
            raise ValueError("n_days and events_per_session must be >= 1")
        if self.jitter_min < 0:
            raise ValueError("jitter_min must be >= 0")
        if self.intra_gap_ms <= 0:
            raise ValueError("intra_gap_ms must be positive")
        scripts = self.scripts()
        if len(scripts) != len(self.daily_slots):
            raise ValueError("need one category script per slot")
        if any(not s for s in scripts):
            raise ValueError("category scripts must be non-empty")
        earliest_local_min = self.start_day * 1440 + min(self.daily_slots) - self.jitter_min
        if earliest_local_min * 60_000 - self.tz_offset_min * 60_000 < 0:
            raise ValueError("schedule starts before the epoch; raise start_day")

    def scripts(self) -> tuple[str, ...]:
        if isinstance(self.category_script, str):
            return tuple(self.category_script for _ in self.daily_slots)
        return tuple(self.category_script)

    def taxonomy(self) -> Taxonomy:
        symbols = sorted({ch for script in self.scripts() for ch in script})
        return Taxonomy.from_pairs((s, s) for s in symbols)


@dataclass(frozen=True)
class GroundTruth:
    alpha: float | None = None
    stickiness: float | None = None
    expected_assortative_share: float | None = None
    slots: tuple[int, ...] | None = None
    expected_rrs: float | None = None  # None when jitter makes it not guaranteed
    n_sessions: int | None = None
    taxonomy: Taxonomy | None = None

    def to_json_dict(self) -> dict:
        out: dict = {}
        for key in (
            "alpha",
            "stickiness",
            "expected_assortative_share",
            "expected_rrs",
            "n_sessions",
        ):
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        if self.slots is not None:
            out["slots"] = list(self.slots)
        return out


def pareto_sample(rng: random.Random, alpha: float, xmin: float) -> float:
    """Inverse-transform draw from the continuous power law with density
    exponent alpha: x = xmin * (1 - U) ** (-1 / (alpha - 1))."""
    return xmin * (1.0 - rng.random()) ** (-1.0 / (alpha - 1.0))


def _categorical(rng: random.Random, items: Sequence[str], cumulative: Sequence[float]) -> str:
    u = rng.random() * cumulative[-1]
    return items[min(bisect_right(cumulative, u), len(items) - 1)]


def gen_pareto_trace(spec: ParetoGaps, seed: int = 0) -> tuple[UserTrace, GroundTruth]:
    rng = random.Random(seed)
    behaviors = [b for b, _ in spec.behavior_mix]
    cum: list[float] = []
    acc = 0.0
    for _, p in spec.behavior_mix:
        acc += p
        cum.append(acc)
    by_category: dict[str, tuple[list[str], list[float]]] = {}
    for b, p in spec.behavior_mix:
        cat = spec.category(b)
        items, weights = by_category.setdefault(cat, ([], []))
        items.append(b)
        weights.append((weights[-1] if weights else 0.0) + p)

    events: list[Event] = []
    ts = spec.start_ts
    prev_cat: str | None = None
    for i in range(spec.n_events):
        if i > 0:
            ts += round(pareto_sample(rng, spec.alpha, spec.xmin_ms))
        if prev_cat is not None and rng.random() < spec.stickiness:
            items, weights = by_category[prev_cat]
            behavior = _categorical(rng, items, weights)
        else:
            behavior = _categorical(rng, behaviors, cum)
        prev_cat = spec.category(behavior)
        events.append(
            Event(
                user_id=spec.user_id,
                ts=ts,
                behavior_id=behavior,
                category_id=prev_cat,
                kind=EventKind.BEHAVIOR,
            )
        )
    trace = UserTrace.build(spec.user_id, events, tz_offset_min=spec.tz_offset_min)
    mix_by_cat: dict[str, float] = {}
    for b, p in spec.behavior_mix:
        cat = spec.category(b)
        mix_by_cat[cat] = mix_by_cat.get(cat, 0.0) + p
    collision = math.fsum(p * p for p in mix_by_cat.values())
    truth = GroundTruth(
        alpha=spec.alpha,
        stickiness=spec.stickiness,
        expected_assortative_share=spec.stickiness + (1 - spec.stickiness) * collision,
        taxonomy=spec.taxonomy(),
    )
    return trace, truth


@dataclass(frozen=True)
class PriorityQueueRun:
    waits: tuple[int, ...]  # steps between a task's arrival and its execution
    trace: UserTrace


def gen_priority_queue(spec: PriorityQueue, seed: int = 0) -> PriorityQueueRun:
    rng = random.Random(seed)
    priorities = [rng.random() for _ in range(spec.L)]
    arrivals = [0] * spec.L
    waits: list[int] = []
    events: list[Event] = []
    for step in range(1, spec.steps + 1):
        if rng.random() < spec.p:
            idx = max(range(spec.L), key=priorities.__getitem__)
        else:
            idx = rng.randrange(spec.L)
        waits.append(step - arrivals[idx])
        events.append(
            Event(
                user_id=spec.user_id,
                ts=spec.start_ts + step * spec.step_ms,
                behavior_id="task",
                kind=EventKind.BEHAVIOR,
            )
        )
        priorities[idx] = rng.random()
        arrivals[idx] = step
    trace = UserTrace.build(spec.user_id, events)
    return PriorityQueueRun(waits=tuple(waits), trace=trace)


def gen_scheduled_trace(spec: Scheduled, seed: int = 0) -> tuple[UserTrace, GroundTruth]:
    rng = random.Random(seed)
    scripts = spec.scripts()
    tz_shift_ms = spec.tz_offset_min * 60_000
    events: list[Event] = []
    for day in range(spec.n_days):
        day_start_local = (spec.start_day + day) * MS_PER_DAY
        for slot_idx, slot_min in enumerate(spec.daily_slots):
            jitter = rng.randint(-spec.jitter_min, spec.jitter_min) if spec.jitter_min else 0
            start_local = day_start_local + (slot_min + jitter) * 60_000
            script = scripts[slot_idx]
            for k in range(spec.events_per_session):
                cat = script[k % len(script)]
                events.append(
                    Event(
                        user_id=spec.user_id,
                        ts=start_local - tz_shift_ms + k * spec.intra_gap_ms,
                        behavior_id=cat,
                        category_id=cat,
                        kind=EventKind.BEHAVIOR,
                    )
                )
    trace = UserTrace.build(spec.user_id, events, tz_offset_min=spec.tz_offset_min)
    truth = GroundTruth(
        slots=spec.daily_slots,
        expected_rrs=1.0 if (spec.jitter_min == 0 and spec.n_days > 1) else None,
        n_sessions=spec.n_days * len(spec.daily_slots),
        taxonomy=spec.taxonomy(),
    )
    return trace, truth


def waiting_time_tail_slope(
    waits: Sequence[int], tau_min: float = 10.0, bins_per_decade: int = 2
) -> float:
    """Log-log slope of the empirical waiting-time density over the tail.

    Waits >= tau_min are histogrammed into log-spaced bins; the slope is the
    least-squares fit of log density against log bin center over non-empty
    bins. A pdf proportional to tau**-1 yields a slope near -1.
    """
    import numpy as np

    tail = np.asarray([w for w in waits if w >= tau_min], dtype=float)
    if tail.size < 10:
        raise ValueError("too few tail samples for a slope fit")
    hi = tail.max()
    n_bins = max(int(math.ceil(math.log10(hi / tau_min) * bins_per_decade)), 2)
    edges = np.logspace(math.log10(tau_min), math.log10(hi * 1.0001), n_bins + 1)
    counts, _ = np.histogram(tail, bins=edges)
    widths = np.diff(edges)
    centers = np.sqrt(edges[:-1] * edges[1:])
    mask = counts > 0
    density = counts[mask] / widths[mask]
    slope = np.polyfit(np.log(centers[mask]), np.log(density), 1)[0]
    return float(slope)


def survival_decades(waits: Sequence[int]) -> float:
    """How many base-10 decades the observed waiting times span."""
    lo = min(waits)
    hi = max(waits)
    if lo <= 0:
        raise ValueError("waits must be positive")
    return math.log10(hi / lo)


def derive_user_seed(seed: int, ordinal: int) -> int:
    return seed ^ ordinal


def scheduled_corpus(
    base: Scheduled, n_users: int, seed: int = 0
) -> tuple[TraceCorpus, GroundTruth]:
    """Corpus of identical-schedule users with per-user derived seeds."""
    from dataclasses import replace

    traces = []
    truth: GroundTruth | None = None
    for ordinal in range(n_users):
        spec = replace(base, user_id=f"u{ordinal:04d}")
        trace, truth = gen_scheduled_trace(spec, derive_user_seed(seed, ordinal))
        traces.append(trace)
    assert truth is not None
    return TraceCorpus.build(traces), truth
