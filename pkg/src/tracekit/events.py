"""Core event-log model: records, traces, ingestion, and interval extraction.

Timestamps are integer milliseconds since the Unix epoch (UTC) everywhere;
RFC 3339 strings are converted once at the parse boundary. Local-time
computations use a per-trace fixed UTC offset in minutes.

All types are immutable after construction and all operations are pure, so
distinct users can be processed in parallel and results merged in user_id
order.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from functools import cached_property
from typing import BinaryIO, Iterable, Iterator, Mapping

OTHER_CATEGORY = "__other__"
DEFAULT_DURATION_CAP_MS = 30 * 60 * 1000

MS_PER_DAY = 86_400_000


class DataError(ValueError):
    """Input data violates a contract (distinct from I/O or config errors)."""


class ParseError(DataError):
    """Raised in strict mode on the first malformed input record."""


class EventKind(str, Enum):
    BEHAVIOR = "behavior"
    SCREEN_ON = "screen_on"
    SCREEN_OFF = "screen_off"


class InputFormat(str, Enum):
    JSONL = "jsonl"
    CSV = "csv"


class UnmappedPolicy(str, Enum):
    REJECT = "reject"
    OTHER_BUCKET = "other"


@dataclass(frozen=True, slots=True)
class Event:
    """One timestamped record: a discrete behavior or a screen state change."""

    user_id: str
    ts: int
    behavior_id: str = ""
    category_id: str | None = None
    duration_ms: int | None = None
    kind: EventKind = EventKind.BEHAVIOR

    def __post_init__(self) -> None:
        if self.ts < 0:
            raise DataError(f"negative timestamp {self.ts}")
        if self.kind is EventKind.BEHAVIOR and not self.behavior_id:
            raise DataError("behavior event with empty behavior_id")
        if self.kind is not EventKind.BEHAVIOR and self.duration_ms is not None:
            raise DataError("duration_ms not allowed on screen events")
        if self.duration_ms is not None and self.duration_ms < 0:
            raise DataError(f"negative duration_ms {self.duration_ms}")

    @property
    def sort_key(self) -> tuple[int, str, str]:
        # Equal-timestamp ties break on (kind, behavior_id), lexicographic.
        return (self.ts, self.kind.value, self.behavior_id)

    def to_record(self) -> dict:
        rec: dict = {"user": self.user_id, "ts": self.ts, "behavior": self.behavior_id}
        if self.category_id is not None:
            rec["category"] = self.category_id
        if self.duration_ms is not None:
            rec["duration_ms"] = self.duration_ms
        rec["kind"] = self.kind.value
        return rec


@dataclass(frozen=True)
class UserTrace:
    """A user's time-ordered event stream.

    Events are sorted ascending by (ts, kind, behavior_id) and exact
    duplicates are not allowed; use :meth:`build` to normalize raw lists.
    """

    user_id: str
    events: tuple[Event, ...]
    tz_offset_min: int = 0

    def __post_init__(self) -> None:
        prev: Event | None = None
        for ev in self.events:
            if ev.user_id != self.user_id:
                raise DataError(f"event user {ev.user_id!r} in trace {self.user_id!r}")
            if prev is not None:
                if ev.sort_key < prev.sort_key:
                    raise DataError(f"trace {self.user_id!r} not sorted")
                if ev == prev:
                    raise DataError(f"duplicate event in trace {self.user_id!r}")
            prev = ev

    @classmethod
    def build(
        cls, user_id: str, events: Iterable[Event], tz_offset_min: int = 0
    ) -> "UserTrace":
        """Sort and deduplicate `events` into a normalized trace."""
        ordered = sorted(events, key=lambda e: e.sort_key)
        deduped: list[Event] = []
        for ev in ordered:
            if not deduped or ev != deduped[-1]:
                deduped.append(ev)
        return cls(user_id=user_id, events=tuple(deduped), tz_offset_min=tz_offset_min)

    @cached_property
    def behavior_events(self) -> tuple[Event, ...]:
        return tuple(e for e in self.events if e.kind is EventKind.BEHAVIOR)

    def shift(self, delta_ms: int) -> "UserTrace":
        return replace(
            self,
            events=tuple(replace(e, ts=e.ts + delta_ms) for e in self.events),
        )


@dataclass(frozen=True)
class Taxonomy:
    """Mapping from behavior ids to category ids, plus the category list."""

    mapping: Mapping[str, str]
    categories: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(set(self.categories)) != len(self.categories):
            raise DataError("duplicate category ids")
        known = set(self.categories)
        for behavior, cat in self.mapping.items():
            if cat not in known:
                raise DataError(f"category {cat!r} for behavior {behavior!r} not in category list")

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "Taxonomy":
        mapping: dict[str, str] = {}
        categories: list[str] = []
        for behavior, cat in pairs:
            if behavior in mapping and mapping[behavior] != cat:
                raise DataError(f"behavior {behavior!r} mapped to two categories")
            mapping[behavior] = cat
            if cat not in categories:
                categories.append(cat)
        return cls(mapping=mapping, categories=tuple(categories))

    @classmethod
    def from_csv(cls, stream: Iterable[str]) -> "Taxonomy":
        """Read behavior_id,category_id rows; a header row is skipped if present."""
        pairs: list[tuple[str, str]] = []
        for i, row in enumerate(csv.reader(stream)):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) < 2:
                raise DataError(f"taxonomy row {i + 1}: expected behavior_id,category_id")
            behavior, cat = row[0].strip(), row[1].strip()
            if i == 0 and (behavior, cat) == ("behavior_id", "category_id"):
                continue
            pairs.append((behavior, cat))
        return cls.from_pairs(pairs)


@dataclass(frozen=True)
class ParseReport:
    accepted: int
    rejected: int
    reasons: tuple[str, ...]  # first 100 rejection reasons

    def to_json_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": list(self.reasons),
        }


@dataclass(frozen=True)
class TraceCorpus:
    """Per-user traces keyed by user_id, in sorted user_id order."""

    traces: tuple[UserTrace, ...]
    source: str | None = None

    def __post_init__(self) -> None:
        ids = [t.user_id for t in self.traces]
        if ids != sorted(ids) or len(set(ids)) != len(ids):
            raise DataError("corpus traces must be unique and sorted by user_id")

    @classmethod
    def build(cls, traces: Iterable[UserTrace], source: str | None = None) -> "TraceCorpus":
        ordered = sorted(traces, key=lambda t: t.user_id)
        return cls(traces=tuple(ordered), source=source)

    def __iter__(self) -> Iterator[UserTrace]:
        return iter(self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def get(self, user_id: str) -> UserTrace | None:
        for t in self.traces:
            if t.user_id == user_id:
                return t
        return None

    def n_events(self) -> int:
        return sum(len(t.events) for t in self.traces)

    def to_jsonl(self) -> str:
        """Canonical serialization; parsing it back yields an identical corpus."""
        lines = []
        for trace in self.traces:
            for ev in trace.events:
                lines.append(json.dumps(ev.to_record(), ensure_ascii=False, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")


def _parse_ts(value: object) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, int):
        ms = value
    elif isinstance(value, str):
        text = value.strip()
        if not text:
            raise ValueError("empty timestamp")
        try:
            ms = int(text)
        except ValueError:
            dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
            if dt.tzinfo is None:
                raise ValueError(f"timestamp {text!r} has no UTC offset")
            ms = round(dt.timestamp() * 1000)
    else:
        raise ValueError(f"timestamp must be epoch ms or RFC 3339 string, got {value!r}")
    if ms < 0:
        raise ValueError(f"negative timestamp {ms}")
    return ms


def _record_to_event(rec: Mapping[str, object]) -> Event:
    user = rec.get("user")
    if not isinstance(user, str) or not user:
        raise ValueError("missing user_id")
    if "ts" not in rec or rec["ts"] is None:
        raise ValueError("missing ts")
    ts = _parse_ts(rec["ts"])

    kind_raw = rec.get("kind", EventKind.BEHAVIOR.value)
    try:
        kind = EventKind(kind_raw)
    except ValueError:
        raise ValueError(f"unknown kind {kind_raw!r}")

    behavior = rec.get("behavior") or ""
    if not isinstance(behavior, str):
        raise ValueError("behavior must be a string")
    if kind is EventKind.BEHAVIOR and not behavior:
        raise ValueError("missing behavior for behavior event")

    category = rec.get("category")
    if category is not None and not isinstance(category, str):
        raise ValueError("category must be a string")

    duration = rec.get("duration_ms")
    if duration is not None:
        if isinstance(duration, bool) or not isinstance(duration, int):
            raise ValueError("duration_ms must be an integer")
        if duration < 0:
            raise ValueError("negative duration_ms")
        if kind is not EventKind.BEHAVIOR:
            raise ValueError("duration_ms not allowed on screen events")

    return Event(
        user_id=user,
        ts=ts,
        behavior_id=behavior,
        category_id=category or None,
        kind=kind,
        duration_ms=duration,
    )


def _iter_jsonl_records(text_lines: Iterable[str]) -> Iterator[tuple[int, Mapping | str]]:
    for lineno, line in enumerate(text_lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            yield lineno, f"invalid JSON: {exc.msg}"
            continue
        if not isinstance(obj, dict):
            yield lineno, "record is not a JSON object"
            continue
        yield lineno, obj


_CSV_COLUMNS = ("user", "ts", "behavior", "category", "duration_ms", "kind")


def _iter_csv_records(text: io.TextIOBase) -> Iterator[tuple[int, Mapping | str]]:
    reader = csv.DictReader(text)
    for lineno, row in enumerate(reader, start=2):
        rec: dict[str, object] = {}
        for col in _CSV_COLUMNS:
            raw = row.get(col)
            if raw is None or raw == "":
                continue
            if col == "duration_ms":
                try:
                    rec[col] = int(raw)
                except ValueError:
                    yield lineno, f"duration_ms {raw!r} is not an integer"
                    rec = {}
                    break
            else:
                rec[col] = raw
        if rec:
            yield lineno, rec


def parse_events(
    raw: bytes | BinaryIO | str,
    fmt: InputFormat = InputFormat.JSONL,
    strict: bool = False,
    default_tz_offset_min: int = 0,
    source: str | None = None,
) -> tuple[TraceCorpus, ParseReport]:
    """Decode a raw record stream into a normalized corpus plus a parse report.

    Well-formed records become events grouped per user, sorted, and exactly
    deduplicated. Malformed records are skipped and counted (lenient mode) or
    abort on first occurrence (strict mode). The report keeps the first 100
    rejection reasons.
    """
    if isinstance(raw, bytes):
        text = raw.decode("utf-8")
    elif isinstance(raw, str):
        text = raw
    else:
        text = raw.read().decode("utf-8")

    if fmt is InputFormat.JSONL:
        records = _iter_jsonl_records(text.splitlines())
    elif fmt is InputFormat.CSV:
        records = _iter_csv_records(io.StringIO(text))
    else:
        raise ValueError(f"unknown format {fmt!r}")

    per_user: dict[str, list[Event]] = {}
    accepted = 0
    rejected = 0
    reasons: list[str] = []

    for lineno, item in records:
        if isinstance(item, str):
            reason = item
        else:
            try:
                event = _record_to_event(item)
            except ValueError as exc:
                reason = str(exc)
            else:
                per_user.setdefault(event.user_id, []).append(event)
                accepted += 1
                continue
        rejected += 1
        if len(reasons) < 100:
            reasons.append(f"line {lineno}: {reason}")
        if strict:
            raise ParseError(f"line {lineno}: {reason}")

    traces = [
        UserTrace.build(uid, evs, tz_offset_min=default_tz_offset_min)
        for uid, evs in per_user.items()
    ]
    corpus = TraceCorpus.build(traces, source=source)
    return corpus, ParseReport(accepted=accepted, rejected=rejected, reasons=tuple(reasons))


class UnmappedBehaviorError(DataError):
    def __init__(self, behavior_id: str):
        super().__init__(f"behavior_id {behavior_id!r} has no category in the taxonomy")
        self.behavior_id = behavior_id


def attach_categories(
    corpus: TraceCorpus,
    taxonomy: Taxonomy,
    unmapped_policy: UnmappedPolicy = UnmappedPolicy.OTHER_BUCKET,
) -> TraceCorpus:
    """Assign a category to every behavior event via the taxonomy.

    Unmapped behaviors either go to the reserved ``__other__`` bucket or raise,
    depending on policy. Screen events are left untouched.
    """
    new_traces = []
    for trace in corpus:
        new_events = []
        for ev in trace.events:
            if ev.kind is not EventKind.BEHAVIOR:
                new_events.append(ev)
                continue
            cat = taxonomy.mapping.get(ev.behavior_id)
            if cat is None:
                if unmapped_policy is UnmappedPolicy.REJECT:
                    raise UnmappedBehaviorError(ev.behavior_id)
                cat = OTHER_CATEGORY
            new_events.append(replace(ev, category_id=cat))
        new_traces.append(replace(trace, events=tuple(new_events)))
    return TraceCorpus(traces=tuple(new_traces), source=corpus.source)


def inter_event_intervals(trace: UserTrace) -> list[int]:
    """Gaps (ms) between consecutive behavior events; screen events excluded.

    Returns n-1 values for n behavior events (empty below 2 events). Zero-length
    gaps from simultaneous events are retained.
    """
    behaviors = trace.behavior_events
    return [behaviors[i + 1].ts - behaviors[i].ts for i in range(len(behaviors) - 1)]


def impute_durations(trace: UserTrace, cap_ms: int = DEFAULT_DURATION_CAP_MS) -> UserTrace:
    """Fill missing behavior durations with the gap to the next behavior, capped.

    The last behavior event of a trace gets the cap. Events with explicit
    durations are unchanged.
    """
    if cap_ms <= 0:
        raise ValueError("cap_ms must be positive")
    behaviors = trace.behavior_events
    durations: list[int | None] = []
    for i, ev in enumerate(behaviors):
        if ev.duration_ms is not None:
            durations.append(None)  # keep as-is
        elif i + 1 < len(behaviors):
            durations.append(min(behaviors[i + 1].ts - ev.ts, cap_ms))
        else:
            durations.append(cap_ms)
    new_events: list[Event] = []
    b = 0
    for ev in trace.events:
        if ev.kind is EventKind.BEHAVIOR:
            filled = durations[b]
            b += 1
            if filled is not None:
                ev = replace(ev, duration_ms=filled)
        new_events.append(ev)
    return replace(trace, events=tuple(new_events))


def local_datetime(ts_ms: int, tz_offset_min: int) -> datetime:
    """Epoch ms to an aware datetime in the trace's fixed UTC offset."""
    from datetime import timedelta

    return datetime.fromtimestamp(ts_ms / 1000, tz=timezone(timedelta(minutes=tz_offset_min)))
