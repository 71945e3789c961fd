"""Batch command-line surface for the full pipeline.

Subcommands: ingest, sessionize, budget, transitions, patterns, rrs, rhythm,
pipeline, synth. All parameters live in a TOML config file, overridable by
flags; every pipeline run writes a manifest.json capturing the resolved
parameters and seed, and reruns from the same inputs and manifest are
byte-identical (no wall-clock data is ever written).

Exit codes: 0 ok, 1 I/O or spec error, 2 data validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

try:
    import tomllib  # py311+
except ModuleNotFoundError:  # pragma: no cover - py310 fallback
    import tomli as tomllib

from . import __version__
from .budget import GroupBy, TimeUnit, prevalence_metrics, regroup_counts
from .events import (
    DEFAULT_DURATION_CAP_MS,
    OTHER_CATEGORY,
    DataError,
    InputFormat,
    ParseError,
    Taxonomy,
    TraceCorpus,
    UnmappedPolicy,
    UserTrace,
    attach_categories,
    impute_durations,
    parse_events,
)
from .regularity import (
    ComplexityMeasure,
    LabelingMode,
    Scope,
    build_trajectories,
    circadian_rhythm,
    rrs,
    trajectory_complexity,
)
from .sequences import (
    EditCosts,
    EncodeMode,
    PatternParams,
    PatternSet,
    encode_session,
    global_pattern_table,
    representative_patterns,
)
from .sessions import (
    FixedThreshold,
    IndividualMedian,
    OrphanPolicy,
    ScreenBounded,
    SessionSet,
    ThresholdPolicy,
    sessionize,
)
from .transitions import count_transitions, pool_matrices, transition_rates
from . import synth as synthmod

T = TypeVar("T")


@dataclass(frozen=True)
class RunConfig:
    input: str | None = None
    format: str = "jsonl"
    taxonomy: str | None = None
    out: str = "out"
    strict: bool = False
    tz_offset_min: int = 0
    unmapped: str = "other"  # other | reject
    duration_cap_ms: int = DEFAULT_DURATION_CAP_MS
    session_policy: str = "individual"  # fixed | individual | screen
    t_ms: int = 60_000
    min_gaps: int = 5
    fallback_ms: int = 60_000
    clamp_min_ms: int = 1_000
    orphan_policy: str = "drop"
    sub: float = 2.0
    indel: float = 1.0
    cut_theta: float = 0.3
    min_distinct: int = 2
    max_sessions: int = 20_000
    slot_width_min: int = 60
    weekend: tuple[int, ...] = (5, 6)
    measure: str = "composite"
    min_cell_n: int = 5
    seed: int = 0
    threads: int = 0  # 0 = machine parallelism

    def threshold_policy(self) -> ThresholdPolicy:
        if self.session_policy == "fixed":
            return FixedThreshold(t_ms=self.t_ms)
        if self.session_policy == "individual":
            return IndividualMedian(
                min_gaps=self.min_gaps,
                fallback_ms=self.fallback_ms,
                clamp_min_ms=self.clamp_min_ms,
            )
        if self.session_policy == "screen":
            return ScreenBounded(orphan_policy=OrphanPolicy(self.orphan_policy))
        raise ValueError(f"unknown session policy {self.session_policy!r}")

    def pattern_params(self) -> PatternParams:
        return PatternParams(
            cut_theta=self.cut_theta,
            costs=EditCosts(sub=self.sub, indel=self.indel),
            min_distinct_categories=self.min_distinct,
            max_sessions=self.max_sessions,
            seed=self.seed,
        )


_SECTION_FIELDS = {
    "io": ("input", "format", "taxonomy", "out", "strict", "tz_offset_min"),
    "categories": ("unmapped",),
    "durations": ("duration_cap_ms",),
    "sessionize": (
        "session_policy",
        "t_ms",
        "min_gaps",
        "fallback_ms",
        "clamp_min_ms",
        "orphan_policy",
    ),
    "patterns": ("sub", "indel", "cut_theta", "min_distinct", "max_sessions"),
    "regularity": ("slot_width_min", "weekend", "measure", "min_cell_n"),
    "run": ("seed", "threads"),
}


def load_config(path: str | None) -> RunConfig:
    config = RunConfig()
    if path is None:
        return config
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    updates: dict = {}
    for section, fields in _SECTION_FIELDS.items():
        table = data.get(section, {})
        if not isinstance(table, dict):
            raise ValueError(f"config section [{section}] must be a table")
        for key, value in table.items():
            if key == "policy" and section == "sessionize":
                key = "session_policy"
            if key not in fields and not (key == "session_policy" and section == "sessionize"):
                raise ValueError(f"unknown config key {section}.{key}")
            if key == "weekend":
                value = tuple(int(v) for v in value)
            updates[key] = value
    return replace(config, **updates)


def _apply_flag_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    updates: dict = {}
    for flag, key in (
        ("out", "out"),
        ("seed", "seed"),
        ("threads", "threads"),
        ("input", "input"),
        ("taxonomy", "taxonomy"),
        ("format", "format"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    if getattr(args, "strict", False):
        updates["strict"] = True
    return replace(config, **updates) if updates else config


def _map_users(
    fn: Callable[[UserTrace], T], traces: Sequence[UserTrace], threads: int
) -> list[T]:
    """Apply fn per user, optionally on a thread pool; result order follows
    the (sorted) trace order, so outputs do not depend on the thread count."""
    if threads == 0:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(traces) <= 1:
        return [fn(t) for t in traces]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, traces))


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _json_text(obj: object) -> str:
    return json.dumps(obj, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


class _Stages:
    """Shared stage runner: each product is computed once per process run."""

    def __init__(self, config: RunConfig):
        self.config = config
        self._corpus: TraceCorpus | None = None
        self._report = None
        self._taxonomy: Taxonomy | None = None
        self._session_sets: list[SessionSet] | None = None
        self._pattern_sets: list[PatternSet] | None = None

    def corpus(self) -> TraceCorpus:
        if self._corpus is None:
            config = self.config
            if not config.input:
                raise ValueError("no input file configured")
            with open(config.input, "rb") as fh:
                parsed, report = parse_events(
                    fh,
                    fmt=InputFormat(config.format),
                    strict=config.strict,
                    default_tz_offset_min=config.tz_offset_min,
                    source=config.input,
                )
            self._report = report
            taxonomy = self.taxonomy(parsed)
            categorized = attach_categories(parsed, taxonomy, UnmappedPolicy(config.unmapped))
            with_durations = TraceCorpus(
                traces=tuple(
                    impute_durations(t, config.duration_cap_ms) for t in categorized
                ),
                source=categorized.source,
            )
            self._corpus = with_durations
        return self._corpus

    def parse_report(self):
        self.corpus()
        return self._report

    def taxonomy(self, corpus: TraceCorpus | None = None) -> Taxonomy:
        if self._taxonomy is None:
            if self.config.taxonomy:
                with open(self.config.taxonomy, "r", encoding="utf-8", newline="") as fh:
                    self._taxonomy = Taxonomy.from_csv(fh)
            else:
                # No taxonomy file: each observed behavior is its own category.
                if corpus is None:
                    corpus = self.corpus()
                behaviors = sorted(
                    {e.behavior_id for t in corpus for e in t.behavior_events}
                )
                self._taxonomy = Taxonomy.from_pairs((b, b) for b in behaviors)
        return self._taxonomy

    def alphabet(self) -> tuple[str, ...]:
        cats = self.taxonomy().categories
        uses_other = any(
            e.category_id == OTHER_CATEGORY for t in self.corpus() for e in t.behavior_events
        )
        if uses_other and OTHER_CATEGORY not in cats:
            cats = cats + (OTHER_CATEGORY,)
        return cats

    def session_sets(self) -> list[SessionSet]:
        if self._session_sets is None:
            corpus = self.corpus()
            policy = self.config.threshold_policy()
            self._session_sets = _map_users(
                lambda t: sessionize(t, policy), corpus.traces, self.config.threads
            )
        return self._session_sets

    def pattern_sets(self) -> list[PatternSet]:
        if self._pattern_sets is None:
            corpus = self.corpus()
            taxonomy = self.taxonomy()
            alphabet = self.alphabet()
            params = self.config.pattern_params()
            session_sets = self.session_sets()

            def mine(pair):
                trace, sset = pair
                sequences = [
                    encode_session(s, trace, taxonomy, EncodeMode.FULL, alphabet=alphabet)
                    for s in sset
                ]
                return representative_patterns(sequences, params, user_id=trace.user_id)

            pairs = list(zip(corpus.traces, session_sets))
            if self.config.threads == 1 or len(pairs) <= 1:
                self._pattern_sets = [mine(p) for p in pairs]
            else:
                workers = self.config.threads or (os.cpu_count() or 1)
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    self._pattern_sets = list(pool.map(mine, pairs))
        return self._pattern_sets

    # ---- serializers ----------------------------------------------------

    def sessions_jsonl(self) -> str:
        lines = []
        for sset in self.session_sets():
            for s in sset:
                rec = {
                    "user": s.user_id,
                    "index": s.index,
                    "start_ts": s.start_ts,
                    "end_ts": s.end_ts,
                    "n_events": s.n_events,
                }
                if sset.threshold_ms is not None:
                    rec["threshold_ms"] = sset.threshold_ms
                lines.append(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")

    def prevalence_json(self) -> str:
        reports = []
        for trace in self.corpus():
            report = prevalence_metrics(trace, by=GroupBy.CATEGORY)
            entry = {"user": trace.user_id}
            entry.update(report.to_json_dict())
            reports.append(entry)
        return _json_text({"users": reports})

    def transitions_csv(self) -> tuple[str, str]:
        corpus = self.corpus()
        taxonomy = self.taxonomy()
        include_other = OTHER_CATEGORY in self.alphabet() and OTHER_CATEGORY not in taxonomy.categories
        matrices = [
            count_transitions(sset, trace, taxonomy, include_other=include_other)
            for trace, sset in zip(corpus.traces, self.session_sets())
        ]
        if not matrices:
            return "", _json_text([])
        pooled = pool_matrices(matrices)
        edges = pooled.to_edge_list()
        return pooled.to_csv(), _json_text(edges)

    def patterns_jsonl(self) -> str:
        lines = []
        for ps in self.pattern_sets():
            sizes = [0] * len(ps.medoids)
            for medoid_idx in ps.assignment.values():
                sizes[medoid_idx] += 1
            for k, medoid in enumerate(ps.medoids):
                rec = {"user": ps.user_id, "medoid": list(medoid.symbols), "size": sizes[k]}
                lines.append(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
        return "\n".join(lines) + ("\n" if lines else "")

    def patterns_global_csv(self) -> str:
        table = global_pattern_table(self.pattern_sets())
        lines = ["pattern,n_users,n_sessions"]
        for symbols, n_users, n_sessions in table:
            lines.append(f"\"{'>'.join(symbols)}\",{n_users},{n_sessions}")
        return "\n".join(lines) + "\n"

    def rrs_csv(self) -> str:
        lines = ["user,rrs,n_sessions,n_repeated,days"]
        for trace, sset in zip(self.corpus().traces, self.session_sets()):
            record = rrs(
                sset,
                tz_offset_min=trace.tz_offset_min,
                slot_width_min=self.config.slot_width_min,
            )
            if record is None:
                continue
            lines.append(
                f"{record.user_id},{record.rrs!r},{record.n_sessions},"
                f"{record.n_repeated},{record.n_observed_days}"
            )
        return "\n".join(lines) + "\n"

    def _measure(self) -> ComplexityMeasure:
        return ComplexityMeasure(
            "composite" if self.config.measure == "composite" else "turbulence"
        )

    def rhythm_csv(self) -> str:
        measure = self._measure()
        trajectories = []
        for trace, sset in zip(self.corpus().traces, self.session_sets()):
            trajectories.extend(
                build_trajectories(
                    sset,
                    trace,
                    scope=Scope.USER_DAY_HOUR,
                    labeling=LabelingMode.DOMINANT_CATEGORY,
                )
            )
        complexities = [trajectory_complexity(t, measure) for t in trajectories]
        report = circadian_rhythm(
            trajectories,
            complexities,
            weekend_days=frozenset(self.config.weekend),
            min_cell_n=self.config.min_cell_n,
        )
        return report.to_csv()

    def complexity_day_csv(self) -> str:
        """Day-scope trajectory complexity, for weekday-vs-weekend comparisons."""
        measure = self._measure()
        weekend = frozenset(self.config.weekend)
        lines = ["user,day,daytype,n_sessions,complexity"]
        for trace, sset in zip(self.corpus().traces, self.session_sets()):
            for t in build_trajectories(sset, trace, scope=Scope.USER_DAY):
                daytype = "weekend" if t.day.weekday() in weekend else "weekday"
                value = trajectory_complexity(t, measure)
                lines.append(
                    f"{t.user_id},{t.day.isoformat()},{daytype},{len(t.labels)},{value!r}"
                )
        return "\n".join(lines) + "\n"


def _manifest_dict(config: RunConfig, extra: dict) -> dict:
    manifest = {"version": __version__, "config": asdict(config)}
    manifest["config"]["weekend"] = list(config.weekend)
    del manifest["config"]["out"]  # where the manifest lives, not a parameter
    if config.input and Path(config.input).exists():
        manifest["input_sha256"] = _sha256(Path(config.input))
    if config.taxonomy and Path(config.taxonomy).exists():
        manifest["taxonomy_sha256"] = _sha256(Path(config.taxonomy))
    manifest.update(extra)
    return manifest


# ---- subcommand handlers -------------------------------------------------


def cmd_ingest(config: RunConfig) -> int:
    out = Path(config.out)
    stages = _Stages(config)
    corpus = stages.corpus()
    report = stages.parse_report()
    _write(out / "corpus.jsonl", corpus.to_jsonl())
    _write(out / "report.json", _json_text(report.to_json_dict()))
    print(f"ingested {report.accepted} records ({report.rejected} rejected) from {config.input}")
    return 0


def cmd_sessionize(config: RunConfig) -> int:
    stages = _Stages(config)
    _write(Path(config.out) / "sessions.jsonl", stages.sessions_jsonl())
    n = sum(len(s) for s in stages.session_sets())
    print(f"wrote {n} sessions for {len(stages.corpus())} users")
    return 0


def cmd_budget(config: RunConfig, unit: str | None = None) -> int:
    stages = _Stages(config)
    out = Path(config.out)
    _write(out / "prevalence.json", stages.prevalence_json())
    if unit is not None:
        lines = ["user,bucket_start_iso,count"]
        for trace in stages.corpus():
            series = regroup_counts(trace, TimeUnit(unit))
            for ts, count in series.points:
                from .events import local_datetime

                lines.append(
                    f"{trace.user_id},{local_datetime(ts, trace.tz_offset_min).isoformat()},{count}"
                )
        _write(out / f"counts_{unit}.csv", "\n".join(lines) + "\n")
    print(f"wrote prevalence for {len(stages.corpus())} users")
    return 0


def cmd_transitions(config: RunConfig) -> int:
    stages = _Stages(config)
    csv_text, edges_text = stages.transitions_csv()
    out = Path(config.out)
    _write(out / "transitions.csv", csv_text)
    _write(out / "transitions_edges.json", edges_text)
    print("wrote transition matrix")
    return 0


def cmd_patterns(config: RunConfig) -> int:
    stages = _Stages(config)
    out = Path(config.out)
    _write(out / "patterns.jsonl", stages.patterns_jsonl())
    _write(out / "patterns_global.csv", stages.patterns_global_csv())
    n = sum(len(ps.medoids) for ps in stages.pattern_sets())
    print(f"wrote {n} medoids")
    return 0


def cmd_rrs(config: RunConfig) -> int:
    stages = _Stages(config)
    _write(Path(config.out) / "rrs.csv", stages.rrs_csv())
    print("wrote rrs report")
    return 0


def cmd_rhythm(config: RunConfig) -> int:
    stages = _Stages(config)
    _write(Path(config.out) / "rhythm.csv", stages.rhythm_csv())
    _write(Path(config.out) / "complexity_day.csv", stages.complexity_day_csv())
    print("wrote rhythm report")
    return 0


_PIPELINE_STAGES = ("sessionize", "budget", "transitions", "patterns", "rrs", "rhythm")


def cmd_pipeline(config: RunConfig) -> int:
    out = Path(config.out)
    stages = _Stages(config)
    completed: list[str] = []
    try:
        _write(out / "sessions.jsonl", stages.sessions_jsonl())
        completed.append("sessionize")
        _write(out / "prevalence.json", stages.prevalence_json())
        completed.append("budget")
        csv_text, _ = stages.transitions_csv()
        _write(out / "transitions.csv", csv_text)
        completed.append("transitions")
        _write(out / "patterns.jsonl", stages.patterns_jsonl())
        completed.append("patterns")
        _write(out / "rrs.csv", stages.rrs_csv())
        completed.append("rrs")
        _write(out / "rhythm.csv", stages.rhythm_csv())
        _write(out / "complexity_day.csv", stages.complexity_day_csv())
        completed.append("rhythm")
    except Exception as exc:
        failed = _PIPELINE_STAGES[len(completed)] if len(completed) < len(_PIPELINE_STAGES) else "?"
        manifest = _manifest_dict(
            config,
            {"status": "failed", "failed_stage": failed, "completed_stages": completed, "error": str(exc)},
        )
        _write(out / "manifest.json", _json_text(manifest))
        raise
    manifest = _manifest_dict(config, {"status": "ok", "completed_stages": completed})
    _write(out / "manifest.json", _json_text(manifest))
    print(f"pipeline complete: {len(stages.corpus())} users -> {out}")
    return 0


def _spec_from_table(data: dict) -> tuple[object, int, int]:
    kind = data.get("kind")
    if kind is None:
        raise ValueError("synth spec missing 'kind'")
    n_users = int(data.get("n_users", 1))
    seed = int(data.get("seed", 0))

    def need(key: str):
        if key not in data:
            raise ValueError(f"synth spec missing '{key}'")
        return data[key]

    if kind == "pareto_gaps":
        mix = data.get("behavior_mix")
        if mix:
            behavior_mix = tuple((k, float(v)) for k, v in mix.items())
        else:
            behavior_mix = (("a", 1.0),)
        spec = synthmod.ParetoGaps(
            alpha=float(need("alpha")),
            xmin_ms=int(data.get("xmin_ms", 1000)),
            n_events=int(data.get("n_events", 1000)),
            behavior_mix=behavior_mix,
            stickiness=float(data.get("stickiness", 0.0)),
        )
    elif kind == "priority_queue":
        spec = synthmod.PriorityQueue(
            L=int(data.get("L", 2)),
            p=float(need("p")),
            steps=int(data.get("steps", 10_000)),
            step_ms=int(data.get("step_ms", synthmod.DEFAULT_STEP_MS)),
        )
    elif kind == "scheduled":
        script = data.get("category_script", "A")
        if isinstance(script, list):
            script = tuple(script)
        spec = synthmod.Scheduled(
            daily_slots=tuple(int(s) for s in need("daily_slots")),
            n_days=int(data.get("n_days", 14)),
            events_per_session=int(data.get("events_per_session", 4)),
            category_script=script,
            jitter_min=int(data.get("jitter_min", 0)),
            intra_gap_ms=int(data.get("intra_gap_ms", 200)),
            start_day=int(data.get("start_day", 0)),
            tz_offset_min=int(data.get("tz_offset_min", 0)),
        )
    else:
        raise ValueError(f"unknown synth kind {kind!r}")
    return spec, n_users, seed


def cmd_synth(spec_path: str, out_dir: str, seed_override: int | None) -> int:
    with open(spec_path, "rb") as fh:
        data = tomllib.load(fh)
    spec, n_users, seed = _spec_from_table(data)
    if seed_override is not None:
        seed = seed_override
    out = Path(out_dir)

    from dataclasses import replace as dc_replace

    traces = []
    truth = None
    waits_lines: list[str] = []
    for ordinal in range(n_users):
        user_seed = synthmod.derive_user_seed(seed, ordinal)
        uid = f"u{ordinal:04d}"
        if isinstance(spec, synthmod.ParetoGaps):
            trace, truth = synthmod.gen_pareto_trace(dc_replace(spec, user_id=uid), user_seed)
        elif isinstance(spec, synthmod.Scheduled):
            trace, truth = synthmod.gen_scheduled_trace(dc_replace(spec, user_id=uid), user_seed)
        else:
            run = synthmod.gen_priority_queue(dc_replace(spec, user_id=uid), user_seed)
            trace = run.trace
            waits_lines.extend(str(w) for w in run.waits)
            truth = None
        traces.append(trace)

    corpus = TraceCorpus.build(traces)
    _write(out / "trace.jsonl", corpus.to_jsonl())
    sidecar = {"kind": data.get("kind"), "seed": seed, "n_users": n_users}
    if truth is not None:
        sidecar["ground_truth"] = truth.to_json_dict()
    _write(out / "ground_truth.json", _json_text(sidecar))
    if waits_lines:
        _write(out / "waits.csv", "wait_steps\n" + "\n".join(waits_lines) + "\n")
    print(json.dumps(sidecar, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tracekit", description="Event-log sessionization and temporal analytics"
    )
    parser.add_argument("--config", help="TOML config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--seed", type=int, help="seed for any stochastic step")
    parser.add_argument("--threads", type=int, help="per-user parallelism (0 = machine)")
    parser.add_argument("--strict", action="store_true", help="abort on first malformed record")

    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in (
        "ingest",
        "sessionize",
        "budget",
        "transitions",
        "patterns",
        "rrs",
        "rhythm",
        "pipeline",
    ):
        p = sub.add_parser(name)
        p.add_argument("--input", help="event log (JSONL or CSV)")
        p.add_argument("--taxonomy", help="behavior_id,category_id CSV")
        p.add_argument("--format", choices=["jsonl", "csv"], help="input format")
        if name == "budget":
            p.add_argument("--unit", choices=[u.value for u in TimeUnit])
    synth_p = sub.add_parser("synth")
    synth_p.add_argument("spec", help="generator spec (TOML)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return 0
    try:
        if args.command == "synth":
            return cmd_synth(args.spec, args.out or "out", args.seed)
        config = load_config(args.config)
        config = _apply_flag_overrides(config, args)
        handler = {
            "ingest": cmd_ingest,
            "sessionize": cmd_sessionize,
            "transitions": cmd_transitions,
            "patterns": cmd_patterns,
            "rrs": cmd_rrs,
            "rhythm": cmd_rhythm,
            "pipeline": cmd_pipeline,
        }
        if args.command == "budget":
            return cmd_budget(config, unit=getattr(args, "unit", None))
        return handler[args.command](config)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError, KeyError, tomllib.TOMLDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
