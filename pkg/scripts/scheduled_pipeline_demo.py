"""Generate a multi-user scheduled corpus and run the full pipeline on it.

The planted schedule repeats the same three daily slots, so every user's rate
of repeated sessions comes out as 1.0, and the alternating evening scripts
push hour-20 complexity above hour-12.

Usage: python scripts/scheduled_pipeline_demo.py [out_dir]
"""

import sys
from pathlib import Path

from tracekit.cli import main as cli_main
from tracekit.synth import Scheduled, scheduled_corpus


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("demo_out")
    out.mkdir(parents=True, exist_ok=True)
    base = Scheduled(
        daily_slots=(545, 725, 735, 1205, 1215, 1225),
        n_days=14,
        events_per_session=5,
        category_script=("ABAB", "AA", "AA", "AA", "BB", "AA"),
        jitter_min=3,
    )
    corpus, truth = scheduled_corpus(base, n_users=20, seed=0)
    events = out / "events.jsonl"
    events.write_text(corpus.to_jsonl())
    print(f"generated {corpus.n_events()} events for {len(corpus)} users -> {events}")

    code = cli_main(["--out", str(out / "reports"), "pipeline", "--input", str(events)])
    if code != 0:
        raise SystemExit(code)

    rrs_rows = (out / "reports" / "rrs.csv").read_text().strip().splitlines()[1:]
    rates = [float(r.split(",")[1]) for r in rrs_rows]
    guarantee = truth.expected_rrs if truth.expected_rrs is not None else "not guaranteed (jitter > 0)"
    print(f"rrs: min={min(rates)} max={max(rates)} (ground truth: {guarantee})")

    rhythm = (out / "reports" / "rhythm.csv").read_text().strip().splitlines()[1:]
    by_hour = {}
    for row in rhythm:
        hour, daytype, mean, _std, n = row.split(",")
        if mean:
            by_hour.setdefault(int(hour), []).append(float(mean))
    for hour in (12, 20):
        if hour in by_hour:
            print(f"hour {hour:02d} mean complexity: {sum(by_hour[hour]) / len(by_hour[hour]):.3f}")


if __name__ == "__main__":
    main()
