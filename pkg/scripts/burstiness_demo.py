"""Waiting-time statistics of the priority-queue task model across the
selection-probability range: near-random service is geometric, near-greedy
service goes heavy-tailed.

Usage: python scripts/burstiness_demo.py [steps] [seed]
"""

import sys

from tracekit.synth import (
    PriorityQueue,
    gen_priority_queue,
    survival_decades,
    waiting_time_tail_slope,
)


def main() -> None:
    steps = int(sys.argv[1]) if len(sys.argv) > 1 else 200_000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    print(f"{'p':>10} {'mean':>10} {'max':>10} {'decades':>8} {'tail slope':>11}")
    for p in (1e-6, 0.5, 0.9, 0.999, 0.99999):
        run = gen_priority_queue(PriorityQueue(L=2, p=p, steps=steps), seed=seed)
        waits = run.waits
        mean = sum(waits) / len(waits)
        try:
            slope = f"{waiting_time_tail_slope(waits):11.3f}"
        except ValueError:
            slope = f"{'n/a':>11}"
        print(
            f"{p:10.6g} {mean:10.3f} {max(waits):10d} "
            f"{survival_decades(waits):8.2f} {slope}"
        )


if __name__ == "__main__":
    main()
