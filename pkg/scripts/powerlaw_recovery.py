"""Recovery sweep: plant a tail exponent, generate gaps, fit it back.

Usage: python scripts/powerlaw_recovery.py [n_events] [seed]
"""

import sys

from tracekit import fit_powerlaw_exponent, inter_event_intervals
from tracekit.synth import ParetoGaps, gen_pareto_trace


def main() -> None:
    n_events = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    print(f"{'planted':>8} {'recovered':>10} {'abs err':>8} {'n_tail':>8}")
    for alpha in (1.3, 1.5, 2.0, 2.5, 3.0):
        spec = ParetoGaps(alpha=alpha, xmin_ms=1000, n_events=n_events)
        trace, _ = gen_pareto_trace(spec, seed=seed)
        fit = fit_powerlaw_exponent(inter_event_intervals(trace), 1000)
        print(f"{alpha:8.2f} {fit.alpha:10.4f} {abs(fit.alpha - alpha):8.4f} {fit.n_tail:8d}")


if __name__ == "__main__":
    main()
