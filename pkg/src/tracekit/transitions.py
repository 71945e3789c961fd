"""Within-session category-to-category transition counting and the
assortative/disassortative decomposition of the resulting rates.

Transitions are counted on the full event sequence, so a same-category pair
like [A, A] is a valid assortative transition; pairs never cross session
boundaries. Cross-user aggregation defaults to pooling counts before
normalizing; a per-user mean of rates is available as an option.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .events import OTHER_CATEGORY, DataError, Taxonomy, UserTrace
from .sessions import SessionSet


class AggregationMode(str, Enum):
    POOLED = "pooled"
    PER_USER_MEAN = "per_user_mean"


@dataclass(frozen=True)
class TransitionMatrix:
    categories: tuple[str, ...]
    counts: np.ndarray  # K x K int64, rows = origin
    n_transitions: int

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.categories)]
        for i, cat in enumerate(self.categories):
            lines.append(cat + "," + ",".join(str(int(c)) for c in self.counts[i]))
        return "\n".join(lines) + "\n"

    def to_edge_list(self) -> list[dict]:
        rates = transition_rates(self)
        edges = []
        for i, src in enumerate(self.categories):
            for j, dst in enumerate(self.categories):
                count = int(self.counts[i, j])
                if count == 0:
                    continue
                edges.append(
                    {"from": src, "to": dst, "count": count, "rate": float(rates.rates[i, j])}
                )
        return edges


@dataclass(frozen=True)
class TransitionRates:
    categories: tuple[str, ...]
    rates: np.ndarray  # K x K float, supported rows sum to 1
    row_support: np.ndarray  # per-row total count (or contributing users, for means)


def category_order(taxonomy: Taxonomy, include_other: bool) -> tuple[str, ...]:
    cats = taxonomy.categories
    if include_other and OTHER_CATEGORY not in cats:
        cats = cats + (OTHER_CATEGORY,)
    return cats


def count_transitions(
    sessions: SessionSet,
    trace: UserTrace,
    taxonomy: Taxonomy,
    include_other: bool | None = None,
) -> TransitionMatrix:
    """Count consecutive within-session category pairs.

    ``include_other`` controls whether the reserved other-bucket appears in
    the category list; None auto-includes it when the trace uses it.
    """
    behaviors = trace.behavior_events
    if include_other is None:
        include_other = any(e.category_id == OTHER_CATEGORY for e in behaviors)
    categories = category_order(taxonomy, include_other)
    index = {c: i for i, c in enumerate(categories)}
    counts = np.zeros((len(categories), len(categories)), dtype=np.int64)
    total = 0
    for session in sessions:
        evs = session.events(trace)
        for a, b in zip(evs, evs[1:]):
            for ev in (a, b):
                if ev.category_id is None:
                    raise DataError(f"uncategorized behavior {ev.behavior_id!r} at ts {ev.ts}")
                if ev.category_id not in index:
                    raise DataError(f"category {ev.category_id!r} not in category list")
            counts[index[a.category_id], index[b.category_id]] += 1
            total += 1
    return TransitionMatrix(categories=categories, counts=counts, n_transitions=total)


def pool_matrices(matrices: Iterable[TransitionMatrix]) -> TransitionMatrix:
    """Sum per-user count matrices over a shared category list."""
    pooled: TransitionMatrix | None = None
    acc: np.ndarray | None = None
    for m in matrices:
        if acc is None:
            pooled = m
            acc = m.counts.copy()
        else:
            if m.categories != pooled.categories:
                raise ValueError("matrices must share a category list")
            acc += m.counts
    if acc is None:
        raise ValueError("no matrices to pool")
    return TransitionMatrix(
        categories=pooled.categories, counts=acc, n_transitions=int(acc.sum())
    )


def transition_rates(m: TransitionMatrix) -> TransitionRates:
    """Row-normalize counts; zero rows stay zero and are flagged via support."""
    support = m.counts.sum(axis=1)
    rates = np.zeros(m.counts.shape, dtype=float)
    nonzero = support > 0
    rates[nonzero] = m.counts[nonzero] / support[nonzero, None]
    return TransitionRates(categories=m.categories, rates=rates, row_support=support)


def mean_user_rates(per_user: Sequence[TransitionRates]) -> TransitionRates:
    """Average per-user rate rows over the users that support each row.

    Row support in the result is the number of contributing users.
    """
    if not per_user:
        raise ValueError("no rate matrices to average")
    categories = per_user[0].categories
    k = len(categories)
    acc = np.zeros((k, k), dtype=float)
    contributors = np.zeros(k, dtype=np.int64)
    for r in per_user:
        if r.categories != categories:
            raise ValueError("rate matrices must share a category list")
        supported = r.row_support > 0
        acc[supported] += r.rates[supported]
        contributors += supported.astype(np.int64)
    rates = np.zeros((k, k), dtype=float)
    nonzero = contributors > 0
    rates[nonzero] = acc[nonzero] / contributors[nonzero, None]
    return TransitionRates(categories=categories, rates=rates, row_support=contributors)


@dataclass(frozen=True)
class AssortativityReport:
    assortative: Mapping[str, float]  # diagonal rate per supported category
    disassortative_mass: Mapping[str, float]
    overall_assortative_share: float


def assortativity_split(r: TransitionRates) -> AssortativityReport:
    """Per-category same-vs-different split and the overall same-category share."""
    assortative: dict[str, float] = {}
    disassortative: dict[str, float] = {}
    diag_weight = 0.0
    total_weight = 0.0
    for i, cat in enumerate(r.categories):
        support = float(r.row_support[i])
        if support <= 0:
            continue
        same = float(r.rates[i, i])
        assortative[cat] = same
        disassortative[cat] = 1.0 - same
        diag_weight += same * support
        total_weight += support
    share = diag_weight / total_weight if total_weight > 0 else 0.0
    return AssortativityReport(
        assortative=assortative,
        disassortative_mass=disassortative,
        overall_assortative_share=share,
    )
