"""Whole-sequence machinery for encoded sessions: alignment distance,
distinct-subsequence counting, two complexity measures, and per-user
representative-pattern extraction by clustering pairwise distances.

Two complexity operationalizations ship side by side: ``turbulence`` combines
the distinct-subsequence count with spell-duration variance, while
``complexity_index`` is a [0, 1] composite of transition ratio and normalized
symbol entropy. Downstream rhythm reporting defaults to the composite index
for its bounded interpretability.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from .events import DataError, Taxonomy, UserTrace
from .sessions import Session

MAX_EXACT_SUBSEQ_LEN = 64

DEFAULT_SUB_COST = 2.0
DEFAULT_INDEL_COST = 1.0
DEFAULT_CUT_THETA = 0.3
DEFAULT_MAX_SESSIONS = 20_000


class EncodeMode(str, Enum):
    FULL = "full"
    DSS = "dss"


@dataclass(frozen=True)
class CategorySequence:
    """Ordered category symbols over a fixed alphabet."""

    symbols: tuple[str, ...]
    alphabet: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.symbols:
            raise ValueError("sequence must have at least one symbol")
        allowed = set(self.alphabet)
        if len(allowed) != len(self.alphabet):
            raise ValueError("alphabet symbols must be unique")
        for s in self.symbols:
            if s not in allowed:
                raise ValueError(f"symbol {s!r} not in alphabet")

    def __len__(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class DSS:
    """Run-length-collapsed sequence: (category, spell duration) pairs."""

    spells: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if not self.spells:
            raise ValueError("DSS must have at least one spell")
        for i, (cat, dur) in enumerate(self.spells):
            if dur <= 0:
                raise ValueError(f"spell duration must be positive, got {dur}")
            if i > 0 and cat == self.spells[i - 1][0]:
                raise ValueError("adjacent spells must differ in category")

    @property
    def symbols(self) -> tuple[str, ...]:
        return tuple(cat for cat, _ in self.spells)


def encode_session(
    session: Session,
    trace: UserTrace,
    taxonomy: Taxonomy,
    mode: EncodeMode = EncodeMode.FULL,
    alphabet: tuple[str, ...] | None = None,
) -> CategorySequence | DSS:
    """Encode a session's events as category symbols (full) or spells (dss).

    The alphabet defaults to the taxonomy's categories, extended with the
    other-bucket when the session uses it; pass one explicitly to keep it
    consistent across a corpus.
    """
    events = session.events(trace)
    symbols: list[str] = []
    for ev in events:
        if ev.category_id is None:
            raise DataError(f"uncategorized behavior {ev.behavior_id!r} at ts {ev.ts}")
        symbols.append(ev.category_id)
    if mode is EncodeMode.FULL:
        if alphabet is None:
            alphabet = taxonomy.categories
            extra = [s for s in symbols if s not in alphabet]
            if extra:
                alphabet = alphabet + tuple(dict.fromkeys(extra))
        return CategorySequence(symbols=tuple(symbols), alphabet=alphabet)
    spells: list[tuple[str, float]] = []
    for ev, cat in zip(events, symbols):
        if ev.duration_ms is None:
            raise DataError(f"missing duration for behavior {ev.behavior_id!r} at ts {ev.ts}")
        if spells and spells[-1][0] == cat:
            spells[-1] = (cat, spells[-1][1] + ev.duration_ms)
        else:
            spells.append((cat, float(ev.duration_ms)))
    return DSS(spells=tuple(spells))


@dataclass(frozen=True, slots=True)
class EditCosts:
    sub: float = DEFAULT_SUB_COST
    indel: float = DEFAULT_INDEL_COST

    def __post_init__(self) -> None:
        if self.sub <= 0 or self.indel <= 0:
            raise ValueError("costs must be positive")
        if self.sub > 2 * self.indel:
            raise ValueError("sub must not exceed 2 * indel")


@dataclass(frozen=True, slots=True)
class EditDistance:
    cost: float
    normalized: float


def _symbols(seq: CategorySequence | Sequence[str]) -> Sequence[str]:
    return seq.symbols if isinstance(seq, CategorySequence) else seq


def edit_distance(
    a: CategorySequence | Sequence[str],
    b: CategorySequence | Sequence[str],
    costs: EditCosts = EditCosts(),
) -> EditDistance:
    """Minimal substitution/insert/delete cost between two sequences.

    Also returns the cost normalized by indel * (len(a) + len(b)), which is a
    [0, 1] quantity suitable for scale-free clustering cuts.
    """
    xs, ys = _symbols(a), _symbols(b)
    if len(xs) < len(ys):
        xs, ys = ys, xs
    prev = [j * costs.indel for j in range(len(ys) + 1)]
    for i, x in enumerate(xs, start=1):
        cur = [i * costs.indel] + [0.0] * len(ys)
        for j, y in enumerate(ys, start=1):
            best = prev[j - 1] if x == y else prev[j - 1] + costs.sub
            gap = min(prev[j], cur[j - 1]) + costs.indel
            cur[j] = best if best < gap else gap
        prev = cur
    cost = prev[-1]
    denom = costs.indel * (len(xs) + len(ys))
    return EditDistance(cost=cost, normalized=cost / denom if denom else 0.0)


def distinct_subsequences(
    s: CategorySequence | Sequence[str], max_len: int = MAX_EXACT_SUBSEQ_LEN
) -> int:
    """Exact count of distinct subsequences, empty one included.

    dp_0 = 1; dp_i = 2 dp_{i-1} minus the dp value just before the previous
    occurrence of symbol i (double-counted continuations). Exact big-int
    arithmetic; refuses sequences longer than ``max_len``.
    """
    symbols = _symbols(s)
    if len(symbols) > max_len:
        raise DataError(f"sequence too long for exact count ({len(symbols)} > {max_len})")
    dp = 1
    last: dict[str, int] = {}  # symbol -> dp value before its previous occurrence
    for sym in symbols:
        new_dp = 2 * dp - last.get(sym, 0)
        last[sym] = dp
        dp = new_dp
    return dp


def _population_variance(values: Sequence[float]) -> float:
    n = len(values)
    mean = math.fsum(values) / n
    return math.fsum((v - mean) ** 2 for v in values) / n


def turbulence(d: DSS) -> float:
    """log2( phi(symbols) * (s2_max + 1) / (s2 + 1) ) with s2 the population
    variance of spell durations.

    s2_max is the maximum variance attainable by n positive durations with the
    same total and a minimum duration of 1: one long spell and n-1 unit spells.
    Durations are interpreted in units whose minimum spell length is 1.
    """
    phi = distinct_subsequences(d.symbols)
    durations = [dur for _, dur in d.spells]
    n = len(durations)
    s2 = _population_variance(durations)
    total = math.fsum(durations)
    extreme = [total - (n - 1)] + [1.0] * (n - 1)
    s2_max = _population_variance(extreme)
    return math.log2(phi * (s2_max + 1.0) / (s2 + 1.0))


def complexity_index(s: CategorySequence) -> float:
    """Composite complexity: sqrt of transition ratio times normalized entropy.

    Zero for constant or single-symbol sequences; 1 for perfect alternation
    that uses the whole alphabet uniformly.
    """
    symbols = s.symbols
    n = len(symbols)
    if n == 1:
        return 0.0
    q = sum(1 for i in range(n - 1) if symbols[i] != symbols[i + 1])
    if q == 0:
        return 0.0
    if len(s.alphabet) < 2:
        raise ValueError("alphabet must have at least 2 symbols for a nonzero ceiling")
    counts: dict[str, int] = {}
    for sym in symbols:
        counts[sym] = counts.get(sym, 0) + 1
    h = -math.fsum((c / n) * math.log(c / n) for c in counts.values())
    h_max = math.log(len(s.alphabet))
    return math.sqrt((q / (n - 1)) * (h / h_max))


@dataclass(frozen=True)
class PatternParams:
    cut_theta: float = DEFAULT_CUT_THETA
    costs: EditCosts = field(default_factory=EditCosts)
    min_distinct_categories: int = 2
    max_sessions: int = DEFAULT_MAX_SESSIONS
    seed: int = 0

    def __post_init__(self) -> None:
        if not (0 < self.cut_theta <= 1):
            raise ValueError("cut_theta must be in (0, 1]")
        if self.min_distinct_categories < 2:
            raise ValueError("min_distinct_categories must be >= 2")
        if self.max_sessions < 1:
            raise ValueError("max_sessions must be >= 1")


@dataclass(frozen=True)
class PatternSet:
    """Cluster medoids for one user's multi-category sessions.

    ``assignment`` maps the index of each eligible input session to its medoid
    index; ineligible (single-category) sessions are absent.
    """

    user_id: str
    medoids: tuple[CategorySequence, ...]
    assignment: Mapping[int, int]
    params: PatternParams


def _average_linkage_clusters(
    dist: list[list[float]], weights: list[int], cut_theta: float
) -> list[list[int]]:
    """Agglomerative average-linkage over weighted points; merge while the
    smallest linkage is <= cut_theta. Deterministic tie-break on lowest
    member indices."""
    clusters: list[list[int]] = [[i] for i in range(len(weights))]
    sizes: list[int] = list(weights)
    link: dict[tuple[int, int], float] = {}
    active = list(range(len(clusters)))
    for ai in range(len(active)):
        for bi in range(ai + 1, len(active)):
            link[(ai, bi)] = dist[ai][bi]

    while len(active) > 1:
        best: tuple[float, int, int] | None = None
        for ai in range(len(active)):
            for bi in range(ai + 1, len(active)):
                a, b = active[ai], active[bi]
                d = link[(min(a, b), max(a, b))]
                key = (d, clusters[a][0], clusters[b][0])
                if best is None or key < best:
                    best = key
                    pair = (ai, bi)
        if best is None or best[0] > cut_theta:
            break
        ai, bi = pair
        a, b = active[ai], active[bi]
        # Lance-Williams update for (weighted) average linkage
        for ci in range(len(active)):
            c = active[ci]
            if c in (a, b):
                continue
            dac = link[(min(a, c), max(a, c))]
            dbc = link[(min(b, c), max(b, c))]
            merged = (sizes[a] * dac + sizes[b] * dbc) / (sizes[a] + sizes[b])
            link[(min(a, c), max(a, c))] = merged
        clusters[a] = sorted(clusters[a] + clusters[b])
        sizes[a] += sizes[b]
        del active[bi]
    return sorted((clusters[c] for c in active), key=lambda members: members[0])


def _medoid_index(
    members: list[int],
    reps: list[tuple[str, ...]],
    weights: list[int],
    dist: list[list[float]],
) -> int:
    best: tuple[float, int, tuple[str, ...]] | None = None
    best_idx = members[0]
    for m in members:
        score = math.fsum(dist[m][o] * weights[o] for o in members)
        key = (score, len(reps[m]), reps[m])
        if best is None or key < best:
            best = key
            best_idx = m
    return best_idx


def representative_patterns(
    sessions: Sequence[CategorySequence],
    params: PatternParams = PatternParams(),
    user_id: str = "",
) -> PatternSet:
    """Cluster a user's multi-category sessions and return one medoid each.

    Sessions with fewer than ``min_distinct_categories`` distinct symbols are
    ineligible. Pairwise normalized edit distances feed average-linkage
    clustering cut at ``cut_theta``; each cluster is represented by the member
    minimizing total distance to the cluster (ties: shortest, then
    lexicographic). Beyond ``max_sessions`` eligible sessions, a seeded uniform
    subsample is clustered and the rest assigned to the nearest medoid.
    """
    eligible = [
        i
        for i, s in enumerate(sessions)
        if len(set(s.symbols)) >= params.min_distinct_categories
    ]
    if not eligible:
        return PatternSet(user_id=user_id, medoids=(), assignment={}, params=params)

    if len(eligible) > params.max_sessions:
        rng = random.Random(params.seed)
        sampled = sorted(rng.sample(eligible, params.max_sessions))
    else:
        sampled = eligible

    # Identical sequences are zero-distance, so collapse them and cluster the
    # distinct ones with multiplicity weights; this is exact, not approximate.
    rep_index: dict[tuple[str, ...], int] = {}
    reps: list[tuple[str, ...]] = []
    weights: list[int] = []
    member_rep: dict[int, int] = {}
    for i in sampled:
        key = sessions[i].symbols
        if key not in rep_index:
            rep_index[key] = len(reps)
            reps.append(key)
            weights.append(0)
        member_rep[i] = rep_index[key]
        weights[rep_index[key]] += 1

    m = len(reps)
    dist = [[0.0] * m for _ in range(m)]
    for a in range(m):
        for b in range(a + 1, m):
            d = edit_distance(reps[a], reps[b], params.costs).normalized
            dist[a][b] = d
            dist[b][a] = d

    clusters = _average_linkage_clusters(
        [[dist[a][b] for b in range(m)] for a in range(m)], list(weights), params.cut_theta
    )

    medoids: list[CategorySequence] = []
    rep_cluster: dict[int, int] = {}
    for cluster_idx, members in enumerate(clusters):
        medoid_rep = _medoid_index(members, reps, weights, dist)
        for r in members:
            rep_cluster[r] = cluster_idx
        template = sessions[sampled[0]]
        for i in sampled:
            if sessions[i].symbols == reps[medoid_rep]:
                template = sessions[i]
                break
        medoids.append(template)

    assignment: dict[int, int] = {}
    for i in sampled:
        assignment[i] = rep_cluster[member_rep[i]]
    for i in eligible:
        if i in assignment:
            continue
        best: tuple[float, int] | None = None
        for k, med in enumerate(medoids):
            d = edit_distance(sessions[i], med, params.costs).normalized
            if best is None or (d, k) < best:
                best = (d, k)
        assignment[i] = best[1]
    return PatternSet(
        user_id=user_id, medoids=tuple(medoids), assignment=assignment, params=params
    )


def global_pattern_table(
    pattern_sets: Iterable[PatternSet],
) -> list[tuple[tuple[str, ...], int, int]]:
    """Deduplicate per-user medoids by exact symbol equality.

    Returns (symbols, n_users, n_sessions) sorted by descending n_sessions,
    then symbols, where n_sessions totals the assigned cluster sizes.
    """
    users: dict[tuple[str, ...], set[str]] = {}
    sessions_total: dict[tuple[str, ...], int] = {}
    for ps in pattern_sets:
        cluster_sizes = [0] * len(ps.medoids)
        for medoid_idx in ps.assignment.values():
            cluster_sizes[medoid_idx] += 1
        for k, med in enumerate(ps.medoids):
            key = med.symbols
            users.setdefault(key, set()).add(ps.user_id)
            sessions_total[key] = sessions_total.get(key, 0) + cluster_sizes[k]
    table = [
        (key, len(users[key]), sessions_total[key])
        for key in users
    ]
    table.sort(key=lambda row: (-row[2], row[0]))
    return table
