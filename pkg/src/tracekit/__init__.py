"""tracekit: sessionization, sequence, and regularity analytics for
timestamped digital-trace event logs.

The pipeline raises raw event records through three layers: discrete
behaviors, sessions of behaviors, and per-day trajectories of sessions, with
time-budget metrics on one side and sequence/regularity metrics on the other.
"""

from .events import (
    DEFAULT_DURATION_CAP_MS,
    OTHER_CATEGORY,
    DataError,
    Event,
    EventKind,
    InputFormat,
    ParseError,
    ParseReport,
    Taxonomy,
    TraceCorpus,
    UnmappedPolicy,
    UserTrace,
    attach_categories,
    impute_durations,
    inter_event_intervals,
    parse_events,
)
from .sessions import (
    FixedThreshold,
    IndividualMedian,
    OrphanPolicy,
    PowerLawFit,
    ScreenBounded,
    Session,
    SessionSet,
    fit_powerlaw_exponent,
    individual_threshold,
    sessionize,
    sessionize_fixed,
    sessionize_individual,
    sessionize_screen,
)
from .budget import (
    CountSeries,
    GroupBy,
    InterventionSplit,
    Metric,
    PrevalenceReport,
    TemporalProfile,
    TimeUnit,
    gini_allocation,
    intervention_split,
    prevalence_metrics,
    regroup_counts,
    temporal_profile,
)
from .transitions import (
    AggregationMode,
    AssortativityReport,
    TransitionMatrix,
    TransitionRates,
    assortativity_split,
    count_transitions,
    mean_user_rates,
    pool_matrices,
    transition_rates,
)
from .sequences import (
    DSS,
    CategorySequence,
    EditCosts,
    EditDistance,
    EncodeMode,
    PatternParams,
    PatternSet,
    complexity_index,
    distinct_subsequences,
    edit_distance,
    encode_session,
    global_pattern_table,
    representative_patterns,
    turbulence,
)
from .regularity import (
    ComplexityMeasure,
    LabelingMode,
    RhythmReport,
    RRSRecord,
    Scope,
    Trajectory,
    build_trajectories,
    circadian_rhythm,
    rrs,
    trajectory_complexity,
)
from . import synth

__version__ = "0.1.0"
