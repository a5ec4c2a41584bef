from nsb.dsis.engine import (
    Cohort,
    CohortSummary,
    DuplicateRatingError,
    GroupStats,
    RaterProfile,
    RatingRangeError,
    RatingRecord,
    RatingStore,
    SessionPlan,
    Stimulus,
    UnknownStimulusError,
    build_plan,
    compute_mos,
    decoy_sensitivity,
    export_csv,
    import_csv,
    load_stimulus_pool,
    save_stimulus_pool,
)

__all__ = [
    "Cohort",
    "CohortSummary",
    "DuplicateRatingError",
    "GroupStats",
    "RaterProfile",
    "RatingRangeError",
    "RatingRecord",
    "RatingStore",
    "SessionPlan",
    "Stimulus",
    "UnknownStimulusError",
    "build_plan",
    "compute_mos",
    "decoy_sensitivity",
    "export_csv",
    "import_csv",
    "load_stimulus_pool",
    "save_stimulus_pool",
]
