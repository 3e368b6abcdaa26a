"""Trial - protocol, cohort generation, closed-loop simulation and glycemic statistics."""

from dual_hormone_ap.trial.closed_loop import TrialRecord, initial_belief_mean, run_closed_loop
from dual_hormone_ap.trial.cohort import (
    carb_ratio,
    generate_cohort,
    load_default_cohort,
    make_patient,
    perturb_params,
)
from dual_hormone_ap.trial.metrics import (
    BAND_EDGES,
    BAND_NAMES,
    GlycemicStats,
    band_percentages,
    rolling_totals,
    tir_stats,
)
from dual_hormone_ap.trial.output import (
    MANIFEST_FILE,
    SUMMARY_FILE,
    TRAJECTORY_DIR,
    read_summary,
    summary_frame,
    write_manifest,
    write_summary,
    write_trajectory,
)
from dual_hormone_ap.trial.protocol import EventType, Protocol, ProtocolEvent, load_protocol
from dual_hormone_ap.trial.runner import (
    PatientOutcome,
    TrialOutcome,
    fit_dataset,
    identify_patient,
    run_patient,
    run_trial,
)

__all__ = [
    "BAND_EDGES",
    "BAND_NAMES",
    "MANIFEST_FILE",
    "SUMMARY_FILE",
    "TRAJECTORY_DIR",
    "EventType",
    "GlycemicStats",
    "PatientOutcome",
    "Protocol",
    "ProtocolEvent",
    "TrialOutcome",
    "TrialRecord",
    "band_percentages",
    "carb_ratio",
    "fit_dataset",
    "generate_cohort",
    "identify_patient",
    "initial_belief_mean",
    "load_default_cohort",
    "load_protocol",
    "make_patient",
    "perturb_params",
    "read_summary",
    "rolling_totals",
    "run_closed_loop",
    "run_patient",
    "run_trial",
    "summary_frame",
    "tir_stats",
    "write_manifest",
    "write_summary",
    "write_trajectory",
]
