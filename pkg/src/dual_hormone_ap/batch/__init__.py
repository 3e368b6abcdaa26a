"""Batch feature - worker pool and patient jobs for cohort runs."""

from dual_hormone_ap.batch.executor import (
    CompletionResult,
    WorkerPool,
    install_signal_handlers,
    is_shutdown_requested,
    reset_shutdown,
)
from dual_hormone_ap.batch.job import JobStage, JobStatus, PatientJob

__all__ = [
    "CompletionResult",
    "JobStage",
    "JobStatus",
    "PatientJob",
    "WorkerPool",
    "install_signal_handlers",
    "is_shutdown_requested",
    "reset_shutdown",
]
