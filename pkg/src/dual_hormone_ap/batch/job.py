"""Patient job entity for cohort runs."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class JobStatus(Enum):
    """Status of a patient job."""

    PENDING = "pending"
    ACTIVE = "active"
    COMPLETE = "complete"
    FAILED = "failed"
    CANCELLED = "cancelled"


class JobStage(Enum):
    """Pipeline stage a patient job is in."""

    IDENTIFY = "identify"
    SIMULATE = "simulate"
    WRITE = "write"


@dataclass
class PatientJob:
    """Identification and closed-loop run for one patient.

    Attributes:
        patient_id: Patient the job belongs to.
        status: Current job status.
        stage: Stage being worked on, or the one that failed.
        error_message: Error message if the job failed.
    """

    patient_id: str
    status: JobStatus = field(default=JobStatus.PENDING)
    stage: JobStage = field(default=JobStage.IDENTIFY)
    error_message: str | None = None

    def __post_init__(self) -> None:
        """Validate job fields after initialization."""
        if not self.patient_id:
            raise ValueError("patient_id must not be empty")

    def mark_active(self, stage: JobStage) -> None:
        """Mark job as working on ``stage``."""
        self.status = JobStatus.ACTIVE
        self.stage = stage

    def mark_complete(self) -> None:
        """Mark job as successfully completed."""
        self.status = JobStatus.COMPLETE
        self.error_message = None

    def mark_failed(self, error: str) -> None:
        """Mark job as failed in its current stage."""
        self.status = JobStatus.FAILED
        self.error_message = error

    def mark_cancelled(self) -> None:
        """Mark job as cancelled."""
        self.status = JobStatus.CANCELLED
