"""Unit tests for PatientJob entity."""

from __future__ import annotations

import pytest

from dual_hormone_ap.batch.job import JobStage, JobStatus, PatientJob


class TestPatientJob:
    """Tests for PatientJob dataclass."""

    def test_create_valid_job(self) -> None:
        """Test creating a patient job."""
        job = PatientJob("patient-001")
        assert job.patient_id == "patient-001"
        assert job.status == JobStatus.PENDING
        assert job.stage == JobStage.IDENTIFY
        assert job.error_message is None

    def test_empty_patient_raises(self) -> None:
        """Test that an empty patient id raises ValueError."""
        with pytest.raises(ValueError, match="patient_id"):
            PatientJob("")

    def test_mark_active(self) -> None:
        """Test moving through the stages."""
        job = PatientJob("patient-001")
        job.mark_active(JobStage.SIMULATE)
        assert job.status == JobStatus.ACTIVE
        assert job.stage == JobStage.SIMULATE

    def test_mark_complete(self) -> None:
        """Test marking job as complete."""
        job = PatientJob("patient-001")
        job.mark_failed("transient")
        job.mark_complete()
        assert job.status == JobStatus.COMPLETE
        assert job.error_message is None

    def test_mark_failed_keeps_stage(self) -> None:
        """Test that a failure records the stage it happened in."""
        job = PatientJob("patient-001")
        job.mark_active(JobStage.WRITE)
        job.mark_failed("Permission denied")
        assert job.status == JobStatus.FAILED
        assert job.stage == JobStage.WRITE
        assert job.error_message == "Permission denied"

    def test_mark_cancelled(self) -> None:
        """Test marking job as cancelled."""
        job = PatientJob("patient-001")
        job.mark_cancelled()
        assert job.status == JobStatus.CANCELLED
