"""Cohort trial runner: identify (or load) each patient's model, run the closed
loop, write per-patient files, and aggregate the summary."""

from __future__ import annotations

import logging
import os
from collections.abc import Callable
from concurrent.futures import CancelledError, Future
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np

from dual_hormone_ap import __version__
from dual_hormone_ap.batch.executor import CompletionResult, WorkerPool, is_shutdown_requested, reset_shutdown
from dual_hormone_ap.batch.job import JobStage, JobStatus, PatientJob
from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.core.errors import PipelineError, format_error
from dual_hormone_ap.core.paths import patient_stem
from dual_hormone_ap.estimation.dataset import IdDataset
from dual_hormone_ap.estimation.scenario import generate_id_dataset
from dual_hormone_ap.estimation.sysid import EstimationResult, IdentifiedModel, estimate
from dual_hormone_ap.models.mvp import CtrlParams
from dual_hormone_ap.models.patient import VirtualPatient
from dual_hormone_ap.trial.closed_loop import run_closed_loop
from dual_hormone_ap.trial.metrics import GlycemicStats
from dual_hormone_ap.trial.output import write_manifest, write_solver_trace, write_summary, write_trajectory
from dual_hormone_ap.trial.protocol import Protocol

logger = logging.getLogger(__name__)


def default_workers() -> int:
    """Available CPU parallelism."""
    return max(1, os.cpu_count() or 1)


IDENTIFICATION_STREAM = 1


def patient_seed(seed: int, patient: VirtualPatient, stream: int) -> int:
    """Seed for one random stream of one patient, derived from the master seed."""
    return int(np.random.SeedSequence([seed, patient.cgm_seed, stream]).generate_state(1)[0])


def identified_path(params_dir: Path, patient_id: str) -> Path:
    """Where a patient's identified model lives."""
    return params_dir / f"{patient_stem(patient_id)}.json"


def fit_dataset(data: IdDataset, config: RunConfig, seed: int, patient_id: str) -> EstimationResult:
    """Fit the control model to an identification dataset.

    Raises:
        EstimationError: If every optimizer start diverges.
    """
    fixed = replace(CtrlParams(), r=config.filter.measurement_variance)
    return estimate(
        data,
        fixed,
        settings=config.estimator,
        filter_settings=config.filter,
        step=config.integrator.control_step,
        sample_time=config.integrator.sample_time,
        seed=seed,
        patient_id=patient_id,
    )


def identify_patient(patient: VirtualPatient, config: RunConfig, seed: int) -> IdentifiedModel:
    """Generate the identification experiment for ``patient`` and fit the control model.

    Raises:
        EstimationError: If every optimizer start diverges.
    """
    id_seed = patient_seed(seed, patient, IDENTIFICATION_STREAM)
    data = generate_id_dataset(patient, config, id_seed)
    result = fit_dataset(data, config, id_seed, patient.patient_id)
    return result.to_identified(patient.patient_id, data, config.config_hash)


@dataclass(frozen=True)
class PatientOutcome:
    """What one patient job produced.

    Attributes:
        patient_id: Patient simulated.
        stats: Glycemic statistics, None for an invalid record.
        valid: Whether the closed loop ran to the end.
        failure: Reason for an invalid record.
        converged: Whether identification met its tolerances; a stored model without the flag counts as converged.
        fallback_count: Intervals dosed by the open-loop fallback.
        trajectory: Path of the trajectory CSV.
    """

    patient_id: str
    stats: GlycemicStats | None
    valid: bool
    failure: str
    converged: bool
    fallback_count: int
    trajectory: Path


def run_patient(
    patient: VirtualPatient,
    protocol: Protocol,
    config: RunConfig,
    seed: int,
    out_dir: Path,
    params_dir: Path | None = None,
    solver_traces: bool = False,
) -> PatientOutcome:
    """Full pipeline for one patient; runs inside a worker.

    Raises:
        PipelineError: Naming the stage and patient on any failure.
    """
    job = PatientJob(patient.patient_id)
    try:
        job.mark_active(JobStage.IDENTIFY)
        source = identified_path(params_dir, patient.patient_id) if params_dir else None
        if source is not None and source.is_file():
            model = IdentifiedModel.load(source)
            converged = bool(model.metadata.get("converged", True))
        else:
            model = identify_patient(patient, config, seed)
            converged = bool(model.metadata.get("converged", False))
            model.save(identified_path(out_dir / "identified", patient.patient_id))

        job.mark_active(JobStage.SIMULATE)
        record = run_closed_loop(patient, model, protocol, config, seed)

        job.mark_active(JobStage.WRITE)
        trajectory = write_trajectory(record, out_dir, config.config_hash)
        if solver_traces:
            write_solver_trace(record, out_dir, config.config_hash)
    except Exception as e:
        job.mark_failed(format_error(e))
        raise PipelineError(job.stage.value, job.error_message or str(e), patient.patient_id) from e

    job.mark_complete()
    stats = record.stats(config.integrator.sample_time) if record.valid else None
    fallbacks = sum(int(r.get("fallback", 0)) for r in record.rows)
    return PatientOutcome(patient.patient_id, stats, record.valid, record.failure, converged, fallbacks, trajectory)


@dataclass
class TrialOutcome:
    """Aggregated cohort run.

    Attributes:
        outcomes: Per-patient outcomes sorted by patient id.
        errors: Pipeline errors of failed patients.
        cancelled: Patients not run because of an interrupt.
        summary: Path of the summary CSV, if written.
        manifest: Path of the manifest, if written.
    """

    outcomes: list[PatientOutcome] = field(default_factory=list)
    errors: list[PipelineError] = field(default_factory=list)
    cancelled: list[str] = field(default_factory=list)
    summary: Path | None = None
    manifest: Path | None = None

    @property
    def invalid(self) -> list[PatientOutcome]:
        """Outcomes whose closed loop aborted."""
        return [o for o in self.outcomes if not o.valid]

    @property
    def ok(self) -> bool:
        """Whether every patient ran and produced a valid record."""
        return not self.errors and not self.invalid and not self.cancelled


def _collect(completion: CompletionResult[PatientOutcome]) -> tuple[list[PatientOutcome], list[PipelineError]]:
    errors: list[PipelineError] = []
    for job, e in completion.errors:
        if isinstance(e, CancelledError):
            if job is not None:
                job.mark_cancelled()
            continue
        error = e if isinstance(e, PipelineError) else PipelineError("trial", str(e), job.patient_id if job else None)
        if job is not None:
            job.mark_failed(error.message)
        errors.append(error)
    outcomes = sorted(completion.results, key=lambda o: o.patient_id)
    return outcomes, sorted(errors, key=lambda e: e.patient_id or "")


def run_trial(
    patients: list[VirtualPatient],
    protocol: Protocol,
    config: RunConfig,
    out_dir: Path,
    seed: int = 0,
    workers: int | None = None,
    params_dir: Path | None = None,
    solver_traces: bool = False,
    use_processes: bool = True,
    on_done: Callable[[str, bool], None] | None = None,
    manifest_extra: dict[str, Any] | None = None,
) -> TrialOutcome:
    """Run every patient in parallel and write the summary and manifest.

    An interrupt stops queued patients; the ones already running finish and
    are reported as usual.

    Args:
        patients: Cohort to simulate.
        protocol: Trial protocol.
        config: Run configuration.
        out_dir: Output directory.
        seed: Master seed.
        workers: Parallel workers; defaults to the CPU count.
        params_dir: Directory of identified models; missing ones are identified.
        solver_traces: Also write per-patient solver traces.
        use_processes: Use worker processes rather than threads.
        on_done: Called with ``(patient_id, success)`` as patients finish.
        manifest_extra: Extra manifest fields.
    """
    workers = min(workers or default_workers(), len(patients))
    out_dir.mkdir(parents=True, exist_ok=True)
    reset_shutdown()
    logger.info("Running %d patient(s) on %d worker(s)", len(patients), workers)

    jobs = [PatientJob(p.patient_id) for p in patients]
    with WorkerPool[PatientOutcome](max_workers=workers, use_processes=use_processes) as pool:
        futures = []
        for job, patient in zip(jobs, patients, strict=True):
            future = pool.submit_job(
                job,
                run_patient,
                patient,
                protocol,
                config,
                seed,
                out_dir,
                params_dir,
                solver_traces,
            )
            if future is None:
                job.mark_cancelled()
            else:
                futures.append(future)

        def report(future: Future[PatientOutcome], job: PatientJob | None) -> None:
            if is_shutdown_requested():
                pool.shutdown()
            if future.cancelled() or job is None:
                return
            if future.exception() is None:
                job.mark_complete()
            if on_done is not None:
                on_done(job.patient_id, future.exception() is None)

        completion = pool.wait_for_completion(futures, report)

    outcomes, errors = _collect(completion)
    cancelled = sorted(j.patient_id for j in jobs if j.status is JobStatus.CANCELLED)
    logger.info(
        "%d patient(s) finished, %d failed, %d cancelled", completion.success_count, len(errors), len(cancelled)
    )
    if cancelled:
        logger.warning("Interrupted: %d patient(s) were not run", len(cancelled))

    stats = {o.patient_id: o.stats for o in outcomes if o.stats is not None}
    outcome = TrialOutcome(outcomes=outcomes, errors=errors, cancelled=cancelled)
    if stats:
        outcome.summary = write_summary(stats, out_dir, config.config_hash)

    outcome.manifest = write_manifest(
        out_dir,
        {
            "package_version": __version__,
            "config_hash": config.config_hash,
            "config": config.to_dict(),
            "seed": seed,
            "protocol": protocol.to_dict(),
            "patients": [p.patient_id for p in sorted(patients, key=lambda p: p.patient_id)],
            "invalid": [o.patient_id for o in outcome.invalid],
            "failed": [{"patient": e.patient_id, "stage": e.stage, "message": e.message} for e in errors],
            "cancelled": cancelled,
            **(manifest_extra or {}),
        },
    )
    return outcome
