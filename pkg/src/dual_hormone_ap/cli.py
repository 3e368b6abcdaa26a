"""CLI implementation for dual-hormone-ap."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Annotated

import typer

from dual_hormone_ap import __version__
from dual_hormone_ap.config import CONFIG_ENV_VAR, RunConfig, load_config
from dual_hormone_ap.core import (
    ConfigError,
    DatasetError,
    EstimationError,
    FilterDivergenceError,
    ModelEvaluationError,
    format_error,
    patient_stem,
    write_csv,
)
from dual_hormone_ap.estimation import (
    IdDataset,
    filter_trace,
    generate_id_dataset,
    load_dataset,
    rmse,
    save_dataset,
    simulate_deterministic,
)
from dual_hormone_ap.models import SimParams, VirtualPatient, load_cohort, save_cohort
from dual_hormone_ap.trial import (
    TrialOutcome,
    fit_dataset,
    generate_cohort,
    load_default_cohort,
    load_protocol,
    make_patient,
    read_summary,
    run_trial,
)
from dual_hormone_ap.trial.cohort import DEFAULT_COHORT
from dual_hormone_ap.trial.output import MEAN_ROW
from dual_hormone_ap.trial.runner import IDENTIFICATION_STREAM, patient_seed
from dual_hormone_ap.ui import (
    console,
    create_batch_progress,
    print_error,
    print_info,
    print_success,
    print_warning,
    setup_logging,
    summary_table,
)

logger = logging.getLogger(__name__)

DEFAULT_COHORT_SIZE = 50
NOMINAL_PATIENT = "nominal"

# Create Typer app
app = typer.Typer(
    name="dual-hormone-ap",
    help="Dual-hormone artificial pancreas: virtual cohorts, model identification and closed-loop trials.",
    add_completion=False,
    no_args_is_help=True,
)

ConfigOption = Annotated[
    Path | None,
    typer.Option(
        "--config",
        "-c",
        help="JSON run configuration.",
        envvar=CONFIG_ENV_VAR,
        dir_okay=False,
        resolve_path=True,
    ),
]
SeedOption = Annotated[int, typer.Option("--seed", "-s", help="Master random seed.")]


def _load_config(path: Path | None) -> RunConfig:
    """Load the run configuration or exit with status 2."""
    try:
        return load_config(path)
    except ConfigError as e:
        print_error(format_error(e))
        raise typer.Exit(code=2) from None


def _load_patients(cohort_file: Path) -> list[VirtualPatient]:
    """Load a cohort file or exit with status 2."""
    if not cohort_file.is_file():
        print_error(format_error(FileNotFoundError(cohort_file)))
        raise typer.Exit(code=2)
    try:
        return load_cohort(cohort_file)
    except ConfigError as e:
        print_error(format_error(e))
        raise typer.Exit(code=2) from None


def select_patient(
    cohort_file: Path | None,
    patient_id: str | None,
    config: RunConfig,
) -> VirtualPatient:
    """Pick the patient to identify: by id from a cohort, its first patient, or the nominal one.

    Raises:
        typer.Exit: With status 2 if the cohort does not contain ``patient_id``.
    """
    if cohort_file is None:
        return make_patient(patient_id or NOMINAL_PATIENT, SimParams(), config)

    patients = _load_patients(cohort_file)
    if patient_id is None:
        return patients[0]
    for patient in patients:
        if patient.patient_id == patient_id:
            return patient
    print_error(f"Patient '{patient_id}' not found in {cohort_file}")
    raise typer.Exit(code=2)


def version_callback(value: bool) -> None:
    """Print version and exit."""
    if value:
        print(f"dual-hormone-ap version {__version__}")
        raise typer.Exit()


@app.callback()
def main(
    verbose: Annotated[
        bool,
        typer.Option("--verbose", "-V", help="Log solver and filter detail."),
    ] = False,
    version: Annotated[  # noqa: ARG001
        bool,
        typer.Option(
            "--version",
            "-v",
            help="Show version and exit.",
            callback=version_callback,
            is_eager=True,
        ),
    ] = False,
) -> None:
    """Dual-hormone artificial pancreas toolkit."""
    setup_logging(verbose)


@app.command()
def cohort(
    n: Annotated[
        int,
        typer.Argument(help="Number of virtual patients.", min=1),
    ] = DEFAULT_COHORT_SIZE,
    seed: SeedOption = 0,
    out: Annotated[
        Path,
        typer.Option("--out", "-o", help="Cohort file to write.", dir_okay=False),
    ] = Path("cohort.json"),
    config: ConfigOption = None,
) -> None:
    """Generate a seeded cohort of virtual patients."""
    run_config = _load_config(config)

    try:
        patients = generate_cohort(n, seed, run_config)
    except ModelEvaluationError as e:
        print_error(format_error(e))
        raise typer.Exit(code=1) from None

    meta = {
        "size": n,
        "seed": seed,
        "config_hash": run_config.config_hash,
        "package_version": __version__,
    }
    path = save_cohort(patients, out, meta)
    print_success(f"Wrote {n} patient(s) to {path}")


def _read_dataset(path: Path, sample_time: float) -> IdDataset:
    """Load a dataset CSV or exit with status 2."""
    if not path.is_file():
        print_error(format_error(FileNotFoundError(path)))
        raise typer.Exit(code=2)
    try:
        return load_dataset(path, sample_time)
    except DatasetError as e:
        print_error(format_error(e))
        raise typer.Exit(code=2) from None


@app.command()
def identify(
    data: Annotated[
        Path | None,
        typer.Argument(
            help="Identification dataset CSV (t_min, cgm_mmolL, uba_mUmin, ubo_mUmin, ug_ugmin, meal_g).",
            dir_okay=False,
            show_default=False,
        ),
    ] = None,
    generate: Annotated[
        bool,
        typer.Option("--generate", "-g", help="Simulate the identification experiment instead of reading data."),
    ] = False,
    cohort_file: Annotated[
        Path | None,
        typer.Option("--cohort", help="Cohort file holding the patient to simulate (with --generate)."),
    ] = None,
    patient: Annotated[
        str | None,
        typer.Option("--patient", "-p", help="Patient id."),
    ] = None,
    out: Annotated[
        Path | None,
        typer.Option("--out", "-o", help="Identified-model file to write.", dir_okay=False),
    ] = None,
    trace: Annotated[
        bool,
        typer.Option("--filter-trace", help="Replay the filter with the fitted model and write its per-sample rows."),
    ] = False,
    seed: SeedOption = 0,
    config: ConfigOption = None,
) -> None:
    """Identify the control model of one patient by maximum likelihood."""
    if (data is None) == (not generate):
        print_error("Provide either a dataset path or --generate.")
        raise typer.Exit(code=2)

    run_config = _load_config(config)
    sample_time = run_config.integrator.sample_time

    if data is not None:
        patient_id = patient or data.stem
        data_seed = seed
        dataset = _read_dataset(data, sample_time)
    else:
        subject = select_patient(cohort_file, patient, run_config)
        patient_id = subject.patient_id
        data_seed = patient_seed(seed, subject, IDENTIFICATION_STREAM)
        dataset = generate_id_dataset(subject, run_config, data_seed)

    target = out or Path("identified") / f"{patient_stem(patient_id)}.json"
    if generate:
        data_path = save_dataset(dataset, target.with_name(f"{target.stem}_data.csv"), run_config.config_hash)
        print_info(f"Wrote generated dataset to {data_path}")

    print_info(f"Identifying {patient_id} from {dataset.size} samples ({dataset.span / 60:.0f} h)...")
    try:
        with console.status("Maximizing likelihood..."):
            result = fit_dataset(dataset, run_config, data_seed, patient_id)
    except EstimationError as e:
        print_error(format_error(e))
        raise typer.Exit(code=1) from None

    model = result.to_identified(patient_id, dataset, run_config.config_hash)
    path = model.save(target)
    print_success(f"Saved: {path} (NLL {result.nll:.2f}, {result.iterations} iterations)")

    step = run_config.integrator.control_step
    predicted = simulate_deterministic(model.params, model.x0, dataset, step, sample_time)
    print_info(f"Noise-free fit RMSE {rmse(predicted, dataset.cgm):.2f} mmol/L")

    if trace:
        try:
            rows = filter_trace(model, dataset, run_config.filter, step, sample_time)
        except FilterDivergenceError as e:
            print_warning(format_error(e))
        else:
            trace_path = write_csv(target.with_name(f"{target.stem}_filter.csv"), rows.to_frame(), run_config.config_hash)
            print_info(f"Wrote filter trace to {trace_path}")

    if not result.converged:
        print_warning(f"Estimation for {patient_id} did not converge; the parameters may be unreliable")
        raise typer.Exit(code=1)


@app.command()
def trial(
    cohort_file: Annotated[
        Path | None,
        typer.Option("--cohort", help="Cohort file; the bundled 50-patient cohort when omitted."),
    ] = None,
    params_dir: Annotated[
        Path | None,
        typer.Option(
            "--params-dir",
            help="Directory of identified models; missing patients are identified first.",
            exists=True,
            file_okay=False,
            dir_okay=True,
            resolve_path=True,
        ),
    ] = None,
    protocol_file: Annotated[
        Path | None,
        typer.Option("--protocol", help="Trial protocol JSON; the bundled protocol when omitted."),
    ] = None,
    out: Annotated[
        Path,
        typer.Option("--out", "-o", help="Output directory.", file_okay=False),
    ] = Path("results"),
    workers: Annotated[
        int | None,
        typer.Option("--workers", "-w", help="Parallel workers (default: CPU count).", min=1),
    ] = None,
    patients: Annotated[
        int | None,
        typer.Option("--patients", "-n", help="Run only the first N patients.", min=1),
    ] = None,
    seed: SeedOption = 0,
    solver_traces: Annotated[
        bool,
        typer.Option("--solver-traces", help="Also write per-patient solver diagnostics."),
    ] = False,
    config: ConfigOption = None,
) -> None:
    """Run the virtual clinical trial in closed loop."""
    run_config = _load_config(config)

    try:
        protocol = load_protocol(protocol_file)
    except (ConfigError, FileNotFoundError) as e:
        print_error(format_error(e))
        raise typer.Exit(code=2) from None

    if cohort_file is not None:
        subjects = _load_patients(cohort_file)[:patients]
    else:
        print_info("Drawing the bundled default cohort")
        try:
            subjects = load_default_cohort(run_config, limit=patients)
        except (ConfigError, ModelEvaluationError) as e:
            print_error(format_error(e))
            raise typer.Exit(code=1) from None

    with create_batch_progress() as progress:
        task_id = progress.add_task("Simulating", total=len(subjects))

        def on_done(patient_id: str, success: bool) -> None:
            if not success:
                logger.warning("Patient %s failed", patient_id)
            progress.advance(task_id)

        outcome = run_trial(
            subjects,
            protocol,
            run_config,
            out,
            seed=seed,
            workers=workers,
            params_dir=params_dir,
            solver_traces=solver_traces,
            on_done=on_done,
            manifest_extra={"cohort": str(cohort_file) if cohort_file else DEFAULT_COHORT},
        )

    _print_trial_summary(outcome, len(subjects))
    raise typer.Exit(code=trial_exit_code(outcome, len(subjects)))


def trial_exit_code(outcome: TrialOutcome, requested: int) -> int:
    """Exit code for a trial run.

    Returns:
        0 if every patient succeeded, 2 if none did, 1 otherwise.
    """
    succeeded = requested - len(outcome.errors) - len(outcome.invalid) - len(outcome.cancelled)
    if outcome.ok and all(o.converged for o in outcome.outcomes):
        return 0
    if succeeded <= 0:
        return 2
    return 1


def _print_trial_summary(outcome: TrialOutcome, requested: int) -> None:
    """Print the trial summary."""
    valid = requested - len(outcome.errors) - len(outcome.invalid) - len(outcome.cancelled)
    print_info("")
    if valid > 0:
        print_success(f"{valid} of {requested} patient(s) completed")
    if outcome.summary is not None:
        print_success(f"Summary: {outcome.summary}")

    not_converged = [o.patient_id for o in outcome.outcomes if not o.converged]
    if not_converged:
        print_warning(f"Identification did not converge for: {', '.join(not_converged)}")

    fallbacks = sum(o.fallback_count for o in outcome.outcomes)
    if fallbacks:
        print_warning(f"Open-loop fallback dosed {fallbacks} interval(s)")

    if outcome.cancelled:
        print_warning(f"Interrupted: {len(outcome.cancelled)} patient(s) were not run")

    for invalid in outcome.invalid[:5]:
        print_error(f"  - {invalid.patient_id}: aborted ({invalid.failure})")
    for error in outcome.errors[:5]:
        print_error(f"  - {error.patient_id} ({error.stage}): {error.message}")
    hidden = len(outcome.invalid[5:]) + len(outcome.errors[5:])
    if hidden:
        print_error(f"  ... and {hidden} more")


@app.command()
def report(
    summary: Annotated[
        Path,
        typer.Argument(help="Summary CSV written by the trial command.", dir_okay=False),
    ],
) -> None:
    """Print a table of a trial summary."""
    try:
        frame = read_summary(summary)
    except FileNotFoundError as e:
        print_error(format_error(e))
        raise typer.Exit(code=2) from None

    console.print(summary_table(frame))

    per_patient = frame[frame["patient"] != MEAN_ROW]
    if per_patient.empty:
        print_warning("Summary holds no patients")
        return
    print_info(
        f"Cohort mean TIR {per_patient['pct_normo'].mean():.1f}%, "
        f"minimum {per_patient['pct_normo'].min():.1f}% ({len(per_patient)} patients)"
    )
    hypo = per_patient["pct_hypo"] + per_patient["pct_severe_hypo"]
    if (hypo > 0).any():
        print_warning(f"{int((hypo > 0).sum())} patient(s) spent time below 3.9 mmol/L")


if __name__ == "__main__":
    app()
