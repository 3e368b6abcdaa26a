"""Unit tests for CLI argument parsing and integration."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any
from unittest.mock import MagicMock, patch

import numpy as np
import pandas as pd
import pytest
from typer.testing import CliRunner

from dual_hormone_ap.core.errors import EstimationError, PipelineError
from dual_hormone_ap.estimation import IdDataset, IdentifiedModel, save_dataset
from dual_hormone_ap.models import CtrlParams, VirtualPatient, ctrl_equilibrium, load_cohort, save_cohort
from dual_hormone_ap.trial import PatientOutcome, TrialOutcome, tir_stats, write_summary
from dual_hormone_ap.trial.metrics import GlycemicStats

HASH = "0" * 64


def flat_dataset(samples: int = 200) -> IdDataset:
    t = 5.0 * np.arange(samples)
    zeros = np.zeros(samples)
    return IdDataset(t, np.full(samples, 6.0), np.full(samples, 10.0), zeros, zeros, zeros)


def flat_stats(glucose: float = 6.0) -> GlycemicStats:
    n = 12
    return tir_stats(np.full(n, glucose), np.full(n, 10.0), np.zeros(n), np.zeros(n))


def fit_result(converged: bool = True) -> MagicMock:
    params = CtrlParams()
    result = MagicMock(nll=12.5, iterations=40, converged=converged)
    result.to_identified.side_effect = lambda pid, _data, config_hash="": IdentifiedModel(
        pid, params, ctrl_equilibrium(params, 10.0, -4.0), -4.0, {"converged": converged, "config_hash": config_hash}
    )
    return result


def outcome_for(patient_id: str, converged: bool = True, valid: bool = True) -> PatientOutcome:
    stats = flat_stats() if valid else None
    return PatientOutcome(patient_id, stats, valid, "" if valid else "plant", converged, 0, Path("x.csv"))


@pytest.fixture
def runner() -> CliRunner:
    """Create CLI test runner."""
    return CliRunner()


@pytest.fixture
def cli_app() -> Any:
    """Get the CLI app for testing."""
    from dual_hormone_ap.cli import app

    return app


@pytest.fixture
def cohort_file(nominal_patient: VirtualPatient, temp_dir: Path) -> Path:
    """A one-patient cohort on disk."""
    return save_cohort([nominal_patient], temp_dir / "cohort.json", {"size": 1})


class TestCLIArgumentParsing:
    """Tests for top-level options."""

    def test_help_flag(self, runner: CliRunner, cli_app: Any) -> None:
        """Test --help lists every command."""
        result = runner.invoke(cli_app, ["--help"])
        assert result.exit_code == 0
        for command in ("cohort", "identify", "trial", "report"):
            assert command in result.output

    def test_version_flag(self, runner: CliRunner, cli_app: Any) -> None:
        """Test --version flag shows version."""
        from dual_hormone_ap import __version__

        result = runner.invoke(cli_app, ["--version"])
        assert result.exit_code == 0
        assert __version__ in result.output

    def test_bad_config_exit_code_two(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that an invalid config file exits with 2."""
        config = temp_dir / "config.json"
        config.write_text(json.dumps({"solver": {"horizon": -1.0}}), encoding="utf-8")
        result = runner.invoke(cli_app, ["cohort", "2", "--config", str(config), "--out", str(temp_dir / "c.json")])
        assert result.exit_code == 2


class TestCohortCommand:
    """Tests for the cohort command."""

    def test_writes_cohort(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that the requested number of patients is written."""
        out = temp_dir / "cohort.json"
        result = runner.invoke(cli_app, ["cohort", "3", "--seed", "4", "--out", str(out)])
        assert result.exit_code == 0
        patients = load_cohort(out)
        assert len(patients) == 3
        meta = json.loads(out.read_text(encoding="utf-8"))["meta"]
        assert meta["seed"] == 4
        assert meta["size"] == 3

    def test_zero_patients_rejected(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that the cohort size must be positive."""
        result = runner.invoke(cli_app, ["cohort", "0", "--out", str(temp_dir / "c.json")])
        assert result.exit_code != 0


class TestIdentifyCommand:
    """Tests for the identify command."""

    def test_requires_one_source(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that exactly one of a dataset and --generate is required."""
        assert runner.invoke(cli_app, ["identify"]).exit_code == 2
        data = save_dataset(flat_dataset(), temp_dir / "data.csv", HASH)
        assert runner.invoke(cli_app, ["identify", str(data), "--generate"]).exit_code == 2

    def test_missing_dataset(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that a missing dataset exits with 2."""
        result = runner.invoke(cli_app, ["identify", str(temp_dir / "missing.csv")])
        assert result.exit_code == 2

    def test_malformed_dataset(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that a too-short dataset exits with 2."""
        data = save_dataset(flat_dataset(20), temp_dir / "short.csv", HASH)
        result = runner.invoke(cli_app, ["identify", str(data)])
        assert result.exit_code == 2

    def test_identifies_dataset(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that the identified model is saved under the dataset's name."""
        data = save_dataset(flat_dataset(), temp_dir / "patient-009.csv", HASH)
        out = temp_dir / "model.json"
        with patch("dual_hormone_ap.cli.fit_dataset", return_value=fit_result()) as fit:
            result = runner.invoke(cli_app, ["identify", str(data), "--out", str(out)])

        assert result.exit_code == 0
        assert fit.call_args.args[3] == "patient-009"
        assert IdentifiedModel.load(out).patient_id == "patient-009"
        assert len(json.loads(out.read_text())["metadata"]["config_hash"]) == 64

    def test_generate_writes_dataset(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that --generate also stores the simulated experiment."""
        out = temp_dir / "nominal.json"
        with (
            patch("dual_hormone_ap.cli.generate_id_dataset", return_value=flat_dataset()),
            patch("dual_hormone_ap.cli.fit_dataset", return_value=fit_result()),
        ):
            result = runner.invoke(cli_app, ["identify", "--generate", "--out", str(out)])

        assert result.exit_code == 0
        assert out.is_file()
        assert (temp_dir / "nominal_data.csv").is_file()

    def test_generate_unknown_patient(
        self, runner: CliRunner, cli_app: Any, cohort_file: Path
    ) -> None:
        """Test that an id missing from the cohort exits with 2."""
        result = runner.invoke(cli_app, ["identify", "--generate", "--cohort", str(cohort_file), "-p", "nobody"])
        assert result.exit_code == 2

    def test_filter_trace(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that --filter-trace writes the replayed filter rows."""
        data = save_dataset(flat_dataset(), temp_dir / "p.csv", HASH)
        out = temp_dir / "p.json"
        with patch("dual_hormone_ap.cli.fit_dataset", return_value=fit_result()):
            result = runner.invoke(cli_app, ["identify", str(data), "--out", str(out), "--filter-trace"])

        assert result.exit_code == 0
        trace = pd.read_csv(temp_dir / "p_filter.csv", comment="#")
        assert len(trace) == 200
        assert {"t_min", "y_hat", "e", "Re"} <= set(trace.columns)

    def test_not_converged_exit_code_one(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that a non-converged fit is saved but exits with 1."""
        data = save_dataset(flat_dataset(), temp_dir / "p.csv", HASH)
        out = temp_dir / "p.json"
        with patch("dual_hormone_ap.cli.fit_dataset", return_value=fit_result(converged=False)):
            result = runner.invoke(cli_app, ["identify", str(data), "--out", str(out)])
        assert result.exit_code == 1
        assert out.is_file()

    def test_estimation_failure_exit_code_one(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that diverging starts exit with 1."""
        data = save_dataset(flat_dataset(), temp_dir / "p.csv", HASH)
        error = EstimationError("p", "all starts diverged")
        with patch("dual_hormone_ap.cli.fit_dataset", side_effect=error):
            result = runner.invoke(cli_app, ["identify", str(data), "--out", str(temp_dir / "p.json")])
        assert result.exit_code == 1


class TestTrialCommand:
    """Tests for the trial command."""

    def test_success_exit_code_zero(
        self, runner: CliRunner, cli_app: Any, cohort_file: Path, temp_dir: Path
    ) -> None:
        """Test a clean run with a cohort file."""
        outcome = TrialOutcome(outcomes=[outcome_for("patient-001")], summary=temp_dir / "summary.csv")
        with patch("dual_hormone_ap.cli.run_trial", return_value=outcome) as run:
            result = runner.invoke(
                cli_app, ["trial", "--cohort", str(cohort_file), "--out", str(temp_dir / "out"), "-w", "1"]
            )

        assert result.exit_code == 0
        patients = run.call_args.args[0]
        assert [p.patient_id for p in patients] == ["patient-001"]
        assert run.call_args.kwargs["workers"] == 1

    def test_default_cohort(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that the bundled cohort is used when none is given."""
        outcome = TrialOutcome(outcomes=[outcome_for("a"), outcome_for("b")])
        with patch("dual_hormone_ap.cli.run_trial", return_value=outcome) as run:
            result = runner.invoke(cli_app, ["trial", "-n", "2", "--out", str(temp_dir / "out")])
        assert result.exit_code == 0
        assert [p.patient_id for p in run.call_args.args[0]] == ["patient-001", "patient-002"]
        assert run.call_args.kwargs["manifest_extra"] == {"cohort": "default_cohort.json"}

    def test_partial_failure_exit_code_one(
        self, runner: CliRunner, cli_app: Any, cohort_file: Path, temp_dir: Path
    ) -> None:
        """Test that a failed patient alongside a good one exits with 1."""
        outcome = TrialOutcome(
            outcomes=[outcome_for("patient-001")],
            errors=[PipelineError("identify", "diverged", "patient-002")],
        )
        with (
            patch("dual_hormone_ap.cli._load_patients", return_value=[MagicMock(), MagicMock()]),
            patch("dual_hormone_ap.cli.run_trial", return_value=outcome),
        ):
            result = runner.invoke(cli_app, ["trial", "--cohort", str(cohort_file), "--out", str(temp_dir)])
        assert result.exit_code == 1
        assert "diverged" in result.output

    def test_missing_protocol(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that a missing protocol file exits with 2."""
        result = runner.invoke(cli_app, ["trial", "--protocol", str(temp_dir / "none.json")])
        assert result.exit_code == 2


class TestTrialExitCode:
    """Tests for trial_exit_code()."""

    def test_all_succeeded(self) -> None:
        """Test the clean case."""
        from dual_hormone_ap.cli import trial_exit_code

        assert trial_exit_code(TrialOutcome(outcomes=[outcome_for("a")]), 1) == 0

    def test_not_converged(self) -> None:
        """Test that a non-converged identification lowers the status."""
        from dual_hormone_ap.cli import trial_exit_code

        assert trial_exit_code(TrialOutcome(outcomes=[outcome_for("a", converged=False)]), 1) == 1

    def test_invalid_record(self) -> None:
        """Test that an aborted closed loop counts as not succeeded."""
        from dual_hormone_ap.cli import trial_exit_code

        outcome = TrialOutcome(outcomes=[outcome_for("a"), outcome_for("b", valid=False)])
        assert trial_exit_code(outcome, 2) == 1
        assert trial_exit_code(TrialOutcome(outcomes=[outcome_for("b", valid=False)]), 1) == 2

    def test_cancelled(self) -> None:
        """Test that interrupted patients count as not succeeded."""
        from dual_hormone_ap.cli import trial_exit_code

        assert trial_exit_code(TrialOutcome(outcomes=[outcome_for("a")], cancelled=["b"]), 2) == 1
        assert trial_exit_code(TrialOutcome(cancelled=["a", "b"]), 2) == 2


class TestReportCommand:
    """Tests for the report command."""

    def test_prints_table(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that the summary is rendered with the cohort mean."""
        path = write_summary({"patient-001": flat_stats(), "patient-002": flat_stats(3.5)}, temp_dir, HASH)
        result = runner.invoke(cli_app, ["report", str(path)])
        assert result.exit_code == 0
        assert "Glycemic outcome" in result.output
        assert "2 patients" in result.output
        assert "below 3.9" in result.output

    def test_missing_summary(self, runner: CliRunner, cli_app: Any, temp_dir: Path) -> None:
        """Test that a missing summary exits with 2."""
        result = runner.invoke(cli_app, ["report", str(temp_dir / "summary.csv")])
        assert result.exit_code == 2
