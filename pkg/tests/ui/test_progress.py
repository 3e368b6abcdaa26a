"""Unit tests for progress module."""

from __future__ import annotations

import logging
from unittest.mock import patch

import pandas as pd
from rich.logging import RichHandler
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn

from dual_hormone_ap.ui.progress import (
    REPORT_COLUMNS,
    console,
    create_batch_progress,
    print_error,
    print_info,
    print_success,
    print_warning,
    setup_logging,
    summary_table,
)


class TestSetupLogging:
    """Tests for setup_logging()."""

    def teardown_method(self) -> None:
        """Restore the default level."""
        setup_logging(verbose=False)

    def test_quiet_by_default(self) -> None:
        """Test that only warnings pass without --verbose."""
        setup_logging()
        root = logging.getLogger()
        assert root.level == logging.WARNING
        assert any(isinstance(h, RichHandler) for h in root.handlers)

    def test_verbose(self) -> None:
        """Test that --verbose enables debug output."""
        setup_logging(verbose=True)
        assert logging.getLogger().level == logging.DEBUG


class TestCreateBatchProgress:
    """Tests for create_batch_progress() factory function."""

    def test_returns_progress_instance(self) -> None:
        """Test that factory returns a Progress instance."""
        assert isinstance(create_batch_progress(), Progress)

    def test_has_required_columns(self) -> None:
        """Test that batch progress has spinner, bar and count columns."""
        column_types = [type(col) for col in create_batch_progress().columns]
        assert SpinnerColumn in column_types
        assert TextColumn in column_types
        assert BarColumn in column_types
        assert MofNCompleteColumn in column_types

    def test_uses_console(self) -> None:
        """Test that progress uses the shared console instance."""
        assert create_batch_progress().console is console

    def test_can_track_patients(self) -> None:
        """Test that batch progress can track patient count."""
        with create_batch_progress() as progress:
            task_id = progress.add_task("Simulating...", total=10)
            progress.update(task_id, completed=5)

            task = progress.tasks[0]
            assert task.completed == 5
            assert task.total == 10


class TestSummaryTable:
    """Tests for summary_table()."""

    def test_rows_and_columns(self) -> None:
        """Test one row per frame row and only known columns."""
        frame = pd.DataFrame(
            {
                "patient": ["patient-001", "mean"],
                "pct_normo": [80.0, 80.0],
                "mean_glucose_mmolL": [7.1, 7.1],
                "unrelated": [1.0, 1.0],
            }
        )
        table = summary_table(frame)
        headers = [c.header for c in table.columns]
        assert headers == ["patient", REPORT_COLUMNS["pct_normo"], REPORT_COLUMNS["mean_glucose_mmolL"]]
        assert table.row_count == 2
        assert table.title == "Glycemic outcome"


class TestPrintFunctions:
    """Tests for print helper functions."""

    def test_print_success(self) -> None:
        """Test print_success outputs correctly."""
        with patch("dual_hormone_ap.ui.progress.console") as mock_console:
            print_success("Trial finished")
            mock_console.print.assert_called_once()
            call_args = mock_console.print.call_args[0][0]
            assert "Trial finished" in call_args
            assert "✓" in call_args

    def test_print_error(self) -> None:
        """Test print_error outputs correctly."""
        with patch("dual_hormone_ap.ui.progress.console") as mock_console:
            print_error("Something went wrong")
            call_args = mock_console.print.call_args[0][0]
            assert "Something went wrong" in call_args
            assert "✗" in call_args

    def test_print_warning(self) -> None:
        """Test print_warning outputs correctly."""
        with patch("dual_hormone_ap.ui.progress.console") as mock_console:
            print_warning("Identification did not converge")
            call_args = mock_console.print.call_args[0][0]
            assert "Identification did not converge" in call_args
            assert "!" in call_args

    def test_print_info(self) -> None:
        """Test print_info outputs correctly."""
        with patch("dual_hormone_ap.ui.progress.console") as mock_console:
            print_info("Running 4 patients")
            call_args = mock_console.print.call_args[0][0]
            assert "Running 4 patients" in call_args
            assert "→" in call_args
