"""Unit tests for glycemic statistics."""

from __future__ import annotations

import numpy as np
import pytest

from dual_hormone_ap.trial import BAND_NAMES, band_percentages, rolling_totals, tir_stats


class TestBandPercentages:
    """Tests for band_percentages."""

    def test_all_in_range(self) -> None:
        """Test constant glucose at 6 mmol/L."""
        bands = band_percentages(np.full(288, 6.0))
        assert bands["normo"] == 100.0
        assert sum(bands.values()) == pytest.approx(100.0)

    def test_half_severe_hypo(self) -> None:
        """Test an even split between 2.5 and 6 mmol/L."""
        bands = band_percentages(np.array([2.5, 6.0] * 10))
        assert bands["severe_hypo"] == 50.0
        assert bands["normo"] == 50.0

    def test_edges_closed_on_the_left(self) -> None:
        """Test that each edge belongs to the band above it."""
        bands = band_percentages(np.array([3.0, 3.9, 10.0, 13.9]))
        assert bands["hypo"] == 25.0
        assert bands["normo"] == 25.0
        assert bands["hyper"] == 25.0
        assert bands["severe_hyper"] == 25.0
        assert bands["severe_hypo"] == 0.0

    def test_keys(self) -> None:
        """Test that every band is reported."""
        assert tuple(band_percentages(np.array([5.0]))) == BAND_NAMES

    def test_empty(self) -> None:
        """Test that no samples raise ValueError."""
        with pytest.raises(ValueError):
            band_percentages(np.array([]))


class TestTirStats:
    """Tests for tir_stats."""

    def test_daily_totals(self) -> None:
        """Test one day of constant rates."""
        n = 288
        stats = tir_stats(np.full(n, 7.0), np.full(n, 10.0), np.zeros(n), np.full(n, 1.0))
        assert stats.tir == 100.0
        assert stats.daily_basal == pytest.approx(14.4)
        assert stats.daily_bolus == 0.0
        assert stats.daily_glucagon == pytest.approx(1440.0)
        assert stats.mean_glucose == pytest.approx(7.0)

    def test_partial_day_scaled(self) -> None:
        """Test that half a day is scaled to a daily rate."""
        n = 144
        bolus = np.zeros(n)
        bolus[0] = 200.0
        stats = tir_stats(np.full(n, 7.0), np.zeros(n), bolus, np.zeros(n))
        assert stats.daily_bolus == pytest.approx(2.0)

    def test_row(self) -> None:
        """Test the flat summary row."""
        stats = tir_stats(np.array([3.5, 8.0]), np.zeros(2), np.zeros(2), np.zeros(2))
        row = stats.to_row()
        assert row["pct_hypo"] == 50.0
        assert row["min_glucose_mmolL"] == 3.5
        assert "glucagon_ug_per_day" in row


class TestRollingTotals:
    """Tests for rolling_totals."""

    def test_trailing_window(self) -> None:
        """Test a two-sample window over constant rates."""
        np.testing.assert_allclose(rolling_totals(np.ones(4), 2), [5.0, 10.0, 10.0, 10.0])

    def test_single_dose(self) -> None:
        """Test that a dose leaves the window after its length."""
        rates = np.array([0.0, 3.0, 0.0, 0.0, 0.0])
        np.testing.assert_allclose(rolling_totals(rates, 3), [0.0, 15.0, 15.0, 15.0, 0.0])

    def test_empty(self) -> None:
        """Test an empty series."""
        assert rolling_totals(np.array([]), 3).size == 0
