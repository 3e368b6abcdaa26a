"""Unit tests for the CGM sensor."""

from __future__ import annotations

import numpy as np
import pytest

from dual_hormone_ap.models import CgmSensor


class TestCgmSensor:
    """Tests for CgmSensor."""

    def test_noiseless_reads_interstitial_glucose(self) -> None:
        """Test that zero noise returns GI unchanged."""
        sensor = CgmSensor(noise_sd=0.0)
        assert [sensor.sample(g) for g in (6.0, 7.5, 3.2)] == [6.0, 7.5, 3.2]

    def test_floor(self) -> None:
        """Test that readings never drop below the floor."""
        sensor = CgmSensor(noise_sd=0.0, floor=0.5)
        assert sensor.sample(0.1) == 0.5

    def test_same_seed_same_sequence(self) -> None:
        """Test that the seed fixes the error sequence."""
        first = CgmSensor(seed=42)
        second = CgmSensor(seed=42)
        assert [first.sample(6.0) for _ in range(20)] == [second.sample(6.0) for _ in range(20)]

    def test_different_seeds_differ(self) -> None:
        """Test that different seeds give different sequences."""
        first = CgmSensor(seed=1)
        second = CgmSensor(seed=2)
        assert [first.sample(6.0) for _ in range(5)] != [second.sample(6.0) for _ in range(5)]

    def test_reading_carries_current_error(self) -> None:
        """Test that a reading equals GI plus the pending error."""
        sensor = CgmSensor(seed=3)
        error = sensor.error
        assert sensor.sample(8.0) == pytest.approx(8.0 + error)

    @pytest.mark.slow
    def test_stationary_standard_deviation(self) -> None:
        """Test the stationary SD over 1e5 samples."""
        sensor = CgmSensor(noise_sd=0.25, ar=0.7, floor=-100.0, seed=9)
        errors = np.array([sensor.sample(0.0) for _ in range(100_000)])
        assert errors.std() == pytest.approx(0.25, rel=0.05)
