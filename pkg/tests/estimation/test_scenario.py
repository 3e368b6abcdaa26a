"""Unit tests for the identification scenarios."""

from __future__ import annotations

import numpy as np
import pytest

from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.estimation import generate_ctrl_dataset, generate_id_dataset, meal_bolus_rate
from dual_hormone_ap.models import CtrlIndex, CtrlParams, VirtualPatient, ctrl_equilibrium, logsi_for_glucose


class TestMealBolusRate:
    """Tests for meal_bolus_rate."""

    def test_carb_ratio_dose(self) -> None:
        """Test that 75 g at 10 g/U over 5 min is 1500 mU/min."""
        assert meal_bolus_rate(75.0, 10.0, 5.0) == pytest.approx(1500.0)


class TestGenerateIdDataset:
    """Tests for generate_id_dataset."""

    def test_grid_and_doses(self, nominal_patient: VirtualPatient, run_config: RunConfig) -> None:
        """Test the sample grid, basal column and meal bolus placement."""
        data = generate_id_dataset(nominal_patient, run_config, seed=1, span=240.0, meals=((60.0, 50.0),))
        assert data.size == 49
        assert data.sample_time == 5.0
        np.testing.assert_allclose(data.basal, nominal_patient.nominal_basal)
        assert data.meals[12] == 50.0
        assert data.bolus[12] == pytest.approx(meal_bolus_rate(50.0, nominal_patient.icr, 5.0))
        assert np.count_nonzero(data.bolus) == 1
        assert np.all(data.glucagon == 0.0)

    def test_starts_at_target(self, nominal_patient: VirtualPatient, run_config: RunConfig) -> None:
        """Test that the first readings sit near the fasting target."""
        data = generate_id_dataset(nominal_patient, run_config, seed=2, span=60.0, meals=())
        assert abs(data.cgm[0] - 6.0) < 1.5

    def test_meal_raises_readings(self, nominal_patient: VirtualPatient, run_config: RunConfig) -> None:
        """Test that readings rise in the hours after a meal."""
        data = generate_id_dataset(nominal_patient, run_config, seed=3, span=180.0, meals=((0.0, 60.0),))
        assert data.cgm[12:24].mean() > data.cgm[0]

    def test_seeded(self, nominal_patient: VirtualPatient, run_config: RunConfig) -> None:
        """Test that the seed fixes the dataset."""
        first = generate_id_dataset(nominal_patient, run_config, seed=4, span=120.0)
        second = generate_id_dataset(nominal_patient, run_config, seed=4, span=120.0)
        np.testing.assert_array_equal(first.cgm, second.cgm)


class TestGenerateCtrlDataset:
    """Tests for generate_ctrl_dataset."""

    def test_matched_model_data(self, ctrl_params: CtrlParams) -> None:
        """Test the grid and that the readings start near the initial GI."""
        x0 = ctrl_equilibrium(ctrl_params, 10.0, logsi_for_glucose(ctrl_params, 10.0, 6.0))
        data = generate_ctrl_dataset(ctrl_params, x0, 10.0, 10.0, seed=5, span=120.0, meals=())
        assert data.size == 25
        assert abs(data.cgm[0] - x0[CtrlIndex.GI]) < 5 * np.sqrt(ctrl_params.r)
