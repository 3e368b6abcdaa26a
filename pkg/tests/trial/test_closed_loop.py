"""Tests for the closed-loop simulation."""

from __future__ import annotations

from dataclasses import replace
from unittest.mock import patch

import numpy as np
import pytest

from dual_hormone_ap.config import RunConfig, SolverSettings
from dual_hormone_ap.core.errors import IntegrationError
from dual_hormone_ap.estimation import IdentifiedModel
from dual_hormone_ap.models import CtrlIndex, CtrlParams, VirtualPatient, ctrl_equilibrium, logsi_for_glucose
from dual_hormone_ap.trial import EventType, Protocol, ProtocolEvent, initial_belief_mean, run_closed_loop


@pytest.fixture
def short_config() -> RunConfig:
    """Two-hour horizon and a small iteration cap."""
    return replace(RunConfig(), solver=SolverSettings(horizon=120.0, max_iterations=10))


@pytest.fixture
def model(nominal_patient: VirtualPatient, ctrl_params: CtrlParams) -> IdentifiedModel:
    """Default control model placed at target under the patient's basal."""
    logsi = logsi_for_glucose(ctrl_params, nominal_patient.nominal_basal, 6.0)
    x0 = ctrl_equilibrium(ctrl_params, nominal_patient.nominal_basal, logsi)
    return IdentifiedModel(nominal_patient.patient_id, ctrl_params, x0, logsi)


def meal_protocol(span: float) -> Protocol:
    return Protocol((ProtocolEvent(EventType.MEAL, 60.0, 40.0),), span=span)


class TestInitialBelief:
    """Tests for initial_belief_mean."""

    def test_glucose_from_reading(self, model: IdentifiedModel) -> None:
        """Test that G and GI start at the first reading."""
        x = initial_belief_mean(model, 10.0, 7.5)
        assert x[CtrlIndex.G] == 7.5
        assert x[CtrlIndex.GI] == 7.5
        assert x[CtrlIndex.LOGSI] == model.logsi0


class TestRunClosedLoop:
    """Tests for run_closed_loop."""

    def test_plant_failure_invalidates_record(
        self, nominal_patient: VirtualPatient, model: IdentifiedModel, short_config: RunConfig
    ) -> None:
        """Test that a plant integration error aborts the run."""
        with patch(
            "dual_hormone_ap.trial.closed_loop.simulate_interval",
            side_effect=IntegrationError(2),
        ):
            record = run_closed_loop(nominal_patient, model, meal_protocol(60.0), short_config, seed=1)
        assert not record.valid
        assert "stage 2" in record.failure
        assert len(record.rows) == 1
        with pytest.raises(ValueError, match="invalid"):
            record.stats()

    @pytest.mark.slow
    def test_meal_day(self, nominal_patient: VirtualPatient, model: IdentifiedModel, short_config: RunConfig) -> None:
        """Test four hours around a 40 g meal."""
        record = run_closed_loop(nominal_patient, model, meal_protocol(240.0), short_config, seed=3)
        assert record.valid
        assert len(record.rows) == 48
        glucose = record.column("G_mmolL")
        assert glucose.min() > 2.5
        assert glucose.max() < 20.0
        insulin = record.column("uba_mUmin") + record.column("ubo_mUmin")
        glucagon = record.column("ug_ugmin")
        assert not np.any((insulin > 0) & (glucagon > 0))
        assert record.column("meal_g").sum() == 40.0
        stats = record.stats()
        assert sum(stats.bands.values()) == pytest.approx(100.0)

    @pytest.mark.slow
    def test_seeded(self, nominal_patient: VirtualPatient, model: IdentifiedModel, short_config: RunConfig) -> None:
        """Test that a seed reproduces the run."""
        first = run_closed_loop(nominal_patient, model, meal_protocol(90.0), short_config, seed=4)
        second = run_closed_loop(nominal_patient, model, meal_protocol(90.0), short_config, seed=4)
        assert first.to_frame().equals(second.to_frame())
