"""Unit tests for maximum-likelihood identification."""

from __future__ import annotations

import json
import math
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from dual_hormone_ap.config import EstimatorSettings
from dual_hormone_ap.core.errors import ConfigError, EstimationError
from dual_hormone_ap.estimation import (
    IdDataset,
    IdentifiedModel,
    InnovationRecord,
    LikelihoodProblem,
    Theta,
    estimate,
    filter_trace,
    generate_ctrl_dataset,
    initial_state,
    negative_log_likelihood,
    rmse,
    simulate_deterministic,
)
from dual_hormone_ap.models import CtrlIndex, CtrlParams, ctrl_equilibrium, logsi_for_glucose

BASAL = 10.0


def equilibrium(params: CtrlParams) -> np.ndarray:
    return ctrl_equilibrium(params, BASAL, logsi_for_glucose(params, BASAL, 6.0))


def true_theta(params: CtrlParams, x0: np.ndarray) -> Theta:
    return Theta(
        k_m=params.k_m,
        tau_d=params.tau_d,
        v_g=params.v_g,
        egp=params.egp,
        sigma_g=params.sigma_g,
        sigma_si=params.sigma_si,
        g0=float(x0[CtrlIndex.G]),
        gi0=float(x0[CtrlIndex.GI]),
        logsi0=float(x0[CtrlIndex.LOGSI]),
    )


@pytest.fixture
def short_dataset(ctrl_params: CtrlParams) -> IdDataset:
    """Four hours of matched-model data with one meal."""
    return generate_ctrl_dataset(
        ctrl_params, equilibrium(ctrl_params), BASAL, 10.0, seed=11, span=240.0, meals=((30.0, 40.0),)
    )


class TestNegativeLogLikelihood:
    """Tests for negative_log_likelihood."""

    def test_single_unit_record(self) -> None:
        """Test the constant term for a zero innovation of unit variance."""
        value = negative_log_likelihood([InnovationRecord(error=0.0, variance=1.0, prediction=6.0)])
        assert value == pytest.approx(0.9189385332046727, abs=1e-12)

    def test_two_records(self) -> None:
        """Test a hand-computed two-sample sum."""
        records = [
            InnovationRecord(error=1.0, variance=2.0, prediction=6.0),
            InnovationRecord(error=-0.5, variance=0.5, prediction=6.0),
        ]
        assert negative_log_likelihood(records) == pytest.approx(math.log(2 * math.pi) + 0.5, abs=1e-12)

    def test_doubling_variance_of_zero_innovations(self) -> None:
        """Test that doubling Re with e = 0 adds n/2 log 2."""
        base = [InnovationRecord(error=0.0, variance=0.3, prediction=6.0) for _ in range(4)]
        doubled = [InnovationRecord(error=0.0, variance=0.6, prediction=6.0) for _ in range(4)]
        delta = negative_log_likelihood(doubled) - negative_log_likelihood(base)
        assert delta == pytest.approx(2.0 * math.log(2.0), abs=1e-12)

    def test_empty(self) -> None:
        """Test that no records give zero."""
        assert negative_log_likelihood([]) == 0.0


class TestTheta:
    """Tests for Theta."""

    def test_vector_round_trip(self, ctrl_params: CtrlParams) -> None:
        """Test that positive entries go through logs and back."""
        theta = true_theta(ctrl_params, equilibrium(ctrl_params))
        z = theta.to_vector()
        assert z.size == 9
        assert z[0] == pytest.approx(math.log(ctrl_params.k_m))
        back = Theta.from_vector(z)
        assert back.egp == pytest.approx(theta.egp, rel=1e-12)
        assert back.logsi0 == theta.logsi0

    def test_apply_keeps_fixed_parameters(self, ctrl_params: CtrlParams) -> None:
        """Test that only the identified subset changes."""
        theta = Theta(0.03, 45.0, 13.0, 0.06, 0.1, 0.02, 6.0, 6.0, -4.0)
        params = theta.apply(ctrl_params)
        assert params.k_m == 0.03
        assert params.sigma_si == 0.02
        assert params.c_i == ctrl_params.c_i
        assert params.r == ctrl_params.r

    def test_initial_state_matches_equilibrium(self, ctrl_params: CtrlParams) -> None:
        """Test that the true theta reproduces the fasting equilibrium."""
        x0 = equilibrium(ctrl_params)
        theta = true_theta(ctrl_params, x0)
        np.testing.assert_allclose(initial_state(theta, ctrl_params, BASAL), x0, rtol=1e-12, atol=1e-15)


class TestLikelihoodProblem:
    """Tests for LikelihoodProblem."""

    def test_sentinel_for_non_finite_vector(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test that NaN and extreme vectors return the sentinel."""
        problem = LikelihoodProblem(short_dataset, ctrl_params, sentinel=1e10)
        z = true_theta(ctrl_params, equilibrium(ctrl_params)).to_vector()
        bad = z.copy()
        bad[2] = np.nan
        assert problem(bad) == 1e10
        bad[2] = 80.0
        assert problem(bad) == 1e10
        assert problem.evaluations == 0

    def test_finite_at_truth(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test a finite NLL at the generating parameters."""
        problem = LikelihoodProblem(short_dataset, ctrl_params)
        z = true_theta(ctrl_params, equilibrium(ctrl_params)).to_vector()
        value = problem(z)
        assert math.isfinite(value)
        assert value < 1e10
        assert problem(z) == value


class TestEstimate:
    """Tests for estimate."""

    def test_improves_on_start(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test that a short run never ends above its starting NLL."""
        settings = EstimatorSettings(restarts=1, max_iterations=30)
        start = Theta.initial_guess(ctrl_params, short_dataset)
        start_nll = LikelihoodProblem(short_dataset, ctrl_params)(start.to_vector())

        result = estimate(short_dataset, ctrl_params, settings=settings, seed=0)

        assert result.nll <= start_nll
        assert result.iterations <= 30
        assert len(result.starts) == 1
        assert all(b <= a for a, b in zip(result.history, result.history[1:], strict=False))
        assert result.params.c_i == ctrl_params.c_i

    def test_all_starts_diverge(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test that EstimationError carries per-start diagnostics."""
        settings = EstimatorSettings(restarts=2, max_iterations=5)
        with (
            patch.object(LikelihoodProblem, "nll", return_value=1e10),
            pytest.raises(EstimationError) as exc_info,
        ):
            estimate(short_dataset, ctrl_params, settings=settings, patient_id="patient-009")
        assert exc_info.value.patient_id == "patient-009"
        assert len(exc_info.value.diagnostics["starts"]) == 2

    def test_identified_metadata(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test the metadata written with an identified model."""
        result = estimate(short_dataset, ctrl_params, settings=EstimatorSettings(restarts=1, max_iterations=5))
        model = result.to_identified("patient-001", short_dataset)
        assert model.metadata["samples"] == short_dataset.size
        assert model.metadata["data_span_min"] == 240.0
        assert model.metadata["converged"] is result.converged
        assert model.logsi0 == result.theta.logsi0

    def test_saved_model_carries_config_hash(
        self, short_dataset: IdDataset, ctrl_params: CtrlParams, temp_dir: Path
    ) -> None:
        """Test that the saved model file records the run config hash."""
        result = estimate(short_dataset, ctrl_params, settings=EstimatorSettings(restarts=1, max_iterations=5))
        path = result.to_identified("patient-001", short_dataset, "ab" * 32).save(temp_dir / "model.json")
        assert json.loads(path.read_text())["metadata"]["config_hash"] == "ab" * 32

    @pytest.mark.slow
    def test_matched_model_fit(self, ctrl_params: CtrlParams) -> None:
        """Test that a day of matched-model data is fitted about as well as the truth explains it."""
        x0 = equilibrium(ctrl_params)
        data = generate_ctrl_dataset(ctrl_params, x0, BASAL, 10.0, seed=21)
        truth_nll = LikelihoodProblem(data, ctrl_params)(true_theta(ctrl_params, x0).to_vector())

        result = estimate(data, ctrl_params, settings=EstimatorSettings(restarts=2, max_iterations=800), seed=3)

        assert result.nll <= truth_nll + 5.0
        fit = simulate_deterministic(result.params, result.x0, data)
        assert rmse(fit, data.cgm) < 1.5


class TestIdentifiedModel:
    """Tests for IdentifiedModel files."""

    def test_save_and_load(self, temp_dir: Path, ctrl_params: CtrlParams) -> None:
        """Test a JSON round trip."""
        x0 = equilibrium(ctrl_params)
        model = IdentifiedModel("patient-002", ctrl_params, x0, float(x0[CtrlIndex.LOGSI]), {"nll": 1.5})
        path = model.save(temp_dir / "identified" / "patient-002.json")

        data = json.loads(path.read_text(encoding="utf-8"))
        assert set(data) == {"patient_id", "params", "initial_state", "logSI_0", "metadata"}

        loaded = IdentifiedModel.load(path)
        assert loaded.patient_id == "patient-002"
        assert loaded.params == ctrl_params
        np.testing.assert_allclose(loaded.x0, x0)

    def test_missing_field(self) -> None:
        """Test that an incomplete file raises ConfigError."""
        with pytest.raises(ConfigError, match="initial_state"):
            IdentifiedModel.from_dict({"patient_id": "p", "params": {}, "logSI_0": -4.0})

    def test_invalid_json(self, temp_dir: Path) -> None:
        """Test that malformed JSON raises ConfigError."""
        path = temp_dir / "bad.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(ConfigError):
            IdentifiedModel.load(path)


class TestDeterministicSimulation:
    """Tests for simulate_deterministic and rmse."""

    def test_equilibrium_is_flat(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test that basal-only inputs from equilibrium keep GI constant."""
        x0 = equilibrium(ctrl_params)
        flat = IdDataset(
            t=short_dataset.t,
            cgm=short_dataset.cgm,
            basal=np.full(short_dataset.size, BASAL),
            bolus=np.zeros(short_dataset.size),
            glucagon=np.zeros(short_dataset.size),
            meals=np.zeros(short_dataset.size),
        )
        out = simulate_deterministic(ctrl_params, x0, flat)
        np.testing.assert_allclose(out, x0[CtrlIndex.GI], rtol=1e-8)

    def test_rmse(self) -> None:
        """Test a hand-computed RMSE."""
        assert rmse(np.array([1.0, 3.0]), np.array([2.0, 2.0])) == pytest.approx(1.0)


class TestFilterTrace:
    """Tests for filter_trace."""

    def test_one_row_per_sample(self, short_dataset: IdDataset, ctrl_params: CtrlParams) -> None:
        """Test that the replay keeps a row for every CGM sample."""
        model = IdentifiedModel("p", ctrl_params, equilibrium(ctrl_params), -4.0)
        frame = filter_trace(model, short_dataset).to_frame()
        assert len(frame) == short_dataset.size
        assert np.allclose(frame["t_min"], short_dataset.t)
        assert (frame["Re"] > 0).all()
