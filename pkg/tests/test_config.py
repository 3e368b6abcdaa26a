"""Unit tests for run configuration."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from dual_hormone_ap.config import (
    CONFIG_ENV_VAR,
    DosingConfig,
    EstimatorSettings,
    FilterSettings,
    IntegratorSettings,
    RunConfig,
    SolverSettings,
    TrialSettings,
    config_from_dict,
    load_config,
)
from dual_hormone_ap.core.errors import ConfigError


class TestSections:
    """Tests for section validation."""

    def test_defaults(self) -> None:
        """Test the default run grid."""
        config = RunConfig()
        assert config.integrator.plant_substeps == 10
        assert config.integrator.control_substeps == 2
        assert config.horizon_intervals == 72

    def test_step_must_divide_sample_time(self) -> None:
        """Test that a non-dividing step is rejected."""
        with pytest.raises(ConfigError, match="control_step"):
            IntegratorSettings(control_step=2.0, sample_time=5.0)

    def test_nonpositive_step(self) -> None:
        """Test that steps must be positive."""
        with pytest.raises(ConfigError, match="plant_step"):
            IntegratorSettings(plant_step=0.0)

    def test_filter_variances(self) -> None:
        """Test filter validation."""
        with pytest.raises(ConfigError, match="measurement_variance"):
            FilterSettings(measurement_variance=0.0)
        with pytest.raises(ConfigError, match="logsi_variance"):
            FilterSettings(logsi_variance=-1.0)

    def test_estimator(self) -> None:
        """Test estimator validation."""
        with pytest.raises(ConfigError, match="restarts"):
            EstimatorSettings(restarts=0)

    def test_solver(self) -> None:
        """Test solver validation."""
        with pytest.raises(ConfigError, match="max_iterations"):
            SolverSettings(max_iterations=0)

    def test_dosing_thresholds_ordered(self) -> None:
        """Test that the glucagon threshold lies below the insulin threshold."""
        with pytest.raises(ConfigError, match="glucagon_threshold"):
            DosingConfig(glucagon_threshold=5.0, insulin_threshold=5.0)
        with pytest.raises(ConfigError, match="z_min"):
            DosingConfig(z_min=10.0)
        with pytest.raises(ConfigError, match="exercise_hysteresis"):
            DosingConfig(exercise_hysteresis=0.0)

    def test_trial(self) -> None:
        """Test trial validation."""
        with pytest.raises(ConfigError, match="cgm_ar"):
            TrialSettings(cgm_ar=1.0)
        with pytest.raises(ConfigError, match="isf"):
            TrialSettings(isf=0.0)

    def test_horizon_multiple_of_sample_time(self) -> None:
        """Test the cross-section horizon check."""
        with pytest.raises(ConfigError, match="horizon"):
            RunConfig(solver=SolverSettings(horizon=62.0))


class TestConfigHash:
    """Tests for config hashing."""

    def test_stable(self) -> None:
        """Test that equal configs hash equally."""
        assert RunConfig().config_hash == RunConfig().config_hash
        assert len(RunConfig().config_hash) == 64

    def test_changes_with_settings(self) -> None:
        """Test that any override changes the hash."""
        tweaked = config_from_dict({"trial": {"cgm_noise_sd": 0.0}})
        assert tweaked.config_hash != RunConfig().config_hash


class TestConfigFromDict:
    """Tests for config_from_dict()."""

    def test_partial_override(self) -> None:
        """Test that unspecified keys keep their defaults."""
        config = config_from_dict({"dosing": {"bolus_allowance": 1.2}})
        assert config.dosing.bolus_allowance == 1.2
        assert config.dosing.setpoint == 6.0
        assert config.solver == SolverSettings()

    def test_unknown_section(self) -> None:
        """Test that unknown sections are rejected."""
        with pytest.raises(ConfigError, match="unknown section"):
            config_from_dict({"plotting": {}})

    def test_unknown_key(self) -> None:
        """Test that unknown keys are rejected with their full name."""
        with pytest.raises(ConfigError, match="solver.tolerance"):
            config_from_dict({"solver": {"tolerance": 1.0}})

    def test_section_not_object(self) -> None:
        """Test that a section must be a mapping."""
        with pytest.raises(ConfigError, match="JSON object"):
            config_from_dict({"solver": 3})

    def test_invalid_value(self) -> None:
        """Test that section validation still applies."""
        with pytest.raises(ConfigError, match="estimator.restarts"):
            config_from_dict({"estimator": {"restarts": 0}})


class TestLoadConfig:
    """Tests for load_config()."""

    def test_defaults_without_path(self, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test defaults when neither path nor environment is set."""
        monkeypatch.delenv(CONFIG_ENV_VAR, raising=False)
        assert load_config() == RunConfig()

    def test_reads_file(self, temp_dir: Path) -> None:
        """Test loading overrides from a file."""
        path = temp_dir / "config.json"
        path.write_text(json.dumps({"solver": {"horizon": 120.0}}), encoding="utf-8")
        assert load_config(path).horizon_intervals == 24

    def test_environment_variable(self, temp_dir: Path, monkeypatch: pytest.MonkeyPatch) -> None:
        """Test that the environment variable names the file."""
        path = temp_dir / "env.json"
        path.write_text(json.dumps({"trial": {"isf": 3.0}}), encoding="utf-8")
        monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
        assert load_config().trial.isf == 3.0

    def test_missing_file(self, temp_dir: Path) -> None:
        """Test a missing config file."""
        with pytest.raises(ConfigError, match="not found"):
            load_config(temp_dir / "missing.json")

    def test_invalid_json(self, temp_dir: Path) -> None:
        """Test a malformed config file."""
        path = temp_dir / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(path)

    def test_top_level_must_be_object(self, temp_dir: Path) -> None:
        """Test a JSON array at the top level."""
        path = temp_dir / "list.json"
        path.write_text("[]", encoding="utf-8")
        with pytest.raises(ConfigError, match="JSON object"):
            load_config(path)
