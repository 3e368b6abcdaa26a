"""Shared pytest fixtures for dual-hormone-ap tests."""

from __future__ import annotations

import tempfile
from pathlib import Path
from typing import TYPE_CHECKING

import pytest

from dual_hormone_ap.config import RunConfig
from dual_hormone_ap.models import CtrlParams, SimParams, VirtualPatient
from dual_hormone_ap.trial.cohort import make_patient

if TYPE_CHECKING:
    from collections.abc import Generator


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Create a temporary directory for test outputs."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture
def run_config() -> RunConfig:
    """Default run configuration."""
    return RunConfig()


@pytest.fixture
def sim_params() -> SimParams:
    """Nominal simulation-model parameters."""
    return SimParams()


@pytest.fixture
def ctrl_params() -> CtrlParams:
    """Default control-model parameters."""
    return CtrlParams()


@pytest.fixture
def nominal_patient(sim_params: SimParams, run_config: RunConfig) -> VirtualPatient:
    """The nominal patient with its basal solved for the target glucose."""
    return make_patient("patient-001", sim_params, run_config, cgm_seed=7)
