"""Identification datasets: CGM samples with the doses and meals that produced them."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from dual_hormone_ap.core.errors import DatasetError
from dual_hormone_ap.core.paths import write_csv
from dual_hormone_ap.models.hovorka import meal_rate
from dual_hormone_ap.numerics.integrators import Matrix, Vector

logger = logging.getLogger(__name__)

COLUMNS = ("t_min", "cgm_mmolL", "uba_mUmin", "ubo_mUmin", "ug_ugmin", "meal_g")

# 12 h of 5-min samples
MIN_SAMPLES = 144


@dataclass(frozen=True)
class IdDataset:
    """Evenly sampled CGM record; inputs in row k are held over [t_k, t_k+1).

    Attributes:
        t: Sample times [min].
        cgm: CGM readings [mmol/L].
        basal: Basal insulin [mU/min].
        bolus: Bolus insulin [mU/min].
        glucagon: Glucagon [µg/min].
        meals: Announced carbohydrates at each sample [g].
        source: Label used in error messages.
    """

    t: Vector
    cgm: Vector
    basal: Vector
    bolus: Vector
    glucagon: Vector
    meals: Vector
    source: str = "<memory>"

    @property
    def size(self) -> int:
        """Number of samples N+1."""
        return int(self.t.size)

    @property
    def sample_time(self) -> float:
        """Sample spacing [min]."""
        return float(self.t[1] - self.t[0])

    @property
    def span(self) -> float:
        """Time covered by the record [min]."""
        return float(self.t[-1] - self.t[0])

    @property
    def inputs(self) -> Matrix:
        """Inputs as an (N+1) x 3 matrix [uba, ubo, uG]."""
        return np.column_stack([self.basal, self.bolus, self.glucagon])

    def meal_rates(self, sample_time: float = 5.0) -> Vector:
        """Meals as rates [mmol/min] spread over their interval."""
        return np.array([meal_rate(g, sample_time) for g in self.meals])

    def validate(self, sample_time: float = 5.0, min_samples: int = MIN_SAMPLES) -> IdDataset:
        """Check grid, lengths and values.

        Returns:
            self, for chaining.

        Raises:
            DatasetError: Describing the first problem found.
        """
        arrays = {
            "t_min": self.t,
            "cgm_mmolL": self.cgm,
            "uba_mUmin": self.basal,
            "ubo_mUmin": self.bolus,
            "ug_ugmin": self.glucagon,
            "meal_g": self.meals,
        }
        n = self.t.size
        for name, values in arrays.items():
            if values.size != n:
                raise DatasetError(self.source, f"column {name} has {values.size} rows, expected {n}")
            if not np.all(np.isfinite(values)):
                raise DatasetError(self.source, f"column {name} has missing or non-finite values")
        if n < min_samples:
            raise DatasetError(self.source, f"{n} samples, at least {min_samples} are required")
        if not np.allclose(np.diff(self.t), sample_time, atol=1e-9):
            raise DatasetError(self.source, f"samples must be spaced exactly {sample_time} min apart")
        for name in ("uba_mUmin", "ubo_mUmin", "ug_ugmin", "meal_g"):
            if np.any(arrays[name] < 0):
                raise DatasetError(self.source, f"column {name} has negative values")
        return self

    def to_frame(self) -> pd.DataFrame:
        """Dataset as a DataFrame with the file column names."""
        return pd.DataFrame(
            dict(zip(COLUMNS, (self.t, self.cgm, self.basal, self.bolus, self.glucagon, self.meals), strict=True))
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, source: str = "<frame>") -> IdDataset:
        """Build from a DataFrame with the file column names.

        Raises:
            DatasetError: If a column is missing.
        """
        missing = [c for c in COLUMNS if c not in frame.columns]
        if missing:
            raise DatasetError(source, f"missing columns: {', '.join(missing)}")
        values = [frame[c].to_numpy(dtype=float) for c in COLUMNS]
        return cls(*values, source=source)


def load_dataset(path: Path, sample_time: float = 5.0, min_samples: int = MIN_SAMPLES) -> IdDataset:
    """Read and validate a dataset CSV.

    Raises:
        FileNotFoundError: If the file does not exist.
        DatasetError: If the content is malformed.
    """
    if not path.is_file():
        raise FileNotFoundError(path)
    try:
        frame = pd.read_csv(path, comment="#")
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(str(path), f"unreadable CSV ({e})") from e
    dataset = IdDataset.from_frame(frame, source=str(path))
    logger.debug("Loaded %d samples from %s", dataset.size, path)
    return dataset.validate(sample_time, min_samples)


def save_dataset(dataset: IdDataset, path: Path, config_hash: str) -> Path:
    """Write a dataset CSV with a provenance header."""
    return write_csv(path, dataset.to_frame(), config_hash)
