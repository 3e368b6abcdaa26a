"""CGM sensor: interstitial glucose plus autocorrelated noise."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class CgmSensor:
    """AR(1) sensor error with a stationary start and a reading floor.

    Attributes:
        noise_sd: Stationary SD of the error [mmol/L].
        ar: AR(1) coefficient.
        floor: Lowest value the sensor reports [mmol/L].
        seed: Seed of the sensor's own random stream.
    """

    noise_sd: float = 0.25
    ar: float = 0.7
    floor: float = 0.1
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)
    _error: float = field(init=False, default=0.0)

    def __post_init__(self) -> None:
        """Draw the initial error from the stationary distribution."""
        self._rng = np.random.default_rng(self.seed)
        self._error = self.noise_sd * float(self._rng.standard_normal())

    @property
    def error(self) -> float:
        """Error that the next reading will carry."""
        return self._error

    def sample(self, gi: float) -> float:
        """Return one reading of ``gi`` and advance the error process."""
        reading = max(self.floor, gi + self._error)
        innovation_sd = self.noise_sd * math.sqrt(1.0 - self.ar**2)
        self._error = self.ar * self._error + innovation_sd * float(self._rng.standard_normal())
        return reading
