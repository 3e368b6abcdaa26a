"""Time-in-range and dose statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from dual_hormone_ap.numerics.integrators import Vector

# Band edges [mmol/L]; each band is closed on the left.
BAND_EDGES = (3.0, 3.9, 10.0, 13.9)
BAND_NAMES = ("severe_hypo", "hypo", "normo", "hyper", "severe_hyper")

MINUTES_PER_DAY = 24 * 60.0


@dataclass(frozen=True)
class GlycemicStats:
    """Band percentages and daily dose totals for one patient.

    Attributes:
        bands: Percentage of samples per band, keyed by BAND_NAMES.
        mean_glucose: Mean glucose [mmol/L].
        min_glucose: Lowest glucose [mmol/L].
        daily_basal: Basal insulin per day [U].
        daily_bolus: Bolus insulin per day [U].
        daily_glucagon: Glucagon per day [µg].
    """

    bands: dict[str, float]
    mean_glucose: float
    min_glucose: float
    daily_basal: float
    daily_bolus: float
    daily_glucagon: float

    @property
    def tir(self) -> float:
        """Percentage of time in [3.9, 10) mmol/L."""
        return self.bands["normo"]

    def to_row(self) -> dict[str, float]:
        """Flat row for the summary table."""
        row = {f"pct_{name}": value for name, value in self.bands.items()}
        row.update(
            mean_glucose_mmolL=self.mean_glucose,
            min_glucose_mmolL=self.min_glucose,
            basal_U_per_day=self.daily_basal,
            bolus_U_per_day=self.daily_bolus,
            glucagon_ug_per_day=self.daily_glucagon,
        )
        return row


def band_percentages(glucose: Vector) -> dict[str, float]:
    """Share of samples in each band, in percent."""
    glucose = np.asarray(glucose, dtype=float)
    if glucose.size == 0:
        raise ValueError("no glucose samples")
    index = np.digitize(glucose, BAND_EDGES, right=False)
    counts = np.bincount(index, minlength=len(BAND_NAMES))
    return {name: 100.0 * float(c) / glucose.size for name, c in zip(BAND_NAMES, counts, strict=True)}


def tir_stats(
    glucose: Vector,
    basal: Vector,
    bolus: Vector,
    glucagon: Vector,
    sample_time: float = 5.0,
) -> GlycemicStats:
    """Glycemic statistics from true glucose and delivered rates on the sample grid.

    Args:
        glucose: Plant glucose per sample [mmol/L].
        basal: Basal rate per sample [mU/min].
        bolus: Bolus rate per sample [mU/min].
        glucagon: Glucagon rate per sample [µg/min].
        sample_time: Sample spacing [min].
    """
    glucose = np.asarray(glucose, dtype=float)
    days = glucose.size * sample_time / MINUTES_PER_DAY

    def per_day(rates: Vector, scale: float) -> float:
        return float(np.sum(rates) * sample_time * scale / days)

    return GlycemicStats(
        bands=band_percentages(glucose),
        mean_glucose=float(np.mean(glucose)),
        min_glucose=float(np.min(glucose)),
        daily_basal=per_day(basal, 1e-3),
        daily_bolus=per_day(bolus, 1e-3),
        daily_glucagon=per_day(glucagon, 1.0),
    )


def rolling_totals(rates: Vector, window: int, sample_time: float = 5.0) -> Vector:
    """Amount delivered over each trailing window of ``window`` samples."""
    amounts = np.asarray(rates, dtype=float) * sample_time
    if amounts.size == 0:
        return amounts
    cumulative = np.concatenate([[0.0], np.cumsum(amounts)])
    start = np.maximum(np.arange(1, amounts.size + 1) - window, 0)
    return cumulative[1:] - cumulative[start]
