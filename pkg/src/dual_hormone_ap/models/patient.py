"""Virtual patients and cohort files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from dual_hormone_ap.core.errors import ConfigError
from dual_hormone_ap.core.paths import write_json
from dual_hormone_ap.models.hovorka import SimParams
from dual_hormone_ap.models.params_io import params_from_dict, params_to_dict


@dataclass(frozen=True)
class VirtualPatient:
    """One simulated person with type 1 diabetes.

    Attributes:
        patient_id: Identifier, unique within a cohort.
        params: Simulation-model constants.
        nominal_basal: Basal rate holding fasting glucose at target [mU/min].
        isf: Insulin sensitivity factor [(mmol/L)/U].
        icr: Insulin-to-carbohydrate ratio [g/U].
        cgm_seed: Seed of the patient's CGM noise stream.
    """

    patient_id: str
    params: SimParams
    nominal_basal: float
    isf: float = 2.0
    icr: float = 10.0
    cgm_seed: int = 0

    def __post_init__(self) -> None:
        """Validate dosing constants."""
        if not self.patient_id:
            raise ConfigError("patient_id", "must not be empty")
        if self.icr <= 0 or self.isf <= 0:
            raise ConfigError(self.patient_id, "ICR and ISF must be positive")
        if self.nominal_basal < 0:
            raise ConfigError(self.patient_id, "nominal basal must be nonnegative")

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready representation."""
        return {
            "patient_id": self.patient_id,
            "nominal_basal": self.nominal_basal,
            "isf": self.isf,
            "icr": self.icr,
            "cgm_seed": self.cgm_seed,
            "params": params_to_dict(self.params),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], source: str = "<cohort>") -> VirtualPatient:
        """Inverse of to_dict.

        Raises:
            ConfigError: If a field is missing or invalid.
        """
        try:
            return cls(
                patient_id=str(data["patient_id"]),
                params=params_from_dict(SimParams, data.get("params", {}), source=source),
                nominal_basal=float(data["nominal_basal"]),
                isf=float(data.get("isf", 2.0)),
                icr=float(data["icr"]),
                cgm_seed=int(data.get("cgm_seed", 0)),
            )
        except KeyError as e:
            raise ConfigError(f"{source}:{e.args[0]}", "missing field") from e


def save_cohort(patients: list[VirtualPatient], path: Path, meta: dict[str, Any]) -> Path:
    """Write a cohort file: ``{"meta": {...}, "patients": [...]}``."""
    return write_json(path, {"meta": meta, "patients": [p.to_dict() for p in patients]})


def load_cohort(path: Path) -> list[VirtualPatient]:
    """Read a cohort file written by save_cohort.

    Raises:
        ConfigError: If the file is malformed or ids repeat.
    """
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(str(path), f"not valid JSON ({e.msg})") from e

    records = data.get("patients") if isinstance(data, dict) else None
    if not isinstance(records, list) or not records:
        raise ConfigError(str(path), "expected a non-empty 'patients' list")

    patients = [VirtualPatient.from_dict(r, source=str(path)) for r in records]
    ids = [p.patient_id for p in patients]
    if len(set(ids)) != len(ids):
        raise ConfigError(str(path), "patient ids must be unique")
    return patients
