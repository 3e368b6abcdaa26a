"""Output file naming and provenance helpers."""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import TYPE_CHECKING, Any

if TYPE_CHECKING:
    import pandas as pd

# Characters invalid on any OS (Windows is most restrictive)
INVALID_CHARS = r'[\\/:*?"<>|]'

MAX_STEM_LENGTH = 64

PROVENANCE_PREFIX = "# config_hash: "


def patient_stem(patient_id: str, fallback: str = "patient") -> str:
    """Turn a patient identifier into a filesystem-safe file stem.

    Args:
        patient_id: Identifier from the cohort file.
        fallback: Stem used when nothing survives sanitization.

    Returns:
        A stem without extension.
    """
    if not patient_id:
        return fallback

    stem = re.sub(INVALID_CHARS, "_", patient_id)
    stem = re.sub(r"[\x00-\x1f\x7f]", "", stem)
    stem = re.sub(r"[_\s]+", "_", stem).strip(" _")
    stem = stem[:MAX_STEM_LENGTH].rstrip(" _")

    return stem or fallback


def canonical_json(payload: Any) -> str:
    """Render JSON deterministically (sorted keys, fixed separators)."""
    return json.dumps(payload, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def digest(payload: Any) -> str:
    """SHA-256 of the canonical JSON rendering of a payload."""
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def write_json(path: Path, payload: Any) -> Path:
    """Write a JSON document deterministically, creating parent directories."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(payload), encoding="utf-8")
    return path


def write_csv(path: Path, frame: pd.DataFrame, config_hash: str) -> Path:
    """Write a table preceded by a provenance comment line.

    Floats are printed with a fixed format so identical runs give identical
    bytes. Read back with ``pd.read_csv(path, comment="#")``.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"{PROVENANCE_PREFIX}{config_hash}\n")
        frame.to_csv(handle, index=False, float_format="%.6f", lineterminator="\n")
    return path


def read_config_hash(path: Path) -> str | None:
    """Return the provenance hash embedded in a CSV written by write_csv."""
    with path.open(encoding="utf-8") as handle:
        first = handle.readline()
    if first.startswith(PROVENANCE_PREFIX):
        return first[len(PROVENANCE_PREFIX) :].strip()
    return None
