"""Result files: trajectories, cohort summary, solver traces and the run manifest."""

from __future__ import annotations

from pathlib import Path
from typing import Any

import pandas as pd

from dual_hormone_ap.core.paths import patient_stem, write_csv, write_json
from dual_hormone_ap.trial.closed_loop import TrialRecord
from dual_hormone_ap.trial.metrics import GlycemicStats

TRAJECTORY_DIR = "trajectories"
SOLVER_TRACE_DIR = "solver_traces"
SUMMARY_FILE = "summary.csv"
MANIFEST_FILE = "manifest.json"
MEAN_ROW = "mean"


def write_trajectory(record: TrialRecord, out_dir: Path, config_hash: str) -> Path:
    """Write ``trajectories/<patient>.csv``."""
    path = out_dir / TRAJECTORY_DIR / f"{patient_stem(record.patient_id)}.csv"
    return write_csv(path, record.to_frame(), config_hash)


def write_solver_trace(record: TrialRecord, out_dir: Path, config_hash: str) -> Path | None:
    """Write ``solver_traces/<patient>.csv`` when the record has a trace."""
    if not record.solver_trace:
        return None
    path = out_dir / SOLVER_TRACE_DIR / f"{patient_stem(record.patient_id)}.csv"
    return write_csv(path, pd.DataFrame(record.solver_trace), config_hash)


def summary_frame(stats: dict[str, GlycemicStats]) -> pd.DataFrame:
    """One row per patient, sorted by id, followed by the cohort mean row."""
    rows = [{"patient": pid, **stats[pid].to_row()} for pid in sorted(stats)]
    frame = pd.DataFrame(rows)
    if rows:
        means = frame.drop(columns="patient").mean(numeric_only=True)
        frame = pd.concat([frame, pd.DataFrame([{"patient": MEAN_ROW, **means.to_dict()}])], ignore_index=True)
    return frame


def write_summary(stats: dict[str, GlycemicStats], out_dir: Path, config_hash: str) -> Path:
    """Write the cohort summary CSV."""
    return write_csv(out_dir / SUMMARY_FILE, summary_frame(stats), config_hash)


def read_summary(path: Path) -> pd.DataFrame:
    """Read a summary CSV written by write_summary.

    Raises:
        FileNotFoundError: If the file does not exist.
    """
    if not path.is_file():
        raise FileNotFoundError(path)
    return pd.read_csv(path, comment="#")


def write_manifest(out_dir: Path, manifest: dict[str, Any]) -> Path:
    """Write the run manifest as canonical JSON."""
    return write_json(out_dir / MANIFEST_FILE, manifest)
