"""Trajectory tables, JSON summaries and the metadata embedded in both."""

from __future__ import annotations

import csv
import io as _io
import json
import math
from importlib import metadata
from pathlib import Path

import numpy as np

from .errors import UsageError

__all__ = [
    "TRAJECTORY_HEADER",
    "CONVENTIONS",
    "artifact_version",
    "format_number",
    "trajectory_text",
    "write_trajectory",
    "read_trajectory",
    "write_json",
    "read_json",
    "jsonable",
]

TRAJECTORY_HEADER = ("t", "M", "E_exch", "S_sys_z", "B_field", "norm", "E_U")

CONVENTIONS = {
    "basis": "bit b of the basis index is site b, 1 = spin up; site 0 = system, "
             "sites 1..N_A = apparatus, remaining sites = environment",
    "spin_operators": "S^a = sigma^a / 2 with S^y = (S^+ - S^-) / 2i",
    "hamiltonian_signs": "H_A = -sum J^a S^a S^a; H_E, H_AE, H_SE, H_SA enter with +; "
                         "H_B = -mu * b_tilde * sum_A S^z",
    "pair_sums": "each unordered pair counted once",
    "apparatus_couplings": "J^z = J on nearest and J/sqrt(2) on next-nearest corners, "
                           "J^x = J^y = gamma * J^z",
    "random_couplings": "Omega, Delta, Theta drawn uniform in [-X, X] independently per axis "
                        "and per pair; every run draws a fresh realisation from its coupling seed",
    "propagator": "forward evolution psi(t + dt) = exp(-i H dt) psi(t)",
    "field_freezing": "b_tilde frozen within each step; 'midpoint' uses the self-consistent "
                      "value (b(t) + b(t + dt)) / 2, 'start' uses b(t)",
    "exchange_energy": "E_exch = -sum_pairs sum_a J^a <S^a S^a>, i.e. <H_A> with anisotropic weights",
    "universe_energy": "E_U = <H_lin> - mu * b_tilde^2 / 2",
    "drift": "relative drift |X(t) - X(0)| / max(|X(0)|, 1)",
}


def artifact_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        from . import __version__

        return __version__


def format_number(x):
    """Fixed 15-significant-digit text used in every table."""
    x = float(x)
    if x == 0.0:
        return "0"
    return f"{x:.15g}"


def trajectory_text(traj):
    """CSV text of a :class:`TrajectoryRecord` (header plus one row per record)."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for row in zip(*(getattr(traj, name) for name in TRAJECTORY_HEADER)):
        w.writerow([format_number(v) for v in row])
    return buf.getvalue()


def write_trajectory(path, traj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(trajectory_text(traj), encoding="utf-8")
    return path


def read_trajectory(path):
    """Column name to float array, in header order."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRAJECTORY_HEADER:
        raise UsageError(f"{path}: not a trajectory table (header {rows[0] if rows else None})")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, len(TRAJECTORY_HEADER))
    return {name: data[:, k] for k, name in enumerate(TRAJECTORY_HEADER)}


def jsonable(obj):
    """Recursively convert to JSON-safe values; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def write_json(path, payload):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))
