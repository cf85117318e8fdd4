"""JSON and CSV writers for graphs, bundles, spectra, triples and trajectories."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(payload) -> str:
    """Deterministic JSON (sorted keys)."""
    return json.dumps(payload, default=_default, sort_keys=True, indent=1)


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(payload) + "\n")
    return path


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def write_spectrum(path, eigenvalues) -> Path:
    return write_csv(path, ["index", "eigenvalue"], enumerate(np.asarray(eigenvalues, dtype=float)))


def write_trajectory(path, trajectory) -> Path:
    nd = trajectory.configs.shape[1]
    header = ["t"] + [f"x{k + 1}" for k in range(nd)]
    rows = (np.r_[t, q] for t, q in zip(trajectory.times, trajectory.configs))
    return write_csv(path, header, rows)
