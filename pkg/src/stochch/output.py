"""On-disk formats: raw little-endian float64 arrays with JSON sidecars."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .integrator import Trajectory


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_array(path: Path, arr: np.ndarray) -> None:
    np.ascontiguousarray(arr, dtype="<f8").tofile(path)


def read_array(path: Path, shape) -> np.ndarray:
    return np.fromfile(path, dtype="<f8").reshape(shape)


def _opt(x):
    return None if x is None else float(x)


def write_trajectory(out_dir: Path, traj: Trajectory, cfg_hash: str, seed: int) -> list[Path]:
    """Write snapshots (coefficients) plus a sidecar; returns the written paths."""
    stem = f"trajectory_path{traj.path_id:05d}"
    data = out_dir / f"{stem}.bin"
    side = out_dir / f"{stem}.json"
    write_array(data, traj.coeffs)
    meta = {
        "shape": list(traj.coeffs.shape),
        "dtype": "float64-le",
        "layout": "row-major; axis 0 = snapshot, remaining axes = mode index k",
        "times": [float(t) for t in traj.times],
        "config_hash": cfg_hash,
        "seed": seed,
        "path_id": traj.path_id,
        "stopping_level": _opt(traj.stopping_level),
        "stopping_time": _opt(traj.stopping_time),
        "frozen": traj.frozen,
        "blowup": traj.blowup,
        "blowup_time": _opt(traj.blowup_time),
    }
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return [data, side]


def read_trajectory(sidecar: Path) -> tuple[np.ndarray, dict]:
    meta = json.loads(Path(sidecar).read_text())
    arr = read_array(Path(sidecar).with_suffix(".bin"), meta["shape"])
    return arr, meta
