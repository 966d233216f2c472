"""File formats: raw float64 waveforms with JSON sidecars, and CSV tables.

All writes are atomic (temp file + rename) so partially written artifacts
never appear under the target name.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .signals import Waveform

__all__ = [
    "write_waveform",
    "read_waveform",
    "write_csv",
    "write_named_csv",
    "waveform_to_csv",
    "sidecar_path",
]


def _atomic_write_bytes(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_waveform(path, w: Waveform) -> Path:
    """Write little-endian float64 samples plus a {dt, label, count} JSON sidecar."""
    path = Path(path)
    _atomic_write_bytes(path, w.samples.astype("<f8").tobytes())
    header = {"dt": w.dt, "label": w.label, "count": int(len(w))}
    _atomic_write_bytes(sidecar_path(path), json.dumps(header, indent=1).encode())
    return path


def read_waveform(path) -> Waveform:
    path = Path(path)
    with open(sidecar_path(path)) as fh:
        header = json.load(fh)
    samples = np.fromfile(path, dtype="<f8", count=int(header["count"]))
    if samples.size != int(header["count"]):
        raise ValueError(f"{path}: expected {header['count']} samples, found {samples.size}")
    return Waveform(samples, float(header["dt"]), label=str(header.get("label", "")))


def write_csv(path, columns, rows) -> Path:
    """CSV with a header row; values at 9 significant digits."""
    path = Path(path)
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(f"{v:.9g}" for v in row))
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
    return path


def write_named_csv(path, columns, rows) -> Path:
    """CSV whose first column is a string key; numeric cells at 9 digits."""
    path = Path(path)
    lines = [",".join(columns)]
    for key, *vals in rows:
        cells = [str(key)] + [f"{float(v):.9g}" for v in vals]
        lines.append(",".join(cells))
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())
    return path


def waveform_to_csv(path, w: Waveform) -> Path:
    return write_csv(path, ("t", "value"), np.column_stack([w.times(), w.samples]))
