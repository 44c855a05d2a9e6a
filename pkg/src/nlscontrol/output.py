"""Atomic CSV / JSON / binary writers."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

FLOAT_FMT = "%.16e"


def _atomic_write(path: Path, data: bytes):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix="." + path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return FLOAT_FMT % float(v)
    return str(v)


def csv_text(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if isinstance(row, dict):
            row = [row.get(c, "") for c in columns]
        lines.append(",".join(format_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, columns, rows):
    _atomic_write(Path(path), csv_text(columns, rows).encode())


def read_csv(path):
    """``(columns, rows)`` with numeric cells parsed as float where possible."""
    lines = Path(path).read_text().strip().splitlines()
    cols = lines[0].split(",")
    rows = []
    for line in lines[1:]:
        row = []
        for cell in line.split(","):
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return cols, rows


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else str(f)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path, payload):
    _atomic_write(Path(path), (json.dumps(_jsonable(payload), indent=2) + "\n").encode())


def dump_coefficients(path, grid, coeffs):
    """Flat little-endian complex128 pairs, modes in ascending order
    ``-N/2 .. N/2-1``; multiple snapshots are stored row after row."""
    arr = np.atleast_2d(np.asarray(coeffs, dtype=complex))[:, grid.mode_order()]
    _atomic_write(Path(path), arr.astype("<c16").tobytes())


def load_coefficients(path, grid):
    arr = np.frombuffer(Path(path).read_bytes(), dtype="<c16").reshape(-1, grid.n_modes)
    out = np.empty_like(arr)
    out[:, grid.mode_order()] = arr
    return out
