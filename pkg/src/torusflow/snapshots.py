"""Field snapshot persistence: raw binary payload plus JSON sidecar.

Payload: row-major 64-bit little-endian floats, y-major then x (exactly the
in-memory layout of a ScalarField), 8*n^2 bytes per scalar layer.  Sidecar:
{grid_n, field_name, time, model, config_hash, byte_order "LE", layout
"row-major-yx"}.  Reads validate the sidecar against the payload length and
round-trip bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .grid import Grid, ScalarField


class SnapshotError(ValueError):
    """Corrupt snapshot: payload/sidecar mismatch."""


def snapshot_paths(path_base: str | Path) -> tuple[Path, Path]:
    base = Path(path_base)
    return base.with_suffix(".bin"), base.with_suffix(".json")


def write_snapshot(field: ScalarField, path_base: str | Path, *, field_name: str,
                   time: float, model: str, config_hash: str) -> None:
    bin_path, meta_path = snapshot_paths(path_base)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    meta = {
        "grid_n": field.grid.n,
        "field_name": field_name,
        "time": time,
        "model": model,
        "config_hash": config_hash,
        "byte_order": "LE",
        "layout": "row-major-yx",
    }
    bin_path.write_bytes(payload)
    meta_path.write_text(json.dumps(meta, sort_keys=True, separators=(",", ": "),
                                    indent=1) + "\n")


def read_snapshot(path_base: str | Path) -> tuple[ScalarField, dict]:
    bin_path, meta_path = snapshot_paths(path_base)
    try:
        meta = json.loads(meta_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SnapshotError(f"unreadable sidecar {meta_path}: {exc}") from exc
    required = {"grid_n", "field_name", "time", "model", "config_hash", "byte_order", "layout"}
    missing = required - set(meta)
    if missing:
        raise SnapshotError(f"sidecar missing keys: {sorted(missing)}")
    if meta["byte_order"] != "LE" or meta["layout"] != "row-major-yx":
        raise SnapshotError("unsupported byte order or layout")
    n = int(meta["grid_n"])
    payload = bin_path.read_bytes()
    if len(payload) != 8 * n * n:
        raise SnapshotError(
            f"payload length {len(payload)} does not match grid_n={n} (need {8 * n * n})"
        )
    values = np.frombuffer(payload, dtype="<f8").reshape(n, n)
    return ScalarField(Grid(n), values.astype(np.float64)), meta
