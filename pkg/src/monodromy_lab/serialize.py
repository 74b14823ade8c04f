"""Interchange formats: matrices as JSON, sweep tables as CSV, and run
manifests.

Floats are written with 17 significant digits so every IEEE-754 double
round-trips exactly; CSV uses comma separators, a header row, and LF line
endings regardless of platform.
"""

from __future__ import annotations

import hashlib
import json
import time
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    return format(float(x), ".17g")


def matrix_to_json_text(mat: np.ndarray) -> str:
    mat = np.asarray(mat, dtype=float)
    rows = ",\n    ".join(
        "[" + ", ".join(fmt(v) for v in row) + "]" for row in mat
    )
    return '{\n  "dim": %d,\n  "rows": [\n    %s\n  ]\n}\n' % (mat.shape[0], rows)


def matrix_from_json(text: str) -> np.ndarray:
    doc = json.loads(text)
    unknown = set(doc) - {"dim", "rows"}
    if unknown:
        raise ValueError(f"unknown matrix-file keys: {sorted(unknown)}")
    mat = np.array(doc["rows"], dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"matrix rows must form a square array, got {mat.shape}")
    if mat.shape[0] != doc["dim"]:
        raise ValueError(f"dim field {doc['dim']} does not match rows {mat.shape[0]}")
    return mat


def write_matrix(path, mat) -> None:
    Path(path).write_text(matrix_to_json_text(mat))


def read_matrix(path) -> np.ndarray:
    return matrix_from_json(Path(path).read_text())


def write_csv(path, header, rows) -> None:
    """Comma-separated table with LF endings and 17-significant-digit
    floats; ints and strings pass through unchanged."""

    def cell(v):
        if isinstance(v, str):
            return v
        if isinstance(v, (bool, np.bool_)):
            return str(bool(v))
        if isinstance(v, (int, np.integer)):
            return str(int(v))
        return fmt(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def config_hash(config: dict) -> str:
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def write_manifest(outdir, command: str, config: dict, outputs,
                   started: float) -> Path:
    import scipy

    manifest = {
        "command": command,
        "config_sha256": config_hash(config),
        "versions": {
            "monodromy_lab": _package_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "wall_time_s": time.time() - started,
        "outputs": [str(p) for p in outputs],
    }
    path = Path(outdir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def _package_version() -> str:
    try:
        from importlib.metadata import version

        return version("monodromy-lab")
    except Exception:
        return "unknown"
