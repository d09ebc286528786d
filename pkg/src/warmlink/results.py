"""Deterministic artifact writers and the append-only run ledger."""

from __future__ import annotations

import datetime
import json
import math
from pathlib import Path

import numpy as np

from .dynamics import DensityMatrix

__all__ = [
    "fmt", "write_csv", "write_json", "density_matrix_to_json",
    "density_matrix_from_json", "chi_to_json", "ResultLedger",
]


def fmt(x) -> str:
    """Fixed float formatting so identical runs produce identical bytes."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return str(x)
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".12g")
    return str(x)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def _re_im(matrix: np.ndarray):
    return [[[float(v.real), float(v.imag)] for v in row] for row in matrix]


def density_matrix_to_json(rho: DensityMatrix, **meta) -> dict:
    return {"dims": list(rho.dims), "re_im": _re_im(rho.matrix), **meta}


def density_matrix_from_json(payload: dict) -> DensityMatrix:
    arr = np.array([[complex(re, im) for re, im in row] for row in payload["re_im"]])
    return DensityMatrix(arr, tuple(payload["dims"]))


def chi_to_json(chi_matrix: np.ndarray, basis=("I", "X", "Y", "Z"), **meta) -> dict:
    return {"basis": list(basis), "re_im": _re_im(chi_matrix), **meta}


class ResultLedger:
    """Append-only JSONL record of experiment runs."""

    def __init__(self, path):
        self.path = Path(path)

    def append(self, experiment: str, config_hash: str, scalars: dict,
               artifacts: list[str]) -> dict:
        entry = {
            "experiment": experiment,
            "config_hash": config_hash,
            "scalars": _jsonable(scalars),
            "artifacts": sorted(str(a) for a in artifacts),
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as fh:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
        return entry

    def rows(self) -> list[dict]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text().splitlines() if line]
