"""CSV/JSON storage for sampled paths and command results.

A path is a CSV with header ``t,z_1,...,z_d`` written at 17 significant
digits, plus a JSON sidecar next to it (``z.csv`` -> ``z.json``) holding
``alpha``, ``generator``, ``params`` and ``seed``.  Outputs are staged and
only moved into place once every file of a command has been produced.
"""

from __future__ import annotations

import csv
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .paths import SampledPath, estimate_holder

logger = logging.getLogger(__name__)

__all__ = [
    "SCHEMA_VERSION",
    "sidecar_path",
    "path_to_csv_text",
    "table_to_csv_text",
    "read_path_csv",
    "read_json",
    "to_json_text",
    "OutputBatch",
    "write_path",
]

SCHEMA_VERSION = 1


def sidecar_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def _fmt(v) -> str:
    return "%.17g" % v


def table_to_csv_text(header: Sequence[str], rows: np.ndarray) -> str:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def path_to_csv_text(path: SampledPath, prefix: str = "z") -> str:
    header = ["t"] + [f"{prefix}_{j + 1}" for j in range(path.dim)]
    return table_to_csv_text(header, np.column_stack([path.times, path.values]))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def to_json_text(obj: dict) -> str:
    """Deterministic JSON: sorted keys, a ``schema_version`` field, trailing newline."""
    data = dict(_jsonable(obj))
    data.setdefault("schema_version", SCHEMA_VERSION)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def read_json(path) -> object:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"missing file: {p}")
    try:
        return json.loads(p.read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot parse JSON {p}: {exc}") from None


def read_path_csv(path, alpha: Optional[float] = None) -> SampledPath:
    """Load a path CSV; the exponent comes from ``alpha``, the sidecar, or an estimate."""
    p = Path(path)
    if not p.is_file():
        raise InputError(f"missing file: {p}")
    try:
        with p.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except UnicodeDecodeError as exc:
        raise InputError(f"{p}: not a text file ({exc})") from None
    rows = [r for r in rows if r]
    if len(rows) < 3:
        raise InputError(f"{p}: need a header and at least two rows")
    header = [h.strip() for h in rows[0]]
    if header[0] != "t" or len(header) < 2:
        raise InputError(f"{p}: header must start with 't' followed by value columns")
    width = len(header)
    data = np.empty((len(rows) - 1, width))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise InputError(f"{p}:{i}: expected {width} fields, got {len(row)}")
        try:
            data[i - 2] = [float(v) for v in row]
        except ValueError:
            raise InputError(f"{p}:{i}: non-numeric field") from None
    if not np.all(np.isfinite(data)):
        raise InputError(f"{p}: non-finite values")
    if not np.all(np.diff(data[:, 0]) > 0):
        raise InputError(f"{p}: time column must be strictly increasing")
    meta = {}
    side = sidecar_path(p)
    if alpha is None and side.is_file():
        meta = read_json(side)
        if not isinstance(meta, dict) or "alpha" not in meta:
            raise InputError(f"{side}: sidecar lacks an 'alpha' field")
        alpha = float(meta["alpha"])
    if alpha is None:
        probe = SampledPath(data[:, 0], data[:, 1:])
        if len(probe) >= 64:
            est = estimate_holder(probe)
            alpha = min(1.0, float(est))
            logger.info("no sidecar for %s; estimated alpha %.3f", p, alpha)
        else:
            alpha = 1.0
            logger.info("no sidecar for %s and too few nodes to estimate; assuming alpha=1", p)
        meta = {"alpha_source": "estimated"}
    if not 0 < alpha <= 1:
        raise InputError(f"{p}: declared alpha {alpha} outside (0, 1]")
    return SampledPath(data[:, 0], data[:, 1:], alpha=alpha, meta=meta)


class OutputBatch:
    """Collect output files and write them all, or none, on ``commit``."""

    def __init__(self):
        self._files = {}

    def add(self, path, text: str):
        self._files[Path(path)] = text

    def add_path(self, path, sampled: SampledPath, prefix: str = "z"):
        self.add(path, path_to_csv_text(sampled, prefix))
        side = {
            "alpha": sampled.alpha,
            "generator": sampled.meta.get("generator"),
            "params": sampled.meta.get("params", {}),
            "seed": sampled.meta.get("seed"),
        }
        if "method" in sampled.meta:
            side["method"] = sampled.meta["method"]
        self.add(sidecar_path(path), to_json_text(side))

    @property
    def paths(self):
        return list(self._files)

    def commit(self):
        staged = []
        try:
            for target, text in self._files.items():
                target.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
                with os.fdopen(fd, "w", newline="") as fh:
                    fh.write(text)
                os.chmod(tmp, 0o644)
                staged.append((tmp, target))
        except BaseException:
            for tmp, _ in staged:
                os.unlink(tmp)
            raise
        for tmp, target in staged:
            os.replace(tmp, target)


def write_path(path, sampled: SampledPath, prefix: str = "z"):
    batch = OutputBatch()
    batch.add_path(path, sampled, prefix)
    batch.commit()
