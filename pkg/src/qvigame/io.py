"""CSV / JSON emitters and the run manifest."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import platform
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .grid import Grid
from .policy import PolicyMap

FLOAT = "{:.17g}"


def _fmt(v: float) -> str:
    return FLOAT.format(float(v))


def value_csv(stack: np.ndarray, grid: Grid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{i + 1}" for i in range(grid.dim)] + ["V"])
    pts = grid.points.reshape(-1, grid.dim)
    coords = [[_fmt(c) for c in p] for p in pts]
    for n in range(stack.shape[0]):
        t = _fmt(grid.time(n))
        for xs, v in zip(coords, stack[n].ravel()):
            w.writerow([t, *xs, _fmt(v)])
    return buf.getvalue()


def read_value_csv(path: str | Path, grid: Grid) -> np.ndarray:
    """Inverse of :func:`value_csv`; checks the layout against ``grid``."""
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows)
        if header != ["t"] + [f"x{i + 1}" for i in range(grid.dim)] + ["V"]:
            raise ValueError(f"{path}: unexpected header {header}")
        values = np.array([float(r[-1]) for r in rows])
    expected = (grid.time_steps + 1) * grid.size
    if values.size != expected:
        raise ValueError(f"{path}: {values.size} rows, grid needs {expected}")
    return values.reshape((grid.time_steps + 1,) + grid.shape)


def policy_csv(policy: PolicyMap, grid: Grid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t"] + [f"x{i + 1}" for i in range(grid.dim)] + ["regime"] + [f"a{i + 1}" for i in range(grid.dim)])
    pts = grid.points.reshape(-1, grid.dim)
    coords = [[_fmt(c) for c in p] for p in pts]
    for n in range(policy.regimes.shape[0]):
        t = _fmt(grid.time(n))
        acts = policy.action_vectors(n) if n < grid.time_steps else np.zeros((grid.size, grid.dim))
        for node, xs in enumerate(coords):
            w.writerow([t, *xs, int(policy.regimes[n, node]), *(_fmt(a) for a in acts[node])])
    return buf.getvalue()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def write_files(out_dir: Path, files: dict[str, str]) -> dict[str, str]:
    """Write text payloads and return ``{name: sha256}``."""
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for name, text in files.items():
        data = text.encode()
        (out_dir / name).write_bytes(data)
        hashes[name] = sha256(data)
    return hashes


def manifest(config_digest: str, hashes: dict[str, str], extra: dict | None = None) -> dict:
    from . import __version__

    return {
        "config_digest": config_digest,
        "versions": {
            "qvigame": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
        },
        "created": datetime.now(timezone.utc).isoformat(),
        "files": {name: {"sha256": h} for name, h in sorted(hashes.items())},
        **(extra or {}),
    }
