"""Pattern CSV + sidecar JSON, and FitResult JSON."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .inference.fitting import FitResult
from .kernels import PointPattern
from .numerics import Window


def sidecar_path(csv_path: str | Path) -> Path:
    p = Path(csv_path)
    return p.with_suffix(".json")


def write_pattern(pattern: PointPattern, path: str | Path, model: dict | None = None,
                  seed: dict | None = None) -> Path:
    """CSV with header ``x,y``; floats written with ``repr`` so reading back is bit-exact."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "y"])
        for x, y in pattern.points:
            w.writerow([repr(float(x)), repr(float(y))])
    meta = {"window": pattern.window.to_list(), "n": pattern.n, "model": model, "seed": seed}
    sidecar_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path


def read_pattern(path: str | Path, window: Window | None = None) -> tuple[PointPattern, dict]:
    """Read a pattern CSV; the window comes from the sidecar unless given."""
    path = Path(path)
    meta: dict = {}
    side = sidecar_path(path)
    if side.exists():
        meta = json.loads(side.read_text())
    if window is None:
        if "window" not in meta:
            raise ValueError(f"no window given and no sidecar at {side}")
        window = Window(*meta["window"])
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
        raise ValueError(f"{path}: expected header x,y")
    pts = np.array([[float(a), float(b)] for a, b in rows[1:]], dtype=float).reshape(-1, 2)
    return PointPattern(pts, window), meta


def _clean(obj):
    # JSON has no inf/nan
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def fit_result_json(result: FitResult) -> str:
    return json.dumps(_clean(result.to_dict()), indent=2, sort_keys=True) + "\n"


def write_fit_result(result: FitResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(fit_result_json(result))
    return path


def read_fit_result(path: str | Path) -> FitResult:
    d = json.loads(Path(path).read_text())
    for key in ("residual",):
        if d.get(key) is None:
            d[key] = math.inf
    d["theta"] = [math.nan if v is None else v for v in d["theta"]]
    return FitResult.from_dict(d)
