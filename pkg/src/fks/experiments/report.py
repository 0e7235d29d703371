"""On-disk artifacts of a scenario run.

Layout of an output directory::

    diagnostics.csv      one DiagnosticsRecord per recorded state
    snapshot_<t>.csv     columns x, u (17 significant digits)
    snapshots.json       index of snapshots with exact times and step numbers
    verdicts.json        one entry per activated check
    meta.json            scenario, overrides and derived constants
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np

from ..spectral import Grid

SNAPSHOT_INDEX = "snapshots.json"


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


def read_json(path) -> Any:
    return json.loads(Path(path).read_text())


class SnapshotWriter:
    """Writes ``snapshot_<t>.csv`` files and keeps ``snapshots.json`` current.

    The index is rewritten after every snapshot so an interrupted run can be
    resumed from whatever reached the disk.
    """

    def __init__(self, out: Path, every: int, existing: Optional[list] = None):
        self.out = Path(out)
        self.every = every
        self.index: list[dict] = list(existing or [])

    def write(self, t: float, u: np.ndarray, step: int, tail_strikes: int) -> None:
        name = f"snapshot_{t:.9f}.csv"
        x = Grid.of(u.size).x
        with open(self.out / name, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "u"])
            for xi, ui in zip(x, u):
                w.writerow([f"{xi:.17g}", f"{ui:.17g}"])
        self.index = [e for e in self.index if e["file"] != name]
        self.index.append({"file": name, "t": repr(float(t)), "step": int(step),
                           "tail_strikes": int(tail_strikes)})
        write_json(self.out / SNAPSHOT_INDEX, self.index)

    def on_step(self, state, step: int) -> None:
        if step % self.every == 0:
            self.write(state.t, state.u, step, state.tail_strikes)


def read_snapshot(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if rows[0] != ["x", "u"]:
        raise ValueError(f"{path}: not a snapshot file")
    return np.array([float(r[1]) for r in rows[1:]])


def latest_snapshot(out) -> dict:
    """Index entry of the snapshot with the largest time."""
    out = Path(out)
    p = out / SNAPSHOT_INDEX
    if not p.is_file():
        raise FileNotFoundError(f"no {SNAPSHOT_INDEX} in {out}")
    index = read_json(p)
    if not index:
        raise FileNotFoundError(f"snapshot index in {out} is empty")
    return max(index, key=lambda e: float(e["t"]))
