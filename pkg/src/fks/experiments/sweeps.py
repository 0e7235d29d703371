"""Parameter sweeps: vanishing viscosity, grid refinement, subcritical exploration.

Runs are independent; with ``jobs > 1`` they go to a process pool and the
results are gathered in submission order, so reports do not depend on
scheduling.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .. import spectral
from ..stepper import State, integrate
from . import report
from .campaigns import CLASSIFIER_NOTE
from .scenario import ScenarioSpec, build_initial

ZERO_DIFF = 1e-12


def _solve(doc: dict) -> dict:
    spec = ScenarioSpec.model_validate(doc)
    u0 = build_initial(spec)
    traj = integrate(State(0.0, u0, spec.params), spec.ctrl, spec.T,
                     cadence=max(spec.cadence, 1), fixed_dt=spec.fixed_dt)
    return {"classification": traj.classification, "final_t": traj.final_t,
            "final_u": traj.final_u, "u0": u0, "n_steps": traj.n_steps,
            "max_u": float(traj.log_array("max").max())}


def run_many(specs: Sequence[ScenarioSpec], jobs: int = 1) -> list[dict]:
    docs = [s.model_dump(mode="json") for s in specs]
    if jobs <= 1 or len(docs) == 1:
        return [_solve(d) for d in docs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_solve, docs))


def _l2(a: np.ndarray, b: np.ndarray) -> float:
    return math.sqrt(2 * math.pi / a.size * float(np.sum((a - b) ** 2)))


def _reached(res: dict, T: float) -> bool:
    return res["classification"] == "ok" and res["final_t"] >= T


def sweep_viscosity(spec: ScenarioSpec, eps_list: Optional[Sequence[float]] = None,
                    jobs: int = 1, out=None) -> dict:
    """``u_eps(T)`` for decreasing ``eps`` and the pairwise L2 differences.

    The Cauchy trend holds when every run reaches T and the differences do not
    increase (or all vanish to roundoff).
    """
    eps_list = list(eps_list if eps_list is not None else spec.sweep.eps)
    runs = run_many([spec.with_updates(params__eps=e) for e in eps_list], jobs)
    diffs = [_l2(a["final_u"], b["final_u"]) for a, b in zip(runs, runs[1:])]
    all_reached = all(_reached(r, spec.T) for r in runs)
    if all(d <= ZERO_DIFF for d in diffs):
        trend = "converged"
    elif all(b <= a for a, b in zip(diffs, diffs[1:])):
        trend = "cauchy"
    else:
        trend = "non-cauchy"
    status = "pass" if all_reached and trend != "non-cauchy" else "flag"
    rep = {
        "sweep": "viscosity", "scenario": spec.name, "T": spec.T,
        "eps": eps_list, "differences": diffs, "trend": trend, "status": status,
        "runs": [{"eps": e, "classification": r["classification"],
                  "final_t": r["final_t"], "max_u": r["max_u"], "n_steps": r["n_steps"]}
                 for e, r in zip(eps_list, runs)],
        "classifier": CLASSIFIER_NOTE,
    }
    _persist(rep, out, "sweep_viscosity", ["eps", "classification", "final_t", "max_u",
                                            "n_steps"])
    return rep


def sweep_resolution(spec: ScenarioSpec, n_list: Optional[Sequence[int]] = None,
                     jobs: int = 1, out=None) -> dict:
    """Grid-refinement study on ``u(T)``.

    Consecutive solutions are compared on the coarser grid (spectral
    truncation of the finer one); the observed order is
    ``log2(e_i / e_{i+1})`` for doubling grids.
    """
    n_list = sorted(n_list if n_list is not None else spec.sweep.n)
    runs = run_many([spec.with_updates(n=n) for n in n_list], jobs)
    errs = [_l2(a["final_u"], spectral.restrict(b["final_u"], a["final_u"].size))
            for a, b in zip(runs, runs[1:])]
    orders = []
    for (n1, e1), (n2, e2) in zip(zip(n_list, errs), zip(n_list[1:], errs[1:])):
        if e1 > ZERO_DIFF and e2 > ZERO_DIFF:
            orders.append(math.log(e1 / e2) / math.log(n2 / n1))
        else:
            orders.append(math.nan)
    if not all(_reached(r, spec.T) for r in runs):
        status = "blowup-flag (reported)"
    elif all(e <= ZERO_DIFF for e in errs):
        status = "converged"
    else:
        finite = [o for o in orders if math.isfinite(o)]
        status = "pass" if finite and min(finite) >= 2.0 else (
            "converged" if not finite else "fail")
    rep = {
        "sweep": "resolution", "scenario": spec.name, "T": spec.T, "n": n_list,
        "differences": errs, "orders": orders, "status": status,
        "runs": [{"n": n, "classification": r["classification"], "final_t": r["final_t"],
                  "max_u": r["max_u"], "n_steps": r["n_steps"]}
                 for n, r in zip(n_list, runs)],
        "classifier": CLASSIFIER_NOTE,
    }
    _persist(rep, out, "sweep_resolution", ["n", "classification", "final_t", "max_u",
                                             "n_steps"])
    return rep


def _label(res: dict, T: float, decay_ratio: float = 0.1) -> str:
    if res["classification"] != "ok" or res["final_t"] < T:
        return "blowup-flag"
    osc0 = float(np.ptp(res["u0"]))
    osc = float(np.ptp(res["final_u"]))
    return "decaying" if osc <= decay_ratio * osc0 else "bounded"


def explore_subcritical(spec: ScenarioSpec, alphas: Optional[Sequence[float]] = None,
                        rs: Optional[Sequence[float]] = None, jobs: int = 1,
                        out=None, eps_factor: Optional[float] = None) -> dict:
    """Classify each ``(alpha, r)`` cell; exploratory, no pass/fail.

    Every cell runs at ``n`` and ``2n``; ``eps_factor`` adds a run with the
    viscosity scaled by that factor.  A cell is stable when all its runs agree.
    """
    alphas = list(alphas if alphas is not None else spec.sweep.alpha)
    rs = list(rs if rs is not None else spec.sweep.r)
    cells = [(a, r) for a in alphas for r in rs]
    variants = [("n", {}), ("2n", {"n": 2 * spec.n})]
    if eps_factor is not None:
        variants.append(("eps", {"params__eps": spec.params.eps * eps_factor}))
    specs = []
    for a, r in cells:
        base = spec.with_updates(params__alpha=a, params__r=r)
        specs.extend(base.with_updates(**upd) if upd else base for _, upd in variants)
    runs = run_many(specs, jobs)
    rows = []
    for c, (a, r) in enumerate(cells):
        group = runs[c * len(variants):(c + 1) * len(variants)]
        labels = {name: _label(res, spec.T) for (name, _), res in zip(variants, group)}
        rows.append({"alpha": a, "r": r, "label": labels["n"],
                     "stable": len(set(labels.values())) == 1,
                     **{f"label_{k}": v for k, v in labels.items()},
                     "max_u": group[0]["max_u"], "final_t": group[0]["final_t"],
                     "max_u_2n": group[1]["max_u"], "final_t_2n": group[1]["final_t"]})
    rep = {"sweep": "subcritical", "scenario": spec.name, "T": spec.T, "cells": rows,
           "classifier": CLASSIFIER_NOTE, "exploratory": True}
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        report.write_json(out / "explore_subcritical.json", rep)
        _write_rows(out / "explore_subcritical.csv", rows, list(rows[0]) if rows else [])
    return rep


def _persist(rep: dict, out, stem: str, cols: list[str]) -> None:
    if out is None:
        return
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_json(out / f"{stem}.json", rep)
    _write_rows(out / f"{stem}.csv", rep["runs"], cols)


def _write_rows(path: Path, rows: list[dict], cols: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in rows:
            w.writerow([f"{row[c]:.17g}" if isinstance(row[c], float) else row[c]
                        for c in cols])
