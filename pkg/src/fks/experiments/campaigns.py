"""Scenario runs and the theorem-by-theorem verification campaigns."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Optional

import numpy as np

from .. import __version__
from .. import diagnostics as diag
from .. import model
from ..model import CeilingPath, NoCeilingError
from ..stepper import State, TrajectoryRecord, integrate
from . import report
from .checks import RunContext, Verdict, evaluate
from .scenario import CheckSpec, ScenarioSpec, SchemaError, build_initial

log = logging.getLogger(__name__)

Campaign = Literal["run", "theorem1", "rlarge", "corollary", "theorem3"]

CLASSIFIER_NOTE = ("blowup flag: numerical surrogate (amplitude threshold or "
                   "persistent spectral tail), not a mathematical claim")

CAMPAIGN_CHECKS: dict[str, tuple[str, ...]] = {
    "theorem1": ("positivity_floor", "ceiling", "mean_law", "hhalf_linear",
                 "entropy_balance", "weak_residual"),
    "rlarge": ("ceiling", "positivity_floor", "lubo", "l2_balance"),
    "corollary": ("ceiling", "positivity_floor", "lubo", "l2_balance",
                  "mass_conservation"),
    "theorem3": ("entropy_decay", "fisher_decay", "tricomi", "convergence"),
}


class CampaignRefused(RuntimeError):
    """The scenario does not meet the hypotheses of the requested campaign."""


@dataclass
class CampaignResult:
    scenario: str
    campaign: str
    verdicts: list[Verdict]
    summary: dict
    classification: str
    meta: dict = field(default_factory=dict)
    trajectory: Optional[TrajectoryRecord] = field(default=None, repr=False)
    out: Optional[Path] = None

    @property
    def failed(self) -> list[Verdict]:
        return [v for v in self.verdicts if v.status == "fail"]

    @property
    def exit_code(self) -> int:
        if self.classification == "blowup":
            return 3
        if self.failed or self.classification == "stalled":
            return 2
        return 0

    def as_dict(self) -> dict:
        return {"scenario": self.scenario, "campaign": self.campaign,
                "classification": self.classification, "classifier": CLASSIFIER_NOTE,
                "summary": self.summary,
                "verdicts": [v.as_dict() for v in self.verdicts]}


def derived_constants(spec: ScenarioSpec, u0: np.ndarray) -> dict:
    """Constants of the existence theory for this initial state."""
    p = spec.params
    sem = p.semilinearity
    a1 = model.check_assumption1(sem)
    a2 = model.check_assumption2(sem)
    out = {
        "n1": model.n1(u0), "l1": model.l1_norm(u0), "mean0": model.mean(u0),
        "sup0": float(u0.max()), "inf0": float(u0.min()),
        "assumption1": {"holds": a1.holds, "delta": a1.delta, "y0": a1.y0,
                        "witness": a1.witness, "note": a1.note},
        "assumption2": {"holds": a2.holds, "delta": a2.delta, "note": a2.note},
        "condition_rlarge": model.check_condition_teoL(p, u0).as_dict(),
        "condition_corollary": model.check_condition_corollary(p, u0).as_dict(),
        "s0": {},
    }
    for path in ("theorem1", "rlarge", "corollary"):
        try:
            out["s0"][path] = model.compute_s0(p, u0, path=path)
        except NoCeilingError:
            out["s0"][path] = None
    return out


def _summary(traj: TrajectoryRecord) -> dict:
    return {
        "n_steps": traj.n_steps, "final_t": traj.final_t,
        "max_u": float(traj.log_array("max").max()),
        "min_u": float(traj.log_array("min").min()),
        "final_max": float(traj.final_u.max()), "final_min": float(traj.final_u.min()),
        "tail_strikes": traj.tail_strikes,
        "dt_min": float(traj.log_array("dt")[1:].min()) if traj.n_steps else math.nan,
    }


def _checks_for(spec: ScenarioSpec, campaign: Campaign) -> list[CheckSpec]:
    """Campaign checks with tolerances/options from the scenario when it names them."""
    if campaign == "run":
        return list(spec.checks)
    out = []
    for name in CAMPAIGN_CHECKS[campaign]:
        out.append(spec.check(name) or CheckSpec(name=name))
    return out


def run_scenario(spec: ScenarioSpec, out=None, campaign: Campaign = "run",
                 ceiling_path: CeilingPath = "auto", overrides: Optional[dict] = None,
                 resume: Optional[dict] = None) -> CampaignResult:
    """Build u0, integrate to ``spec.T``, evaluate checks, persist artifacts.

    ``resume`` (internal) continues from a snapshot entry ``{"t", "u",
    "step", "tail_strikes"}`` instead of the initial state.
    """
    u0 = build_initial(spec)
    out = Path(out) if out is not None else None
    writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        existing = None
        if resume is not None and (out / report.SNAPSHOT_INDEX).is_file():
            existing = report.read_json(out / report.SNAPSHOT_INDEX)
        writer = report.SnapshotWriter(out, spec.snapshot_every, existing)

    if resume is None:
        start = State(0.0, u0, spec.params)
        step0 = 0
    else:
        start = State(resume["t"], resume["u"], spec.params, resume["tail_strikes"])
        step0 = resume["step"]
    if writer is not None and resume is None:
        writer.write(start.t, start.u, 0, 0)

    traj = integrate(start, spec.ctrl, spec.T, cadence=spec.cadence,
                     fixed_dt=spec.fixed_dt,
                     on_step=writer.on_step if writer else None, start_step=step0)
    if writer is not None:
        writer.write(traj.final_t, traj.final_u, traj.n_steps, traj.tail_strikes)

    records = diag.trajectory_records(traj.times, traj.states, spec.params)
    ctx = RunContext(spec, u0, traj, records, ceiling_path)
    verdicts = [evaluate(ctx, c) for c in _checks_for(spec, campaign)]

    meta = {
        "version": __version__, "campaign": campaign, "scenario": spec.model_dump(mode="json"),
        "overrides": overrides or {}, "derived": derived_constants(spec, u0),
        "classification": traj.classification, "classifier": CLASSIFIER_NOTE,
        "summary": _summary(traj), "ceiling_path": ceiling_path,
    }
    if resume is not None:
        meta["resumed_from"] = {"t": repr(float(resume["t"])), "step": resume["step"]}
    result = CampaignResult(spec.name, campaign, verdicts, meta["summary"],
                            traj.classification, meta, traj, out)
    if out is not None:
        diag.write_csv(records, out / "diagnostics.csv")
        report.write_json(out / "verdicts.json", result.as_dict())
        report.write_json(out / "meta.json", meta)
    return result


def refused(spec: ScenarioSpec, campaign: Campaign, reason: str) -> CampaignResult:
    """Result of a campaign whose hypotheses fail: every check unmet."""
    vs = [Verdict(c.name, "precondition unmet", math.nan, 0.0, {"reason": reason})
          for c in _checks_for(spec, campaign)]
    return CampaignResult(spec.name, campaign, vs, {"refused": reason}, "not run")


def verify_theorem1(spec: ScenarioSpec, out=None, overrides=None) -> CampaignResult:
    """Global bounds under the gamma >= delta > 0 hypothesis.

    Raises :class:`CampaignRefused` when the semilinearity fails it.
    """
    a1 = model.check_assumption1(spec.params.semilinearity)
    if not a1.holds:
        raise CampaignRefused(f"gamma >= delta > 0 fails for {spec.params.semilinearity.kind} "
                              f"semilinearity ({a1.note})")
    return run_scenario(spec, out, "theorem1", "theorem1", overrides)


def verify_theorem_rlarge(spec: ScenarioSpec, out=None, overrides=None) -> CampaignResult:
    """Bounds under the large-logistic condition; the corollary when ``r = 0``."""
    if spec.params.r == 0:
        return verify_corollary(spec, out, overrides)
    u0 = build_initial(spec)
    cond = model.check_condition_teoL(spec.params, u0)
    if not cond.holds:
        raise CampaignRefused(f"large-r condition fails: r + delta/(4 pi^2 max(<u0>,1)) "
                              f"= {cond.lhs:.6g} (margin {cond.margin:.3g}), "
                              f"positivity via {cond.via}")
    return run_scenario(spec, out, "rlarge", "rlarge", overrides)


def verify_corollary(spec: ScenarioSpec, out=None, overrides=None) -> CampaignResult:
    u0 = build_initial(spec)
    cond = model.check_condition_corollary(spec.params, u0)
    if not cond.holds:
        raise CampaignRefused(f"corollary condition fails: r = {spec.params.r}, "
                              f"delta/(4 pi^2 <u0>) = {cond.lhs:.6g}, positivity via {cond.via}")
    return run_scenario(spec, out, "corollary", "corollary", overrides)


THEOREM3_MEAN_TOL = 1e-12


def theorem3_problems(spec: ScenarioSpec) -> list[tuple[str, str]]:
    p = spec.params
    problems = []
    if p.semilinearity.kind != "linear":
        problems.append(("params.semilinearity.kind", "must be 'linear' (mu(s) = s)"))
    if p.coupling:
        problems.append(("params.coupling", "must be false"))
    if p.r != 0:
        problems.append(("params.r", "must be 0"))
    if p.alpha != 1.0:
        problems.append(("params.alpha", "must be 1"))
    u0 = build_initial(spec)
    if abs(u0.mean() - 1.0) > THEOREM3_MEAN_TOL:
        problems.append(("initial_condition", f"mean of u0 must be 1 (got {u0.mean():.15g})"))
    if u0.min() <= 0:
        problems.append(("initial_condition", "u0 must be bounded away from zero"))
    return problems


def verify_theorem3(spec: ScenarioSpec, out=None, overrides=None) -> CampaignResult:
    """Exponential entropy decay; the scenario must satisfy the theorem's setting."""
    problems = theorem3_problems(spec)
    if problems:
        raise SchemaError(problems)
    return run_scenario(spec, out, "theorem3", "auto", overrides)


CAMPAIGNS = {
    "1": verify_theorem1,
    "rlarge": verify_theorem_rlarge,
    "corollary": verify_corollary,
    "3": verify_theorem3,
}


def resume(out, T: Optional[float] = None) -> CampaignResult:
    """Continue the run stored in ``out`` from its latest snapshot.

    The scenario, campaign and overrides come from ``meta.json``; ``T``
    extends the horizon.  The continued trajectory is bit-identical to an
    uninterrupted run as long as the snapshot lies on its step sequence.
    """
    out = Path(out)
    meta_path = out / "meta.json"
    if not meta_path.is_file():
        raise FileNotFoundError(f"no meta.json in {out}")
    meta = report.read_json(meta_path)
    doc = meta["scenario"]
    if T is not None:
        doc["T"] = T
    spec = ScenarioSpec.model_validate(doc)
    entry = report.latest_snapshot(out)
    t = float(entry["t"])
    u = report.read_snapshot(out / entry["file"])
    state = {"t": t, "u": u, "step": entry["step"], "tail_strikes": entry["tail_strikes"]}
    overrides = dict(meta.get("overrides", {}))
    if T is not None:
        overrides["T"] = T
    return run_scenario(spec, out, meta.get("campaign", "run"), meta.get("ceiling_path", "auto"),
                        overrides, resume=state)
