"""Named checks evaluated on a finished run.

Each check returns exactly one :class:`Verdict`.  ``margin`` is signed so that
a nonnegative value means the property held with room to spare; its unit is
given in ``detail["measured"]``'s description.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Literal, Optional

import numpy as np
from scipy.integrate import cumulative_simpson

from .. import diagnostics as diag
from .. import model, spectral
from ..diagnostics import DiagnosticsRecord
from ..model import CeilingPath, NoCeilingError
from ..stepper import State, TrajectoryRecord, cfl_dt, integrate
from .scenario import CheckSpec, ScenarioSpec

Status = Literal["pass", "fail", "precondition unmet"]

# Default tolerances.  Ceilings and floors are absolute on margins; decay
# envelopes are multiplicative slack; refinement studies give a minimum
# observed order or a minimum reduction ratio.
DEFAULT_TOL = {
    "blowup_free": 0.0,
    "steady": 1e-10,
    "nonnegativity": 1e-8,
    "positivity_floor": 1e-6,
    "ceiling": 1e-6,
    "mass_conservation": 1e-12,
    "mean_law": 1e-6,
    "hhalf_linear": 0.10,
    "entropy_balance": 2.0,
    "l2_balance": 2.0,
    "weak_residual": 4.0,
    "lubo": 1e-6,
    "maxpoint": 1e-6,
    "entropy_decay": 0.05,
    "fisher_decay": 0.05,
    "tricomi": 1e-10,
    "convergence": 1e-6,
}

# refinement residuals below this are treated as roundoff
ROUNDOFF_FLOOR = 1e-13


@dataclass(frozen=True)
class Verdict:
    check: str
    status: Status
    margin: float
    tolerance: float
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def as_dict(self) -> dict:
        d = asdict(self)
        d["margin"] = _num(self.margin)
        return d


def _num(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


@dataclass
class RunContext:
    spec: ScenarioSpec
    u0: np.ndarray
    traj: TrajectoryRecord
    records: list[DiagnosticsRecord]
    ceiling_path: CeilingPath = "auto"

    @property
    def params(self):
        return self.spec.params

    @property
    def inf0(self) -> float:
        return float(self.u0.min())

    @property
    def completed(self) -> bool:
        return self.traj.classification == "ok" and self.traj.final_t >= self.spec.T


CheckFn = Callable[[RunContext, float, dict], Verdict]
REGISTRY: dict[str, CheckFn] = {}


def register(name: str):
    def deco(fn: CheckFn) -> CheckFn:
        REGISTRY[name] = fn
        return fn
    return deco


def evaluate(ctx: RunContext, check: CheckSpec) -> Verdict:
    tol = DEFAULT_TOL[check.name] if check.tol is None else check.tol
    return REGISTRY[check.name](ctx, tol, dict(check.options))


def _verdict(name, ok, margin, tol, **detail) -> Verdict:
    return Verdict(name, "pass" if ok else "fail", float(margin), float(tol),
                   {k: _num(v) for k, v in detail.items()})


def _unmet(name, tol, reason, **detail) -> Verdict:
    return Verdict(name, "precondition unmet", math.nan, float(tol),
                   {"reason": reason, **{k: _num(v) for k, v in detail.items()}})


# -- run-level checks ----------------------------------------------------------------

@register("blowup_free")
def _blowup_free(ctx, tol, opts):
    ok = ctx.completed
    return _verdict("blowup_free", ok, 0.0 if ok else -1.0, tol,
                    classification=ctx.traj.classification, final_t=ctx.traj.final_t,
                    note="blowup flag is a numerical surrogate (amplitude and "
                         "spectral-tail persistence), not a proof")


@register("steady")
def _steady(ctx, tol, opts):
    err = float(np.max(np.abs(ctx.traj.final_u - ctx.u0)))
    return _verdict("steady", err <= tol and ctx.completed, tol - err, tol,
                    measured=err, quantity="sup |u(T) - u0|")


@register("nonnegativity")
def _nonneg(ctx, tol, opts):
    lo = float(ctx.traj.log_array("min").min())
    return _verdict("nonnegativity", lo >= -tol, lo, tol, measured=lo,
                    quantity="min over steps of min u")


@register("positivity_floor")
def _floor(ctx, tol, opts):
    t = ctx.traj.log_array("t")
    lo = ctx.traj.log_array("min")
    gap = lo - model.positivity_floor(ctx.u0, t)
    i = int(np.argmin(gap))
    return _verdict("positivity_floor", gap[i] >= -tol, gap[i], tol, t_worst=t[i],
                    quantity="min_t (min u(t) - inf u0 exp(-max(1,<u0>) t))")


@register("ceiling")
def _ceiling(ctx, tol, opts):
    path = opts.get("path", ctx.ceiling_path)
    slack = float(opts.get("margin", 0.05))
    try:
        s0 = model.compute_s0(ctx.params, ctx.u0, margin=slack, path=path)
    except NoCeilingError as e:
        return _unmet("ceiling", tol, str(e), path=path)
    hi = float(ctx.traj.log_array("max").max())
    return _verdict("ceiling", s0 - hi >= -tol, s0 - hi, tol, s0=s0, max_u=hi,
                    path=path, slack=slack, quantity="s0*(1+slack) - max_t max u")


@register("mass_conservation")
def _mass(ctx, tol, opts):
    if ctx.params.r != 0:
        return _unmet("mass_conservation", tol, "logistic term present (r > 0)")
    m = ctx.traj.log_array("mean")
    drift = float(np.max(np.abs(m - m[0])) / abs(m[0])) if m[0] != 0 else float(np.max(np.abs(m)))
    return _verdict("mass_conservation", drift <= tol, tol - drift, tol, measured=drift,
                    quantity="max relative drift of the mass")


@register("mean_law")
def _mean_law(ctx, tol, opts):
    """``d<u>/dt = r (<u> - <u^2>)`` integrated over the step log.

    Simpson on the (nonuniform) step times; the trapezoid rule is only second
    order and sits near the tolerance on coarse grids.
    """
    t = ctx.traj.log_array("t")
    m = ctx.traj.log_array("mean")
    q = ctx.params.r * (m - ctx.traj.log_array("mean_sq"))
    if t.size < 3:
        pred = m[0] + np.concatenate(([0.0], np.cumsum(0.5 * (q[1:] + q[:-1]) * np.diff(t))))
    else:
        pred = m[0] + cumulative_simpson(q, x=t, initial=0.0)
    err = float(np.max(np.abs(m - pred)) / max(1.0, abs(m[0])))
    return _verdict("mean_law", err <= tol, tol - err, tol, measured=err,
                    quantity="max |<u>(t) - predicted| / max(1, <u0>)")


@register("hhalf_linear")
def _hhalf(ctx, tol, opts):
    if not ctx.completed:
        return _unmet("hhalf_linear", tol, "run did not reach T")
    a1 = model.check_assumption1(ctx.params.semilinearity)
    delta = a1.delta if a1.holds else 1.0
    t = ctx.traj.log_array("t")
    h = ctx.traj.log_array("hhalf_sq")
    cum = delta * np.concatenate(([0.0], np.cumsum(0.5 * (h[1:] + h[:-1]) * np.diff(t))))
    T = t[-1]
    first, second = t <= 0.5 * T, t >= 0.5 * T
    s1 = float(np.polyfit(t[first], cum[first], 1)[0])
    s2 = float(np.polyfit(t[second], cum[second], 1)[0])
    margin = (1.0 + tol) * s1 - s2
    return _verdict("hhalf_linear", margin >= 0, margin, tol, slope_first=s1,
                    slope_second=s2, cumulative_T=cum[-1],
                    quantity="(1+tol) * slope[0,T/2] - slope[T/2,T]")


# -- refinement studies ---------------------------------------------------------------

def _ladder(ctx: RunContext, horizon: float, c_start: float, n: Optional[int] = None) -> float:
    """Coarsest fixed step: the stability-limit step of u0 rounded to divide ``horizon``."""
    n = n or ctx.spec.n
    u0 = ctx.u0 if n == ctx.u0.size else _resample(ctx.u0, n)
    ctrl = ctx.spec.ctrl.model_copy(update={"c_cfl": c_start})
    dt = cfl_dt(State(0.0, u0, ctx.params), ctrl)
    m = max(2, math.ceil(horizon / dt))
    m += m % 2  # cumulative Simpson likes an even count
    return horizon / m


def _resample(u: np.ndarray, n: int) -> np.ndarray:
    return spectral.upsample(u, n) if n > u.size else spectral.restrict(u, n)


def _fixed_run(ctx: RunContext, u0: np.ndarray, horizon: float, dt: float) -> TrajectoryRecord:
    return integrate(State(0.0, u0, ctx.params), ctx.spec.ctrl, horizon, cadence=1,
                     fixed_dt=dt)


def _orders(res: list[float]) -> list[float]:
    return [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(res, res[1:])]


def _balance(name: str, which: str):
    def check(ctx, tol, opts):
        horizon = float(opts.get("horizon", min(ctx.spec.T, 2.0)))
        levels = int(opts.get("levels", 3))
        dt0 = float(opts.get("dt", _ladder(ctx, horizon, float(opts.get("c_start", 1.0)))))
        res, dts = [], []
        for j in range(levels):
            dt = dt0 / 2 ** j
            tr = _fixed_run(ctx, ctx.u0, horizon, dt)
            if tr.classification != "ok":
                return _verdict(name, False, -math.inf, tol, dt=dt,
                                reason=f"refinement run classified {tr.classification}")
            with np.errstate(all="ignore"):
                r = diag.integrated_balance_residual(tr.times, tr.states, ctx.params, which)
            res.append(float(np.max(r)))
            dts.append(dt)
        if res[-1] < ROUNDOFF_FLOOR:
            return _unmet(name, tol, "finest residual at roundoff; coarsen the ladder",
                          residuals=str(res))
        orders = _orders(res)
        worst = min(orders)
        return _verdict(name, worst >= tol, worst - tol, tol, dts=str(dts),
                        residuals=str(res), orders=str(orders), horizon=horizon,
                        quantity="min observed order - required order")
    return check


register("entropy_balance")(_balance("entropy_balance", "entropy"))
register("l2_balance")(_balance("l2_balance", "l2"))


@register("weak_residual")
def _weak(ctx, tol, opts):
    """Residual against ``exp(ikx) psi(t)`` at (n, dt) and (2n, dt/2)."""
    horizon = float(opts.get("horizon", min(ctx.spec.T, 2.0)))
    ks = [int(k) for k in opts.get("k", [0, 1, 2, 3])]
    n = ctx.spec.n
    dt0 = float(opts.get("dt", _ladder(ctx, horizon, float(opts.get("c_start", 1.0)))))
    res = {}
    for level, (m, dt) in enumerate(((n, dt0), (2 * n, dt0 / 2))):
        u0 = ctx.u0 if m == n else ctx.spec.initial_condition.build(m, ctx.spec.seed)
        if m != n and ctx.spec.mollify > 0:
            u0 = spectral.mollify(u0, ctx.spec.mollify)
        tr = _fixed_run(ctx, u0, horizon, dt)
        if tr.classification != "ok":
            return _verdict("weak_residual", False, -math.inf, tol, n=m, dt=dt,
                            reason=f"refinement run classified {tr.classification}")
        res[level] = [diag.weak_residual(tr.times, tr.states, ctx.params, k) for k in ks]
    ratios, at_floor = {}, []
    for i, k in enumerate(ks):
        coarse, fine = res[0][i], res[1][i]
        if coarse < ROUNDOFF_FLOOR:
            at_floor.append(k)
            continue
        ratios[k] = coarse / fine if fine > 0 else math.inf
    detail = dict(coarse=str(res[0]), fine=str(res[1]), k=str(ks), dt=dt0, n=n,
                  roundoff_modes=str(at_floor))
    if not ratios:
        return _unmet("weak_residual", tol, "all residuals at roundoff", **detail)
    worst = min(ratios.values())
    return _verdict("weak_residual", worst >= tol, worst - tol, tol,
                    ratios=str(ratios), quantity="min reduction ratio - required", **detail)


# -- pointwise inequalities on sampled states ---------------------------------------------

@register("lubo")
def _lubo(ctx, tol, opts):
    margins, times = [], []
    for t, u in zip(ctx.traj.times, ctx.traj.states):
        rep = diag.check_lubo(u, tol)
        if rep.precondition_met:
            margins.append(rep.margin)
            times.append(t)
    if not margins:
        return _unmet("lubo", tol, "no sampled state has max u >= 4 <u>")
    i = int(np.argmin(margins))
    return _verdict("lubo", margins[i] >= -tol, margins[i], tol, samples=len(margins),
                    t_worst=times[i], last_t=times[-1],
                    quantity="min over states of Lambda u(xmax) - u(xmax)^2/(4 pi^2 <u>)")


@register("maxpoint")
def _maxpoint(ctx, tol, opts):
    worst, t_worst = math.inf, math.nan
    for t, u in zip(ctx.traj.times, ctx.traj.states):
        rep = diag.check_maxpoint_inequalities(u, tol)
        scale = max(1.0, float(np.max(np.abs(u))))
        m = min(rep.sharp_margin_max, rep.sharp_margin_min) / scale
        if m < worst:
            worst, t_worst = m, t
    return _verdict("maxpoint", worst >= -tol, worst, tol, t_worst=t_worst,
                    quantity="min relative margin of the factor-1/2 max/min-point bounds")


def _window(ctx, opts):
    tw = float(opts.get("window", 5.0))
    t = np.array([r.t for r in ctx.records])
    return t, t <= tw + 1e-12, tw


@register("entropy_decay")
def _entropy_decay(ctx, tol, opts):
    t, sel, tw = _window(ctx, opts)
    F = np.array([r.entropy for r in ctx.records])
    rate = 2.0 * ctx.inf0
    bound = F[0] * np.exp(-rate * t) * (1.0 + tol)
    gap = (bound - F)[sel]
    i = int(np.argmin(gap))
    ok = bool(np.all(np.isfinite(F[sel]))) and gap[i] >= 0
    return _verdict("entropy_decay", ok, gap[i], tol, rate=rate, window=tw,
                    samples=int(sel.sum()), t_worst=t[sel][i], F0=F[0],
                    envelope_constant=_envelope_constant(t[sel], F[sel], rate),
                    quantity="min_t F(0) e^{-2 inf u0 t}(1+tol) - F(t)")


def _envelope_constant(t, F, rate) -> float:
    """Smallest C with F(t) <= C F(0) e^{-rate t} on the samples."""
    if F[0] <= 0:
        return 0.0 if np.all(F <= 0) else math.inf
    return float(np.max(F * np.exp(rate * t)) / F[0])


@register("fisher_decay")
def _fisher_decay(ctx, tol, opts):
    t, sel, tw = _window(ctx, opts)
    fi = np.array([r.fisher for r in ctx.records])[sel]
    ts = t[sel]
    rate = 2.0 * ctx.inf0
    # all ordered pairs t1 < t2 in the window, as I(t2) / (I(t1) e^{-rate (t2-t1)})
    later = ts[None, :] > ts[:, None]
    envelope = fi[:, None] * np.exp(-rate * (ts[None, :] - ts[:, None]))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(envelope > 0, fi[None, :] / envelope,
                         np.where(fi[None, :] > 0, np.inf, 0.0))
    ratio = np.where(later, ratio, -np.inf)
    if not later.any():
        return _verdict("fisher_decay", True, tol, tol, rate=rate, pairs=0,
                        quantity="(1+tol) - max_{t1<t2} I(t2) e^{rate(t2-t1)} / I(t1)")
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    worst = float(ratio[i, j])
    margin = 1.0 + tol - worst
    return _verdict("fisher_decay", margin >= 0, margin, tol, rate=rate, worst_ratio=worst,
                    pairs=int(later.sum()), t1=ts[i], t2=ts[j],
                    quantity="(1+tol) - max_{t1<t2} I(t2) e^{rate(t2-t1)} / I(t1)")


@register("tricomi")
def _tricomi(ctx, tol, opts):
    count = int(opts.get("samples", 10))
    idx = np.unique(np.linspace(0, len(ctx.traj.states) - 1, count).round().astype(int))
    worst = max(diag.check_tricomi(ctx.traj.states[i]) for i in idx)
    return _verdict("tricomi", worst <= tol, tol - worst, tol, measured=worst,
                    samples=len(idx), quantity="max residual of H(f Hf) = ((Hf)^2 - f^2)/2")


@register("convergence")
def _convergence(ctx, tol, opts):
    if not ctx.completed:
        return _unmet("convergence", tol, "run did not reach T")
    target = float(opts.get("target", ctx.u0.mean()))
    err = float(np.max(np.abs(ctx.traj.final_u - target)))
    return _verdict("convergence", err <= tol, tol - err, tol, measured=err,
                    target=target, t=ctx.traj.final_t, quantity="sup |u(T) - target|")

