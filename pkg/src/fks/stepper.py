"""Right-hand side of the viscous approximate problem and time integration.

The solution is advanced in Fourier space with a three-stage SSP Runge-Kutta
scheme.  The viscous term ``eps * u_xx`` is removed from the right-hand side
and integrated exactly through the factor ``exp(-eps k^2 tau)``.  The
remaining right-hand side is dealiased (2/3 rule) once per assembly.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Any, Callable, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from . import spectral
from .model import ModelParams
from .spectral import Grid

log = logging.getLogger(__name__)

Classification = Literal["ok", "blowup", "stalled"]

# Largest eps*k_cut^2*dt allowed; bounds the exp(+eps k^2 dt/2) factor of the
# middle stage by e^2.
VISCOUS_STAGE_LIMIT = 4.0
# rms of the raw right-hand side below which the spectral-tail test is skipped
TAIL_RMS_FLOOR = 1e-9


class StepControl(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    c_cfl: float = Field(0.4, gt=0, le=1)
    dt_max: float = Field(1e-2, gt=0)
    dt_min: float = Field(1e-12, gt=0)
    blowup_threshold: float = Field(1e6, gt=0)
    tail_fraction_threshold: float = Field(0.1, gt=0)
    tail_persistence: int = Field(5, ge=1)

    @model_validator(mode="after")
    def _dt_order(self):
        if not self.dt_min < self.dt_max:
            raise ValueError("dt_min must be smaller than dt_max")
        return self


@dataclass(frozen=True)
class State:
    t: float
    u: np.ndarray
    params: ModelParams
    tail_strikes: int = 0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time must be nonnegative")
        if not np.all(np.isfinite(self.u)):
            raise ValueError("state contains non-finite values")


@dataclass(frozen=True)
class StepOutcome:
    state: State
    dt_used: float
    classified: Classification
    tail_fraction: float = 0.0


# -- right-hand side ----------------------------------------------------------------

@lru_cache(maxsize=32)
def _ops(n: int, alpha: float):
    g = Grid.of(n)
    k = g.k
    odd = np.ones_like(k)
    odd[-1] = 0.0
    hil = -1j * np.sign(k) * odd
    dx = 1j * k * odd
    chemo = np.zeros_like(k, dtype=complex)
    chemo[1:] = -1j / k[1:] * odd[1:]
    lam = k ** alpha
    lam[0] = 0.0
    keep = spectral.dealias_mask(n)
    # rfft energy weights (interior modes count twice)
    w = np.full_like(k, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return k, hil, dx, chemo, lam, keep, w


def _raw_rhs_hat(uh: np.ndarray, n: int, params: ModelParams):
    """Un-dealiased right-hand side in rfft layout, plus physical ``u``."""
    k, hil, dx, chemo, lam, keep, w = _ops(n, params.alpha)
    sem = params.semilinearity
    u = np.fft.irfft(uh, n)
    uc = np.maximum(u, 0.0)
    if params.alpha == 1.0:
        q = -sem._mu(uc) * np.fft.irfft(hil * uh, n)
        if params.coupling:
            q += u * np.fft.irfft(chemo * uh, n)
        nh = dx * np.fft.rfft(q)
    else:
        diff = sem._mu(uc) * np.fft.irfft(lam * uh, n)
        if params.coupling:
            nh = dx * np.fft.rfft(u * np.fft.irfft(chemo * uh, n)) - np.fft.rfft(diff)
        else:
            nh = -np.fft.rfft(diff)
    if params.r:
        nh = nh + np.fft.rfft(params.r * u * (1.0 - u))
    return nh, u


def _tail_fraction(nh: np.ndarray, n: int, alpha: float) -> float:
    *_, keep, w = _ops(n, alpha)
    e = w * np.abs(nh) ** 2
    total = e.sum()
    if math.sqrt(total) / n < TAIL_RMS_FLOOR:
        return 0.0
    return float(e[~keep].sum() / total)


def rhs(state: State) -> np.ndarray:
    """Right-hand side without the viscous term and without dealiasing.

    Critical case (alpha = 1): ``d/dx(-mu(u) H u + u v_x) + r u (1 - u)``.
    Subcritical case: ``d/dx(u v_x) - mu(u) Lambda^alpha u + r u (1 - u)``.
    """
    u = np.asarray(state.u, dtype=float)
    nh, _ = _raw_rhs_hat(np.fft.rfft(u), u.size, state.params)
    return np.fft.irfft(nh, u.size)


def rhs_expanded(state: State) -> np.ndarray:
    """Product-rule form of the critical right-hand side (test oracle only)."""
    u = np.asarray(state.u, dtype=float)
    p = state.params
    sem = p.semilinearity
    ux = spectral.derivative(u)
    hu = spectral.hilbert(u)
    lu = spectral.frac_laplacian(u, 1.0)
    out = -sem.mu_prime(u) * ux * hu - sem.mu(u) * lu
    if p.coupling:
        out += ux * spectral.chemo_gradient(u) + u * (u - u.mean())
    return out + p.r * u * (1.0 - u)


def cfl_dt(state: State, ctrl: StepControl) -> float:
    """Explicit stability step for the nonlocal diffusion and transport terms."""
    u = np.asarray(state.u, dtype=float)
    n = u.size
    p = state.params
    sem = p.semilinearity
    kmax = n // 2
    uc = np.maximum(u, 0.0)
    speed = float(np.max(np.abs(sem._mu_prime(uc) * spectral.hilbert(u))))
    if p.coupling:
        speed += float(np.max(np.abs(spectral.chemo_gradient(u))))
    d = (kmax ** p.alpha * float(np.max(sem._mu(uc))) + kmax * speed
         + p.r * (1.0 + 2.0 * float(np.max(u))))
    dt = ctrl.dt_max if d <= 0 else min(ctrl.dt_max, ctrl.c_cfl / d)
    if p.eps > 0:
        kc = n // 3
        dt = min(dt, VISCOUS_STAGE_LIMIT / (p.eps * kc * kc))
    return dt


def _advance(uh: np.ndarray, dt: float, n: int, params: ModelParams):
    k, *_, keep, _w = _ops(n, params.alpha)
    nh0, u0 = _raw_rhs_hat(uh, n, params)
    tail = _tail_fraction(nh0, n, params.alpha)
    nh0 = np.where(keep, nh0, 0.0)
    if params.eps > 0:
        a = params.eps * k * k * dt
        e1 = np.exp(-a)
        eh = np.exp(-0.5 * a)
        ehi = np.where(keep, np.exp(0.5 * np.where(keep, a, 0.0)), 0.0)
    else:
        e1 = eh = 1.0
        ehi = 1.0
    v1 = e1 * (uh + dt * nh0)
    nh1 = np.where(keep, _raw_rhs_hat(v1, n, params)[0], 0.0)
    # exp(+eps k^2 dt/2) * v1 == eh * (uh + dt*nh0)
    v2 = 0.75 * eh * uh + 0.25 * (eh * (uh + dt * nh0) + ehi * (dt * nh1))
    nh2 = np.where(keep, _raw_rhs_hat(v2, n, params)[0], 0.0)
    return (1.0 / 3.0) * e1 * uh + (2.0 / 3.0) * eh * (v2 + dt * nh2), tail


def step(state: State, ctrl: StepControl, dt: Optional[float] = None) -> StepOutcome:
    """Advance one step of size ``dt`` (CFL step when omitted)."""
    if dt is None:
        dt = cfl_dt(state, ctrl)
    if dt < ctrl.dt_min:
        return StepOutcome(state, 0.0, "stalled")
    u = np.asarray(state.u, dtype=float)
    n = u.size
    uh, tail = _advance(np.fft.rfft(u), dt, n, state.params)
    u_new = np.fft.irfft(uh, n)
    strikes = state.tail_strikes + 1 if tail > ctrl.tail_fraction_threshold else 0
    if not np.all(np.isfinite(u_new)):
        # keep the last finite state
        return StepOutcome(replace(state, tail_strikes=strikes), dt, "blowup", tail)
    new = State(state.t + dt, u_new, state.params, strikes)
    if float(np.max(np.abs(u_new))) > ctrl.blowup_threshold:
        return StepOutcome(new, dt, "blowup", tail)
    cls: Classification = "blowup" if strikes >= ctrl.tail_persistence else "ok"
    return StepOutcome(new, dt, cls, tail)


# -- trajectories -------------------------------------------------------------------

Observer = Callable[[float, np.ndarray, ModelParams], Any]

STEP_LOG_FIELDS = ("t", "dt", "mean", "mean_sq", "min", "max", "hhalf_sq", "tail")


@dataclass
class TrajectoryRecord:
    """Recorded states at the observer cadence plus a per-step log."""

    params: ModelParams
    n: int
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    observed: list = field(default_factory=list)
    step_log: dict = field(default_factory=lambda: {f: [] for f in STEP_LOG_FIELDS})
    classification: Classification = "ok"
    n_steps: int = 0
    tail_strikes: int = 0

    @property
    def final_u(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_t(self) -> float:
        return self.times[-1]

    def log_array(self, name: str) -> np.ndarray:
        return np.asarray(self.step_log[name], dtype=float)

    def _log(self, t: float, dt: float, u: np.ndarray, tail: float) -> None:
        n = u.size
        uh = np.fft.rfft(u) / n
        k, *_, w = _ops(n, 1.0)
        sl = self.step_log
        sl["t"].append(t)
        sl["dt"].append(dt)
        sl["mean"].append(float(u.mean()))
        sl["mean_sq"].append(float(np.mean(u * u)))
        sl["min"].append(float(u.min()))
        sl["max"].append(float(u.max()))
        sl["hhalf_sq"].append(float(2 * np.pi * np.sum(w * k * np.abs(uh) ** 2)))
        sl["tail"].append(tail)

    def _record(self, t: float, u: np.ndarray, observers: Sequence[Observer]) -> None:
        self.times.append(t)
        self.states.append(u.copy())
        self.observed.append([obs(t, u, self.params) for obs in observers])


def integrate(state: State, ctrl: StepControl, T: float,
              observers: Sequence[Observer] = (), cadence: int = 10,
              fixed_dt: Optional[float] = None,
              on_step: Optional[Callable[[State, int], None]] = None,
              start_step: int = 0) -> TrajectoryRecord:
    """Step from ``state.t`` to the absolute time ``T``.

    States are recorded (and observers called) every ``cadence`` steps and at
    the final time; the per-step log is kept for every step.  Integration stops
    early on a blowup or stalled classification, returning the partial record.
    ``fixed_dt`` replaces the CFL step by a uniform step that must divide the
    remaining interval.  ``start_step`` offsets the step counter (cadence and
    ``on_step`` numbering) when continuing an earlier run.
    """
    if cadence < 1:
        raise ValueError("cadence must be >= 1")
    traj = TrajectoryRecord(params=state.params, n=state.u.size)
    u = np.asarray(state.u, dtype=float)
    traj._log(state.t, 0.0, u, 0.0)
    traj._record(state.t, u, observers)
    if T <= state.t:
        return traj

    t0 = state.t
    n_fixed = None
    if fixed_dt is not None:
        n_fixed = int(round((T - t0) / fixed_dt))
        if n_fixed < 1 or abs(n_fixed * fixed_dt - (T - t0)) > 1e-9 * max(1.0, T):
            raise ValueError("fixed_dt must divide the integration interval")

    i = start_step
    cur = state
    while True:
        if n_fixed is not None:
            dt = fixed_dt
            last = i + 1 - start_step == n_fixed
        else:
            dt = cfl_dt(cur, ctrl)
            rem = T - cur.t
            last = rem <= dt
            if last:
                dt = rem
            elif rem < 2.0 * dt:
                dt = 0.5 * rem
        out = step(cur, ctrl, dt)
        i += 1
        if out.classified == "stalled":
            traj.classification = "stalled"
            break
        cur = out.state
        if n_fixed is not None:
            cur = replace(cur, t=t0 + (i - start_step) * fixed_dt)
        if last:
            cur = replace(cur, t=float(T))
        traj._log(cur.t, dt, cur.u, out.tail_fraction)
        traj.n_steps = i
        traj.tail_strikes = cur.tail_strikes
        if on_step is not None:
            on_step(cur, i)
        if out.classified == "blowup":
            traj.classification = "blowup"
            traj._record(cur.t, cur.u, observers)
            log.info("blowup flag at t=%.6g after %d steps", cur.t, i)
            break
        if last or i % cadence == 0:
            traj._record(cur.t, cur.u, observers)
        if last:
            break
    return traj
