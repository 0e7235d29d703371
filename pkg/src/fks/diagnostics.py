"""Functionals, norms, balance identities and pointwise inequalities.

All spatial integrals use the rectangle rule on the uniform grid.  The
singular-kernel double sum in :func:`kernel_quadratic_form` is an O(n^2)
verification path, independent of the Fourier multipliers.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.integrate import cumulative_simpson

from . import spectral
from .model import ModelParams, Semilinearity
from .spectral import Grid

TWO_PI = 2 * math.pi
KERNEL_MAX_N = 512

PhiSpec = Union[str, tuple]


def _dx(u) -> float:
    return Grid.of(np.asarray(u).size).dx


def integral(f) -> float:
    f = np.asarray(f, dtype=float)
    return float(_dx(f) * f.sum())


def entropy(u) -> float:
    """``int u log u - u + 1``; roundoff-sized negatives are clamped to zero."""
    u = np.asarray(u, dtype=float)
    if u.min() < -1e-10:
        raise ValueError(f"entropy undefined: min u = {u.min():.3e} < -1e-10")
    u = np.maximum(u, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ulogu = np.where(u > 0, u * np.log(u), 0.0)
    return integral(ulogu - u + 1.0)


def _weights(n: int) -> np.ndarray:
    w = np.full(n // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def hs_norm(u, s: float) -> float:
    """Homogeneous Sobolev norm ``||Lambda^s u||_{L2}``."""
    u = np.asarray(u, dtype=float)
    n = u.size
    k = Grid.of(n).k
    c = np.fft.rfft(u) / n
    return math.sqrt(TWO_PI * float(np.sum(_weights(n) * k ** (2 * s) * np.abs(c) ** 2)))


def fisher(u) -> float:
    return hs_norm(u, 0.5) ** 2


def _phi_pair(phi: PhiSpec, sem: Optional[Semilinearity]):
    if isinstance(phi, str):
        if phi == "identity":
            sem = sem or Semilinearity.linear()
        elif sem is None:
            raise ValueError(f"Phi={phi!r} needs a semilinearity")
        return sem.phi(phi)
    return phi


def kernel_quadratic_form(u, phi: PhiSpec = "identity",
                          sem: Optional[Semilinearity] = None) -> float:
    """Symmetrized singular double integral equal to ``int Phi(u) Lambda u``.

    ``(1/8pi) sum_{i,j} (u_i - u_j)(Phi(u_i) - Phi(u_j)) / sin^2((x_i-x_j)/2)
    dx^2`` with each diagonal term replaced by its limit
    ``4 Phi'(u_i) u'(x_i)^2``.  ``phi`` is ``"identity"``, ``"gamma"``, ``"m"``
    or a pair of callables ``(Phi, Phi')``.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    if n > KERNEL_MAX_N:
        raise ValueError(f"kernel oracle is capped at n <= {KERNEL_MAX_N}")
    g = Grid.of(n)
    f, fp = _phi_pair(phi, sem)
    pu = np.asarray(f(u), dtype=float)
    du = u[:, None] - u[None, :]
    dp = pu[:, None] - pu[None, :]
    s2 = np.sin(0.5 * (g.x[:, None] - g.x[None, :])) ** 2
    np.fill_diagonal(s2, 1.0)
    q = du * dp / s2
    ux = spectral.derivative(u)
    np.fill_diagonal(q, 4.0 * np.asarray(fp(u), dtype=float) * ux ** 2)
    return float(q.sum() * g.dx ** 2 / (8 * math.pi))


def dissipation(u, phi: PhiSpec, sem: Optional[Semilinearity] = None) -> float:
    """``int Phi(u) Lambda u`` through the Fourier multiplier."""
    u = np.asarray(u, dtype=float)
    f, _ = _phi_pair(phi, sem)
    return integral(np.asarray(f(u)) * spectral.frac_laplacian(u, 1.0))


# -- balance identities -------------------------------------------------------------

Window = Sequence[tuple]  # odd number of (t, u) pairs; the middle one is evaluated


def fd_weights(t, t0: float) -> np.ndarray:
    """First-derivative weights at ``t0`` exact for polynomials of degree < len(t)."""
    t = np.asarray(t, dtype=float)
    h = np.max(np.abs(t - t0))
    z = (t - t0) / h
    m = z.size
    A = np.vander(z, m, increasing=True).T
    rhs = np.zeros(m)
    rhs[1] = 1.0
    return np.linalg.solve(A, rhs) / h


def _ddt(window: Window, fn: Callable[[np.ndarray], float]) -> float:
    """Centered time derivative at the middle of ``window``.

    Three points give second order, five points fourth order; spacing may be
    non-uniform.
    """
    if len(window) % 2 == 0 or len(window) < 3:
        raise ValueError("balance windows need an odd number >= 3 of states")
    ts = [t for t, _ in window]
    vals = np.array([fn(np.asarray(u)) for _, u in window])
    return float(fd_weights(ts, ts[len(ts) // 2]) @ vals)


def _mid(window: Window) -> np.ndarray:
    return np.asarray(window[len(window) // 2][1], dtype=float)


def _entropy_rates(u: np.ndarray, params: ModelParams) -> dict:
    sem = params.semilinearity
    uc = np.maximum(u, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logu = np.log(uc)
    if params.alpha == 1.0:
        diss = integral(sem.big_gamma(uc) * spectral.frac_laplacian(u, 1.0))
    else:
        diss = integral(sem._mu(uc) * logu * spectral.frac_laplacian(u, params.alpha))
    visc = 4.0 * params.eps * integral(spectral.derivative(np.sqrt(uc)) ** 2)
    chem = integral((u - u.mean()) ** 2) if params.coupling else 0.0
    with np.errstate(invalid="ignore"):
        logistic = params.r * integral(np.where(uc > 0, u * (1.0 - u) * logu, 0.0))
    return {"dissipation": diss, "viscous": visc, "chemotaxis": chem,
            "logistic": logistic}


def _l2_rates(u: np.ndarray, params: ModelParams) -> dict:
    sem = params.semilinearity
    uc = np.maximum(u, 0.0)
    if params.alpha == 1.0:
        diss = integral(sem.big_m(uc) * spectral.frac_laplacian(u, 1.0))
    else:
        diss = integral(u * sem._mu(uc) * spectral.frac_laplacian(u, params.alpha))
    visc = params.eps * integral(spectral.derivative(u) ** 2)
    chem_c = 0.5 if params.coupling else 0.0
    chem_m = 0.5 * u.mean() if params.coupling else 0.0
    return {"dissipation": diss, "viscous": visc,
            "cubic": (params.r - chem_c) * integral(u ** 3),
            "square": (params.r - chem_m) * integral(u ** 2)}


def entropy_balance_terms(window: Window, params: ModelParams) -> dict:
    """Terms of the entropy balance at the middle of ``window``.

    ``dF/dt + D + 4 eps int |(sqrt u)_x|^2 = ||u - <u>||^2 + r int u(1-u) log u``
    where ``D = int Gamma(u) Lambda u`` (critical case) or
    ``int mu(u) log(u) Lambda^alpha u`` (subcritical case).  The chemotactic
    term is dropped when coupling is off.
    """
    u = _mid(window)
    out = {"dF": _ddt(window, entropy)}
    out.update(_entropy_rates(u, params))
    out["fisher"] = fisher(u)
    return out


def entropy_balance_residual(window: Window, params: ModelParams) -> float:
    b = entropy_balance_terms(window, params)
    return abs(b["dF"] + b["dissipation"] + b["viscous"] - b["chemotaxis"] - b["logistic"])


def l2_balance_terms(window: Window, params: ModelParams) -> dict:
    """Terms of the L2 balance at the middle of ``window``.

    ``(1/2) d||u||^2/dt + D + eps ||u_x||^2 + (r - 1/2) int u^3
    = (r - <u>/2) int u^2`` with ``D = int M(u) Lambda u`` (critical case) or
    ``int u mu(u) Lambda^alpha u``.  Without coupling the ``1/2 int u^3`` and
    ``<u>/2 int u^2`` contributions are absent.
    """
    u = _mid(window)
    half_dl2 = 0.5 * _ddt(window, lambda v: integral(np.asarray(v) ** 2))
    r = _l2_rates(u, params)
    lhs = half_dl2 + r["dissipation"] + r["viscous"] + r["cubic"]
    return {"half_dl2": half_dl2, "dissipation": r["dissipation"],
            "viscous": r["viscous"], "lhs": lhs, "rhs": r["square"]}


def l2_balance_residual(window: Window, params: ModelParams) -> float:
    b = l2_balance_terms(window, params)
    return abs(b["lhs"] - b["rhs"])


def integrated_balance_residual(times: Sequence[float], states: Sequence[np.ndarray],
                                params: ModelParams, which: str = "entropy") -> np.ndarray:
    """Time-integrated balance defect ``|E(t) - E(t0) + int_t0^t rate|``.

    ``E`` is the entropy or ``||u||^2/2``; the rate collects every other term of
    the corresponding balance.  The integral is the cumulative Simpson rule, so
    on uniform steps the defect measures the time integrator rather than a
    difference quotient.  Returned at every supplied time (zero at ``t0``).
    """
    if which == "entropy":
        energy = entropy

        def rate(u):
            t = _entropy_rates(u, params)
            return t["dissipation"] + t["viscous"] - t["chemotaxis"] - t["logistic"]
    elif which == "l2":
        def energy(u):
            return 0.5 * integral(u * u)

        def rate(u):
            t = _l2_rates(u, params)
            return t["dissipation"] + t["viscous"] + t["cubic"] - t["square"]
    else:
        raise ValueError(f"unknown balance {which!r}")
    times = np.asarray(times, dtype=float)
    if times.size < 3:
        raise ValueError("need at least three states")
    us = [np.asarray(u, dtype=float) for u in states]
    e = np.array([energy(u) for u in us])
    q = np.array([rate(u) for u in us])
    cum = np.concatenate(([0.0], cumulative_simpson(q, x=times)))
    return np.abs(e - e[0] + cum)


# -- pointwise inequalities -----------------------------------------------------------

@dataclass(frozen=True)
class MaxpointReport:
    lam_at_max: float
    lam_at_min: float
    excess_max: float  # u(xmax) - <u>
    excess_min: float  # u(xmin) - <u>
    margin_max: float  # Lambda u(xmax) - (u(xmax) - <u>)
    margin_min: float  # (u(xmin) - <u>) - Lambda u(xmin)
    sharp_margin_max: float  # Lambda u(xmax) - (u(xmax) - <u>)/2
    sharp_margin_min: float  # (u(xmin) - <u>)/2 - Lambda u(xmin)
    violated: bool


def check_maxpoint_inequalities(u, tol: float = 1e-6) -> MaxpointReport:
    """Evaluate ``Lambda u`` at the grid argmax/argmin against ``u - <u>``.

    The margins with factor one are reported as computed.  Only the bounds
    with factor 1/2 hold for every periodic field (they follow from
    ``sin^2 <= 1`` under the 1/(4 pi) kernel); ``violated`` refers to those.
    A counterexample for factor one is ``cos x - 0.2 cos 2x``.
    """
    u = np.asarray(u, dtype=float)
    lu = spectral.frac_laplacian(u, 1.0)
    i, j = int(np.argmax(u)), int(np.argmin(u))
    m = u.mean()
    ex_max, ex_min = u[i] - m, u[j] - m
    sharp_max = lu[i] - 0.5 * ex_max
    sharp_min = 0.5 * ex_min - lu[j]
    floor = -tol * float(np.max(np.abs(u)))
    return MaxpointReport(
        lam_at_max=float(lu[i]), lam_at_min=float(lu[j]),
        excess_max=float(ex_max), excess_min=float(ex_min),
        margin_max=float(lu[i] - ex_max), margin_min=float(ex_min - lu[j]),
        sharp_margin_max=float(sharp_max), sharp_margin_min=float(sharp_min),
        violated=bool(sharp_max < floor or sharp_min < floor),
    )


@dataclass(frozen=True)
class LuboReport:
    precondition_met: bool
    u_max: float
    mean: float
    lam_at_max: float
    required: float
    margin: float
    flagged: bool


def check_lubo(u, tol: float = 1e-6) -> LuboReport:
    """``Lambda u(xmax) >= u(xmax)^2 / (4 pi^2 <u>)`` when ``max u >= 4 <u>``."""
    u = np.asarray(u, dtype=float)
    i = int(np.argmax(u))
    m = float(u.mean())
    umax = float(u[i])
    if not (m > 0 and umax >= 4.0 * m):
        return LuboReport(False, umax, m, math.nan, math.nan, math.nan, False)
    lam = float(spectral.frac_laplacian(u, 1.0)[i])
    req = umax * umax / (4 * math.pi ** 2 * m)
    margin = lam - req
    return LuboReport(True, umax, m, lam, req, margin, bool(margin < -tol * abs(lam)))


def check_tricomi(u) -> float:
    """Max-norm residual of ``H(Hf f) = ((Hf)^2 - f^2)/2`` with ``f = u_x``.

    ``f`` is band-limited to ``|k| <= n/4`` and the products are formed on the
    doubled grid, where they are exact.
    """
    u = np.asarray(u, dtype=float)
    n = u.size
    f = spectral.band_limit(spectral.derivative(u), n / 4)
    f2 = spectral.upsample(f, 2 * n)
    hf = spectral.hilbert(f2)
    lhs = spectral.hilbert(hf * f2)
    rhs = 0.5 * (hf * hf - f2 * f2)
    return float(np.max(np.abs(lhs - rhs)))


# -- weak formulation ---------------------------------------------------------------

def bump(a: float, b: float):
    """Smooth bump supported on ``(a, b)``; returns ``(psi, dpsi)``."""
    c, h = 0.5 * (a + b), 0.5 * (b - a)

    def psi(t):
        s = (np.asarray(t, dtype=float) - c) / h
        inside = np.abs(s) < 1
        out = np.zeros_like(s)
        out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
        return out

    def dpsi(t):
        s = (np.asarray(t, dtype=float) - c) / h
        inside = np.abs(s) < 1
        out = np.zeros_like(s)
        si = s[inside]
        out[inside] = np.exp(-1.0 / (1.0 - si ** 2)) * (-2.0 * si / (1.0 - si ** 2) ** 2) / h
        return out

    return psi, dpsi


def weak_residual(times: Sequence[float], states: Sequence[np.ndarray],
                  params: ModelParams, k: int, psi=None) -> float:
    """Weak-form residual against ``phi(x, t) = exp(ikx) psi(t)``.

    Includes the viscous contribution ``+eps k^2 phi u`` so the residual
    vanishes for the approximate problem actually integrated; with
    ``eps = 0`` it is the residual of the limiting equation.  Time integration
    is the trapezoid rule over the supplied (ideally every-step) states.
    """
    times = np.asarray(times, dtype=float)
    if psi is None:
        span = times[-1] - times[0]
        psi = bump(times[0] + 0.05 * span, times[-1] - 0.05 * span)
    f_psi, f_dpsi = psi
    sem = params.semilinearity
    n = np.asarray(states[0]).size
    x = Grid.of(n).x
    e = np.exp(1j * k * x)
    dx = Grid.of(n).dx
    vals = np.empty(times.size, dtype=complex)
    ps, dps = f_psi(times), f_dpsi(times)
    for m, u in enumerate(states):
        u = np.asarray(u, dtype=float)
        uc = np.maximum(u, 0.0)
        if params.alpha == 1.0:
            q = -sem._mu(uc) * spectral.hilbert(u)
            extra = 0.0
        else:
            q = np.zeros_like(u)
            extra = sem._mu(uc) * spectral.frac_laplacian(u, params.alpha)
        if params.coupling:
            q = q + u * spectral.chemo_gradient(u)
        integrand = (-dps[m] * u + 1j * k * ps[m] * q
                     - ps[m] * params.r * u * (1.0 - u)
                     + ps[m] * params.eps * k * k * u + ps[m] * extra)
        vals[m] = dx * np.sum(e * integrand)
    total = np.trapezoid(vals, times)
    total -= f_psi(np.array([times[0]]))[0] * dx * np.sum(e * np.asarray(states[0]))
    return float(abs(total))


# -- records ------------------------------------------------------------------------

@dataclass
class DiagnosticsRecord:
    t: float
    mass: float
    mean: float
    min: float
    argmin: int
    max: float
    argmax: int
    l2: float
    l3: float
    linf: float
    hhalf: float
    entropy: float
    fisher: float
    dissipation_gamma: float
    dissipation_m: float
    entropy_balance_residual: float = math.nan
    l2_balance_residual: float = math.nan

    @classmethod
    def columns(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def row(self) -> list[str]:
        out = []
        for v in asdict(self).values():
            out.append(str(v) if isinstance(v, (int, np.integer)) else f"{v:.17g}")
        return out


def _safe(fn, *args) -> float:
    try:
        with np.errstate(all="ignore"):
            v = float(fn(*args))
        return v
    except (ValueError, FloatingPointError):
        return math.nan


def compute_record(t: float, u, params: ModelParams) -> DiagnosticsRecord:
    u = np.asarray(u, dtype=float)
    sem = params.semilinearity
    hh = hs_norm(u, 0.5)
    pos = u.min() > 0
    uc = np.maximum(u, 0.0)
    return DiagnosticsRecord(
        t=float(t),
        mass=integral(u),
        mean=float(u.mean()),
        min=float(u.min()), argmin=int(np.argmin(u)),
        max=float(u.max()), argmax=int(np.argmax(u)),
        l2=math.sqrt(integral(u * u)),
        l3=integral(np.abs(u) ** 3) ** (1.0 / 3.0),
        linf=float(np.max(np.abs(u))),
        hhalf=hh,
        entropy=_safe(entropy, u),
        fisher=hh * hh,
        dissipation_gamma=(_safe(dissipation, uc, "gamma", sem)
                           if pos or sem.kind not in ("constant", "affine") else math.nan),
        dissipation_m=_safe(dissipation, uc, "m", sem),
    )


def trajectory_records(times: Sequence[float], states: Sequence[np.ndarray],
                       params: ModelParams, stencil: int = 5) -> list[DiagnosticsRecord]:
    """Diagnostics for every recorded state.

    Balance residuals use the ``stencil``-point window centred on each record
    and stay NaN where the window does not fit.
    """
    recs = [compute_record(t, u, params) for t, u in zip(times, states)]
    h = stencil // 2
    for i in range(h, len(recs) - h):
        ts = times[i - h:i + h + 1]
        if np.all(np.diff(ts) > 0):
            w = list(zip(ts, states[i - h:i + h + 1]))
            recs[i].entropy_balance_residual = _safe(entropy_balance_residual, w, params)
            recs[i].l2_balance_residual = _safe(l2_balance_residual, w, params)
    return recs


def write_csv(records: Sequence[DiagnosticsRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DiagnosticsRecord.columns())
        for r in records:
            w.writerow(r.row())
