"""Semilinearity catalog, model parameters and theorem constants.

The diffusion strength ``mu(s) = gamma(s) * s`` is chosen from a small
catalog.  ``big_gamma`` and ``big_m`` are the antiderivatives of ``gamma`` and
``mu``.  For the ``constant`` and ``affine`` kinds ``gamma`` is not integrable
at zero, so ``big_gamma`` there is ``c*log s`` (resp. ``s + nu*log s``), an
antiderivative with the log anchored at ``s = 1``.  Only differences of
``big_gamma`` enter the dissipation identities, so the anchor is immaterial.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .spectral import Grid

TWO_PI = 2 * math.pi
FOUR_PI2 = 4 * math.pi ** 2

Kind = Literal["constant", "linear", "affine", "power", "ramped"]


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, achieved: float, requested: float):
        super().__init__(
            f"adaptive Simpson failed: achieved error estimate {achieved:.3e} "
            f"> requested {requested:.3e}"
        )
        self.achieved = achieved


class NoCeilingError(ValueError):
    """Raised when no pointwise ceiling is guaranteed for the given data."""


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _smoothstep_prime(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


def _simpson(f, a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_depth: int = 48) -> float:
    """Adaptive Simpson quadrature with Richardson correction."""
    if a == b:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    whole = _simpson(f, a, b, fa, fm, fb)
    worst = [0.0]

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = _simpson(f, a, m, fa, flm, fm)
        right = _simpson(f, m, b, fm, frm, fb)
        err = left + right - whole
        if abs(err) <= 15.0 * tol:
            return left + right + err / 15.0
        if depth >= max_depth:
            worst[0] = max(worst[0], abs(err) / 15.0)
            return left + right + err / 15.0
        return (rec(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
                + rec(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1))

    val = rec(a, b, fa, fm, fb, whole, tol, 0)
    if worst[0] > tol:
        raise QuadratureError(worst[0], tol)
    return val


class Semilinearity(BaseModel):
    """One entry of the semilinearity catalog.

    kinds: ``constant`` (mu = c), ``linear`` (mu = s), ``affine``
    (mu = s + nu), ``power`` (mu = s^p, p > 1) and ``ramped``
    (gamma = delta + (1 - delta) * smoothstep((s - y0)/width), mu = gamma*s).
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Kind
    c: Optional[float] = Field(None, ge=0)
    nu: Optional[float] = Field(None, ge=0)
    p: Optional[float] = Field(None, gt=1)
    delta: Optional[float] = Field(None, gt=0)
    y0: Optional[float] = Field(None, ge=0)
    width: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_kind_params(self):
        needed = {
            "constant": ("c",),
            "linear": (),
            "affine": ("nu",),
            "power": ("p",),
            "ramped": ("delta", "y0", "width"),
        }[self.kind]
        allowed = set(needed)
        missing = [k for k in needed if getattr(self, k) is None]
        extra = [k for k in ("c", "nu", "p", "delta", "y0", "width")
                 if k not in allowed and getattr(self, k) is not None]
        if missing:
            raise ValueError(f"semilinearity kind {self.kind!r} requires {missing}")
        if extra:
            raise ValueError(f"semilinearity kind {self.kind!r} does not take {extra}")
        return self

    # constructors
    @classmethod
    def constant(cls, c: float) -> "Semilinearity":
        return cls(kind="constant", c=c)

    @classmethod
    def linear(cls) -> "Semilinearity":
        return cls(kind="linear")

    @classmethod
    def affine(cls, nu: float) -> "Semilinearity":
        return cls(kind="affine", nu=nu)

    @classmethod
    def power(cls, p: float) -> "Semilinearity":
        return cls(kind="power", p=p)

    @classmethod
    def ramped(cls, delta: float, y0: float, width: float) -> "Semilinearity":
        return cls(kind="ramped", delta=delta, y0=y0, width=width)

    # -- pointwise functions ------------------------------------------------

    @staticmethod
    def _check(s):
        s = np.asarray(s, dtype=float)
        if np.any(s < 0):
            raise ValueError("semilinearity evaluated at a negative density")
        return s

    def mu(self, s):
        return self._mu(self._check(s))

    def mu_prime(self, s):
        return self._mu_prime(self._check(s))

    def gamma(self, s):
        s = self._check(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            k = self.kind
            if k == "constant":
                return np.where(s > 0, self.c / s, np.inf)
            if k == "linear":
                return np.ones_like(s)
            if k == "affine":
                return np.where(s > 0, 1.0 + self.nu / s, np.inf)
            if k == "power":
                return s ** (self.p - 1.0)
            return self._ramp(s)

    def _ramp(self, s):
        return self.delta + (1.0 - self.delta) * _smoothstep((s - self.y0) / self.width)

    def _mu(self, s):
        """``mu`` without the sign check (callers pass clipped densities)."""
        k = self.kind
        if k == "constant":
            return np.full_like(np.asarray(s, dtype=float), self.c)
        if k == "linear":
            return np.array(s, dtype=float)
        if k == "affine":
            return s + self.nu
        if k == "power":
            return s ** self.p
        return self._ramp(s) * s

    def _mu_prime(self, s):
        k = self.kind
        if k == "constant":
            return np.zeros_like(np.asarray(s, dtype=float))
        if k in ("linear", "affine"):
            return np.ones_like(np.asarray(s, dtype=float))
        if k == "power":
            return self.p * s ** (self.p - 1.0)
        t = (s - self.y0) / self.width
        dgamma = (1.0 - self.delta) * _smoothstep_prime(t) / self.width
        return self._ramp(s) + dgamma * s

    # -- antiderivatives ----------------------------------------------------

    def big_gamma(self, s):
        s = self._check(s)
        k = self.kind
        with np.errstate(divide="ignore"):
            if k == "constant":
                return self.c * np.log(s)
            if k == "linear":
                return s.copy()
            if k == "affine":
                return s + self.nu * np.log(s)
        if k == "power":
            return s ** self.p / self.p
        return self._quad(self._ramp, s)

    def big_m(self, s):
        s = self._check(s)
        k = self.kind
        if k == "constant":
            return self.c * s
        if k == "linear":
            return 0.5 * s * s
        if k == "affine":
            return 0.5 * s * s + self.nu * s
        if k == "power":
            return s ** (self.p + 1.0) / (self.p + 1.0)
        return self._quad(lambda y: self._ramp(y) * y, s)

    def _breaks(self):
        return (self.y0, self.y0 + self.width)

    def _quad(self, f, s, tol: float = 1e-10):
        """Cumulative adaptive-Simpson integral of ``f`` from 0 to each ``s``.

        Values are sorted and integrated interval by interval, split at the
        ramp's breakpoints so every piece is a polynomial.
        """
        s = np.asarray(s, dtype=float)
        flat = s.ravel()
        order = np.argsort(flat)
        g = lambda y: float(f(y))
        out = np.empty_like(flat)
        acc, prev = 0.0, 0.0
        for idx in order:
            b = flat[idx]
            if b > prev:
                cuts = [prev] + [c for c in self._breaks() if prev < c < b] + [b]
                for lo, hi in zip(cuts[:-1], cuts[1:]):
                    acc += adaptive_simpson(g, lo, hi, tol=tol)
                prev = b
            out[idx] = acc
        return out.reshape(s.shape) if s.ndim else out[0]

    def phi(self, name: str):
        """Return ``(Phi, Phi')`` for ``name`` in {identity, gamma, m}."""
        if name == "identity":
            return (lambda s: np.asarray(s, dtype=float),
                    lambda s: np.ones_like(np.asarray(s, dtype=float)))
        if name == "gamma":
            return self.big_gamma, self.gamma
        if name == "m":
            return self.big_m, self.mu
        raise KeyError(name)


class ModelParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    semilinearity: Semilinearity
    r: float = Field(0.0, ge=0)
    eps: float = Field(0.0, ge=0)
    alpha: float = Field(1.0, gt=0, le=1)
    coupling: bool = True


# -- assumptions ----------------------------------------------------------------

@dataclass(frozen=True)
class AssumptionVerdict:
    holds: bool
    delta: float
    y0: Optional[float]
    witness: Optional[float]
    note: str = ""


def check_assumption1(sem: Semilinearity) -> AssumptionVerdict:
    """gamma >= delta > 0 everywhere and gamma >= 1 beyond some y0."""
    k = sem.kind
    if k == "linear":
        return AssumptionVerdict(True, 1.0, 0.0, None)
    if k == "affine":
        return AssumptionVerdict(True, 1.0, 0.0, None, "gamma = 1 + nu/s >= 1")
    if k == "constant":
        # gamma = c/s drops below 1 for s > c and tends to zero
        return AssumptionVerdict(False, 0.0, None, max(2.0 * sem.c, 1.0),
                                 "gamma = c/s -> 0 as s -> infinity")
    if k == "power":
        return AssumptionVerdict(False, 0.0, 1.0, 0.0, "gamma(0) = 0")
    return AssumptionVerdict(True, min(sem.delta, 1.0), sem.y0 + sem.width, None)


def check_assumption2(sem: Semilinearity) -> AssumptionVerdict:
    """mu vanishes only at zero; ``delta`` is the infimum of mu on [0, inf)."""
    k = sem.kind
    if k == "constant":
        if sem.c == 0:
            return AssumptionVerdict(False, 0.0, None, 1.0, "mu vanishes identically")
        return AssumptionVerdict(True, sem.c, None, None)
    if k == "affine":
        return AssumptionVerdict(True, sem.nu, None, None)
    return AssumptionVerdict(True, 0.0, None, None)


# -- data functionals -------------------------------------------------------------

def l1_norm(u0) -> float:
    u0 = np.asarray(u0, dtype=float)
    if np.any(u0 < 0):
        warnings.warn("negative density values: integrating |u|", RuntimeWarning,
                      stacklevel=2)
    return float(Grid.of(u0.size).dx * np.abs(u0).sum())


def n1(u0) -> float:
    return max(TWO_PI, l1_norm(u0))


def mean(u) -> float:
    return float(np.mean(u))


def positivity_floor(u0, T):
    """``inf u0 * exp(-max(1, <u0>) T)``; vectorized over ``T``."""
    u0 = np.asarray(u0, dtype=float)
    inf0 = max(float(u0.min()), 0.0)
    return inf0 * np.exp(-max(1.0, mean(u0)) * np.asarray(T, dtype=float))


# -- conditions -------------------------------------------------------------------

@dataclass(frozen=True)
class ConditionVerdict:
    holds: bool
    lhs: float
    margin: float
    delta: float
    via: Optional[str]  # "delta>0", "inf u0>0" or None

    def as_dict(self) -> dict:
        return {"holds": self.holds, "lhs": self.lhs, "margin": self.margin,
                "delta": self.delta, "via": self.via}


def teoL_lhs(r: float, delta: float, mean0: float) -> float:
    return r + delta / (FOUR_PI2 * max(mean0, 1.0))


def corollary_lhs(delta: float, mean0: float) -> float:
    return delta / (FOUR_PI2 * mean0)


def _positivity_route(delta: float, inf0: float) -> Optional[str]:
    if delta > 0:
        return "delta>0"
    if inf0 > 0:
        return "inf u0>0"
    return None


def check_condition_teoL(params: ModelParams, u0) -> ConditionVerdict:
    a2 = check_assumption2(params.semilinearity)
    lhs = teoL_lhs(params.r, a2.delta, mean(u0))
    via = _positivity_route(a2.delta, float(np.min(u0)))
    holds = a2.holds and lhs > 1.0 and via is not None
    return ConditionVerdict(holds, lhs, lhs - 1.0, a2.delta, via)


def check_condition_corollary(params: ModelParams, u0) -> ConditionVerdict:
    a2 = check_assumption2(params.semilinearity)
    m0 = mean(u0)
    lhs = corollary_lhs(a2.delta, m0) if m0 > 0 else math.inf
    via = _positivity_route(a2.delta, float(np.min(u0)))
    holds = a2.holds and params.r == 0 and lhs > 1.0 and via is not None
    return ConditionVerdict(holds, lhs, lhs - 1.0, a2.delta, via)


# -- constants --------------------------------------------------------------------

CeilingPath = Literal["auto", "theorem1", "rlarge", "corollary"]


def s0_rlarge(r: float, delta: float, mean0: float, n1_: float, sup0: float,
              margin: float = 0.0, use_mean: bool = False) -> float:
    """Ceiling from the two lower bounds of the large-r argument.

    ``use_mean`` replaces ``max(<u0>, 1)`` by ``<u0>`` (the r = 0 corollary).
    """
    m = mean0 if use_mean else max(mean0, 1.0)
    denom = 1.0 - r - delta / (FOUR_PI2 * m)
    if denom >= 0:
        raise NoCeilingError("no ceiling guaranteed: condition fails "
                             f"(1 - r - delta/(4 pi^2 m) = {denom:.6g} >= 0)")
    return (1.0 + margin) * max(2.0 / math.pi * n1_, -2.0 * r / denom, sup0)


def compute_s0(params: ModelParams, u0, margin: float = 0.0,
               path: CeilingPath = "auto") -> float:
    sem = params.semilinearity
    u0 = np.asarray(u0, dtype=float)
    sup0 = float(u0.max())
    if path == "auto":
        if check_assumption1(sem).holds:
            path = "theorem1"
        elif check_condition_teoL(params, u0).holds:
            path = "rlarge"
        elif check_condition_corollary(params, u0).holds:
            path = "corollary"
        else:
            raise NoCeilingError("no ceiling guaranteed: neither Assumption-1 "
                                 "nor the large-r/corollary conditions hold")
    if path == "theorem1":
        a1 = check_assumption1(sem)
        if not a1.holds:
            raise NoCeilingError("no ceiling guaranteed: gamma >= delta > 0 fails")
        return (1.0 + margin) * max(1.0, sup0, a1.y0)
    a2 = check_assumption2(sem)
    if path == "rlarge":
        if not check_condition_teoL(params, u0).holds:
            raise NoCeilingError("no ceiling guaranteed: large-r condition fails")
        return s0_rlarge(params.r, a2.delta, mean(u0), n1(u0), sup0, margin)
    if path == "corollary":
        if not check_condition_corollary(params, u0).holds:
            raise NoCeilingError("no ceiling guaranteed: corollary condition fails")
        return s0_rlarge(0.0, a2.delta, mean(u0), n1(u0), sup0, margin, use_mean=True)
    raise ValueError(f"unknown ceiling path {path!r}")


def existence_interval(params: ModelParams, u0, T: float, margin: float = 0.0,
                       path: CeilingPath = "auto") -> tuple[float, float]:
    return float(positivity_floor(u0, T)), compute_s0(params, u0, margin, path)


@dataclass(frozen=True)
class TheoremConstants:
    n1: float
    mean0: float
    sup0: float
    inf0: float
    delta: float
    s0: float
    s1_of_T: Callable[[float], float]
    path: str

    def as_dict(self) -> dict:
        return {"n1": self.n1, "mean0": self.mean0, "sup0": self.sup0,
                "inf0": self.inf0, "delta": self.delta, "s0": self.s0,
                "path": self.path}


def theorem_constants(params: ModelParams, u0, path: CeilingPath = "auto",
                      margin: float = 0.0) -> TheoremConstants:
    u0 = np.asarray(u0, dtype=float)
    s0 = compute_s0(params, u0, margin, path)
    if path == "auto":
        path = ("theorem1" if check_assumption1(params.semilinearity).holds
                else "rlarge" if check_condition_teoL(params, u0).holds
                else "corollary")
    delta = (check_assumption1(params.semilinearity).delta if path == "theorem1"
             else check_assumption2(params.semilinearity).delta)
    return TheoremConstants(
        n1=n1(u0), mean0=mean(u0), sup0=float(u0.max()), inf0=float(u0.min()),
        delta=delta, s0=s0, s1_of_T=lambda T: float(positivity_floor(u0, T)),
        path=path,
    )
