"""Self-test battery against closed-form and independent references."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import diagnostics as diag
from .. import spectral
from ..model import ModelParams, Semilinearity
from ..spectral import Grid
from ..stepper import State, rhs, rhs_expanded


@dataclass(frozen=True)
class OracleResult:
    name: str
    value: float
    tol: float

    @property
    def passed(self) -> bool:
        return bool(self.value <= self.tol)


def random_field(n: int, band: int, rng: np.random.Generator, mean: float = 1.0,
                 amp: float = 0.4) -> np.ndarray:
    """Positive trigonometric polynomial of degree ``band``."""
    x = Grid.of(n).x
    k = np.arange(1, band + 1)
    a, b = rng.standard_normal((2, band)) / k
    p = a @ np.cos(np.outer(k, x)) + b @ np.sin(np.outer(k, x))
    return mean + amp * p / np.max(np.abs(p))


def _hilbert_cos():
    x = Grid.of(64).x
    return float(np.max(np.abs(spectral.hilbert(np.cos(x)) - np.sin(x)))), 1e-12


def _lambda_modes():
    x = Grid.of(64).x
    worst = 0.0
    for alpha in (0.5, 0.8, 1.0, 1.5, 2.0):
        for k in range(1, 31):
            f = np.cos(k * x + 0.3)
            worst = max(worst, float(np.max(np.abs(spectral.frac_laplacian(f, alpha)
                                                   - k ** alpha * f))) / k ** alpha)
    return worst, 1e-12


def _poisson():
    rng = np.random.default_rng(1)
    u = random_field(64, 20, rng)
    v = spectral.chemo_potential(u)
    res = spectral.second_derivative(v) - (u - u.mean())
    grad = spectral.chemo_gradient(u) - spectral.derivative(v)
    return float(max(np.max(np.abs(res)), np.max(np.abs(grad)))), 1e-12


def _dx_hilbert():
    rng = np.random.default_rng(2)
    u = random_field(64, 20, rng)
    lhs = spectral.derivative(spectral.hilbert(u))
    return float(np.max(np.abs(lhs - spectral.frac_laplacian(u, 1.0)))), 1e-12


def _kernel():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(5):
        u = random_field(128, 30, rng)
        ref = diag.hs_norm(u, 0.5) ** 2
        worst = max(worst, abs(diag.kernel_quadratic_form(u) - ref) / ref)
    return worst, 1e-6


def _tricomi():
    rng = np.random.default_rng(4)
    return max(diag.check_tricomi(random_field(128, 30, rng)) for _ in range(5)), 1e-10


def _mollifier():
    x = Grid.of(128).x
    spike = (np.abs(x) < 0.1).astype(float)
    out = spectral.mollify(spike, 1e-2)  # kernel spread ~3 grid cells
    mass = abs(out.sum() - spike.sum()) / spike.sum()
    return max(mass, float(max(0.0, -out.min()))), 1e-12


def _product_rule():
    rng = np.random.default_rng(5)
    u = random_field(128, 10, rng)
    worst = 0.0
    for sem in (Semilinearity.affine(0.5), Semilinearity.power(2.0), Semilinearity.linear()):
        p = ModelParams(semilinearity=sem, r=1.0, eps=0.0)
        s = State(0.0, u, p)
        worst = max(worst, float(np.max(np.abs(rhs(s) - rhs_expanded(s)))))
    return worst, 1e-10


BATTERY: dict[str, Callable[[], tuple[float, float]]] = {
    "hilbert_cos_is_sin": _hilbert_cos,
    "lambda_single_modes": _lambda_modes,
    "poisson_residual": _poisson,
    "dx_hilbert_is_lambda": _dx_hilbert,
    "kernel_symmetrization": _kernel,
    "tricomi_identity": _tricomi,
    "mollifier_mass_and_sign": _mollifier,
    "rhs_product_rule": _product_rule,
}


def run_battery() -> list[OracleResult]:
    out = []
    for name, fn in BATTERY.items():
        val, tol = fn()
        out.append(OracleResult(name, float(val) if math.isfinite(val) else math.inf, tol))
    return out
