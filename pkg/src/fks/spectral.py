"""Periodic grid on [-pi, pi) and Fourier-multiplier operators.

Real fields are plain 1-D ``numpy`` arrays of length ``n``; the grid is
recovered from the length.  All multipliers are applied through ``rfft`` so
outputs are real by construction.  Odd symbols (Hilbert transform,
derivative, chemotactic gradient) zero the Nyquist mode ``k = n/2``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "Spectrum",
    "forward",
    "inverse",
    "hilbert",
    "frac_laplacian",
    "derivative",
    "second_derivative",
    "chemo_potential",
    "chemo_gradient",
    "mollify",
    "dealias",
    "dealias_mask",
    "band_limit",
    "upsample",
    "restrict",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``x_j = -pi + j*dx``, ``dx = 2*pi/n``."""

    n: int
    x: np.ndarray = field(repr=False, compare=False)
    dx: float = field(repr=False, compare=False)
    # nonnegative wavenumbers 0..n/2 (rfft layout)
    k: np.ndarray = field(repr=False, compare=False)

    @staticmethod
    def of(n: int) -> "Grid":
        return _grid(int(n))

    @property
    def k_max(self) -> int:
        return self.n // 2

    @property
    def k_cut(self) -> int:
        """Largest wavenumber kept by the 2/3 rule."""
        return self.n // 3

    def full_wavenumbers(self) -> np.ndarray:
        """Wavenumbers for the full ``fft`` layout with Nyquist stored as +n/2."""
        k = np.fft.fftfreq(self.n, 1.0 / self.n)
        k[self.n // 2] = self.n // 2
        return k.astype(int)


@lru_cache(maxsize=None)
def _grid(n: int) -> Grid:
    if n < 8 or n & (n - 1):
        raise ValueError(f"grid size must be a power of two >= 8, got {n}")
    dx = 2 * np.pi / n
    x = -np.pi + dx * np.arange(n)
    x.setflags(write=False)
    k = np.arange(n // 2 + 1, dtype=float)
    k.setflags(write=False)
    return Grid(n=n, x=x, dx=dx, k=k)


@dataclass(frozen=True)
class Spectrum:
    """Fourier coefficients ``c_k = (1/n) sum_j f_j exp(-i k x_j)``.

    ``coeffs`` is stored in ``numpy.fft`` order; use ``Grid.full_wavenumbers``
    for the matching ``k``.  With this normalization
    ``||f||_{L2}^2 = 2*pi * sum_k |c_k|^2``.
    """

    grid: Grid
    coeffs: np.ndarray

    def __getitem__(self, k: int) -> complex:
        n = self.grid.n
        if not -n // 2 < k <= n // 2:
            raise IndexError(k)
        return self.coeffs[k % n]


def _as_field(f) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 1:
        raise ValueError("fields are one-dimensional")
    Grid.of(f.size)
    if not np.all(np.isfinite(f)):
        bad = np.flatnonzero(~np.isfinite(f))
        raise ValueError(f"non-finite field values at nodes {bad[:5].tolist()}")
    return f


def _phase(grid: Grid) -> np.ndarray:
    # exp(-i k x_0) with x_0 = -pi is (-1)^k
    return np.where(grid.full_wavenumbers() % 2 == 0, 1.0, -1.0)


def forward(f) -> Spectrum:
    f = _as_field(f)
    grid = Grid.of(f.size)
    return Spectrum(grid, np.fft.fft(f) / grid.n * _phase(grid))


def inverse(s: Spectrum) -> np.ndarray:
    grid = s.grid
    return np.fft.ifft(s.coeffs * _phase(grid) * grid.n).real


# -- multipliers --------------------------------------------------------------

@lru_cache(maxsize=64)
def _symbol(n: int, name: str, alpha: float = 1.0) -> np.ndarray:
    k = Grid.of(n).k
    odd = np.ones_like(k)
    odd[-1] = 0.0  # Nyquist
    if name == "hilbert":
        s = -1j * np.sign(k) * odd
    elif name == "lambda":
        s = (k ** alpha).astype(complex)
        s[0] = 0.0
    elif name == "dx":
        s = 1j * k * odd
    elif name == "dxx":
        s = (-k ** 2).astype(complex)
    elif name == "chemo":
        s = np.zeros_like(k, dtype=complex)
        s[1:] = -1j / k[1:]
        s *= odd
    elif name == "poisson":
        s = np.zeros_like(k, dtype=complex)
        s[1:] = -1.0 / k[1:] ** 2
    else:
        raise KeyError(name)
    s.setflags(write=False)
    return s


def _apply(f: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    return np.fft.irfft(symbol * np.fft.rfft(f), f.size)


def hilbert(f) -> np.ndarray:
    """Periodic Hilbert transform, symbol ``-i sign(k)``."""
    f = _as_field(f)
    return _apply(f, _symbol(f.size, "hilbert"))


def frac_laplacian(f, alpha: float = 1.0) -> np.ndarray:
    """``Lambda^alpha f`` with symbol ``|k|^alpha``, zero mode removed."""
    if not 0.0 < alpha <= 2.0:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    f = _as_field(f)
    return _apply(f, _symbol(f.size, "lambda", float(alpha)))


def derivative(f) -> np.ndarray:
    f = _as_field(f)
    return _apply(f, _symbol(f.size, "dx"))


def second_derivative(f) -> np.ndarray:
    f = _as_field(f)
    return _apply(f, _symbol(f.size, "dxx"))


def chemo_potential(u) -> np.ndarray:
    """Mean-free ``v`` solving ``v'' = u - <u>``."""
    u = _as_field(u)
    return _apply(u, _symbol(u.size, "poisson"))


def chemo_gradient(u) -> np.ndarray:
    """``dv/dx`` for ``v'' = u - <u>``; symbol ``-i/k``."""
    u = _as_field(u)
    return _apply(u, _symbol(u.size, "chemo"))


def mollify(f, width: float, clamp: bool = True) -> np.ndarray:
    """Periodic heat-kernel smoothing with multiplier ``exp(-width k^2)``.

    Nonnegative input yields output clamped at zero (unless ``clamp`` is
    false); the clamp only touches roundoff-sized negatives when the kernel is
    resolved on the grid.
    """
    if width < 0:
        raise ValueError("mollifier width must be nonnegative")
    f = _as_field(f)
    if width == 0:
        return f.copy()
    k = Grid.of(f.size).k
    out = np.fft.irfft(np.exp(-width * k ** 2) * np.fft.rfft(f), f.size)
    if clamp and f.min() >= 0:
        np.maximum(out, 0.0, out=out)
    return out


@lru_cache(maxsize=None)
def dealias_mask(n: int) -> np.ndarray:
    """Boolean rfft-layout mask of the modes kept by the 2/3 rule."""
    k = Grid.of(n).k
    m = k <= n / 3
    m.setflags(write=False)
    return m


def dealias(s: Spectrum) -> Spectrum:
    k = np.abs(s.grid.full_wavenumbers())
    return Spectrum(s.grid, np.where(k > s.grid.n / 3, 0.0, s.coeffs))


def band_limit(f, kmax: float) -> np.ndarray:
    """Zero every mode with ``|k| > kmax``."""
    f = _as_field(f)
    k = Grid.of(f.size).k
    fh = np.fft.rfft(f)
    fh[k > kmax] = 0.0
    return np.fft.irfft(fh, f.size)


def upsample(f, m: int) -> np.ndarray:
    """Trigonometric interpolation of ``f`` onto the grid of size ``m >= n``."""
    f = _as_field(f)
    n = f.size
    if m == n:
        return f.copy()
    if m < n:
        raise ValueError("upsample target must not be coarser")
    fh = np.fft.rfft(f) / n
    fh[-1] *= 0.5  # split Nyquist evenly between +-n/2
    gh = np.zeros(m // 2 + 1, dtype=complex)
    gh[: n // 2 + 1] = fh
    # x_0 = -pi on both grids, so no phase correction is needed
    return np.fft.irfft(gh * m, m)


def restrict(f, m: int) -> np.ndarray:
    """Spectral truncation of ``f`` onto the coarser grid of size ``m``."""
    f = _as_field(f)
    n = f.size
    if m > n:
        raise ValueError("restrict target must not be finer")
    fh = np.fft.rfft(f) / n
    gh = fh[: m // 2 + 1].copy()
    gh[-1] = 2 * gh[-1].real if m < n else gh[-1]
    return np.fft.irfft(gh * m, m)
