"""Uniform grids, centered discrete Fourier transforms and Fourier-Lebesgue norms.

Conventions
-----------
The physical grid is ``x_k = (k - n/2) * dx`` on ``[-L, L)`` and the dual grid
is ``eta_l = (l - n/2) * deta`` with ``deta = 1 / (2L)``, so that
``dx * deta * n == 1`` along every axis. The forward transform is the midpoint
Riemann sum of ``f_hat(eta) = int f(t) exp(-2 pi i t.eta) dt``; on these grids it
is exactly a shifted FFT scaled by ``dx**d``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BoundaryMassWarning",
    "Grid",
    "SampledFunction",
    "SpectralFunction",
    "bessel_bracket",
    "boundary_mass",
    "check_boundary",
    "flp_norm",
    "forward_ft",
    "inverse_ft",
    "l2_grid_norm",
    "spectral_multiplier",
]


class BoundaryMassWarning(UserWarning):
    """Raised as a warning when a function carries mass near the box edge."""


@dataclass(frozen=True)
class Grid:
    """Uniform box grid ``[-L, L)^d`` with ``n`` points per axis and its dual."""

    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")
        if not self.L > 0:
            raise ValueError(f"half-width L must be positive, got {self.L}")
        object.__setattr__(self, "L", float(self.L))

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def deta(self) -> float:
        return 1.0 / (2.0 * self.L)

    @property
    def eta_max(self) -> float:
        """Dual half-width ``n / (4L)``."""
        return self.n / (4.0 * self.L)

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    def axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.dx

    def dual_axis(self) -> np.ndarray:
        return (np.arange(self.n) - self.n // 2) * self.deta

    def points(self) -> np.ndarray:
        """Physical grid points, shape ``grid.shape + (d,)``."""
        return _mesh(self.axis(), self.d)

    def dual_points(self) -> np.ndarray:
        """Dual grid points, shape ``grid.shape + (d,)``."""
        return _mesh(self.dual_axis(), self.d)


def _mesh(ax, d):
    if d == 1:
        return ax[:, None]
    return np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)


@dataclass(frozen=True, eq=False)
class _GridFunction:
    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {v.size}")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


class SampledFunction(_GridFunction):
    """Complex samples of a function on the physical grid."""

    def coordinates(self):
        return self.grid.points()


class SpectralFunction(_GridFunction):
    """Complex samples of a Fourier transform on the dual grid."""

    def coordinates(self):
        return self.grid.dual_points()


def _axes(grid):
    return tuple(range(grid.d))


def forward_ft(f: SampledFunction) -> SpectralFunction:
    """Riemann-sum Fourier transform, ``dx**d`` times the centered DFT."""
    g = f.grid
    ax = _axes(g)
    F = np.fft.fftshift(np.fft.fftn(np.fft.ifftshift(f.values, axes=ax), axes=ax), axes=ax)
    return SpectralFunction(g, F * g.dx**g.d)


def inverse_ft(F: SpectralFunction) -> SampledFunction:
    """Riemann sum of ``int F(eta) exp(2 pi i x.eta) d eta`` on the physical grid."""
    g = F.grid
    ax = _axes(g)
    f = np.fft.fftshift(np.fft.ifftn(np.fft.ifftshift(F.values, axes=ax), axes=ax), axes=ax)
    return SampledFunction(g, f / g.dx**g.d)


def bessel_bracket(eta) -> np.ndarray:
    """Japanese bracket ``(1 + |eta|^2)^(1/2)`` along the last axis."""
    eta = np.asarray(eta, dtype=float)
    if eta.ndim == 0:
        return np.sqrt(1.0 + eta * eta)
    return np.sqrt(1.0 + np.sum(eta * eta, axis=-1))


def _reduce(a, deterministic):
    if deterministic:
        return math.fsum(np.ravel(a))
    return float(np.sum(a))


def flp_norm(F: SpectralFunction, p: float, s: float = 0.0, deterministic: bool = True) -> float:
    """Discrete weighted Fourier-Lebesgue norm of a spectrum.

    ``(sum_k <eta_k>^{ps} |F_k|^p deta^d)^{1/p}``, and ``max_k <eta_k>^s |F_k|``
    for ``p = inf``. With ``deterministic=True`` the sum is exactly rounded
    (``math.fsum``), hence independent of summation order.
    """
    if not p >= 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    g = F.grid
    a = np.abs(F.values)
    if s != 0.0:
        a = a * bessel_bracket(g.dual_points()) ** s
    if math.isinf(p):
        return float(a.max())
    return (_reduce(a**p, deterministic) * g.deta**g.d) ** (1.0 / p)


def l2_grid_norm(f: SampledFunction) -> float:
    g = f.grid
    return math.sqrt(math.fsum(np.ravel(np.abs(f.values) ** 2)) * g.dx**g.d)


def spectral_multiplier(f: SampledFunction, m) -> SampledFunction:
    """Apply the Fourier multiplier ``m(D)``; ``m`` maps dual points ``(..., d)`` to values."""
    F = forward_ft(f)
    return inverse_ft(SpectralFunction(F.grid, F.values * m(F.grid.dual_points())))


def boundary_mass(values, width: float = 0.05) -> float:
    """Fraction of ``sum |v|`` carried by the outer ``width`` fraction of the box."""
    v = np.abs(np.asarray(values))
    total = v.sum()
    if total == 0:
        return 0.0
    n = v.shape[0]
    k = max(1, int(round(width * n)))
    inner = v[(slice(k, n - k),) * v.ndim].sum()
    return float((total - inner) / total)


def check_boundary(func, tol: float = 1e-8, label: str = "function") -> float:
    """Warn with :class:`BoundaryMassWarning` if boundary mass exceeds ``tol``."""
    frac = boundary_mass(func.values)
    if frac > tol:
        warnings.warn(
            f"{label} has {frac:.2e} of its mass near the box edge; enlarge the grid",
            BoundaryMassWarning,
            stacklevel=2,
        )
    return frac
