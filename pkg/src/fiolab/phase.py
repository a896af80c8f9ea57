"""Phase functions, amplitudes, and numerical checks of their structural hypotheses.

All evaluators broadcast over leading axes; points carry their ``d`` coordinates
on the last axis. Matrices are returned with shape ``(..., d, d)``; for the mixed
Hessian entry ``[i, l]`` is ``d^2 Phi / dx_i d eta_l``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._smooth import exp_bump, exp_bump_d1, exp_bump_d2, plateau, radial_cutoff
from .spectral import bessel_bracket

__all__ = [
    "DiffeoSpec",
    "FibrationDescription",
    "PhaseSpec",
    "SymbolSpec",
    "check_homogeneity",
    "check_nondegeneracy",
    "check_symbol_order",
    "euler_gradient_equivalence",
    "fibration_data",
    "hessian_x_rank",
    "random_samples",
]

STRUCTURED_KINDS = ("linear", "shifted", "phi_product", "x_linear_radial")


@dataclass(frozen=True)
class DiffeoSpec:
    """``phi(t) = t + c * exp_bump(t)``: the identity off ``(-1, 1)``, curved inside.

    Construction certifies ``min phi' >= min_slope`` on a 10^4-point scan, which
    keeps ``phi`` a diffeomorphism with a quantified margin.
    """

    c: float = 0.1
    min_slope: float = 0.5
    scan_points: int = 10_000

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"bump scale c must be positive, got {self.c}")
        t = np.linspace(-1.0, 1.0, self.scan_points)
        lo = float(self.dphi(t).min())
        if lo < self.min_slope:
            raise ValueError(
                f"c={self.c} gives min phi' = {lo:.4f} < {self.min_slope}; phi is not a safe diffeomorphism"
            )

    def phi(self, t):
        t = np.asarray(t, dtype=float)
        return t + self.c * exp_bump(t)

    def dphi(self, t):
        return 1.0 + self.c * exp_bump_d1(t)

    def d2phi(self, t):
        return self.c * exp_bump_d2(t)

    def max_slope(self) -> float:
        t = np.linspace(-1.0, 1.0, self.scan_points)
        return float(self.dphi(t).max())


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (d,):
        raise ValueError(f"points must have last axis of length {d}, got shape {x.shape}")
    return x


def _bshape(x, eta):
    return np.broadcast_shapes(x.shape[:-1], eta.shape[:-1])


@dataclass(frozen=True, eq=False)
class PhaseSpec:
    """A real phase ``Phi(x, eta)`` with closed-form derivatives.

    Use the classmethod constructors; ``kind`` selects the family and ``rank``
    is the declared fibration rank ``r`` (``None`` for custom phases).
    """

    kind: str
    d: int
    shift: Optional[np.ndarray] = field(default=None, repr=False)
    r: int = 0
    diffeo: Optional[DiffeoSpec] = None
    c_radial: float = 0.0
    custom_value: Optional[Callable] = field(default=None, repr=False)

    # -- constructors -------------------------------------------------
    @classmethod
    def linear(cls, d=1):
        return cls("linear", d)

    @classmethod
    def shifted(cls, a):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return cls("shifted", a.size, shift=a)

    @classmethod
    def phi_product(cls, d=1, r=1, c=0.1, diffeo=None):
        if not 1 <= r <= d:
            raise ValueError(f"fibration rank must satisfy 1 <= r <= d, got r={r}, d={d}")
        return cls("phi_product", d, r=r, diffeo=diffeo or DiffeoSpec(c))

    @classmethod
    def x_linear_radial(cls, c=0.5):
        return cls("x_linear_radial", 2, c_radial=float(c))

    @classmethod
    def custom(cls, d, value):
        """User-supplied ``value(x, eta)``; usable by operators, not by structural checks."""
        return cls("custom", d, custom_value=value)

    def __post_init__(self):
        if self.kind not in STRUCTURED_KINDS + ("custom",):
            raise ValueError(f"unknown phase kind {self.kind!r}")
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.kind == "x_linear_radial" and self.d != 2:
            raise ValueError("x_linear_radial is defined in dimension 2 only")

    @property
    def rank(self) -> Optional[int]:
        if self.kind == "custom":
            return None
        return self.r if self.kind == "phi_product" else 0

    @property
    def structured(self) -> bool:
        return self.kind in STRUCTURED_KINDS

    @property
    def linear_in_eta(self) -> bool:
        return self.kind in ("linear", "shifted", "phi_product")

    def _spatial_map(self, x):
        """The map ``x -> grad_eta Phi`` for phases linear in ``eta``."""
        if self.kind == "linear":
            return x
        if self.kind == "shifted":
            return x + self.shift
        y = x.copy()
        y[..., : self.r] = self.diffeo.phi(x[..., : self.r])
        return y

    def _require(self):
        if self.kind == "custom":
            raise ValueError("custom phases only provide value()")

    # -- evaluators ---------------------------------------------------
    def value(self, x, eta):
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        if self.kind == "custom":
            return np.asarray(self.custom_value(x, eta), dtype=float)
        if self.kind == "x_linear_radial":
            return np.sum(x * eta, axis=-1) + self.c_radial * np.linalg.norm(eta, axis=-1)
        return np.sum(self._spatial_map(x) * eta, axis=-1)

    def grad_x(self, x, eta):
        self._require()
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        g = np.broadcast_to(eta, _bshape(x, eta) + (self.d,)).copy()
        if self.kind == "phi_product":
            r = self.r
            g[..., :r] = self.diffeo.dphi(x[..., :r]) * eta[..., :r]
        return g

    def grad_eta(self, x, eta):
        self._require()
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        shape = _bshape(x, eta) + (self.d,)
        if self.kind == "x_linear_radial":
            unit = eta / np.linalg.norm(eta, axis=-1, keepdims=True)
            return np.broadcast_to(x + self.c_radial * unit, shape).copy()
        return np.broadcast_to(self._spatial_map(x), shape).copy()

    def hess_x(self, x, eta):
        self._require()
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        H = np.zeros(_bshape(x, eta) + (self.d, self.d))
        if self.kind == "phi_product":
            for k in range(self.r):
                H[..., k, k] = self.diffeo.d2phi(x[..., k]) * eta[..., k]
        return H

    def hess_eta(self, x, eta):
        self._require()
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        H = np.zeros(_bshape(x, eta) + (self.d, self.d))
        if self.kind == "x_linear_radial":
            nrm = np.linalg.norm(eta, axis=-1)[..., None, None]
            outer = eta[..., :, None] * eta[..., None, :]
            H = H + self.c_radial * (np.eye(self.d) / nrm - outer / nrm**3)
        return H

    def mixed(self, x, eta):
        self._require()
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        M = np.zeros(_bshape(x, eta) + (self.d, self.d))
        for k in range(self.d):
            M[..., k, k] = 1.0
        if self.kind == "phi_product":
            for k in range(self.r):
                M[..., k, k] = np.broadcast_to(self.diffeo.dphi(x[..., k]), M.shape[:-2])
        return M

    def max_gradient_gain(self) -> float:
        """Upper bound of ``|grad_x Phi(x, eta)| / |eta|`` over all ``x``."""
        if self.kind == "phi_product":
            return self.diffeo.max_slope()
        if self.kind == "custom":
            raise ValueError("gradient gain is unknown for custom phases")
        return 1.0


@dataclass(frozen=True, eq=False)
class SymbolSpec:
    """Amplitude ``sigma(x, eta)`` of declared order with an optional x-support box.

    ``support`` is an array of shape ``(d, 2)`` of closed intervals, or ``None``
    for symbols with no spatial cutoff. With ``frequency_floor`` the evaluator is
    multiplied by ``1 - psi_0(|eta| / 2)``, which vanishes exactly for
    ``|eta| <= 2`` and equals one for ``|eta| >= 4``.
    """

    order: float
    evaluator: Callable = field(repr=False)
    d: int = 1
    support: Optional[np.ndarray] = field(default=None, repr=False)
    frequency_floor: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.support is not None:
            box = np.asarray(self.support, dtype=float).reshape(self.d, 2)
            if np.any(box[:, 1] <= box[:, 0]):
                raise ValueError("support box must have positive side lengths")
            object.__setattr__(self, "support", box)

    @classmethod
    def classical(cls, d=1, order=0.0, support=2.0, plateau_width=1.0, frequency_floor=False):
        """``G(x) <eta>^m`` with ``G`` a product cutoff equal to 1 on ``[-plateau_width, plateau_width]^d``."""
        order = float(order)
        b, p = float(support), float(plateau_width)
        if not b > p > 0:
            raise ValueError("need support > plateau_width > 0")

        def sigma(x, eta):
            G = np.prod(plateau(x, p, b), axis=-1)
            return G * bessel_bracket(eta) ** order

        box = np.tile([-b, b], (d, 1))
        return cls(order, sigma, d, box, frequency_floor, name="classical")

    @classmethod
    def bracket(cls, d=1, order=0.0, frequency_floor=False):
        """``<eta>^m`` with no spatial cutoff (``order=0`` gives the unit symbol)."""
        order = float(order)

        def sigma(x, eta):
            return np.ones(x.shape[:-1]) * bessel_bracket(eta) ** order

        return cls(order, sigma, d, None, frequency_floor, name="bracket")

    @classmethod
    def zero(cls, d=1):
        return cls(0.0, lambda x, eta: np.zeros(_bshape(x, eta)), d, None, False, name="zero")

    def __call__(self, x, eta):
        x = _as_points(x, self.d)
        eta = _as_points(eta, self.d)
        val = np.asarray(self.evaluator(x, eta))
        if self.support is not None:
            val = val * self.spatial_mask(x)
        if self.frequency_floor:
            val = val * (1.0 - radial_cutoff(np.linalg.norm(eta, axis=-1) / 2.0))
        return val

    def times_frequency(self, factor: Callable, name=None) -> "SymbolSpec":
        """New symbol ``sigma(x, eta) * factor(eta)`` (same support and order label)."""
        base = self.evaluator

        def sigma(x, eta):
            return base(x, eta) * factor(eta)

        return SymbolSpec(
            self.order, sigma, self.d, self.support, self.frequency_floor, name=name or f"{self.name}*factor"
        )

    def spatial_mask(self, x) -> np.ndarray:
        """True where ``x`` lies in the support box (everywhere if unbounded)."""
        x = _as_points(x, self.d)
        if self.support is None:
            return np.ones(x.shape[:-1], dtype=bool)
        lo, hi = self.support[:, 0], self.support[:, 1]
        return np.all((x >= lo) & (x <= hi), axis=-1)


# -- sampling ---------------------------------------------------------
def random_samples(d, count, rng, x_box=2.0, eta_radius=(0.5, 64.0)):
    """Random ``(x, eta)`` pairs: ``x`` uniform in the box, ``|eta|`` log-uniform in the shell."""
    rng = np.random.default_rng(rng)
    x = rng.uniform(-x_box, x_box, size=(count, d))
    direction = rng.normal(size=(count, d))
    direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
    lo, hi = eta_radius
    radius = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(count, 1)))
    return x, direction * radius


def _check_eta_floor(eta, floor=0.5):
    if np.any(np.linalg.norm(eta, axis=-1) < floor):
        raise ValueError(f"samples must satisfy |eta| >= {floor}")


# -- structural checks ------------------------------------------------
def check_homogeneity(phase: PhaseSpec, x, eta) -> float:
    """Max Euler-identity defect ``|<grad_eta Phi, eta> - Phi| / (1 + |Phi|)``."""
    x = _as_points(x, phase.d)
    eta = _as_points(eta, phase.d)
    _check_eta_floor(eta)
    val = phase.value(x, eta)
    euler = np.sum(phase.grad_eta(x, eta) * eta, axis=-1)
    return float(np.max(np.abs(euler - val) / (1.0 + np.abs(val))))


def check_nondegeneracy(phase: PhaseSpec, x, eta) -> float:
    """Minimum of ``|det d^2_{x,eta} Phi|`` over the samples."""
    return float(np.min(np.abs(np.linalg.det(phase.mixed(x, eta)))))


def hessian_x_rank(phase: PhaseSpec, x, eta, tol: float = 1e-9, abs_tol: float = 1e-12) -> int:
    """Numerical rank of ``d^2_x Phi`` at a single point.

    Singular values at or below ``tol`` times the largest count as zero, and
    the rank is zero when the largest is itself below ``abs_tol``.
    """
    eta = _as_points(eta, phase.d)
    _check_eta_floor(eta)
    sv = np.linalg.svd(phase.hess_x(x, eta), compute_uv=False)
    top = sv.max()
    if top <= abs_tol:
        return 0
    return int(np.sum(sv > tol * top))


@dataclass(frozen=True)
class FibrationDescription:
    """Affine fibers of codimension ``rank`` on which ``grad_x Phi`` is constant.

    ``fiber_basis`` is a ``(d, d - rank)`` matrix of fiber directions; for the
    shipped families it does not depend on ``(x, eta)``.
    """

    rank: int
    fiber_basis: np.ndarray

    def max_gradient_variation(self, phase: PhaseSpec, x, eta, box=2.0, steps=33) -> float:
        """Largest ``|grad_x Phi(x + t v, eta) - grad_x Phi(x, eta)|`` along fibers inside the box."""
        x = _as_points(x, phase.d)
        eta = _as_points(eta, phase.d)
        base = phase.grad_x(x, eta)
        worst = 0.0
        ts = np.linspace(-2 * box, 2 * box, steps)
        for v in self.fiber_basis.T:
            for t in ts:
                moved = x + t * v
                inside = np.all(np.abs(moved) <= box, axis=-1)
                if not np.any(inside):
                    continue
                diff = np.linalg.norm(phase.grad_x(moved, eta) - base, axis=-1)
                worst = max(worst, float(np.max(diff[inside])))
        return worst


def fibration_data(phase: PhaseSpec) -> FibrationDescription:
    """Fibration of the spatial domain for the built-in phase families."""
    if not phase.structured:
        raise ValueError("fibration data is only available for the built-in phase families")
    d, r = phase.d, phase.rank
    return FibrationDescription(r, np.eye(d)[:, r:])


def euler_gradient_equivalence(phase: PhaseSpec, x, eta):
    """Empirical ``(min, max)`` of ``|grad_x Phi| / |eta|`` over the samples."""
    eta = _as_points(eta, phase.d)
    _check_eta_floor(eta)
    ratio = np.linalg.norm(phase.grad_x(x, eta), axis=-1) / np.linalg.norm(eta, axis=-1)
    return float(ratio.min()), float(ratio.max())


def _multi_indices(d, max_order):
    out = []
    for total in range(max_order + 1):
        if d == 1:
            out.append((total,))
        else:
            out.extend((a, total - a) for a in range(total, -1, -1))
    return out


def _fd_derivative(f, x, eta, beta, step):
    # central differences, one axis at a time; step has shape (..., 1)
    if sum(beta) == 0:
        return f(x, eta)
    k = next(i for i, b in enumerate(beta) if b > 0)
    rest = list(beta)
    rest[k] -= 1
    e = np.zeros(eta.shape[-1])
    e[k] = 1.0
    if rest[k] == 1 and sum(rest) == 1:
        # pure second derivative along one axis
        return (f(x, eta + step * e) - 2 * f(x, eta) + f(x, eta - step * e)) / step[..., 0] ** 2
    lower = tuple(rest)
    return (_fd_derivative(f, x, eta + step * e, lower, step) - _fd_derivative(f, x, eta - step * e, lower, step)) / (
        2 * step[..., 0]
    )


def check_symbol_order(sym: SymbolSpec, x, eta, max_order=2, rel_step=1e-4):
    """Fitted constants ``C_beta = max |d^beta_eta sigma| <eta>^{|beta| - m}``.

    Derivatives are central finite differences with step ``rel_step * <eta>``.
    Returns a dict keyed by multi-index ``beta``.
    """
    x = _as_points(x, sym.d)
    eta = _as_points(eta, sym.d)
    if np.any(np.linalg.norm(eta, axis=-1) < 2.0):
        raise ValueError("symbol-order samples must satisfy |eta| >= 2")
    br = bessel_bracket(eta)
    step = (rel_step * br)[..., None]
    out = {}
    for beta in _multi_indices(sym.d, max_order):
        deriv = _fd_derivative(sym, x, eta, beta, step)
        out[beta] = float(np.max(np.abs(deriv) * br ** (sum(beta) - sym.order)))
    return out
