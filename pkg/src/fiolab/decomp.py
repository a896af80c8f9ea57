"""Dyadic and second (thin-box) decompositions, kernel pieces and their bounds.

The conjugated kernel of a ``phi_product`` operator is split first by a
Littlewood-Paley partition in the frequency variable ``y`` and then by a
partition of unity in the transverse coordinates ``u = eta[:r]`` of the
compact slot, with cells of radius ``~ 2^{-j/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._smooth import exp_bump, radial_cutoff
from ._validation import check_samples
from .fio import FourierIntegralOperator, _kernel_sum, conjugated_kernel_slice
from .spectral import Grid, SampledFunction, boundary_mass, spectral_multiplier

__all__ = [
    "DyadicBandFilter",
    "LittlewoodPaley",
    "SecondDecomposition",
    "appendix_scaling_probe",
    "band_cutoff",
    "build_lp",
    "build_second_decomposition",
    "kernel_piece",
    "lp_piece",
    "schur_bounds",
    "taylor_remainder",
]


def _radius(y):
    y = np.asarray(y, dtype=float)
    return np.abs(y) if y.ndim == 0 else np.linalg.norm(y, axis=-1)


def lp_piece(j: int, y) -> np.ndarray:
    """``psi_0(|y|)`` for ``j = 0`` and ``psi_0(2^-j |y|) - psi_0(2^{1-j} |y|)`` for ``j >= 1``.

    ``y`` holds points along its last axis; a 0-d value is read as a radius.
    """
    r = _radius(y)
    if j == 0:
        return radial_cutoff(r)
    return radial_cutoff(r * 2.0**-j) - radial_cutoff(r * 2.0 ** (1 - j))


def band_cutoff(j: int, y) -> np.ndarray:
    """``chi(2^-j y)`` with ``chi = 1`` on ``1/2 <= |y| <= 2`` and ``0`` off ``1/4 < |y| < 4``."""
    r = _radius(y) * 2.0**-j
    return radial_cutoff(r / 2.0) - radial_cutoff(4.0 * r)


@dataclass(frozen=True)
class LittlewoodPaley:
    """Partition ``1 = sum_{j=0}^{J} psi_j`` valid on ``|y| <= 2^J``."""

    J: int
    grid: Grid = field(repr=False)

    def piece(self, j, y):
        if not 0 <= j <= self.J:
            raise ValueError(f"level {j} outside 0..{self.J}")
        return lp_piece(j, y)

    def pieces(self, y) -> np.ndarray:
        """Stack of all pieces, shape ``(J + 1,) + y.shape[:-1]``."""
        return np.stack([lp_piece(j, y) for j in range(self.J + 1)])

    def partition_sum(self, y):
        return self.pieces(y).sum(axis=0)

    def support(self, j):
        """Closed annulus bounds of ``psi_j``."""
        return (0.0, 2.0) if j == 0 else (2.0 ** (j - 1), 2.0 ** (j + 1))


def build_lp(J: int, grid: Grid) -> LittlewoodPaley:
    if J < 0:
        raise ValueError("J must be non-negative")
    if 2.0 ** (J + 1) > grid.eta_max:
        raise ValueError(f"J={J} needs dual radius {2.0 ** (J + 1)}, grid has {grid.eta_max}")
    return LittlewoodPaley(J, grid)


class DyadicBandFilter(TransformerMixin, BaseEstimator):
    """``psi_j(D)`` as an exact spectral multiplier on grid samples."""

    def __init__(self, j=1, grid=None):
        self.j = j
        self.grid = grid

    def fit(self, X=None, y=None):
        if not isinstance(self.grid, Grid):
            raise TypeError("grid must be a Grid")
        if self.j < 0:
            raise ValueError("j must be non-negative")
        self.n_features_in_ = self.grid.size
        return self

    def filter(self, f: SampledFunction) -> SampledFunction:
        j = self.j
        return spectral_multiplier(f, lambda eta: lp_piece(j, eta))

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_samples(X, self.grid.size)
        return np.stack([self.filter(SampledFunction(self.grid, row)).values.ravel() for row in X])


# -- second decomposition ---------------------------------------------------
def _cell_bump(z):
    # product bump supported in the open cube (-1, 1)^r, inside the ball of radius sqrt(r)
    return np.prod(exp_bump(z), axis=-1)


@dataclass(frozen=True, eq=False)
class SecondDecomposition:
    """Lattice centers of spacing ``h = h0 * 2^{-j/2}`` in the box ``U`` and subordinate cutoffs.

    ``chi_nu(u) = b((u - u_nu) / h) / sum_mu b((u - u_mu) / h)`` with ``b`` a
    product bump, so each cutoff lives in the ball of radius ``C1 * h`` around
    its center and the cutoffs sum to one on ``U``.
    """

    j: int
    r: int
    box: np.ndarray = field(repr=False)
    centers: np.ndarray = field(repr=False)
    spacing: float
    C0: float
    C1: float

    @property
    def count(self) -> int:
        return len(self.centers)

    def _weights(self, u):
        u = np.asarray(u, dtype=float)
        z = (u[None, ...] - self.centers.reshape((-1,) + (1,) * (u.ndim - 1) + (self.r,))) / self.spacing
        return _cell_bump(z)

    def chi_all(self, u):
        """All cutoffs at ``u`` (last axis ``r``), shape ``(N,) + u.shape[:-1]``; zero off the cover."""
        w = self._weights(u)
        total = w.sum(axis=0)
        safe = np.where(total > 0, total, 1.0)
        return w / safe

    def chi(self, nu, u):
        u = np.asarray(u, dtype=float)
        z = (u - self.centers[nu]) / self.spacing
        own = _cell_bump(z)
        out = np.zeros_like(own)
        hit = own > 0
        if np.any(hit):
            total = self._weights(u[hit]).sum(axis=0)
            out[hit] = own[hit] / total
        return out

    def partition_sum(self, u):
        return self.chi_all(u).sum(axis=0)

    def min_separation(self) -> float:
        c = self.centers
        if len(c) < 2:
            return math.inf
        best = math.inf
        for start in range(0, len(c), 512):
            block = c[start : start + 512]
            dist = np.linalg.norm(block[:, None, :] - c[None, :, :], axis=-1)
            dist[dist == 0] = math.inf
            best = min(best, float(dist.min()))
        return best

    def scan_points(self, per_cell=10):
        """Uniform scan of the (open) box with about ``per_cell`` points per lattice cell per axis."""
        axes = []
        for lo, hi in self.box:
            m = max(3, int(math.ceil((hi - lo) / self.spacing * per_cell)))
            axes.append(np.linspace(lo, hi, m + 2)[1:-1])
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([a.ravel() for a in mesh], axis=-1)

    def covering_radius(self, per_cell=10) -> float:
        """Largest distance from a scan point of ``U`` to its nearest center."""
        pts = self.scan_points(per_cell)
        worst = 0.0
        for start in range(0, len(pts), 2048):
            block = pts[start : start + 2048]
            dist = np.linalg.norm(block[:, None, :] - self.centers[None, :, :], axis=-1)
            worst = max(worst, float(dist.min(axis=1).max()))
        return worst

    def gradient_sup(self, per_cell=200, max_cells=9) -> float:
        """Max finite-difference ``|grad chi_nu|`` over a scan of whole cells.

        For ``r = 1`` the whole box is scanned; for ``r >= 2`` a patch of
        ``max_cells`` cells around the box center and one at a corner.
        """
        h = self.spacing
        if self.r == 1:
            pts = self.scan_points(per_cell)
        else:
            pts = _patch_scan(self, per_cell=min(per_cell, 40), max_cells=max_cells)
        step = h * 1e-4
        worst = 0.0
        for start in range(0, len(pts), 4096):
            block = pts[start : start + 4096]
            grad_sq = 0.0
            for k in range(self.r):
                e = np.zeros(self.r)
                e[k] = step
                diff = (self.chi_all(block + e) - self.chi_all(block - e)) / (2 * step)
                grad_sq = grad_sq + diff**2
            worst = max(worst, float(np.sqrt(grad_sq).max()))
        return worst


def _patch_scan(sd, per_cell, max_cells):
    h = sd.spacing
    side = int(math.sqrt(max_cells))
    pts = []
    for anchor in (sd.box.mean(axis=1), sd.box[:, 0] + h * side / 2.0):
        axes = [np.linspace(a - side * h / 2, a + side * h / 2, side * per_cell) for a in anchor]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts.append(np.stack([m.ravel() for m in mesh], axis=-1))
    pts = np.concatenate(pts)
    inside = np.all((pts > sd.box[:, 0]) & (pts < sd.box[:, 1]), axis=-1)
    return pts[inside]


def _as_box(U, r):
    U = np.asarray(U, dtype=float)
    if U.ndim == 0:
        U = np.array([-abs(float(U)), abs(float(U))])
    U = np.broadcast_to(U, (r, 2)) if U.shape == (2,) else U.reshape(r, 2)
    if np.any(U[:, 1] <= U[:, 0]):
        raise ValueError("parameter box has a degenerate side")
    return np.array(U)


def build_second_decomposition(j: int, r: int, U=1.0, h0: float = 1.0) -> SecondDecomposition:
    """Lattice centers anchored at the center of ``U``, spacing ``h0 * 2^{-j/2}``.

    ``U`` is an ``(r, 2)`` box, a single interval applied to every axis, or a
    half-width.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if r not in (1, 2):
        raise ValueError("rank r must be 1 or 2")
    box = _as_box(U, r)
    h = h0 * 2.0 ** (-j / 2.0)
    axes = []
    for lo, hi in box:
        mid, half = (lo + hi) / 2.0, (hi - lo) / 2.0
        kmax = int(math.ceil(half / h))
        k = np.arange(-kmax, kmax + 1)
        k = k[np.abs(k * h) < half]
        axes.append(mid + k * h)
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.ravel() for m in mesh], axis=-1)
    return SecondDecomposition(j, r, box, centers, h, C0=1.0, C1=math.sqrt(r))


# -- kernel pieces ----------------------------------------------------------
def _require_product(T):
    if not isinstance(T, FourierIntegralOperator):
        raise TypeError("expected a FourierIntegralOperator")
    if T.phase.kind != "phi_product":
        raise ValueError("kernel pieces need a phi_product phase (explicit fibration chart)")
    T._validate_operator()


def _default_decomposition(T, j):
    r = T.phase.r
    if T.symbol.support is None:
        raise ValueError("kernel pieces need a symbol with a bounded x-support")
    return build_second_decomposition(j, r, T.symbol.support[:r])


def _piece_weight(sd, nu, j):
    r = sd.r

    def weight(e, y):
        return sd.chi(nu, e[..., :r]) * lp_piece(j, y)

    return weight


def _piece_nodes(sd, nu):
    r = sd.r

    def keep(nodes):
        return sd.chi(nu, nodes[:, :r]) > 0

    return keep


def kernel_piece(T: FourierIntegralOperator, j: int, nu, x, y, sd: SecondDecomposition = None, refine: int = 1):
    """``K^nu_j(x, y)``: conjugated kernel with ``chi^nu_j(eta[:r]) psi_j(y)`` inserted.

    ``nu = None`` drops the second cutoff and gives the dyadic kernel ``K_j``.
    """
    _require_product(T)
    if nu is None:
        return _kernel_sum(T, x, y, weight=lambda e, yy: lp_piece(j, yy), refine=refine)
    sd = sd or _default_decomposition(T, j)
    return _kernel_sum(T, x, y, weight=_piece_weight(sd, nu, j), refine=refine, node_filter=_piece_nodes(sd, nu))


def _annulus_samples(j, d, radial=12, angular=8):
    lo, hi = 2.0 ** (j - 1), 2.0 ** (j + 1)
    radii = np.linspace(lo, hi, radial + 2)[1:-1]
    if d == 1:
        return np.concatenate([radii, -radii])[:, None]
    ang = np.linspace(0, 2 * np.pi, angular, endpoint=False)
    return np.array([[rr * np.cos(a), rr * np.sin(a)] for rr in radii for a in ang])


def _annulus_grid(T, j):
    pts = T.grid.dual_points().reshape(-1, T.grid.d)
    return pts[lp_piece(j, pts) > 0]


def schur_bounds(
    T: FourierIntegralOperator, j: int, nu: int, sd: SecondDecomposition = None, y_samples=None, edge_tol=1e-3, columns=True
):
    """Schur integrals ``(max_y int |K| dx, max_x int |K| dy)`` for one kernel piece.

    The ``x`` integral runs over the whole dual grid (one FFT per ``y``) and is
    rejected when more than ``edge_tol`` of the mass sits in the outer 5% of
    the window. The ``y`` integral runs over the dual-grid points of the
    ``psi_j`` annulus, at the ``x`` locations where each ``K(., y)`` peaks;
    ``columns=False`` skips it and returns ``nan`` in its place.
    """
    _require_product(T)
    sd = sd or _default_decomposition(T, j)
    g = T.grid
    weight = _piece_weight(sd, nu, j)
    ys = _annulus_samples(j, g.d) if y_samples is None else np.asarray(y_samples, dtype=float).reshape(-1, g.d)
    dual = g.dual_points().reshape(-1, g.d)
    row, peaks = 0.0, []
    for y in ys:
        K = conjugated_kernel_slice(T, y, weight=weight).values
        a = np.abs(K)
        if a.max() == 0:
            continue
        if boundary_mass(a) > edge_tol:
            raise ValueError(f"x-window too small for j={j}: kernel mass at the edge exceeds {edge_tol}")
        row = max(row, float(a.sum()) * g.deta**g.d)
        peaks.append(dual[np.argmax(a.ravel())])
    if not peaks:
        return 0.0, 0.0
    if not columns:
        return row, math.nan
    yy = _annulus_grid(T, j)
    col = 0.0
    for x in peaks:
        vals = _kernel_sum(T, x[None, :], yy, weight=weight, node_filter=_piece_nodes(sd, nu))
        col = max(col, float(np.abs(vals).sum()) * g.deta**g.d)
    return row, col


# -- Taylor remainder and appendix probes ---------------------------------------
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def taylor_remainder(phase, eta, eta0, y, box=None):
    """Integral-form second-order remainder of ``Phi(., y)`` at ``eta0``.

    ``int_0^1 (1 - t) d^2_1 Phi(eta0 + t (eta - eta0), y)[dh, dh] dt`` with
    ``dh = eta - eta0``, by 32-point Gauss-Legendre on panels in ``t`` (split
    where the segment crosses the edge of the curved region, and at most 1/16
    long in the curved coordinates); ``d^2_1`` is the Hessian in the first slot. Then
    ``Phi(eta, y) = Phi(eta0, y) + grad_1 Phi(eta0, y).dh + remainder``.
    """
    eta = np.asarray(eta, dtype=float)
    eta0 = np.asarray(eta0, dtype=float)
    y = np.asarray(y, dtype=float)
    if box is not None:
        box = np.asarray(box, dtype=float).reshape(phase.d, 2)
        for end in (eta, eta0):
            if np.any(end < box[:, 0]) or np.any(end > box[:, 1]):
                raise ValueError("Taylor segment leaves the phase domain")
    dh = eta - eta0
    eta0, dh, y = np.broadcast_arrays(eta0, dh, y)
    flat0, flatd, flaty = (a.reshape(-1, phase.d) for a in (eta0, dh, y))
    out = np.empty(len(flat0))
    for i, (e0, h, yy) in enumerate(zip(flat0, flatd, flaty)):
        out[i] = _remainder_1(phase, e0, h, yy)
    return out.reshape(eta0.shape[:-1]) if eta0.ndim > 1 else out[0]


def _panels(phase, e0, h):
    # split [0, 1] where a curved coordinate crosses +-1 (edges of the bump)
    cuts = {0.0, 1.0}
    for k in range(phase.r if phase.kind == "phi_product" else 0):
        if h[k] != 0:
            for edge in (-1.0, 1.0):
                t = (edge - e0[k]) / h[k]
                if 0.0 < t < 1.0:
                    cuts.add(float(t))
    return sorted(cuts)


def _remainder_1(phase, e0, h, y):
    cuts = _panels(phase, e0, h)
    # sub-panels of length <= 1/16 in the curved coordinates; one for short segments
    span = float(np.abs(h).max())
    fine = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, math.ceil(16.0 * span * (b - a)))
        fine.extend(np.linspace(a, b, m + 1)[:-1].tolist())
    fine.append(1.0)
    total = 0.0
    for a, b in zip(fine[:-1], fine[1:]):
        t = a + (b - a) * 0.5 * (_GL_NODES + 1.0)
        w = (b - a) * 0.5 * _GL_WEIGHTS
        H = phase.hess_x(e0 + t[:, None] * h, np.broadcast_to(y, (len(t), phase.d)))
        quad = np.einsum("i,tij,j->t", h, H, h)
        total += float(np.sum((1.0 - t) * w * quad))
    return total


def appendix_scaling_probe(T: FourierIntegralOperator, j: int, nu: int, sd: SecondDecomposition = None, n_u=401, radial=16, angular=8):
    """``(sup |(eta - eta_nu)'|, sup |R^nu_j|)`` over ``supp chi^nu_j x supp psi_j``.

    ``'`` denotes the first ``r`` (transverse) coordinates; the fibration
    directions are set to zero since the remainder does not depend on them.
    """
    _require_product(T)
    sd = sd or _default_decomposition(T, j)
    r, d = sd.r, T.grid.d
    c = sd.centers[nu]
    reach = sd.C1 * sd.spacing
    axes = [np.linspace(ci - reach, ci + reach, n_u if r == 1 else max(41, n_u // 8)) for ci in c]
    mesh = np.meshgrid(*axes, indexing="ij")
    u = np.stack([m.ravel() for m in mesh], axis=-1)
    u = u[sd.chi(nu, u) > 0]
    if len(u) == 0:
        return 0.0, 0.0
    eta_prime = float(np.linalg.norm(u - c, axis=-1).max())
    eta = np.zeros((len(u), d))
    eta[:, :r] = u
    eta0 = np.zeros(d)
    eta0[:r] = c
    ys = _annulus_samples(j, d, radial=radial, angular=angular)
    ys = ys[lp_piece(j, ys) > 0]
    rem = 0.0
    for y in ys:
        R = taylor_remainder(T.phase, eta, np.broadcast_to(eta0, eta.shape), np.broadcast_to(y, eta.shape))
        rem = max(rem, float(np.abs(R).max()))
    return eta_prime, rem
