"""Direct-quadrature application of Fourier integral operators.

``Tf(x) = int exp(2 pi i Phi(x, eta)) sigma(x, eta) f_hat(eta) d eta`` is evaluated as
a Riemann sum over the dual grid. Spectral samples of ``f_hat`` that are exactly
zero (or below ``drop_tol`` relative to the maximum) are skipped, and output
points outside the symbol's x-support are left at zero; otherwise the sum is
dense, ``O(n^d * nnz)``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._smooth import radial_cutoff
from ._validation import check_samples
from .phase import PhaseSpec, SymbolSpec
from .spectral import (
    Grid,
    SampledFunction,
    SpectralFunction,
    check_boundary,
    flp_norm,
    forward_ft,
)

__all__ = [
    "MAX_N",
    "FourierIntegralOperator",
    "apply",
    "apply_dyadic_piece",
    "conjugated_kernel",
    "conjugated_kernel_slice",
    "empirical_operator_ratio",
    "split_low_high",
]

# desk-scale caps on points per axis
MAX_N = {1: 2**15, 2: 2**11}


class FourierIntegralOperator(TransformerMixin, BaseEstimator):
    """Fourier integral operator on a fixed grid, usable as a scikit-learn transformer.

    Parameters
    ----------
    phase : PhaseSpec
    symbol : SymbolSpec
    grid : Grid
        ``transform`` accepts rows of ``grid.size`` complex samples.
    drop_tol : float
        Spectral samples with ``|f_hat| <= drop_tol * max |f_hat|`` are skipped.
    chunk_elements : int
        Size cap of the (points x frequencies) block evaluated at once.
    n_jobs : int or None
        Threads used over output chunks; results do not depend on it.

    Examples
    --------
    >>> grid = Grid(1, 256, 8.0)
    >>> T = FourierIntegralOperator(PhaseSpec.linear(1), SymbolSpec.bracket(1), grid).fit()
    """

    def __init__(self, phase=None, symbol=None, grid=None, drop_tol=1e-14, chunk_elements=2**22, n_jobs=None):
        self.phase = phase
        self.symbol = symbol
        self.grid = grid
        self.drop_tol = drop_tol
        self.chunk_elements = chunk_elements
        self.n_jobs = n_jobs

    def _validate_operator(self):
        phase, symbol, grid = self.phase, self.symbol, self.grid
        if not isinstance(phase, PhaseSpec) or not isinstance(symbol, SymbolSpec) or not isinstance(grid, Grid):
            raise TypeError("phase, symbol and grid must be PhaseSpec, SymbolSpec and Grid instances")
        if not phase.d == symbol.d == grid.d:
            raise ValueError(f"dimension mismatch: phase {phase.d}, symbol {symbol.d}, grid {grid.d}")
        if grid.n > MAX_N[grid.d]:
            raise ValueError(f"n={grid.n} exceeds the desk-scale cap {MAX_N[grid.d]} for d={grid.d}")
        if symbol.support is not None:
            margin = 2 * grid.dx
            lo, hi = -grid.L + margin, grid.L - margin
            if np.any(symbol.support[:, 0] < lo) or np.any(symbol.support[:, 1] > hi):
                raise ValueError("symbol x-support must lie inside the grid box with a margin of 2 dx")
        if phase.kind == "x_linear_radial" and not symbol.frequency_floor:
            raise ValueError("phases nonlinear in eta need a symbol with frequency_floor set")

    def fit(self, X=None, y=None):
        """Validate the operator; ``X`` is only checked for width."""
        self._validate_operator()
        if X is not None:
            check_samples(X, self.grid.size)
        self.n_features_in_ = self.grid.size
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_samples(X, self.grid.size)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = self.apply(SampledFunction(self.grid, row)).values.ravel()
        return out

    # -- core -------------------------------------------------------------
    def apply(self, f: SampledFunction) -> SampledFunction:
        """``Tf`` sampled on the grid."""
        self._check_input(f)
        return SampledFunction(self.grid, self._sum_spectrum(forward_ft(f).values))

    def _check_input(self, f):
        self._validate_operator()
        if not isinstance(f, SampledFunction):
            raise TypeError("expected a SampledFunction")
        if f.grid != self.grid:
            raise ValueError(f"grid mismatch: operator on {self.grid}, input on {f.grid}")

    def _sum_spectrum(self, F):
        grid, d = self.grid, self.grid.d
        F = np.asarray(F).ravel()
        out = np.zeros(grid.size, dtype=complex)
        peak = np.abs(F).max() if F.size else 0.0
        if peak == 0:
            return out.reshape(grid.shape)
        keep = np.abs(F) > self.drop_tol * peak
        eta = grid.dual_points().reshape(-1, d)[keep]
        weights = F[keep] * grid.deta**d
        xs = grid.points().reshape(-1, d)
        rows = np.flatnonzero(self.symbol.spatial_mask(xs))
        step = max(1, self.chunk_elements // max(1, len(eta)))
        blocks = [rows[s : s + step] for s in range(0, len(rows), step)]
        eta_b = eta[None, :, :]

        def work(idx):
            xc = xs[idx][:, None, :]
            kern = np.exp(2j * np.pi * self.phase.value(xc, eta_b)) * self.symbol(xc, eta_b)
            return idx, kern @ weights

        if self.n_jobs and self.n_jobs > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                results = list(pool.map(work, blocks))
        else:
            results = map(work, blocks)
        for idx, vals in results:
            out[idx] = vals
        return out.reshape(grid.shape)


def _as_operator(T):
    if not isinstance(T, FourierIntegralOperator):
        raise TypeError("expected a FourierIntegralOperator")
    return T


def apply(T: FourierIntegralOperator, f: SampledFunction) -> SampledFunction:
    return _as_operator(T).apply(f)


def apply_dyadic_piece(T: FourierIntegralOperator, j: int, f: SampledFunction) -> SampledFunction:
    """``T_j f``: the operator with symbol ``sigma(x, eta) psi_j(eta)``."""
    from .decomp import lp_piece

    T = _as_operator(T)
    T._check_input(f)
    if j < 1 or 2.0 ** (j + 1) > T.grid.eta_max:
        raise ValueError(f"dyadic level j={j} is not resolvable on a dual grid of radius {T.grid.eta_max}")
    F = forward_ft(f)
    psi = lp_piece(j, F.grid.dual_points())
    return SampledFunction(T.grid, T._sum_spectrum(F.values * psi))


def split_low_high(symbol: SymbolSpec):
    """Split ``sigma`` into a part supported in ``|eta| <= 4`` and one vanishing for ``|eta| <= 2``."""

    def low_factor(eta):
        return radial_cutoff(np.linalg.norm(eta, axis=-1) / 2.0)

    def high_factor(eta):
        return 1.0 - low_factor(eta)

    return (
        symbol.times_frequency(low_factor, name=f"{symbol.name}[low]"),
        symbol.times_frequency(high_factor, name=f"{symbol.name}[high]"),
    )


def _eta_nodes(T, refine=1):
    """Quadrature nodes and weight for the compact first slot of the conjugated kernel."""
    g = T.grid if refine == 1 else Grid(T.grid.d, T.grid.n * refine, T.grid.L)
    pts = g.points().reshape(-1, g.d)
    pts = pts[T.symbol.spatial_mask(pts)]
    return pts, g.dx**g.d


def _kernel_sum(T, x, y, weight=None, refine=1, chunk_elements=2**22, node_filter=None):
    # Riemann sum over the first slot of exp(2 pi i (Phi(eta, y) - x.eta)) sigma(eta, y) [* weight(eta, y)]
    d = T.grid.d
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    shape = np.broadcast_shapes(x.shape[:-1], y.shape[:-1])
    xb = np.broadcast_to(x, shape + (d,)).reshape(-1, d)
    yb = np.broadcast_to(y, shape + (d,)).reshape(-1, d)
    nodes, w = _eta_nodes(T, refine)
    if node_filter is not None:
        nodes = nodes[node_filter(nodes)]
    out = np.zeros(len(xb), dtype=complex)
    if len(nodes) == 0:
        return out.reshape(shape)
    step = max(1, chunk_elements // len(nodes))
    e = nodes[None, :, :]
    for s in range(0, len(xb), step):
        xc = xb[s : s + step, None, :]
        yc = yb[s : s + step, None, :]
        amp = T.symbol(e, yc)
        if weight is not None:
            amp = amp * weight(e, yc)
        phase = T.phase.value(e, yc) - np.sum(xc * e, axis=-1)
        out[s : s + step] = np.sum(np.exp(2j * np.pi * phase) * amp, axis=-1) * w
    return out.reshape(shape)


def conjugated_kernel(T: FourierIntegralOperator, x, y, refine: int = 1):
    """Kernel ``K(x, y)`` of ``F T F^{-1}`` with the phase evaluated as ``Phi(eta, y)``.

    The integration variable runs over the physical grid (restricted to the
    symbol's x-support); ``refine`` multiplies the number of nodes.
    """
    T._validate_operator()
    return _kernel_sum(_as_operator(T), x, y, refine=refine)


def conjugated_kernel_slice(T: FourierIntegralOperator, y, weight=None) -> SpectralFunction:
    """``x -> K(x, y)`` on the whole dual grid for one frequency point ``y``.

    Same Riemann sum as :func:`conjugated_kernel`, computed with one FFT.
    """
    g = T.grid
    y = np.asarray(y, dtype=float).reshape(1, g.d)
    e = g.points()
    vals = np.exp(2j * np.pi * T.phase.value(e, y)) * T.symbol(e, y)
    if weight is not None:
        vals = vals * weight(e, y)
    return forward_ft(SampledFunction(g, vals))


def empirical_operator_ratio(
    T: FourierIntegralOperator, f: SampledFunction, p: float, s_in: float = 0.0, deterministic: bool = True
) -> float:
    """``||Tf||_{FL^p} / ||f||_{FL^p_{s_in}}`` for one input."""
    denom = flp_norm(forward_ft(f), p, s_in, deterministic)
    if denom == 0:
        raise ValueError("input has zero Fourier-Lebesgue norm")
    out = forward_ft(apply(T, f))
    check_boundary(out, label="spectrum of Tf")
    return flp_norm(out, p, 0.0, deterministic) / denom
