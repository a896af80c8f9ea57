import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from fiolab import (
    DyadicBandFilter,
    FourierIntegralOperator,
    Grid,
    PhaseSpec,
    SampledFunction,
    SymbolSpec,
    appendix_scaling_probe,
    band_cutoff,
    build_lp,
    build_second_decomposition,
    kernel_piece,
    lp_piece,
    schur_bounds,
    taylor_remainder,
)

from oracles import LP_VALUES, TAYLOR_VALUES


# -- Littlewood-Paley ------------------------------------------------------------
@pytest.mark.parametrize("j,y,expected", LP_VALUES)
def test_lp_piece_oracle(j, y, expected):
    assert lp_piece(j, np.array([y])) == pytest.approx(expected, rel=1e-14)
    assert lp_piece(j, np.array([[-y]]))[0] == pytest.approx(expected, rel=1e-14)
    assert lp_piece(j, np.array([0.6 * y, 0.8 * y])) == pytest.approx(expected, rel=1e-14)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 10), st.floats(0, 1.0))
def test_partition_of_unity_property(J, frac):
    y = frac * 2.0**J
    total = sum(lp_piece(j, y) for j in range(J + 1))
    assert abs(total - 1.0) < 1e-12
    nonzero = sum(1 for j in range(J + 1) if lp_piece(j, y) > 0)
    assert nonzero <= 2


def test_annulus_supports():
    r = np.linspace(0, 1100, 220001)[:, None]
    for j in range(1, 9):
        v = lp_piece(j, r)
        on = r[v > 0]
        assert on.min() > 2.0 ** (j - 1) and on.max() < 2.0 ** (j + 1)
        assert np.all(v >= 0) and np.all(v <= 1)
    assert r[lp_piece(0, r) > 0].max() < 2.0


def test_band_cutoff_is_one_on_the_annulus():
    r = np.linspace(0, 600, 60001)[:, None]
    for j in range(2, 7):
        chi, psi = band_cutoff(j, r), lp_piece(j, r)
        assert np.all(chi[psi > 0] == 1.0)
        off = (r[:, 0] <= 2.0 ** (j - 2)) | (r[:, 0] >= 2.0 ** (j + 2))
        assert np.all(chi[off] == 0.0)


def test_build_lp_limits():
    g = Grid(1, 1024, 2.0)  # eta_max = 128
    lp = build_lp(6, g)
    assert lp.support(0) == (0.0, 2.0) and lp.support(6) == (32.0, 128.0)
    assert lp.pieces(g.dual_points()).shape == (7, g.n)
    with pytest.raises(ValueError):
        build_lp(7, g)
    with pytest.raises(ValueError):
        lp.piece(8, g.dual_points())


def test_dyadic_filters_resum(rng):
    g = Grid(1, 1024, 2.0)
    f = SampledFunction(g, rng.normal(size=g.n))
    filters = [DyadicBandFilter(j, g).fit() for j in range(7)]
    total = sum(flt.filter(f).values for flt in filters)
    # the pieces up to J=6 resum to psi_0(2^-6 D), a multiplier on the spectrum
    F = np.fft.fft(np.fft.ifftshift(f.values))
    G = np.fft.fft(np.fft.ifftshift(total))
    eta = np.fft.ifftshift(g.dual_axis())
    inside = np.abs(eta) <= 64
    assert np.abs(G[inside] - F[inside]).max() < 1e-10 * np.abs(F).max()
    X = np.stack([f.values, 2 * f.values])
    out = clone(filters[3]).fit(X).transform(X)
    assert np.allclose(out[1], 2 * out[0])


# -- second decomposition --------------------------------------------------------
def lattice_count(half, j):
    # integers k with |k| 2^{-j/2} < half
    q = half * 2.0 ** (j / 2.0)
    return 2 * math.ceil(q) - 1


@pytest.mark.parametrize("j", range(4, 9))
def test_second_decomposition_census(j):
    sd = build_second_decomposition(j, 1, 1.0)
    h = 2.0 ** (-j / 2.0)
    assert sd.count == lattice_count(1.0, j)
    assert sd.spacing == pytest.approx(h)
    assert sd.min_separation() >= sd.C0 * h * (1 - 1e-12)
    assert sd.covering_radius() <= sd.C1 * h
    u = sd.scan_points(20)
    assert np.abs(sd.partition_sum(u) - 1.0).max() < 1e-12
    for nu in (0, sd.count // 2, sd.count - 1):
        on = u[sd.chi(nu, u) > 0]
        assert np.linalg.norm(on - sd.centers[nu], axis=-1).max() < sd.C1 * h


def test_second_decomposition_2d():
    sd = build_second_decomposition(4, 2, [(-1.0, 1.0), (-0.5, 0.5)])
    assert sd.count == lattice_count(1.0, 4) * lattice_count(0.5, 4)
    u = sd.scan_points(6)
    assert np.abs(sd.partition_sum(u) - 1.0).max() < 1e-12
    assert sd.covering_radius(6) <= sd.C1 * sd.spacing
    assert sd.gradient_sup(per_cell=30) > 0
    np.testing.assert_allclose(sd.chi_all(u)[5], sd.chi(5, u), atol=1e-15)


def test_second_decomposition_guards():
    with pytest.raises(ValueError):
        build_second_decomposition(0, 1)
    with pytest.raises(ValueError):
        build_second_decomposition(4, 3)
    with pytest.raises(ValueError):
        build_second_decomposition(4, 1, [(1.0, -1.0)])


def test_cutoff_gradient_scaling():
    scaled = [build_second_decomposition(j, 1, 1.0).gradient_sup() / 2.0 ** (j / 2.0) for j in range(4, 9)]
    assert max(scaled) / min(scaled) <= 1.01


# -- Taylor remainder ------------------------------------------------------------
@pytest.mark.parametrize("eta,eta0,y,expected", TAYLOR_VALUES)
def test_taylor_remainder_oracle(eta, eta0, y, expected):
    phase = PhaseSpec.phi_product(1, 1)
    R = taylor_remainder(phase, np.array([eta]), np.array([eta0]), np.array([y]))
    assert R == pytest.approx(expected, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(-1.5, 1.5), st.floats(0.5, 60), st.floats(0, 6.28))
def test_taylor_identity_property(a1, a2, b1, b2, rad, ang):
    phase = PhaseSpec.phi_product(2, 2, c=0.3)
    eta, eta0 = np.array([a1, a2]), np.array([b1, b2])
    y = rad * np.array([math.cos(ang), math.sin(ang)])
    R = taylor_remainder(phase, eta, eta0, y)
    lin = phase.value(eta0, y) + phase.grad_x(eta0, y) @ (eta - eta0)
    assert phase.value(eta, y) == pytest.approx(lin + R, abs=1e-9 * (1 + rad))


def test_taylor_remainder_domain_check():
    phase = PhaseSpec.phi_product(1, 1)
    with pytest.raises(ValueError):
        taylor_remainder(phase, np.array([3.0]), np.array([0.0]), np.array([5.0]), box=[(-2.0, 2.0)])


# -- kernel pieces ---------------------------------------------------------------
@pytest.fixture(scope="module")
def op1():
    g = Grid(1, 4096, 4.0)
    return FourierIntegralOperator(PhaseSpec.phi_product(1, 1), SymbolSpec.classical(1, -0.5), g).fit()


def test_kernel_pieces_resum(op1):
    j = 5
    sd = build_second_decomposition(j, 1, op1.symbol.support[:1])
    x = np.array([[-3.0], [0.5], [24.0], [40.0]])
    y = np.array([[33.0]])
    whole = kernel_piece(op1, j, None, x, y)
    parts = sum(kernel_piece(op1, j, nu, x, y, sd) for nu in range(sd.count))
    assert np.abs(parts - whole).max() < 1e-12


def test_schur_bounds_are_finite_and_positive(op1):
    sd = build_second_decomposition(5, 1, op1.symbol.support[:1])
    row, col = schur_bounds(op1, 5, sd.count // 2, sd)
    assert 0 < row < 10 and 0 < col < 10


def test_schur_rejects_small_window():
    g = Grid(1, 256, 4.0)
    T = FourierIntegralOperator(PhaseSpec.phi_product(1, 1), SymbolSpec.classical(1, 0.0), g).fit()
    sd = build_second_decomposition(4, 1, T.symbol.support[:1])
    with pytest.raises(ValueError, match="x-window"):
        schur_bounds(T, 4, sd.count // 2, sd, y_samples=[[31.0]])


def test_kernel_pieces_need_product_phase(grid1):
    T = FourierIntegralOperator(PhaseSpec.linear(1), SymbolSpec.classical(1), grid1).fit()
    with pytest.raises(ValueError):
        kernel_piece(T, 3, 0, [[0.0]], [[5.0]])


def test_appendix_probe(op1):
    j = 6
    sd = build_second_decomposition(j, 1, op1.symbol.support[:1])
    spread, rem = appendix_scaling_probe(op1, j, sd.count // 2, sd)
    assert spread <= sd.C1 * sd.spacing
    assert 0 < rem < 1


def test_schur_rows_only(op1):
    sd = build_second_decomposition(5, 1, op1.symbol.support[:1])
    row, col = schur_bounds(op1, 5, sd.count // 2, sd, columns=False)
    assert row == pytest.approx(schur_bounds(op1, 5, sd.count // 2, sd)[0])
    assert math.isnan(col)
