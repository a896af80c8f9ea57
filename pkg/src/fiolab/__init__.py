"""Fourier integral operators on Fourier-Lebesgue spaces: grids, phases, decompositions and scaling experiments."""

from .decomp import (
    DyadicBandFilter,
    LittlewoodPaley,
    SecondDecomposition,
    appendix_scaling_probe,
    band_cutoff,
    build_lp,
    build_second_decomposition,
    kernel_piece,
    lp_piece,
    schur_bounds,
    taylor_remainder,
)
from .experiment import (
    ExperimentReport,
    TestFamily,
    band_commutation,
    band_matrix,
    band_probes,
    band_width,
    fit_slope,
    run_r0_control,
    run_sharpness,
    threshold,
)
from .fio import (
    FourierIntegralOperator,
    apply,
    apply_dyadic_piece,
    conjugated_kernel,
    conjugated_kernel_slice,
    empirical_operator_ratio,
    split_low_high,
)
from .phase import (
    DiffeoSpec,
    FibrationDescription,
    PhaseSpec,
    SymbolSpec,
    check_homogeneity,
    check_nondegeneracy,
    check_symbol_order,
    euler_gradient_equivalence,
    fibration_data,
    hessian_x_rank,
)
from .spectral import (
    BoundaryMassWarning,
    Grid,
    SampledFunction,
    SpectralFunction,
    bessel_bracket,
    flp_norm,
    forward_ft,
    inverse_ft,
    l2_grid_norm,
    spectral_multiplier,
)

__version__ = "0.1.0"
