"""Extrinsic upper bounds for Laplace eigenvalues of submanifolds.

Piecewise-linear surfaces and curves, their spectra, Monte Carlo
intersection indices, capacitor bounds, and rational curves in CP^N.
"""

from .capacitor import (
    CapacitorFamily,
    CoveringEstimate,
    ExplicitBound,
    build_capacitors,
    build_test_functions,
    capacitor_upper_bound,
    corollary_bound,
    covering_number,
)
from .cpn import (
    ConformalMetric,
    HolomorphicCurve,
    curve_area,
    curve_degree,
    curve_spectrum,
    fs_conformal_factor,
    make_curve,
)
from .geom import (
    ComplexError,
    ImmersedComplex,
    MetricMeasureSpace,
    Region,
    load_complex,
    make_shape,
    remove_region,
    riemannian_volume,
    to_mm_space,
)
from .grassmann import (
    GrassmannSample,
    IndexEstimate,
    IndexSampler,
    ball_growth_constant,
    crofton_constant,
    eps_index,
    fiber_index,
    local_index,
    mean_index,
    projected_volume,
    sample_haar,
    sup_index,
)
from .harness import (
    BoundReport,
    ExperimentConfig,
    cheng_yang_bound,
    run,
    universal_inequality_residual,
    verify_cpn,
    verify_euclidean,
)
from .spectrum import (
    DiscreteOperatorPair,
    SpectrumResult,
    assemble,
    closed_form_spectrum,
    mean_curvature_norms,
    rayleigh_quotient,
    solve_spectrum,
    spectrum_of,
)

__version__ = "0.1.0"

__all__ = [
    "CapacitorFamily",
    "CoveringEstimate",
    "ExplicitBound",
    "build_capacitors",
    "build_test_functions",
    "capacitor_upper_bound",
    "corollary_bound",
    "covering_number",
    "ConformalMetric",
    "HolomorphicCurve",
    "curve_area",
    "curve_degree",
    "curve_spectrum",
    "fs_conformal_factor",
    "make_curve",
    "ComplexError",
    "ImmersedComplex",
    "MetricMeasureSpace",
    "Region",
    "load_complex",
    "make_shape",
    "remove_region",
    "riemannian_volume",
    "to_mm_space",
    "GrassmannSample",
    "IndexEstimate",
    "IndexSampler",
    "ball_growth_constant",
    "crofton_constant",
    "eps_index",
    "fiber_index",
    "local_index",
    "mean_index",
    "projected_volume",
    "sample_haar",
    "sup_index",
    "BoundReport",
    "ExperimentConfig",
    "cheng_yang_bound",
    "run",
    "universal_inequality_residual",
    "verify_cpn",
    "verify_euclidean",
    "DiscreteOperatorPair",
    "SpectrumResult",
    "assemble",
    "closed_form_spectrum",
    "mean_curvature_norms",
    "rayleigh_quotient",
    "solve_spectrum",
    "spectrum_of",
]
