"""Multiscale butterfly evaluation of discrete oscillatory-kernel sums.

The package applies operators of the form

    (Lf)(x) = sum_xi a(x, xi) e^{2 pi i Phi(x, xi)} f_hat(xi)

over the centered frequency lattice in quasi-linear time, by splitting
the lattice into dyadic shells and running a level-balanced butterfly
traversal on each.  See FioPlan / FioOperator for the main entry
points, and the `msbutterfly` console script for the benchmark harness.
"""

from .butterfly import LayerStats, apply_corona, corona_context
from .geometry import (
    CoronaDecomposition,
    FrequencyGrid,
    SpatialGrid,
    build_corona_decomposition,
    corona_bounding_tree,
    level_schedule,
)
from .kernels import (
    AmplitudeFactorization,
    Scenario,
    bessel_j0,
    bessel_y0,
    factorize_amplitude,
    get_scenario,
)
from .multiscale import FioOperator, FioPlan, apply_fio, dft_forward, direct_center
from .oracle import (
    direct_apply_sampled,
    full_direct_apply,
    sample_spatial_points,
    sampled_relative_error,
)

__version__ = "0.1.0"

__all__ = [
    "AmplitudeFactorization",
    "CoronaDecomposition",
    "FioOperator",
    "FioPlan",
    "FrequencyGrid",
    "LayerStats",
    "Scenario",
    "SpatialGrid",
    "apply_corona",
    "apply_fio",
    "bessel_j0",
    "bessel_y0",
    "build_corona_decomposition",
    "corona_bounding_tree",
    "corona_context",
    "dft_forward",
    "direct_apply_sampled",
    "direct_center",
    "factorize_amplitude",
    "full_direct_apply",
    "get_scenario",
    "level_schedule",
    "sample_spatial_points",
    "sampled_relative_error",
    "__version__",
]
