"""Fock-space / Charlier-chaos calculus for Poisson processes on finite
ground spaces: difference operators, chaos expansions, multiple Wiener-Ito
integrals, Skorohod integrals, variance brackets, the time-marked covariance
identity, and a seeded Monte Carlo verification suite."""

from .charlier import (
    ExpectationResult,
    FiniteIntensity,
    TruncationPolicy,
    charlier,
    charlier_second_moment,
    descending_factorial,
    truncated_expectation,
)
from .chaos import (
    ChaosCoefficients,
    FockCovariance,
    chaos_coefficients,
    coefficient_by_orthogonality,
    fock_covariance,
    reconstruct,
    t_n,
)
from .bounds import (
    VarianceBracket,
    alternating_bracket,
    expected_sq_difference_norm,
    finite_chaos_order,
    truncated_bounds,
)
from .functional import (
    Counts,
    Functional,
    GrowthEnvelope,
    catalog,
    difference,
    iterated_difference,
    parse_functional,
)
from .mc import (
    IdentityCheck,
    LaplaceCheck,
    McEstimate,
    SampleBatch,
    laplace_check,
    mecke_check,
    mecke_multivariate_check,
    sample_poisson,
)
from .ordered_cov import (
    CovarianceIdentity,
    FkgCheck,
    TimeMarkedKernel,
    conditional_difference_mean,
    covariance_identity,
    fkg_check,
)
from .wiener_ito import (
    ChaosEvaluation,
    IsometryCheck,
    SumProductFunction,
    derivative_operator,
    factorial_moment,
    isometry_check,
    section_coefficients,
    skorohod_chaos,
    skorohod_pathwise,
    symmetrize,
    wiener_ito_pathwise,
)

__version__ = "0.1.0"
