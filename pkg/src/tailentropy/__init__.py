"""Entropy index of upper-quantile interdependence.

Shannon/Tsallis entropies of joint exceedance indicators, copula samplers,
marginal GARCH filtering, Monte Carlo envelopes and extremal-coefficient
diagnostics.
"""
from tailentropy.errors import NumericalError, ValidationError
from tailentropy.pseudo_obs import (
    PseudoSample,
    RawSample,
    select_components,
    to_pseudo_observations,
)
from tailentropy.copula_sim import (
    Comonotone,
    Gaussian,
    GaussianMixture,
    Gumbel,
    Independence,
    SimBatch,
    Student,
    cdf,
    sample,
)
from tailentropy.entropy_index import (
    CellDistribution,
    IndexCurve,
    cell_distribution_empirical,
    cell_distribution_exact,
    index_curve,
    index_shannon,
    index_tsallis,
    shannon_entropy,
    threshold_grid,
    tsallis_entropy,
)
from tailentropy.extremal import (
    ExtremalCoefficient,
    convergence_report,
    sandwich_bounds,
    theta_empirical,
    theta_gumbel,
    theta_student,
)
from tailentropy.model_fit import (
    FittedCopula,
    GarchFit,
    fit_garch11,
    fit_gaussian_copula,
    fit_gaussian_mixture,
    fit_student_copula,
    log_returns,
)
from tailentropy.mc_envelope import EnvelopeBand, band_exceedance_report, envelope

__version__ = "0.1.0"
