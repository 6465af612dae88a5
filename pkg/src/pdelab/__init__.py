"""pdelab: a Monte Carlo and quadrature lab for prediction in spherical models.

Sampling, density evaluation, shrinkage prediction, Bayes predictive
densities for separable priors, posterior factorization, and risk
experiments for the location-scale model with spherically symmetric
errors.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .bayes import (
    PriorSpec,
    SeparableBayesPredictive,
    StudentFormPredictive,
    check_normalization,
    f_independence_check,
    numeric_predictive_logpdf,
    pi0a_params,
)
from .densities import (
    StudentParams,
    conditional_density,
    conditional_logpdf,
    mre_params,
    sample_student,
    student_logpdf,
    student_pdf,
)
from .model import (
    DiscreteMixtureRadial,
    ModelSpec,
    NormalRadial,
    NumericRadial,
    StudentMixtureRadial,
    Triples,
    joint_density,
    joint_logpdf,
    sample_mixing,
    sample_triples,
)
from .posterior import (
    PosteriorRep,
    brute_force_theta_marginal,
    build_posterior,
    factored_theta_marginal,
    posterior_expectation,
    scale_invariant_bayes_estimator,
)
from .rng import RngStream
from .risk import (
    RadialField,
    RiskPoint,
    RiskReport,
    SteinReport,
    kl_risk,
    point_estimation_risk_difference,
    point_prediction_risk,
    point_prediction_risk_difference,
    risk_difference,
    stein_identity_check,
)
from .shrinkage import (
    LossSpec,
    ShrinkageSpec,
    check_superharmonic_condition,
    default_tuning,
    dominance_tuning_bound,
    g_eval,
    plugin_density_params,
    rho_loss,
    theta_hat,
    transform_to_prediction_form,
)

__version__ = "0.1.0"
