"""Constant-conditional-correlation asymmetric power GARCH toolkit.

Simulation, strict-stationarity diagnostics, Gaussian quasi-maximum
likelihood estimation (with known or estimated power vectors), sandwich
covariances, Wald tests, and a Monte Carlo replication harness.
"""

from .errors import (
    AllStartsInvalid,
    CccApgarchError,
    ExplosivePath,
    GradientAtInvalidPoint,
    IllConditionedJ,
    InvalidSpecError,
    NonInvertibleBPolynomial,
    NonPositiveDefiniteCorrelation,
    NonPositivePrice,
    NotEnoughData,
    ParseError,
    RankDeficientConstraints,
    SingularConstraintCovariance,
    StationarityVeto,
    UnsupportedOrder,
)
from .estimate import FitOptions, FitResult, default_bounds, fit_qmle
from .inference import (
    SandwichCovariance,
    WaldOutcome,
    chi2_upper_tail,
    hessian,
    sandwich,
    score_outer,
    wald_test,
)
from .likelihood import ObjectiveValue, QuasiLikelihood, loglik_gradient, neg_quasi_loglik
from .montecarlo import (
    McDesign,
    McSummary,
    WaldDesign,
    emit_boxplot_data,
    rejection_frequency,
    run_design,
)
from .params import (
    DeltaEstimated,
    DeltaKnown,
    ModelOrders,
    ModelSpec,
    ParamVector,
    load_spec,
    pack,
    param_count,
    param_names,
    save_spec,
    spec_from_config,
    spec_to_config,
    unpack,
    validate,
)
from .simulate import SimulationOutput, correlation_factor, simulate
from .stationarity import (
    CompanionMatrix,
    LyapunovEstimate,
    companion,
    estimate_lyapunov,
    spectral_radius_b,
    upsilon,
)
from .volatility import (
    SAMPLE_MEAN,
    ZERO_OMEGA,
    InitPolicy,
    PowerSplit,
    VolatilityPath,
    arch_infinity_weights,
    check_identifiability,
    power_split,
    presample_init,
    recursion,
)

__version__ = "0.1.0"
