"""Numerical laboratory for distribution-dependent backward equations driven
by Gaussian processes, solved through the variance-clock transfer to an
auxiliary Brownian problem."""

__version__ = "0.1.0"

from .drivers import (
    GaussianDriverSpec,
    PathBatch,
    VarianceClock,
    build_clock,
    covariance,
    covariance_matrix,
    sample_paths,
)
from .measures import (
    EmpiricalMeasure,
    GaussianLaw1D,
    LawFeatures,
    LawFunctional,
    entropy_functional,
    gaussian_kl,
    gaussian_w2,
    lions_directional_check,
    wasserstein_1d,
)
from .scenario import (
    GeneratorSpec,
    ScenarioSpec,
    TerminalSpec,
    eval_generator,
    eval_terminal,
    generator_order_probe,
    law_features,
    lipschitz_audit,
    terminal_order_probe,
)
from .solver import (
    ParticleCloud,
    SolutionField,
    SolverConfig,
    regress_conditional,
    representation_solve,
    solve_auxiliary,
    transfer_evaluate,
)
from .theorems import (
    InequalityConstants,
    TheoremReport,
    comparison_check,
    converse_comparison_check,
    lsi_check,
    representation_limit_check,
    stability_check,
    t2_check,
    transport_constants,
    z_bound_check,
)
from .wick import (
    FirstChaosIntegrand,
    StepFunctionH,
    bsde_residual,
    riemann_wick_integral,
    s_transform_factorization_check,
    s_transform_mc,
    wick_product_first_chaos,
)

__all__ = [name for name in dir() if not name.startswith("_")]
