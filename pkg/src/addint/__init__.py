"""addint: additive interaction tests for case-control studies.

Exposure-model test statistics for additive gene-environment interaction,
with and without the assumption that the two exposures are independent,
their closed-form / sandwich / bootstrap variance engines, a prospective
excess-risk comparator, and a Monte Carlo harness for type-1-error and
power experiments.
"""

__version__ = "0.1.0"

from ._kernels import ACTIVE_LANE
from .datasets import (
    Dataset,
    DatasetSummary,
    ExposureKind,
    Schema,
    load_dataset,
    make_dataset,
    parse_schema_file,
    summarize,
    write_dataset,
)
from .errors import (
    AddintError,
    BootstrapFailureError,
    ConfigurationError,
    DegenerateNuisanceError,
    DegenerateVarianceError,
    DivergenceError,
    EmptyDataError,
    InfeasibleReriError,
    ScenarioError,
    SchemaError,
    SingularDesignError,
    UnsupportedCombinationError,
    ValidationError,
)
from .glm import GlmFit, GlmSpec, fit_glm, log_likelihood, predict_mean
from .nuisance import (
    ModelPlan,
    NuisanceModels,
    OmegaEstimate,
    baseline_mean,
    estimate_omega,
    fit_nuisance,
)
from .pipeline import compute_variance, run_interaction_test
from .population import (
    DiscretePopulation,
    brute_force_expectation,
    case_expectation,
    independent_binary_population,
    prevalence,
)
from .reri import ReriResult, reri_test
from .simulate import (
    FailureReport,
    PowerRow,
    PowerTable,
    Scenario,
    alpha3_from_reri,
    generate_case_control,
    load_grid,
    reri_from_alphas,
    run_power_experiment,
    run_reri_failure_experiment,
    stream,
    table1_grid,
)
from .ustats import (
    GFunction,
    TestResult,
    UVector,
    compute_u,
    make_theta_evaluator,
    noncentrality_kappa,
    scaled_beta3,
    standardized_test,
)
from .variance import (
    BootstrapResult,
    VarianceDecomposition,
    binary_moment_jacobian,
    bootstrap,
    closed_form_binary_variance,
    numeric_jacobian,
    sandwich_variance,
)

__all__ = [name for name in dir() if not name.startswith("_")]
