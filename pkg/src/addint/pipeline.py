"""End-to-end test runner: nuisance fits, contributions, variance, p-value.

Variance routing under ``variance="auto"``:

* independence assumed, binary exposures, no covariates, no weights ->
  closed form (v1 + v2);
* everything else -> sandwich.

The closed form can be requested explicitly for the no-independence
binary case; it is a submodel evaluation and is only honoured while the
estimated odds-ratio parameter stays near zero (|omega| <= 0.5), since its
moment brackets are evaluated without the exposure tilt. The sandwich has
no such restriction and is the default for the tilted statistic.
"""

from __future__ import annotations

from .datasets import Dataset
from .errors import ConfigurationError
from .nuisance import ModelPlan, fit_nuisance
from .ustats import GFunction, TestResult, compute_u, make_theta_evaluator, standardized_test
from .variance import (
    VarianceDecomposition,
    bootstrap,
    closed_form_binary_variance,
    numeric_jacobian,
    sandwich_variance,
)

OMEGA_CLOSED_FORM_LIMIT = 0.5


def _closed_form_applicable(ds: Dataset, nm) -> bool:
    return (
        ds.kind_a1.tag == "binary"
        and ds.kind_a2.tag == "binary"
        and len(nm.covariate_names) == 0
        and not ds.has_weights
    )


def compute_variance(ds: Dataset, nm, u, g: GFunction | None, method: str) -> VarianceDecomposition:
    """One variance decomposition by name ('auto', 'closed-form',
    'sandwich')."""
    if method == "auto":
        if nm.independence_assumed and _closed_form_applicable(ds, nm):
            return closed_form_binary_variance(ds, nm, independence=True)
        method = "sandwich"
    if method == "closed-form":
        if not _closed_form_applicable(ds, nm):
            raise ConfigurationError(
                "closed-form variance needs binary exposures, no covariates and no weights"
            )
        if not nm.independence_assumed and abs(nm.omega) > OMEGA_CLOSED_FORM_LIMIT:
            raise ConfigurationError(
                f"closed-form variance is a near-independence evaluation; "
                f"|omega| = {abs(nm.omega):.3f} > {OMEGA_CLOSED_FORM_LIMIT}; use the sandwich"
            )
        return closed_form_binary_variance(ds, nm, independence=nm.independence_assumed)
    if method == "sandwich":
        evaluator = make_theta_evaluator(ds, nm, g)
        jac = numeric_jacobian(evaluator, nm.theta)
        return sandwich_variance(u, nm, jac)
    raise ConfigurationError(f"unknown variance method {method!r}")


def run_interaction_test(
    ds: Dataset,
    plan: ModelPlan,
    g: GFunction | None = None,
    variance: str = "auto",
    bootstrap_replicates: int | None = None,
    seed: int = 0,
    bootstrap_stratified: bool = True,
    threads: int | None = None,
) -> TestResult:
    """Fit nuisances, compute contributions, estimate the variance and
    standardize. When bootstrap_replicates is set the whole recipe
    (nuisance refits included) is resampled and the percentile summary is
    attached; ``variance="bootstrap"`` additionally uses the resampling
    variance for the statistic itself."""
    if ds.n_cases == 0 or ds.n_controls == 0:
        raise ConfigurationError("testing requires at least one case and one control")
    nm = fit_nuisance(ds, plan)
    u = compute_u(ds, nm, g)
    boot = None
    if bootstrap_replicates is not None or variance == "bootstrap":
        if bootstrap_replicates is None:
            bootstrap_replicates = 1000

        def stat(ds_b: Dataset) -> float:
            nm_b = fit_nuisance(ds_b, plan)
            return compute_u(ds_b, nm_b, g).mean

        boot = bootstrap(
            ds,
            stat,
            B=bootstrap_replicates,
            seed=seed,
            stratified=bootstrap_stratified,
            threads=threads,
        )
    if variance == "bootstrap":
        v = VarianceDecomposition(v1=boot.variance, v2=0.0, v3=0.0, method="bootstrap")
    else:
        v = compute_variance(ds, nm, u, g, variance)
    result = standardized_test(u, v)
    if boot is not None:
        result = TestResult(
            statistic=result.statistic,
            p_value=result.p_value,
            variance=result.variance,
            n=result.n,
            n_cases=result.n_cases,
            method=result.method,
            bootstrap=boot,
        )
    return result
