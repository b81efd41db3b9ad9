"""Prospective relative-excess-risk comparator.

Fits the standard case-control logistic model with exposure main effects,
their product, and optional covariates, then tests the relative excess
risk due to interaction

    RERI = exp(a1 + a2 + a3) - exp(a1) - exp(a2) + 1

with a delta-method standard error from the maximum-likelihood covariance.
The estimate's scope is binary exposures; ``allow_nonbinary`` exists so the
simulation module can demonstrate how the test misbehaves when a
continuous exposure is forced through the same formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import ConfigurationError, SingularDesignError
from .glm import GlmSpec, fit_glm
from .nuisance import ModelPlan, _select_covariates


@dataclass(frozen=True)
class ReriResult:
    coefficients: np.ndarray
    covariance: np.ndarray
    reri_hat: float
    se: float
    t_reri: float
    p_value: float
    n: int
    n_cases: int

    def __post_init__(self):
        self.coefficients.setflags(write=False)
        self.covariance.setflags(write=False)

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "method": "prospective-reri",
            "reri": self.reri_hat,
            "se": self.se,
            "statistic": self.t_reri,
            "p_value": self.p_value,
            "alpha0": float(self.coefficients[0]),
            "alpha1": float(self.coefficients[1]),
            "alpha2": float(self.coefficients[2]),
            "alpha3": float(self.coefficients[3]),
            "n": self.n,
            "n_cases": self.n_cases,
        }


def reri_test(
    ds: Dataset, covariates: tuple[str, ...] | None = None, allow_nonbinary: bool = False
) -> ReriResult:
    """Logistic fit of the outcome on (a1, a2, a1*a2, covariates) and the
    two-sided normal test of RERI = 0."""
    if not allow_nonbinary and (ds.kind_a1.tag != "binary" or ds.kind_a2.tag != "binary"):
        raise ConfigurationError(
            "the relative-excess-risk estimate is defined for binary exposures"
        )
    if ds.n_cases == 0 or ds.n_controls == 0:
        raise ConfigurationError("need both cases and controls")
    x, _ = _select_covariates(ds, ModelPlan(covariates=covariates))
    design = np.column_stack([np.ones(ds.n), ds.a1, ds.a2, ds.a1 * ds.a2, x])
    fit = fit_glm(design, ds.d, GlmSpec("bernoulli-logit"))
    try:
        cov = np.linalg.inv(fit.information)
    except np.linalg.LinAlgError:
        raise SingularDesignError("information matrix is singular in the outcome fit") from None
    a1, a2, a3 = fit.coefficients[1], fit.coefficients[2], fit.coefficients[3]
    s = math.exp(a1 + a2 + a3)
    reri = s - math.exp(a1) - math.exp(a2) + 1.0
    grad = np.array([s - math.exp(a1), s - math.exp(a2), s])
    se = math.sqrt(grad @ cov[1:4, 1:4] @ grad)
    if se <= 0.0 or not math.isfinite(se):
        raise SingularDesignError("delta-method standard error is degenerate")
    t = reri / se
    p = math.erfc(abs(t) / math.sqrt(2.0))
    return ReriResult(
        coefficients=fit.coefficients.copy(),
        covariance=cov,
        reri_hat=float(reri),
        se=float(se),
        t_reri=float(t),
        p_value=float(p),
        n=ds.n,
        n_cases=ds.n_cases,
    )
