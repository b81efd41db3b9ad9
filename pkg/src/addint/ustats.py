"""Per-subject interaction contributions and the standardized tests.

The centered-product contrast with baseline centering makes the three
subtraction integrals of the general weighted statistic vanish identically
(each contains the mean of a baseline-centered exposure under its own
baseline law), so those statistics reduce to

    u_i = exp(-omega * a1_i * a2_i) * (a1_i - b1(x_i)) * (a2_i - b2(x_i)) * d_i

with b1, b2 the configured baseline means. Tabulated contrasts on discrete
supports evaluate the full form with all three correction sums taken
exactly against the estimated baseline distributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import (
    ConfigurationError,
    DegenerateNuisanceError,
    DegenerateVarianceError,
    UnsupportedCombinationError,
)
from .nuisance import (
    NuisanceModels,
    baseline_class_probs,
    baseline_mean_vector,
)

G_FORMS = ("centered-product", "polytomous-centered-product", "tabulated")


@dataclass(frozen=True)
class GFunction:
    """Contrast function g(a1, a2, x).

    centered-product: (a1 - E[a1|baseline]) * (a2 - E[a2|baseline]).
    polytomous-centered-product: sum over non-reference levels k of
    (I(a1 = k) - P[a1 = k|baseline]) * (a2 - E[a2|baseline]).
    tabulated: an explicit table over the discrete supports, indexed by
    level; requires both exposures discrete.
    """

    form: str = "centered-product"
    table: np.ndarray | None = None

    def __post_init__(self):
        if self.form not in G_FORMS:
            raise ConfigurationError(f"unknown g form {self.form!r}; choose from {G_FORMS}")
        if self.form == "tabulated":
            if self.table is None:
                raise ConfigurationError("tabulated g needs a table")
            tbl = np.asarray(self.table, dtype=np.float64)
            if tbl.ndim != 2:
                raise ConfigurationError("g table must be 2-dimensional (a1 levels x a2 levels)")
            object.__setattr__(self, "table", tbl)
            tbl.setflags(write=False)
        elif self.table is not None:
            raise ConfigurationError(f"{self.form} takes no table")


@dataclass(frozen=True)
class UVector:
    """Per-subject contributions (zero for every control) plus the method
    tag and the nuisance models they were computed from."""

    u: np.ndarray
    method: str
    g_spec: GFunction
    theta_ref: NuisanceModels
    n: int
    n_cases: int

    def __post_init__(self):
        self.u.setflags(write=False)

    @property
    def mean(self) -> float:
        return float(self.u.mean())


@dataclass(frozen=True)
class TestResult:
    """Standardized statistic with its variance decomposition and two-sided
    normal p-value. ``variance`` is a VarianceDecomposition from the
    variance engine; ``bootstrap`` an optional BootstrapResult."""

    __test__ = False  # not a pytest class

    statistic: float
    p_value: float
    variance: object
    n: int
    n_cases: int
    method: str
    bootstrap: object | None = None

    def to_json_dict(self) -> dict:
        out = {
            "schema_version": 1,
            "method": self.method,
            "statistic": self.statistic,
            "p_value": self.p_value,
            "variance_total": self.variance.total,
            "v1": self.variance.v1,
            "v2": self.variance.v2,
            "v3": self.variance.v3,
            "variance_method": self.variance.method,
            "n": self.n,
            "n_cases": self.n_cases,
        }
        if self.bootstrap is not None:
            out.update(
                {
                    "bootstrap_replicates": self.bootstrap.n_replicates,
                    "bootstrap_variance": self.bootstrap.variance,
                    "bootstrap_ci_low": self.bootstrap.ci_low,
                    "bootstrap_ci_high": self.bootstrap.ci_high,
                    "bootstrap_p_value": self.bootstrap.p_value,
                }
            )
        return out


def default_g(ds: Dataset) -> GFunction:
    if ds.kind_a1.tag == "categorical":
        return GFunction("polytomous-centered-product")
    return GFunction("centered-product")


def method_tag(ds: Dataset, nm: NuisanceModels, g: GFunction) -> str:
    if g.form == "tabulated":
        return "unified"
    if ds.kind_a1.tag == "categorical" or g.form == "polytomous-centered-product":
        return "polytomous"
    if ds.kind_a2.tag == "continuous":
        return "continuous"
    if ds.kind_a2.tag == "count":
        return "count"
    if len(nm.covariate_names) > 0:
        return "covariate-adjusted"
    return "binary-independent" if nm.independence_assumed else "binary"


def _tilt(ds: Dataset, nm: NuisanceModels, theta: np.ndarray | None) -> np.ndarray:
    if nm.omega_index is None:
        return np.ones(ds.n)
    omega = nm.omega if theta is None else float(theta[nm.omega_index])
    return np.exp(-omega * ds.a1 * ds.a2)


def u_values(
    ds: Dataset, nm: NuisanceModels, g: GFunction, theta: np.ndarray | None = None
) -> np.ndarray:
    """Raw per-subject contributions; ``theta`` overrides the fitted
    nuisance parameters (derivative sweeps in the variance engine)."""
    tilt = _tilt(ds, nm, theta)
    if g.form == "centered-product":
        b1 = baseline_mean_vector(nm, 1, theta)
        b2 = baseline_mean_vector(nm, 2, theta)
        return tilt * (ds.a1 - b1) * (ds.a2 - b2) * ds.d
    if g.form == "polytomous-centered-product":
        if not ds.kind_a1.is_discrete:
            raise UnsupportedCombinationError("polytomous form requires a discrete a1")
        probs = baseline_class_probs(nm, 1, theta)
        b2 = baseline_mean_vector(nm, 2, theta)
        total = np.zeros(ds.n)
        for k in range(1, probs.shape[1]):
            total += (ds.a1 == k).astype(np.float64) - probs[:, k]
        return tilt * total * (ds.a2 - b2) * ds.d
    # tabulated
    if not (ds.kind_a1.is_discrete and ds.kind_a2.is_discrete):
        raise UnsupportedCombinationError(
            "tabulated g is defined on discrete supports only"
        )
    table = g.table
    f1 = baseline_class_probs(nm, 1, theta)
    f2 = baseline_class_probs(nm, 2, theta)
    if f1.shape[1] > table.shape[0] or f2.shape[1] > table.shape[1]:
        raise ConfigurationError(
            f"g table of shape {table.shape} does not cover the baseline supports "
            f"({f1.shape[1]} x {f2.shape[1]} levels)"
        )
    f1 = np.pad(f1, ((0, 0), (0, table.shape[0] - f1.shape[1])))
    f2 = np.pad(f2, ((0, 0), (0, table.shape[1] - f2.shape[1])))
    i1 = np.asarray(ds.a1, dtype=np.int64)
    i2 = np.asarray(ds.a2, dtype=np.int64)
    if i1.max() >= table.shape[0] or i2.max() >= table.shape[1]:
        raise ConfigurationError("observed exposure level outside the g table")
    g_obs = table[i1, i2]
    corr1 = (table[i1, :] * f2).sum(axis=1)
    corr2 = (table[:, i2].T * f1).sum(axis=1)
    corr3 = np.einsum("il,lm,im->i", f1, table, f2)
    return tilt * (g_obs - corr1 - corr2 + corr3) * ds.d


def compute_u(ds: Dataset, nm: NuisanceModels, g: GFunction | None = None) -> UVector:
    """Per-subject interaction contributions for the configured statistic."""
    if g is None:
        g = default_g(ds)
    u = u_values(ds, nm, g)
    if not np.all(np.isfinite(u)):
        raise ConfigurationError("non-finite interaction contribution; check the nuisance fits")
    return UVector(
        u=u,
        method=method_tag(ds, nm, g),
        g_spec=g,
        theta_ref=nm,
        n=ds.n,
        n_cases=ds.n_cases,
    )


def make_theta_evaluator(ds: Dataset, nm: NuisanceModels, g: GFunction | None = None):
    """Mean contribution as a function of the stacked nuisance parameter
    vector; consumed by the variance engine's numeric Jacobian."""
    if g is None:
        g = default_g(ds)

    def evaluator(theta: np.ndarray) -> float:
        return float(u_values(ds, nm, g, theta).mean())

    return evaluator


def standardized_test(u: UVector, v) -> TestResult:
    """Standardized statistic mean(u) / sqrt(v.total) with its two-sided
    standard-normal p-value."""
    if not np.isfinite(v.total) or v.total <= 0.0:
        raise DegenerateVarianceError(
            f"variance estimate {v.total!r} is not positive; the statistic is undefined"
        )
    z = u.mean / math.sqrt(v.total)
    p = math.erfc(abs(z) / math.sqrt(2.0))
    return TestResult(
        statistic=float(z),
        p_value=float(p),
        variance=v,
        n=u.n,
        n_cases=u.n_cases,
        method=u.method,
    )


def scaled_beta3(u: UVector, nm: NuisanceModels, ds: Dataset) -> float:
    """Interaction parameter scaled by the inverse disease prevalence:
    sum(u) / (b1 (1-b1) b2 (1-b2) * case count), for the binary-binary
    no-covariate statistic."""
    if ds.kind_a1.tag != "binary" or ds.kind_a2.tag != "binary":
        raise ConfigurationError("the scaled interaction estimate needs binary exposures")
    if len(nm.covariate_names) > 0:
        raise ConfigurationError("the scaled interaction estimate is defined without covariates")
    p1 = float(baseline_mean_vector(nm, 1)[0])
    p2 = float(baseline_mean_vector(nm, 2)[0])
    for p, name in ((p1, "baseline a1 probability"), (p2, "baseline a2 probability")):
        # boundary MLEs converge to within score tolerance of 0/1, not exactly
        if p <= 1e-8 or p >= 1.0 - 1e-8:
            raise DegenerateNuisanceError(f"{name} = {p:g} makes the scale factor collapse")
    n_cases = ds.n_cases
    if n_cases == 0:
        raise ConfigurationError("no cases present")
    return float(u.u.sum() / (p1 * (1 - p1) * p2 * (1 - p2) * n_cases))


def noncentrality_kappa(p1: float, p2: float, lam: float, sigma2: float) -> float:
    """Scale factor linking the additive interaction to the mean of the
    standardized statistic: p1 (1-p1) p2 (1-p2) * lambda / sigma2, where
    lambda is the case sampling-fraction ratio."""
    if not (0.0 < p1 < 1.0 and 0.0 < p2 < 1.0):
        raise ConfigurationError("baseline frequencies must lie strictly inside (0, 1)")
    if lam <= 0.0:
        raise ConfigurationError("sampling-fraction ratio must be positive")
    if sigma2 <= 0.0:
        raise ConfigurationError("variance must be positive")
    return p1 * (1 - p1) * p2 * (1 - p2) * lam / sigma2
