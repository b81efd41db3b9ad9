"""Nuisance components for the interaction statistics: baseline exposure
models and the exposure odds-ratio parameter, fitted on controls (or on the
inverse-probability-weighted full sample when the dataset carries sampling
weights).

Under the independence assumption each exposure is regressed on the
covariates alone and the odds-ratio parameter is pinned to 0 with no
uncertainty. Without it, each exposure model additionally includes the
other exposure as a main-effect regressor and baseline quantities are
predictions at the other exposure's reference value 0; the odds-ratio
parameter is the coefficient on a2 in the regression of a1 on (a2, x).
The association model is the single-parameter log-odds-ratio form
omega * a1 * a2 (no effect heterogeneity in x), which requires a binary a1
whenever independence is not assumed.

Constant covariate columns (including all-zero columns) are dropped before
any design is built: they carry no information, and keeping them would only
make the designs rank deficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import Dataset, ExposureKind
from .errors import (
    ConfigurationError,
    DegenerateNuisanceError,
    UnsupportedCombinationError,
)
from .glm import GlmFit, GlmSpec, fit_glm, predict_mean_matrix

_AUTO_FAMILY = {
    "binary": "bernoulli-logit",
    "categorical": "multinomial-logit",
    "count": "poisson-log",
    "continuous": "gaussian-identity",
}

_A2_FAMILY_ALIASES = {
    "logit": "bernoulli-logit",
    "identity": "gaussian-identity",
    "log": "poisson-log",
}


@dataclass(frozen=True)
class ModelPlan:
    """How to build the nuisance models.

    covariates None means every covariate column of the dataset; a tuple
    selects by name. Families default to the exposure kind (binary ->
    logit, count -> log, continuous -> identity, categorical ->
    multinomial); a2_family may force one of {logit, identity, log}.
    """

    covariates: tuple[str, ...] | None = None
    a1_family: str = "auto"
    a2_family: str = "auto"
    independence: bool = False


@dataclass(frozen=True)
class NuisanceModels:
    """Fitted nuisance components plus everything the variance engine needs:
    the stacked parameter vector theta (a1-model coefficients then a2-model
    coefficients), per-subject influence contributions normalised so that
    theta_hat - theta is approximately the mean of the rows, and the
    baseline prediction designs (other exposure at 0)."""

    g_fit: GlmFit
    e_fit: GlmFit
    omega: float
    omega_index: int | None
    independence_assumed: bool
    theta: np.ndarray
    influence: np.ndarray
    g_baseline_design: np.ndarray
    e_baseline_design: np.ndarray
    kind_a1: ExposureKind
    kind_a2: ExposureKind
    covariate_names: tuple[str, ...]
    fit_sample: str

    def __post_init__(self):
        for arr in (self.theta, self.influence, self.g_baseline_design, self.e_baseline_design):
            arr.setflags(write=False)

    @property
    def g_slice(self) -> slice:
        return slice(0, self.g_fit.n_params)

    @property
    def e_slice(self) -> slice:
        return slice(self.g_fit.n_params, self.g_fit.n_params + self.e_fit.n_params)


@dataclass(frozen=True)
class OmegaEstimate:
    omega: float
    influence: np.ndarray
    fit: GlmFit | None


def _resolve_family(which: str, kind: ExposureKind, requested: str) -> str:
    if requested == "auto":
        return _AUTO_FAMILY[kind.tag]
    family = _A2_FAMILY_ALIASES.get(requested, requested)
    if family not in _AUTO_FAMILY.values():
        raise ConfigurationError(f"unknown family {requested!r} for {which}")
    if family == "bernoulli-logit" and kind.tag != "binary":
        raise ConfigurationError(f"{which}: logit family requires a binary exposure")
    if family == "poisson-log" and kind.tag not in ("count",):
        raise ConfigurationError(f"{which}: log family requires a count exposure")
    if family == "multinomial-logit" and kind.tag != "categorical":
        raise ConfigurationError(f"{which}: multinomial family requires a categorical exposure")
    return family


def _select_covariates(ds: Dataset, plan: ModelPlan) -> tuple[np.ndarray, tuple[str, ...]]:
    if plan.covariates is None:
        x = ds.x
        names = ds.covariate_names
    else:
        missing = [c for c in plan.covariates if c not in ds.covariate_names]
        if missing:
            raise ConfigurationError(f"unknown covariate(s) {missing}")
        cols = [ds.covariate_names.index(c) for c in plan.covariates]
        x = ds.x[:, cols]
        names = tuple(plan.covariates)
    if x.shape[1]:
        keep = [j for j in range(x.shape[1]) if np.ptp(x[:, j]) > 0.0]
        x = x[:, keep]
        names = tuple(names[j] for j in keep)
    return np.asarray(x, dtype=np.float64), names


def _make_spec(family: str, kind: ExposureKind) -> GlmSpec:
    if family == "multinomial-logit":
        return GlmSpec(family, n_classes=kind.n_levels)
    return GlmSpec(family)


def _full_sample_influence(fit: GlmFit, rows: np.ndarray, n_full: int) -> np.ndarray:
    """Per-subject influence contributions padded to the full sample, scaled
    so theta_hat - theta ~= mean over all n rows."""
    dim = fit.n_params
    scores = np.zeros((n_full, dim))
    scores[rows] = fit.score_contributions
    info_bar = fit.information / n_full
    return np.linalg.solve(info_bar, scores.T).T


def fit_nuisance(ds: Dataset, plan: ModelPlan) -> NuisanceModels:
    """Fit both exposure models and the odds-ratio parameter.

    Controls only by default; the weighted full sample when the dataset
    carries sampling weights. Requires at least one control either way.
    """
    if ds.n_controls < 1:
        raise ConfigurationError("nuisance fitting requires at least one control")
    fam1 = _resolve_family("a1", ds.kind_a1, plan.a1_family)
    fam2 = _resolve_family("a2", ds.kind_a2, plan.a2_family)
    if not plan.independence and ds.kind_a1.tag != "binary":
        raise UnsupportedCombinationError(
            "the single-parameter odds-ratio model needs a binary a1; "
            "use the independence flag for non-binary a1"
        )

    x, cov_names = _select_covariates(ds, plan)
    n = ds.n
    ones = np.ones((n, 1))
    if plan.independence:
        g_design = np.hstack([ones, x])
        e_design = np.hstack([ones, x])
        g_baseline = g_design
        e_baseline = e_design
    else:
        g_design = np.hstack([ones, ds.a2[:, None], x])
        e_design = np.hstack([ones, ds.a1[:, None], x])
        g_baseline = g_design.copy()
        g_baseline[:, 1] = 0.0
        e_baseline = e_design.copy()
        e_baseline[:, 1] = 0.0

    if ds.has_weights:
        rows = np.arange(n)
        weights = ds.w
        fit_sample = "weighted-full"
    else:
        rows = np.flatnonzero(ds.d == 0)
        weights = None
        fit_sample = "controls"

    def _fit(design, response, family, kind):
        spec = _make_spec(family, kind)
        sub_w = None if weights is None else weights[rows]
        return fit_glm(design[rows], response[rows], spec, weights=sub_w)

    g_fit = _fit(g_design, ds.a1, fam1, ds.kind_a1)
    e_fit = _fit(e_design, ds.a2, fam2, ds.kind_a2)

    theta = np.concatenate([g_fit.flat_coefficients, e_fit.flat_coefficients])
    influence = np.hstack(
        [
            _full_sample_influence(g_fit, rows, n),
            _full_sample_influence(e_fit, rows, n),
        ]
    )
    if plan.independence:
        omega = 0.0
        omega_index = None
    else:
        omega_index = 1
        omega = float(theta[omega_index])
    return NuisanceModels(
        g_fit=g_fit,
        e_fit=e_fit,
        omega=omega,
        omega_index=omega_index,
        independence_assumed=plan.independence,
        theta=theta,
        influence=influence,
        g_baseline_design=np.ascontiguousarray(g_baseline),
        e_baseline_design=np.ascontiguousarray(e_baseline),
        kind_a1=ds.kind_a1,
        kind_a2=ds.kind_a2,
        covariate_names=cov_names,
        fit_sample=fit_sample,
    )


def estimate_omega(ds: Dataset, plan: ModelPlan) -> OmegaEstimate:
    """Odds-ratio parameter: the coefficient on a2 in the control-only
    (or weighted full-sample) logistic regression of a1 on (a2, x). For a
    no-covariate binary pair this is exactly the stratified-sample log odds
    ratio. Under an independence plan the estimate is 0 with no
    uncertainty."""
    if plan.independence:
        return OmegaEstimate(0.0, np.zeros(ds.n), None)
    nm = fit_nuisance(ds, plan)
    return OmegaEstimate(
        omega=nm.omega,
        influence=nm.influence[:, nm.omega_index].copy(),
        fit=nm.g_fit,
    )


def _numeric_mean(kind: ExposureKind, pred) -> np.ndarray:
    """Numeric expected exposure from a model prediction (class
    probabilities are folded to sum(level * prob))."""
    if kind.tag == "categorical":
        levels = np.arange(kind.n_levels, dtype=np.float64)
        return pred @ levels
    return pred


def baseline_mean_vector(nm: NuisanceModels, which: int, theta: np.ndarray | None = None):
    """Baseline expected exposure for every record, predicting at the other
    exposure's reference value when independence is not assumed. ``theta``
    overrides the fitted stacked parameter vector (used by the variance
    engine's derivative sweeps)."""
    if which not in (1, 2):
        raise ConfigurationError("which must be 1 or 2")
    fit = nm.g_fit if which == 1 else nm.e_fit
    design = nm.g_baseline_design if which == 1 else nm.e_baseline_design
    kind = nm.kind_a1 if which == 1 else nm.kind_a2
    if theta is None:
        coefs = fit.coefficients
    else:
        block = theta[nm.g_slice if which == 1 else nm.e_slice]
        coefs = block.reshape(fit.coefficients.shape)
    pred = predict_mean_matrix(fit.spec, coefs, design)
    return _numeric_mean(kind, pred)


def baseline_class_probs(nm: NuisanceModels, which: int, theta: np.ndarray | None = None):
    """Baseline probability table over the discrete support of an exposure,
    one row per record: columns are levels 0..K-1 for binary/categorical,
    truncated Poisson probabilities for counts. Continuous exposures have
    no tabulated baseline and raise."""
    fit = nm.g_fit if which == 1 else nm.e_fit
    design = nm.g_baseline_design if which == 1 else nm.e_baseline_design
    kind = nm.kind_a1 if which == 1 else nm.kind_a2
    if theta is None:
        coefs = fit.coefficients
    else:
        block = theta[nm.g_slice if which == 1 else nm.e_slice]
        coefs = block.reshape(fit.coefficients.shape)
    pred = predict_mean_matrix(fit.spec, coefs, design)
    if kind.tag == "binary":
        p = np.asarray(pred)
        return np.column_stack([1.0 - p, p])
    if kind.tag == "categorical":
        return np.asarray(pred)
    if kind.tag == "count":
        from scipy.stats import poisson

        lam = np.asarray(pred)
        kmax = int(poisson.ppf(1.0 - 1e-12, lam.max()))
        ks = np.arange(kmax + 1)
        return poisson.pmf(ks[None, :], lam[:, None])
    raise UnsupportedCombinationError(
        "continuous exposures have no tabulated baseline distribution"
    )


def baseline_mean(nm: NuisanceModels, which: int, x) -> float | np.ndarray:
    """Baseline expected exposure (or class-probability vector for a
    categorical exposure) at a single covariate row, ordered as
    nm.covariate_names."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size != len(nm.covariate_names):
        raise ConfigurationError(
            f"expected {len(nm.covariate_names)} covariate value(s), got {x.size}"
        )
    fit = nm.g_fit if which == 1 else nm.e_fit
    if nm.independence_assumed:
        row = np.concatenate([[1.0], x])
    else:
        row = np.concatenate([[1.0, 0.0], x])
    pred = predict_mean_matrix(fit.spec, fit.coefficients, row[None, :])
    if (nm.kind_a1 if which == 1 else nm.kind_a2).tag == "categorical":
        return pred[0]
    return float(pred[0])


def check_baseline_not_degenerate(values: np.ndarray, what: str) -> None:
    if np.any(values <= 0.0) or np.any(values >= 1.0):
        raise DegenerateNuisanceError(f"{what} sits on the boundary of (0, 1)")
