"""Variance estimation for the mean interaction contribution.

Three engines:

* a closed-form decomposition for the binary-binary no-covariate case,
  evaluated at the exposure-independence submodel: v1 is the variance of
  the contribution itself, v2 the propagation of the two baseline
  frequency estimates, v3 the propagation of the odds-ratio estimate
  (identically zero when independence is assumed, which is where the
  strict efficiency ordering of the two tests comes from);
* a general sandwich combining the empirical variance of the contributions
  with a quadratic form of the mean's Jacobian in the nuisance parameters
  and the empirical covariance of the stacked influence contributions;
* a nonparametric bootstrap that reruns an arbitrary pipeline (nuisance
  refits included) on resampled rows, stratified by case status by default
  to respect the outcome-dependent sampling design.

The closed form's propagation terms divide by the squared control fraction:
the baseline estimators only average over controls, so their influence
contributions expressed per full-sample record carry that factor. The
odds-ratio bracket enters with the opposite sign to the baseline-frequency
brackets (the derivative of the tilted mean in omega is negative when the
main effects push both exposures up among cases); only the square matters
for v3 but the relative sign inside the bracket does not cancel.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .datasets import Dataset
from .errors import (
    BootstrapFailureError,
    ConfigurationError,
    DegenerateNuisanceError,
    SingularDesignError,
)
from .nuisance import NuisanceModels

VARIANCE_METHODS = ("closed-form-binary", "sandwich", "bootstrap")


@dataclass(frozen=True)
class VarianceDecomposition:
    """Variance of the mean contribution, split into the core term v1, the
    baseline-estimation term v2 and the odds-ratio term v3 (0 under the
    independence assumption)."""

    v1: float
    v2: float
    v3: float
    method: str

    @property
    def total(self) -> float:
        return self.v1 + self.v2 + self.v3


def closed_form_binary_variance(
    ds: Dataset, nm: NuisanceModels, independence: bool
) -> VarianceDecomposition:
    """Closed-form decomposition for binary exposures without covariates,
    evaluated at the independence submodel. v1 and v2 are identical whether
    or not independence is assumed; the flag only toggles v3."""
    if ds.kind_a1.tag != "binary" or ds.kind_a2.tag != "binary":
        raise ConfigurationError("closed form requires binary exposures")
    if len(nm.covariate_names) > 0:
        raise ConfigurationError("closed form is defined without covariates")
    if ds.has_weights:
        raise ConfigurationError("closed form does not support sampling weights; use sandwich")
    d, a1, a2 = ds.d, ds.a1, ds.a2
    n = ds.n
    ctrl = d == 0
    if not ctrl.any() or ctrl.all():
        raise ConfigurationError("need both cases and controls")
    p1 = float(a1[ctrl].mean())
    p2 = float(a2[ctrl].mean())
    q = float(ctrl.mean())
    for p, name in ((p1, "control a1 frequency"), (p2, "control a2 frequency")):
        if p <= 0.0 or p >= 1.0:
            raise DegenerateNuisanceError(f"{name} = {p:g}; a control stratum is empty")
    u = (a1 - p1) * (a2 - p2) * d
    v1 = float(u.var()) / n
    c1 = float(((a2 - p2) * d).mean())
    c2 = float(((a1 - p1) * d).mean())
    h1 = (a1 - p1) * (1 - d)
    h2 = (a2 - p2) * (1 - d)
    v2 = (c1**2 * float(h1.var()) + c2**2 * float(h2.var())) / (q * q * n)
    if independence:
        return VarianceDecomposition(v1=v1, v2=v2, v3=0.0, method="closed-form-binary")
    h12 = (a1 - p1) * (a2 - p2) * (1 - d)
    k = float((a1 * a2 * (a2 - p2) * (a1 - p1) * d).mean())
    bracket = c1 / (1 - p2) + c2 / (1 - p1) - k / (p1 * p2 * (1 - p1) * (1 - p2))
    v3 = bracket**2 * float(h12.var()) / (q * q * n)
    return VarianceDecomposition(v1=v1, v2=v2, v3=v3, method="closed-form-binary")


def binary_moment_jacobian(ds: Dataset, omega: float, p1: float, p2: float) -> np.ndarray:
    """Analytic derivative of the mean tilted contribution with respect to
    the moment parameters (omega, p1, p2) for binary exposures; the numeric
    Jacobian must reproduce it."""
    d, a1, a2 = ds.d, ds.a1, ds.a2
    tilt = np.exp(-omega * a1 * a2)
    d_omega = float((-a1 * a2 * tilt * (a1 - p1) * (a2 - p2) * d).mean())
    d_p1 = float((-tilt * (a2 - p2) * d).mean())
    d_p2 = float((-tilt * (a1 - p1) * d).mean())
    return np.array([d_omega, d_p1, d_p2])


def numeric_jacobian(w_evaluator, theta: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian of a scalar evaluator, per-coordinate
    step max(1e-6, 1e-6 |theta_k|)."""
    theta = np.asarray(theta, dtype=np.float64)
    out = np.empty(theta.size)
    for k in range(theta.size):
        h = max(1e-6, 1e-6 * abs(theta[k]))
        up = theta.copy()
        up[k] += h
        dn = theta.copy()
        dn[k] -= h
        fu = w_evaluator(up)
        fd = w_evaluator(dn)
        if not (np.isfinite(fu) and np.isfinite(fd)):
            raise ConfigurationError(f"evaluator returned non-finite value near coordinate {k}")
        out[k] = (fu - fd) / (2.0 * h)
    return out


def sandwich_variance(u, nm: NuisanceModels, jac: np.ndarray) -> VarianceDecomposition:
    """General first-order variance: empirical variance of the
    contributions plus jac' Cov(influence) jac, both per record. The
    odds-ratio coordinate's share (including its cross terms) is reported
    as v3 and clipped at zero if cross-covariances push it negative."""
    jac = np.asarray(jac, dtype=np.float64)
    if jac.shape != (nm.theta.size,):
        raise ConfigurationError(
            f"jacobian length {jac.size} does not match theta length {nm.theta.size}"
        )
    n = nm.influence.shape[0]
    v1 = float(np.var(u.u)) / n
    centered = nm.influence - nm.influence.mean(axis=0)
    cov = centered.T @ centered / n
    if not np.all(np.isfinite(cov)):
        raise SingularDesignError("influence covariance is not finite")
    prop_total = float(jac @ cov @ jac) / n
    if nm.omega_index is None:
        return VarianceDecomposition(v1=v1, v2=prop_total, v3=0.0, method="sandwich")
    jr = jac.copy()
    jr[nm.omega_index] = 0.0
    v2 = float(jr @ cov @ jr) / n
    v3 = prop_total - v2
    if v3 < 0.0:
        v2 = prop_total
        v3 = 0.0
    return VarianceDecomposition(v1=v1, v2=v2, v3=v3, method="sandwich")


@dataclass(frozen=True)
class BootstrapResult:
    """Percentile summary of a resampled pipeline. The p-value recentres
    the replicate statistics at the observed value (bias correction) and
    reports twice the smaller tail fraction around zero, floored at 1/B."""

    observed: float
    variance: float
    ci_low: float
    ci_high: float
    p_value: float
    n_replicates: int
    n_failed: int
    replicate_stats: np.ndarray

    def __post_init__(self):
        self.replicate_stats.setflags(write=False)

    @property
    def se(self) -> float:
        return float(np.sqrt(self.variance))


def _resample_indices(ds: Dataset, rng: np.random.Generator, stratified: bool) -> np.ndarray:
    if not stratified:
        return rng.integers(0, ds.n, size=ds.n)
    cases = np.flatnonzero(ds.d == 1)
    controls = np.flatnonzero(ds.d == 0)
    take_cases = cases[rng.integers(0, cases.size, size=cases.size)]
    take_controls = controls[rng.integers(0, controls.size, size=controls.size)]
    return np.concatenate([take_cases, take_controls])


def resample_dataset(ds: Dataset, idx: np.ndarray) -> Dataset:
    """Row-resampled copy; skips revalidation since the source rows were
    already validated."""
    return Dataset(
        d=ds.d[idx].copy(),
        a1=ds.a1[idx].copy(),
        a2=ds.a2[idx].copy(),
        kind_a1=ds.kind_a1,
        kind_a2=ds.kind_a2,
        x=ds.x[idx].copy(),
        covariate_names=ds.covariate_names,
        w=None if ds.w is None else ds.w[idx].copy(),
        schema=ds.schema,
    )


def bootstrap(
    ds: Dataset,
    pipeline,
    B: int,
    seed: int,
    stratified: bool = True,
    threads: int | None = None,
) -> BootstrapResult:
    """Nonparametric bootstrap of ``pipeline(dataset) -> float`` over B row
    resamples. Replicate b draws its rows from a dedicated counter-based
    stream derived as SeedSequence(seed, spawn_key=(b,)), so results are
    bit-identical for a given seed regardless of thread count or schedule.
    Failed replicates are dropped and counted; more than 5% failures is a
    hard error."""
    if B < 100:
        raise ConfigurationError("bootstrap needs at least 100 replicates")
    observed = float(pipeline(ds))
    stats = np.full(B, np.nan)

    def one(b: int) -> None:
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(b,))))
        idx = _resample_indices(ds, rng, stratified)
        try:
            stats[b] = float(pipeline(resample_dataset(ds, idx)))
        except Exception:
            stats[b] = np.nan

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(B)))
    else:
        for b in range(B):
            one(b)

    good = stats[np.isfinite(stats)]
    n_failed = B - good.size
    if n_failed > 0.05 * B:
        raise BootstrapFailureError(
            f"{n_failed} of {B} bootstrap replicates failed; the pipeline is unstable"
        )
    variance = float(good.var(ddof=1)) if good.size > 1 else 0.0
    ci_low, ci_high = (float(x) for x in np.percentile(good, [2.5, 97.5]))
    recentred = good - good.mean() + observed
    frac_low = float(np.mean(recentred <= 0.0))
    frac_high = float(np.mean(recentred >= 0.0))
    p = min(1.0, max(1.0 / good.size, 2.0 * min(frac_low, frac_high)))
    return BootstrapResult(
        observed=observed,
        variance=variance,
        ci_low=ci_low,
        ci_high=ci_high,
        p_value=p,
        n_replicates=int(good.size),
        n_failed=int(n_failed),
        replicate_stats=good,
    )
