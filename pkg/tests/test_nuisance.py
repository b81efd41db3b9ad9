"""Nuisance model fitting: baseline models, the odds-ratio parameter and
their influence contributions."""

import numpy as np
import pytest
from scipy import optimize

from addint import (
    ExposureKind,
    ModelPlan,
    baseline_mean,
    estimate_omega,
    fit_nuisance,
    make_dataset,
)
from addint.errors import ConfigurationError, UnsupportedCombinationError

BIN = ExposureKind("binary")
COUNT = ExposureKind("count")


def _binary_dataset(ctrl_counts, case_counts=(5, 5, 5, 5)):
    """Cell order (a1, a2): 00, 01, 10, 11."""
    cells = [(0, 0), (0, 1), (1, 0), (1, 1)]
    rows = []
    for d, counts in ((0, ctrl_counts), (1, case_counts)):
        for (g, e), k in zip(cells, counts):
            rows.extend([(d, g, e)] * k)
    arr = np.array(rows, dtype=float)
    return make_dataset(arr[:, 0], arr[:, 1], arr[:, 2], BIN, BIN)


def test_intercept_only_baselines_under_independence():
    # controls: G frequency 0.5, E frequency 0.2
    ds = _binary_dataset((40, 10, 40, 10))
    nm = fit_nuisance(ds, ModelPlan(independence=True))
    assert baseline_mean(nm, 1, []) == pytest.approx(0.5, abs=1e-9)
    assert baseline_mean(nm, 2, []) == pytest.approx(0.2, abs=1e-9)
    assert nm.omega == 0.0
    assert nm.omega_index is None
    assert nm.theta.size == 2


def test_omega_reduces_to_sample_log_odds_ratio():
    ds = _binary_dataset((40, 10, 10, 40))
    est = estimate_omega(ds, ModelPlan())
    assert est.omega == pytest.approx(np.log(16.0), abs=1e-9)
    # stratified-proportion identity
    ctrl = ds.d == 0
    p1_of = lambda a: ds.a1[ctrl & (ds.a2 == a)].mean()
    hand = np.log(p1_of(1) * (1 - p1_of(0)) / (p1_of(0) * (1 - p1_of(1))))
    assert est.omega == pytest.approx(hand, abs=1e-10)


def test_omega_zero_under_independence_plan():
    ds = _binary_dataset((40, 10, 10, 40))
    est = estimate_omega(ds, ModelPlan(independence=True))
    assert est.omega == 0.0
    assert np.all(est.influence == 0.0)


def test_omega_near_zero_for_independent_exposures():
    rng = np.random.default_rng(4)
    n = 4000
    a1 = (rng.random(n) < 0.4).astype(float)
    a2 = (rng.random(n) < 0.3).astype(float)
    d = np.r_[np.ones(500), np.zeros(n - 500)]
    ds = make_dataset(d, a1, a2, BIN, BIN)
    est = estimate_omega(ds, ModelPlan())
    ctrl_n = ds.n_controls
    se = np.sqrt(
        1 / (ctrl_n * 0.4 * 0.6 * 0.3 * 0.7)
    )  # large-sample 2x2 log-OR standard error at independence
    assert abs(est.omega) < 3 * se


def test_baseline_prediction_at_reference_of_other_exposure():
    ds = _binary_dataset((40, 10, 10, 40))
    nm = fit_nuisance(ds, ModelPlan(independence=False))
    ctrl = ds.d == 0
    p1_at_a2_zero = ds.a1[ctrl & (ds.a2 == 0)].mean()
    assert baseline_mean(nm, 1, []) == pytest.approx(p1_at_a2_zero, abs=1e-9)
    p2_at_a1_zero = ds.a2[ctrl & (ds.a1 == 0)].mean()
    assert baseline_mean(nm, 2, []) == pytest.approx(p2_at_a1_zero, abs=1e-9)


def test_poisson_baseline_matches_independent_optimizer():
    rng = np.random.default_rng(12)
    n = 1500
    x = rng.normal(size=n)
    lam = np.exp(0.3 + 0.5 * x)
    a2 = rng.poisson(lam).astype(float)
    a1 = (rng.random(n) < 0.5).astype(float)
    d = np.r_[np.ones(200), np.zeros(n - 200)]
    ds = make_dataset(d, a1, a2, BIN, COUNT, x=x[:, None], covariate_names=("x",))
    nm = fit_nuisance(ds, ModelPlan(independence=True))

    ctrl = ds.d == 0
    X = np.column_stack([np.ones(ctrl.sum()), x[ctrl]])
    yy = a2[ctrl]

    def negll(beta):
        eta = X @ beta
        return -(yy * eta - np.exp(eta)).sum()

    res = optimize.minimize(negll, np.zeros(2), method="BFGS", options={"gtol": 1e-10})
    np.testing.assert_allclose(nm.e_fit.coefficients, res.x, atol=1e-6)


def test_binary_omega_with_covariate_matches_optimizer():
    rng = np.random.default_rng(21)
    n = 2500
    x = rng.normal(size=n)
    a2 = (rng.random(n) < 0.4).astype(float)
    logits = -0.3 + 0.8 * a2 + 0.5 * x
    a1 = (rng.random(n) < 1 / (1 + np.exp(-logits))).astype(float)
    d = np.r_[np.ones(300), np.zeros(n - 300)]
    ds = make_dataset(d, a1, a2, BIN, BIN, x=x[:, None], covariate_names=("x",))
    est = estimate_omega(ds, ModelPlan())

    ctrl = ds.d == 0
    X = np.column_stack([np.ones(ctrl.sum()), a2[ctrl], x[ctrl]])
    yy = a1[ctrl]

    def negll(beta):
        eta = X @ beta
        return -(yy * eta - np.logaddexp(0, eta)).sum()

    res = optimize.minimize(negll, np.zeros(3), method="BFGS", options={"gtol": 1e-10})
    assert est.omega == pytest.approx(res.x[1], abs=1e-6)


def test_nuisance_ignores_case_rows_entirely():
    ds = _binary_dataset((30, 20, 10, 15), case_counts=(8, 2, 6, 4))
    nm1 = fit_nuisance(ds, ModelPlan())
    # rebuild with the case rows permuted (controls unchanged)
    cases = np.flatnonzero(ds.d == 1)
    order = np.arange(ds.n)
    order[cases] = cases[::-1]
    ds2 = make_dataset(ds.d[order], ds.a1[order], ds.a2[order], BIN, BIN)
    nm2 = fit_nuisance(ds2, ModelPlan())
    np.testing.assert_array_equal(nm1.theta, nm2.theta)


def test_constant_weight_scale_invariance():
    ds = _binary_dataset((30, 20, 10, 15))
    w1 = np.ones(ds.n)
    w2 = np.full(ds.n, 2.5)
    ds1 = make_dataset(ds.d, ds.a1, ds.a2, BIN, BIN, w=w1)
    ds2 = make_dataset(ds.d, ds.a1, ds.a2, BIN, BIN, w=w2)
    nm1 = fit_nuisance(ds1, ModelPlan())
    nm2 = fit_nuisance(ds2, ModelPlan())
    np.testing.assert_allclose(nm1.theta, nm2.theta, atol=1e-9)
    assert nm1.fit_sample == "weighted-full"


def test_no_controls_is_a_hard_error():
    ds = make_dataset([1, 1], [0, 1], [1, 0], BIN, BIN)
    with pytest.raises(ConfigurationError):
        fit_nuisance(ds, ModelPlan())


def test_categorical_a1_requires_independence():
    cat = ExposureKind.parse("categorical:3")
    rng = np.random.default_rng(2)
    a1 = rng.integers(0, 3, 300).astype(float)
    a2 = rng.normal(size=300)
    d = np.r_[np.ones(50), np.zeros(250)]
    ds = make_dataset(d, a1, a2, cat, ExposureKind("continuous"))
    with pytest.raises(UnsupportedCombinationError):
        fit_nuisance(ds, ModelPlan(independence=False))
    nm = fit_nuisance(ds, ModelPlan(independence=True))
    probs = baseline_mean(nm, 1, [])
    assert probs.shape == (3,)
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)


def test_unknown_covariate_name():
    ds = _binary_dataset((30, 20, 10, 15))
    with pytest.raises(ConfigurationError):
        fit_nuisance(ds, ModelPlan(covariates=("nope",)))
