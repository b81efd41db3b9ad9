"""GLM core: closed-form fixtures, score-at-optimum, Hessian agreement,
weight invariance, multinomial consistency, error contract."""

import numpy as np
import pytest

from addint import GlmSpec, fit_glm, log_likelihood, predict_mean
from addint.errors import ConfigurationError, DivergenceError, SingularDesignError
from addint.glm import predict_mean_matrix


def test_intercept_only_logit_closed_form():
    X = np.ones((100, 1))
    y = np.r_[np.ones(20), np.zeros(80)]
    fit = fit_glm(X, y, GlmSpec("bernoulli-logit"))
    assert fit.coefficients[0] == pytest.approx(np.log(0.2 / 0.8), abs=1e-8)


def test_intercept_only_poisson_closed_form():
    X = np.ones((60, 1))
    y = np.repeat([1.0, 3.0, 5.0], 20)  # mean exactly 3
    fit = fit_glm(X, y, GlmSpec("poisson-log"))
    assert fit.coefficients[0] == pytest.approx(np.log(3.0), abs=1e-8)


def test_binary_slope_equals_table_log_odds_ratio():
    # 2x2 table: y by x with counts n11=30, n10=20, n01=10, n00=40
    x = np.r_[np.ones(50), np.zeros(50)]
    y = np.r_[np.ones(30), np.zeros(20), np.ones(10), np.zeros(40)]
    fit = fit_glm(np.column_stack([np.ones(100), x]), y, GlmSpec("bernoulli-logit"))
    hand = np.log((30 * 40) / (20 * 10))
    assert fit.coefficients[1] == pytest.approx(hand, abs=1e-8)


def _random_problem(family, seed, n=200, p=3):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    beta = rng.normal(scale=0.4, size=p)
    eta = X @ beta
    if family == "bernoulli-logit":
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    elif family == "poisson-log":
        y = rng.poisson(np.exp(eta)).astype(float)
    else:
        y = eta + rng.normal(size=n)
    w = rng.uniform(0.5, 2.0, size=n)
    return X, y, w


@pytest.mark.parametrize("family", ["bernoulli-logit", "poisson-log", "gaussian-identity"])
def test_score_at_optimum_below_tolerance(family):
    X, y, w = _random_problem(family, seed=7)
    fit = fit_glm(X, y, GlmSpec(family), weights=w)
    # independent analytic score: X' (w * (y - mu))
    mu = predict_mean_matrix(fit.spec, fit.coefficients, X)
    score = X.T @ (w * (y - mu))
    assert np.max(np.abs(score)) <= 1e-8


@pytest.mark.parametrize(
    "family,n_classes",
    [("bernoulli-logit", None), ("poisson-log", None), ("gaussian-identity", None),
     ("multinomial-logit", 3)],
)
def test_information_matches_finite_difference_hessian(family, n_classes):
    rng = np.random.default_rng(3)
    n, p = 150, 2
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    if family == "multinomial-logit":
        y = rng.integers(0, 3, size=n).astype(float)
    elif family == "bernoulli-logit":
        y = rng.integers(0, 2, size=n).astype(float)
    elif family == "poisson-log":
        y = rng.poisson(2.0, size=n).astype(float)
    else:
        y = rng.normal(size=n)
    w = rng.uniform(0.5, 2.0, size=n)
    spec = GlmSpec(family, n_classes=n_classes)
    fit = fit_glm(X, y, spec, weights=w)
    theta = fit.flat_coefficients
    dim = theta.size
    h = 1e-4
    fd = np.empty((dim, dim))
    for i in range(dim):
        for j in range(dim):
            t = [theta.copy() for _ in range(4)]
            t[0][i] += h; t[0][j] += h
            t[1][i] += h; t[1][j] -= h
            t[2][i] -= h; t[2][j] += h
            t[3][i] -= h; t[3][j] -= h
            lls = [log_likelihood(spec, X, y, tt, weights=w) for tt in t]
            fd[i, j] = (lls[0] - lls[1] - lls[2] + lls[3]) / (4 * h * h)
    np.testing.assert_allclose(fit.information, -fd, rtol=1e-4, atol=1e-7)


def test_constant_weights_leave_coefficients_unchanged():
    X, y, _ = _random_problem("bernoulli-logit", seed=11)
    base = fit_glm(X, y, GlmSpec("bernoulli-logit"))
    scaled = fit_glm(X, y, GlmSpec("bernoulli-logit"), weights=np.full(y.size, 3.7))
    np.testing.assert_allclose(scaled.coefficients, base.coefficients, atol=1e-9)


def test_multinomial_two_classes_reproduces_logit():
    X, y, w = _random_problem("bernoulli-logit", seed=5)
    logit_fit = fit_glm(X, y, GlmSpec("bernoulli-logit"), weights=w)
    multi_fit = fit_glm(X, y, GlmSpec("multinomial-logit", n_classes=2), weights=w)
    np.testing.assert_allclose(
        multi_fit.coefficients[0], logit_fit.coefficients, rtol=0, atol=1e-8
    )


def test_multinomial_balanced_sample_gives_uniform_probabilities():
    y = np.repeat([0.0, 1.0, 2.0], 33)
    fit = fit_glm(np.ones((99, 1)), y, GlmSpec("multinomial-logit", n_classes=3))
    probs = predict_mean(fit, np.array([1.0]))
    np.testing.assert_allclose(probs, [1 / 3, 1 / 3, 1 / 3], atol=1e-8)


def test_multinomial_probabilities_sum_to_one():
    rng = np.random.default_rng(9)
    X = np.column_stack([np.ones(300), rng.normal(size=300)])
    y = rng.integers(0, 4, size=300).astype(float)
    fit = fit_glm(X, y, GlmSpec("multinomial-logit", n_classes=4))
    rows = np.column_stack([np.ones(100), rng.normal(size=100)])
    probs = predict_mean(fit, rows)
    np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)


def test_predict_mean_fixtures():
    X = np.ones((50, 1))
    y = np.r_[np.ones(25), np.zeros(25)]
    fit = fit_glm(X, y, GlmSpec("bernoulli-logit"))
    assert predict_mean(fit, np.array([1.0])) == pytest.approx(0.5, abs=1e-10)
    yp = np.repeat([2.0, 4.0], 25)  # mean 3
    fitp = fit_glm(X, yp, GlmSpec("poisson-log"))
    assert predict_mean(fitp, np.array([1.0])) == pytest.approx(3.0, abs=1e-8)
    with pytest.raises(ConfigurationError):
        predict_mean(fit, np.array([1.0, 2.0]))


def test_rank_deficient_design_raises():
    rng = np.random.default_rng(1)
    x = rng.normal(size=80)
    X = np.column_stack([np.ones(80), x, 2 * x])
    y = (rng.random(80) < 0.4).astype(float)
    with pytest.raises(SingularDesignError):
        fit_glm(X, y, GlmSpec("bernoulli-logit"))


def test_separation_surfaces_as_divergence_with_iterate():
    x = np.r_[np.linspace(-2, -0.1, 40), np.linspace(0.1, 2, 40)]
    y = (x > 0).astype(float)
    with pytest.raises(DivergenceError) as excinfo:
        fit_glm(np.column_stack([np.ones(80), x]), y, GlmSpec("bernoulli-logit"))
    assert excinfo.value.coefficients is not None


def test_response_family_mismatch():
    X = np.ones((30, 1))
    with pytest.raises(ConfigurationError):
        fit_glm(X, np.full(30, 2.0), GlmSpec("bernoulli-logit"))
    with pytest.raises(ConfigurationError):
        fit_glm(X, np.full(30, -1.0), GlmSpec("poisson-log"))
    with pytest.raises(ConfigurationError):
        fit_glm(X, np.full(30, 0.5), GlmSpec("multinomial-logit", n_classes=3))


def test_more_parameters_than_rows_rejected():
    X = np.column_stack([np.ones(3), np.eye(3)])
    with pytest.raises(ConfigurationError):
        fit_glm(X, np.array([0.0, 1.0, 0.0]), GlmSpec("bernoulli-logit"))


def test_bad_spec_combinations():
    with pytest.raises(ConfigurationError):
        GlmSpec("probit")
    with pytest.raises(ConfigurationError):
        GlmSpec("multinomial-logit")
    with pytest.raises(ConfigurationError):
        GlmSpec("bernoulli-logit", n_classes=2)
