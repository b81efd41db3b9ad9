"""Maximum-likelihood fitting for the generalized linear models the
nuisance estimators need: bernoulli-logit, poisson-log, gaussian-identity
and multinomial-logit, all with optional observation weights.

Fits are deterministic Newton / IRLS with step halving on likelihood
decrease. Convergence: max |score| <= 1e-8 or relative coefficient change
<= 1e-10, within 100 iterations. Rank deficiency is detected through a
Cholesky pivot threshold of 1e-12 times the largest pivot. There is no
regularisation and no dispersion estimation: degenerate fits fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import (
    FAMILY_IDENTITY,
    FAMILY_LOG,
    FAMILY_LOGIT,
    STATUS_NO_CONVERGENCE,
    STATUS_NONFINITE,
    STATUS_OK,
    STATUS_SINGULAR,
    _chol_solve_py,
)
from .errors import ConfigurationError, DivergenceError, SingularDesignError

TOL_SCORE = 1e-8
TOL_COEF = 1e-10
MAX_ITER = 100

_FAMILY_CODES = {
    "bernoulli-logit": FAMILY_LOGIT,
    "poisson-log": FAMILY_LOG,
    "gaussian-identity": FAMILY_IDENTITY,
}

FAMILIES = tuple(_FAMILY_CODES) + ("multinomial-logit",)


@dataclass(frozen=True)
class GlmSpec:
    """Family choice for a fit. The design matrix is supplied by the caller
    and must already contain the intercept column if one is wanted."""

    family: str
    n_classes: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "multinomial-logit":
            if self.n_classes is None or self.n_classes < 2:
                raise ConfigurationError("multinomial-logit requires n_classes >= 2")
        elif self.n_classes is not None:
            raise ConfigurationError("n_classes is only meaningful for multinomial-logit")


@dataclass(frozen=True)
class GlmFit:
    """Result of a converged fit.

    ``coefficients`` has shape (p,) for single-predictor families and
    (K-1, p) for multinomial (reference class 0 omitted).
    ``information`` is the observed information at the optimum, over the
    flattened parameter vector (class-major for multinomial).
    ``score_contributions`` holds per-subject score terms, one row per
    observation of the fitted sample, same flattened parameter order.
    """

    spec: GlmSpec
    coefficients: np.ndarray
    information: np.ndarray
    score_contributions: np.ndarray
    iterations: int
    final_score_norm: float
    loglik: float
    n_obs: int

    @property
    def n_params(self) -> int:
        return self.coefficients.size

    @property
    def flat_coefficients(self) -> np.ndarray:
        return self.coefficients.reshape(-1)


def _fresh(arr) -> np.ndarray:
    """Private writable contiguous float64 copy. Keeps the compiled kernels
    on one array signature regardless of the caller's array flags."""
    out = np.ascontiguousarray(np.asarray(arr, dtype=np.float64))
    if out is arr or not out.flags.writeable:
        out = out.copy()
    return out


def _as_design(X) -> np.ndarray:
    X = _fresh(X)
    if X.ndim != 2:
        raise ConfigurationError("design matrix must be 2-dimensional")
    if not np.all(np.isfinite(X)):
        raise ConfigurationError("design matrix contains non-finite values")
    return X


def _check_response(y: np.ndarray, spec: GlmSpec) -> None:
    if spec.family == "bernoulli-logit":
        if not np.all((y == 0.0) | (y == 1.0)):
            raise ConfigurationError("bernoulli-logit requires a 0/1 response")
    elif spec.family == "poisson-log":
        if np.any(y < 0) or np.any(y != np.floor(y)):
            raise ConfigurationError("poisson-log requires nonnegative integer response")
    elif spec.family == "multinomial-logit":
        levels = np.arange(spec.n_classes)
        if not np.all(np.isin(y, levels)):
            raise ConfigurationError(
                f"multinomial-logit response must lie in 0..{spec.n_classes - 1}"
            )
    if not np.all(np.isfinite(y)):
        raise ConfigurationError("response contains non-finite values")


def fit_glm(X, y, spec: GlmSpec, weights=None) -> GlmFit:
    """Weighted maximum likelihood. Deterministic for fixed input.

    Raises SingularDesignError for rank-deficient designs and
    DivergenceError (carrying the last iterate) when 100 iterations do not
    reach the score tolerance; complete separation in a logistic fit
    surfaces as the latter.
    """
    X = _as_design(X)
    y = _fresh(y)
    n, p = X.shape
    if y.shape != (n,):
        raise ConfigurationError(f"response length {y.size} != design rows {n}")
    if weights is None:
        w = np.ones(n)
    else:
        w = _fresh(weights)
        if w.shape != (n,):
            raise ConfigurationError("weights length mismatch")
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ConfigurationError("weights must be positive and finite")
    _check_response(y, spec)

    if spec.family == "multinomial-logit":
        return _fit_multinomial(X, y, w, spec)

    if n <= p:
        raise ConfigurationError(f"need more observations ({n}) than parameters ({p})")

    code = _FAMILY_CODES[spec.family]
    beta, info, iters, status, smax, ll = _kernels.glm_irls(
        X, y, w, code, TOL_SCORE, TOL_COEF, MAX_ITER
    )
    if status == STATUS_SINGULAR:
        raise SingularDesignError(
            f"design is rank deficient (pivot below threshold) in {spec.family} fit"
        )
    if status in (STATUS_NO_CONVERGENCE, STATUS_NONFINITE):
        raise DivergenceError(
            f"{spec.family} fit did not converge after {iters} iterations "
            f"(max |score| = {smax:.3e}); separation or an unstable design is likely",
            coefficients=beta,
            iterations=iters,
        )
    assert status == STATUS_OK
    if spec.family == "bernoulli-logit":
        # complete separation drives the score to zero while the fitted
        # probabilities pin at 0/1; catch it by the linear predictor scale
        if float(np.max(np.abs(X @ beta))) > 30.0:
            raise DivergenceError(
                "fitted probabilities are pinned at 0/1 (separation)",
                coefficients=beta,
                iterations=iters,
            )
    mu = predict_mean_matrix(spec, beta, X)
    scores = X * (w * (y - mu))[:, None]
    for arr in (beta, info, scores):
        arr.setflags(write=False)
    return GlmFit(
        spec=spec,
        coefficients=beta,
        information=info,
        score_contributions=scores,
        iterations=iters,
        final_score_norm=smax,
        loglik=ll,
        n_obs=n,
    )


def _multinomial_probs(X, B):
    """Class probabilities (n, K) for coefficient matrix B of shape (K-1, p)."""
    eta = X @ B.T
    m = np.maximum(0.0, eta.max(axis=1))
    denom = np.exp(-m) + np.exp(eta - m[:, None]).sum(axis=1)
    probs = np.empty((X.shape[0], B.shape[0] + 1))
    probs[:, 0] = np.exp(-m) / denom
    probs[:, 1:] = np.exp(eta - m[:, None]) / denom[:, None]
    return probs


def _multinomial_loglik(X, Y, w, B):
    eta = X @ B.T
    m = np.maximum(0.0, eta.max(axis=1))
    lse = m + np.log(np.exp(-m) + np.exp(eta - m[:, None]).sum(axis=1))
    return float(np.sum(w * ((Y * eta).sum(axis=1) - lse)))


def _fit_multinomial(X, y, w, spec: GlmSpec) -> GlmFit:
    n, p = X.shape
    K = spec.n_classes
    dim = (K - 1) * p
    if n <= dim:
        raise ConfigurationError(f"need more observations ({n}) than parameters ({dim})")
    Y = np.zeros((n, K - 1))
    for k in range(1, K):
        Y[:, k - 1] = y == k
    B = np.zeros((K - 1, p))
    ll = -np.inf
    force_exit = False
    polishing = False
    H = np.zeros((dim, dim))
    smax = np.inf
    for it in range(1, MAX_ITER + 1):
        probs = _multinomial_probs(X, B)
        P = probs[:, 1:]
        ll = _multinomial_loglik(X, Y, w, B)
        if not np.isfinite(ll):
            raise DivergenceError(
                "multinomial-logit objective became non-finite", coefficients=B, iterations=it
            )
        resid = w[:, None] * (Y - P)
        score = (X.T @ resid).T.reshape(-1)
        smax = float(np.max(np.abs(score)))
        for k in range(K - 1):
            for l in range(k, K - 1):
                wk = w * P[:, k] * ((1.0 if k == l else 0.0) - P[:, l])
                block = X.T @ (X * wk[:, None])
                H[k * p : (k + 1) * p, l * p : (l + 1) * p] = block
                H[l * p : (l + 1) * p, k * p : (k + 1) * p] = block.T
        converged = smax <= TOL_SCORE or force_exit
        if converged and (polishing or force_exit):
            if float(np.max(np.abs(X @ B.T))) > 30.0:
                raise DivergenceError(
                    "fitted class probabilities are pinned at 0/1 (separation)",
                    coefficients=B,
                    iterations=it,
                )
            scores = (resid[:, :, None] * X[:, None, :]).reshape(n, dim)
            for arr in (B, H, scores):
                arr.setflags(write=False)
            return GlmFit(
                spec=spec,
                coefficients=B,
                information=H,
                score_contributions=scores,
                iterations=it,
                final_score_norm=smax,
                loglik=ll,
                n_obs=n,
            )
        if converged:
            polishing = True
        step, flag = _chol_solve_py(H, score, 1e-12)
        if flag != 0:
            if polishing:
                force_exit = True
                continue
            raise SingularDesignError("multinomial-logit design is rank deficient")
        lam = 1.0
        accepted = False
        for _ in range(30):
            cand = B + lam * step.reshape(K - 1, p)
            llc = _multinomial_loglik(X, Y, w, cand)
            if np.isfinite(llc) and llc >= ll - 1e-10 * (abs(ll) + 1.0):
                delta = float(np.max(np.abs(cand - B)))
                bscale = max(1.0, float(np.max(np.abs(cand))))
                B = cand
                accepted = True
                if delta / bscale <= TOL_COEF:
                    force_exit = True
                break
            lam *= 0.5
        if not accepted:
            if polishing:
                force_exit = True
                continue
            break
    raise DivergenceError(
        f"multinomial-logit fit did not converge after {MAX_ITER} iterations "
        f"(max |score| = {smax:.3e})",
        coefficients=B,
        iterations=MAX_ITER,
    )


def predict_mean_matrix(spec: GlmSpec, coefficients, X) -> np.ndarray:
    """Inverse link applied to X @ coefficients for a whole design matrix.

    Returns shape (n,) for scalar families, (n, K) class probabilities for
    multinomial.
    """
    X = np.asarray(X, dtype=np.float64)
    if spec.family == "multinomial-logit":
        B = np.asarray(coefficients, dtype=np.float64).reshape(spec.n_classes - 1, -1)
        if X.shape[1] != B.shape[1]:
            raise ConfigurationError(
                f"covariate row has {X.shape[1]} entries, design expects {B.shape[1]}"
            )
        return _multinomial_probs(X, B)
    beta = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    if X.shape[1] != beta.size:
        raise ConfigurationError(
            f"covariate row has {X.shape[1]} entries, design expects {beta.size}"
        )
    eta = X @ beta
    if spec.family == "bernoulli-logit":
        return 1.0 / (1.0 + np.exp(-eta))
    if spec.family == "poisson-log":
        return np.exp(eta)
    return eta


def predict_mean(fit: GlmFit, x) -> float | np.ndarray:
    """Expected response at one covariate row (probability vector for
    multinomial)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        out = predict_mean_matrix(fit.spec, fit.coefficients, x[None, :])
        return out[0] if out.ndim == 2 else float(out[0])
    return predict_mean_matrix(fit.spec, fit.coefficients, x)


def log_likelihood(spec: GlmSpec, X, y, coefficients, weights=None) -> float:
    """Log likelihood at given coefficients (bernoulli/poisson drop data-only
    constants; gaussian uses unit dispersion). Used by fitting and exposed
    for finite-difference checks."""
    X = _as_design(X)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones(X.shape[0]) if weights is None else np.asarray(weights, dtype=np.float64)
    if spec.family == "multinomial-logit":
        K = spec.n_classes
        Y = np.zeros((X.shape[0], K - 1))
        for k in range(1, K):
            Y[:, k - 1] = y == k
        B = np.asarray(coefficients, dtype=np.float64).reshape(K - 1, -1)
        return _multinomial_loglik(X, Y, w, B)
    beta = np.asarray(coefficients, dtype=np.float64).reshape(-1)
    eta = X @ beta
    if spec.family == "bernoulli-logit":
        return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))
    if spec.family == "poisson-log":
        return float(np.sum(w * (y * eta - np.exp(eta))))
    return float(-0.5 * np.sum(w * (y - eta) ** 2))
