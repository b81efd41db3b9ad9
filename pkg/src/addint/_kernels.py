"""Hot numeric kernels with a numba lane and a pure-numpy fallback lane.

The iteratively reweighted fits dominate the runtime of the Monte Carlo
harness and the bootstrap, so they are compiled with numba when available.
Set ``ADDINT_NO_NUMBA=1`` to force the vectorised numpy implementations
(same algorithm, same tolerances, same status codes). The active lane is
reported in ``ACTIVE_LANE``; both lanes stay importable for benchmarking.

Family codes: 0 = bernoulli-logit, 1 = poisson-log, 2 = gaussian-identity.
Status codes: 0 = converged, 1 = singular design, 2 = did not converge,
3 = non-finite objective.
"""

from __future__ import annotations

import os

import numpy as np

STATUS_OK = 0
STATUS_SINGULAR = 1
STATUS_NO_CONVERGENCE = 2
STATUS_NONFINITE = 3

FAMILY_LOGIT = 0
FAMILY_LOG = 1
FAMILY_IDENTITY = 2

PIVOT_RTOL = 1e-12
MAX_HALVINGS = 30


def _numba_disabled() -> bool:
    return os.environ.get("ADDINT_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


# ---------------------------------------------------------------------------
# Shared p x p solver. Cholesky with an explicit pivot check so both lanes
# apply the identical rank criterion (pivot >= PIVOT_RTOL * max diagonal).
# ---------------------------------------------------------------------------


def _chol_solve_py(H, g, pivot_rtol):
    p = H.shape[0]
    L = np.zeros((p, p))
    maxd = 0.0
    for j in range(p):
        if H[j, j] > maxd:
            maxd = H[j, j]
    thresh = pivot_rtol * maxd
    for j in range(p):
        s = H[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if s <= thresh or not np.isfinite(s):
            return np.zeros(p), 1
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, p):
            t = H[i, j]
            for k in range(j):
                t -= L[i, k] * L[j, k]
            L[i, j] = t / L[j, j]
    x = g.copy()
    for i in range(p):
        for k in range(i):
            x[i] -= L[i, k] * x[k]
        x[i] /= L[i, i]
    for i in range(p - 1, -1, -1):
        for k in range(i + 1, p):
            x[i] -= L[k, i] * x[k]
        x[i] /= L[i, i]
    return x, 0


# ---------------------------------------------------------------------------
# numpy lane: vectorised IRLS with step halving.
# ---------------------------------------------------------------------------


def _loglik_np(X, y, w, beta, family):
    eta = X @ beta
    if family == FAMILY_LOGIT:
        return float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))
    if family == FAMILY_LOG:
        return float(np.sum(w * (y * eta - np.exp(eta))))
    return float(-0.5 * np.sum(w * (y - eta) ** 2))


def glm_irls_numpy(X, y, w, family, tol_score, tol_coef, max_iter):
    n, p = X.shape
    beta = np.zeros(p)
    H = np.zeros((p, p))
    smax = np.inf
    ll = -np.inf
    force_exit = False
    polishing = False
    it = 0
    for it in range(1, max_iter + 1):
        eta = X @ beta
        if family == FAMILY_LOGIT:
            mu = 1.0 / (1.0 + np.exp(-eta))
            v = mu * (1.0 - mu)
            ll = float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))
        elif family == FAMILY_LOG:
            mu = np.exp(eta)
            v = mu
            ll = float(np.sum(w * (y * eta - mu)))
        else:
            mu = eta
            v = np.ones(n)
            ll = float(-0.5 * np.sum(w * (y - eta) ** 2))
        if not np.isfinite(ll):
            return beta, H, it, STATUS_NONFINITE, smax, ll
        resid = w * (y - mu)
        score = X.T @ resid
        smax = float(np.max(np.abs(score)))
        Xw = X * (w * v)[:, None]
        H = X.T @ Xw
        if force_exit or polishing or smax <= tol_score:
            # one extra Newton step after the score tolerance is first met
            # squares the remaining coefficient error at negligible cost
            if force_exit or polishing or smax == 0.0:
                return beta, H, it, STATUS_OK, smax, ll
            polishing = True
        step, flag = _chol_solve_py(H, score, PIVOT_RTOL)
        if flag != 0:
            if polishing:
                return beta, H, it, STATUS_OK, smax, ll
            return beta, H, it, STATUS_SINGULAR, smax, ll
        lam = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            cand = beta + lam * step
            llc = _loglik_np(X, y, w, cand, family)
            if np.isfinite(llc) and llc >= ll - 1e-10 * (abs(ll) + 1.0):
                delta = float(np.max(np.abs(cand - beta)))
                bscale = max(1.0, float(np.max(np.abs(cand))))
                beta = cand
                accepted = True
                if delta / bscale <= tol_coef:
                    force_exit = True
                break
            lam *= 0.5
        if not accepted:
            if polishing:
                return beta, H, it, STATUS_OK, smax, ll
            return beta, H, it, STATUS_NO_CONVERGENCE, smax, ll
    if polishing:
        return beta, H, it, STATUS_OK, smax, ll
    return beta, H, it, STATUS_NO_CONVERGENCE, smax, ll


# ---------------------------------------------------------------------------
# numba lane: explicit loops, no per-iteration temporaries.
# ---------------------------------------------------------------------------


def _glm_irls_loops(X, y, w, family, tol_score, tol_coef, max_iter):
    n, p = X.shape
    beta = np.zeros(p)
    eta = np.zeros(n)
    mu = np.zeros(n)
    v = np.zeros(n)
    score = np.zeros(p)
    H = np.zeros((p, p))
    smax = np.inf
    ll = -np.inf
    force_exit = False
    polishing = False
    it = 0
    for it in range(1, max_iter + 1):
        ll = 0.0
        for i in range(n):
            e = 0.0
            for j in range(p):
                e += X[i, j] * beta[j]
            eta[i] = e
            if family == 0:
                m = 1.0 / (1.0 + np.exp(-e))
                mu[i] = m
                v[i] = m * (1.0 - m)
                ll += w[i] * (y[i] * e - np.logaddexp(0.0, e))
            elif family == 1:
                m = np.exp(e)
                mu[i] = m
                v[i] = m
                ll += w[i] * (y[i] * e - m)
            else:
                mu[i] = e
                v[i] = 1.0
                ll += -0.5 * w[i] * (y[i] - e) ** 2
        if not np.isfinite(ll):
            return beta, H, it, 3, smax, ll
        for j in range(p):
            score[j] = 0.0
            for k in range(p):
                H[j, k] = 0.0
        for i in range(n):
            r = w[i] * (y[i] - mu[i])
            wv = w[i] * v[i]
            for j in range(p):
                score[j] += X[i, j] * r
                xwj = X[i, j] * wv
                for k in range(j, p):
                    H[j, k] += xwj * X[i, k]
        for j in range(p):
            for k in range(j):
                H[j, k] = H[k, j]
        smax = 0.0
        for j in range(p):
            if abs(score[j]) > smax:
                smax = abs(score[j])
        if force_exit or polishing or smax <= tol_score:
            if force_exit or polishing or smax == 0.0:
                return beta, H, it, 0, smax, ll
            polishing = True
        step, flag = _chol_solve_py(H, score, 1e-12)
        if flag != 0:
            if polishing:
                return beta, H, it, 0, smax, ll
            return beta, H, it, 1, smax, ll
        lam = 1.0
        accepted = False
        for _h in range(30):
            llc = 0.0
            for i in range(n):
                e = 0.0
                for j in range(p):
                    e += X[i, j] * (beta[j] + lam * step[j])
                if family == 0:
                    llc += w[i] * (y[i] * e - np.logaddexp(0.0, e))
                elif family == 1:
                    llc += w[i] * (y[i] * e - np.exp(e))
                else:
                    llc += -0.5 * w[i] * (y[i] - e) ** 2
            if np.isfinite(llc) and llc >= ll - 1e-10 * (abs(ll) + 1.0):
                delta = 0.0
                bscale = 1.0
                for j in range(p):
                    move = abs(lam * step[j])
                    if move > delta:
                        delta = move
                    beta[j] = beta[j] + lam * step[j]
                    if abs(beta[j]) > bscale:
                        bscale = abs(beta[j])
                accepted = True
                if delta / bscale <= tol_coef:
                    force_exit = True
                break
            lam *= 0.5
        if not accepted:
            if polishing:
                return beta, H, it, 0, smax, ll
            return beta, H, it, 2, smax, ll
    if polishing:
        return beta, H, it, 0, smax, ll
    return beta, H, it, 2, smax, ll


if not _numba_disabled():
    try:
        from numba import njit

        _chol_solve_py = njit(cache=True)(_chol_solve_py)  # noqa: F811
        glm_irls_numba = njit(cache=True)(_glm_irls_loops)
        ACTIVE_LANE = "numba"
        glm_irls = glm_irls_numba
    except ImportError:  # pragma: no cover - numba is a declared dependency
        glm_irls_numba = None
        ACTIVE_LANE = "numpy"
        glm_irls = glm_irls_numpy
else:
    glm_irls_numba = None
    ACTIVE_LANE = "numpy"
    glm_irls = glm_irls_numpy
