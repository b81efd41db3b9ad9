"""Both kernel lanes implement the same fits."""

import numpy as np
import pytest

from addint import _kernels
from addint._kernels import (
    FAMILY_IDENTITY,
    FAMILY_LOG,
    FAMILY_LOGIT,
    STATUS_OK,
    STATUS_SINGULAR,
    glm_irls_numpy,
)


def _problem(family, n=600, p=3, seed=0):
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    beta = np.array([-0.4, 0.5, -0.3])[:p]
    eta = X @ beta
    if family == FAMILY_LOGIT:
        y = (rng.random(n) < 1 / (1 + np.exp(-eta))).astype(float)
    elif family == FAMILY_LOG:
        y = rng.poisson(np.exp(eta)).astype(float)
    else:
        y = eta + rng.normal(size=n)
    w = rng.uniform(0.5, 2.0, size=n)
    return X, y, w


@pytest.mark.parametrize("family", [FAMILY_LOGIT, FAMILY_LOG, FAMILY_IDENTITY])
def test_numpy_lane_converges(family):
    X, y, w = _problem(family)
    beta, info, iters, status, smax, ll = glm_irls_numpy(X, y, w, family, 1e-8, 1e-10, 100)
    assert status == STATUS_OK
    assert smax <= 1e-8
    assert np.all(np.isfinite(beta))


@pytest.mark.skipif(_kernels.glm_irls_numba is None, reason="numba lane disabled")
@pytest.mark.parametrize("family", [FAMILY_LOGIT, FAMILY_LOG, FAMILY_IDENTITY])
def test_lanes_agree(family):
    X, y, w = _problem(family, seed=family + 1)
    out_np = glm_irls_numpy(X, y, w, family, 1e-8, 1e-10, 100)
    out_nb = _kernels.glm_irls_numba(X, y, w, family, 1e-8, 1e-10, 100)
    assert out_np[3] == out_nb[3] == STATUS_OK
    np.testing.assert_allclose(out_nb[0], out_np[0], rtol=0, atol=1e-8)
    np.testing.assert_allclose(out_nb[1], out_np[1], rtol=1e-8)


def test_singular_design_flagged_in_both_lanes():
    n = 100
    X = np.column_stack([np.ones(n), np.zeros(n)])
    y = np.r_[np.ones(40), np.zeros(60)].astype(float)
    w = np.ones(n)
    lanes = [glm_irls_numpy]
    if _kernels.glm_irls_numba is not None:
        lanes.append(_kernels.glm_irls_numba)
    for lane in lanes:
        status = lane(X, y, w, FAMILY_LOGIT, 1e-8, 1e-10, 100)[3]
        assert status == STATUS_SINGULAR
