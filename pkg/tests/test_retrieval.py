from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import max_abs, t1_theta, T1_DIMS, T2_DIMS
from remis.blocking import AutocovSequence, blocked_autocov, blocking_matrix
from remis.errors import AssumptionViolation, ConfigError, RankDeficient, SingularSum
from remis.params import (
    ModelDims,
    Scheme,
    VecmParams,
    check_all,
    param_distance,
    param_scale,
    random_system,
    system_from_spectrum,
)
from remis.realization import hankel_realization
from remis.retrieval import (
    EigStructure,
    PartialVecm,
    recover_eigstructure,
    recover_sigma,
    recover_T_R,
    recover_var,
    retrieve,
    retrieve_from_realization,
)
from remis.statespace import diff_state_space, hf_moments


@pytest.fixture(params=["t1", "t2"])
def exact(request):
    th, dims = request.getfixturevalue(request.param)
    g = blocked_autocov(th, dims)
    return th, dims, g, hankel_realization(g, m_hint=dims.m)


# -- eigenstructure -------------------------------------------------------------------

def test_ratio_picks_root_from_fast_rows():
    dims = ModelDims(2, 1, 1, 4, 2, "stock")
    # one mode with lambda^2 = 0.25; fast rows carry 0.5 v (lag one) and 0.25 v (current)
    real = SimpleNamespace(A=np.array([[0.25]]), C=np.array([[0.0], [0.25], [0.0], [0.5]]))
    es = recover_eigstructure(real, [[1.0], [-1.0]], dims)
    assert es.lam[0] == pytest.approx(0.5)


def test_eigenvalues_match_differenced_system(exact):
    th, dims, _, hr = exact
    es = recover_eigstructure(hr, th.beta, dims)
    truth = np.linalg.eigvals(diff_state_space(th).A)
    np.testing.assert_allclose(np.sort_complex(es.lam), np.sort_complex(truth), atol=1e-8)
    assert es.imag_residual <= 1e-9
    assert np.any(np.abs(truth.imag) > 0.1)  # the instance has conjugate pairs


def test_unit_eigenvalue_assigned_directly():
    real = SimpleNamespace(A=np.array([[1.0]]), C=np.zeros((4, 1)))
    es = recover_eigstructure(real, [[1.0], [-1.0]], T1_DIMS)
    assert es.lam[0] == 1.0


# -- similarity and state matrix ------------------------------------------------------

def test_cR_equals_T(exact):
    th, dims, _, hr = exact
    es = recover_eigstructure(hr, th.beta, dims)
    cm = blocking_matrix(dims, th.beta)
    T, R = recover_T_R(hr, es, cm, dims, th.beta)
    assert max_abs(cm.c @ R - T) <= 1e-9 * max_abs(T)
    A = diff_state_space(th).A
    AN = np.linalg.matrix_power(A, dims.N)
    assert max_abs(np.linalg.solve(R, AN @ R) - hr.A) <= 1e-9


def test_planted_similarity_recovered(exact):
    th, dims, _, hr = exact
    cm = blocking_matrix(dims, th.beta)
    _, R = recover_T_R(hr, recover_eigstructure(hr, th.beta, dims), cm, dims, th.beta)
    T0 = np.random.default_rng(11).standard_normal((dims.m, dims.m))
    moved = SimpleNamespace(A=np.linalg.solve(T0, hr.A @ T0), C=hr.C @ T0)
    _, R2 = recover_T_R(moved, recover_eigstructure(moved, th.beta, dims), cm, dims, th.beta)
    assert max_abs(R2 - R @ T0) <= 1e-8 * max_abs(R @ T0)


@pytest.mark.parametrize("dims", [T1_DIMS, T2_DIMS])
def test_root_of_unity_makes_lag_sum_singular(dims):
    m = dims.m
    Ac = np.diag(np.r_[-1.0, np.linspace(0.2, 0.7, m - 1)])
    es = EigStructure(np.diag(Ac) ** 2, np.diag(Ac).astype(complex), np.eye(m), Ac)
    real = SimpleNamespace(A=Ac @ Ac, C=np.ones((dims.ntilde, m)))
    with pytest.raises(SingularSum):
        recover_T_R(real, es, blocking_matrix(dims, [[1.0], [-1.0]]), dims, [[1.0], [-1.0]])


def test_recover_var_structure(exact):
    th, dims, _, hr = exact
    es = recover_eigstructure(hr, th.beta, dims)
    _, R = recover_T_R(hr, es, blocking_matrix(dims, th.beta), dims, th.beta)
    part = recover_var(R, es, th.beta, dims)
    n, r, p = dims.n, dims.r, dims.p
    for k in range(p - 2):
        rows = slice(r + n + k * n, r + n + (k + 1) * n)
        cols = slice(r + k * n, r + (k + 1) * n)
        assert max_abs(part.A[rows, cols] - np.eye(n)) <= 1e-9
    assert part.A[0, 0] == pytest.approx(float((th.beta.T @ part.alpha)[0, 0]) + 1, abs=1e-8)
    assert max_abs(part.alpha - th.alpha) <= 1e-8
    assert max_abs(part.phi - th.phi) <= 1e-8
    assert part.structure_residual <= 1e-9


# -- covariances and innovations ------------------------------------------------------

def test_gamma_rp_and_sigma(exact):
    th, dims, g, _ = exact
    res = retrieve(g, th.beta, dims)
    assert max_abs(res.gamma_rp - hf_moments(th).gamma_rp) <= 1e-7
    assert np.linalg.eigvalsh(res.gamma_rp)[0] > 0
    assert max_abs(res.theta.sigma - th.sigma) <= 1e-7
    assert res.diagnostics["sigma_asymmetry"] <= 1e-8


def test_sigma_formula_without_short_run_lags():
    th = VecmParams([[-0.4], [0.2]], [[1.0], [-1.0]], [np.zeros((2, 2))], np.array([[1.0, 0.3], [0.3, 2.0]]))
    dims = ModelDims(2, 1, 1, 2, 2, "stock")
    mom = hf_moments(th)
    part = PartialVecm(th.alpha, th.beta, th.phi, diff_state_space(th).A, 0.0)
    sigma, _ = recover_sigma(part, mom.gamma_rp, dims)
    direct = mom.gamma_dy(0) - th.alpha @ mom.gamma_beta_dy(-1)
    np.testing.assert_allclose(sigma, direct, atol=1e-12)
    np.testing.assert_allclose(sigma, th.sigma, atol=1e-10)


# -- full map -----------------------------------------------------------------------

def test_round_trip_exact(exact):
    th, dims, g, _ = exact
    res = retrieve(g, th.beta, dims)
    assert param_distance(res.theta, th) <= 1e-6 * (1 + param_scale(th))
    assert check_all(res.theta, dims).passed
    assert res.diagnostics["eigvec_relation_residual"] <= 1e-8
    for key in ("cond_R", "cond_W", "consistency_A", "structure_residual", "lyapunov_residual", "condition"):
        assert key in res.diagnostics


def test_needs_enough_lags(t1):
    th, dims = t1
    with pytest.raises(ConfigError):
        retrieve(blocked_autocov(th, dims, 2 * dims.m), th.beta, dims)


def test_rejects_unnormalised_beta(t1):
    th, dims = t1
    with pytest.raises(ConfigError):
        retrieve(blocked_autocov(th, dims), [[2.0], [-1.0]], dims)


def test_basis_invariance(exact):
    th, dims, g, hr = exact
    base = retrieve_from_realization(hr, g, th.beta, dims).theta
    rng = np.random.default_rng(3)
    for _ in range(3):
        T0 = rng.standard_normal((dims.m, dims.m))
        moved = SimpleNamespace(A=np.linalg.solve(T0, hr.A @ T0), C=hr.C @ T0)
        assert param_distance(retrieve_from_realization(moved, g, th.beta, dims).theta, base) <= 1e-7


def test_continuity_in_moments(t1):
    th, dims = t1
    g = blocked_autocov(th, dims)
    kappa = retrieve(g, th.beta, dims).diagnostics["condition"]
    rng = np.random.default_rng(8)
    eta = 1e-8
    for _ in range(5):
        noisy = [x + eta * rng.standard_normal(x.shape) for x in g.gamma]
        noisy[0] = 0.5 * (noisy[0] + noisy[0].T)
        est = retrieve(AutocovSequence(noisy, dims), th.beta, dims, strict=False).theta
        assert param_distance(est, th) <= eta * kappa


def _singular_last_lag(seed, dims):
    stable = np.array([0.6, -0.3, 0.4 * np.exp(1j), 0.4 * np.exp(-1j), 0.0, 0.75, 0.2])
    if dims.p == 5:
        stable = np.r_[stable, 0.35, -0.55]
    return system_from_spectrum(stable, dims, np.random.default_rng(seed))


@pytest.mark.parametrize("dims", [T1_DIMS, T2_DIMS])
def test_detection_instead_of_estimate(dims):
    for seed in range(3):
        th = _singular_last_lag(seed, dims)
        with pytest.raises(RankDeficient):
            retrieve(blocked_autocov(th, dims), th.beta, dims)


def test_singular_noise_never_returns_admissible(t1):
    th, dims = t1
    th.sigma = np.array([[1.0, 1.0], [1.0, 1.0]])
    try:
        res = retrieve(blocked_autocov(th, dims), th.beta, dims)
    except AssumptionViolation:
        return
    assert not check_all(res.theta, dims).passed


STOCK_SHAPE = ModelDims(2, 1, 1, 4, 2, Scheme.STOCK)
FLOW_SHAPE = ModelDims(2, 1, 1, 5, 2, Scheme.FLOW)


@pytest.mark.parametrize("dims", [STOCK_SHAPE, FLOW_SHAPE], ids=["stock", "flow"])
def test_round_trip_random_systems(dims):
    for seed in range(50):
        th = random_system(dims, seed=seed)
        res = retrieve(blocked_autocov(th, dims), th.beta, dims)
        assert param_distance(res.theta, th) <= 1e-6 * (1 + param_scale(th)), seed


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(1000, 100_000), scheme=st.sampled_from(["stock", "flow"]))
def test_eigvec_relation_random(seed, scheme):
    dims = STOCK_SHAPE if scheme == "stock" else FLOW_SHAPE
    th = random_system(dims, seed=seed)
    res = retrieve(blocked_autocov(th, dims), th.beta, dims)
    assert res.diagnostics["eigvec_relation_residual"] <= 1e-8
