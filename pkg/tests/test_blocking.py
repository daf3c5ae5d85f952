import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import max_abs, mean_and_se, t1_theta, T1_DIMS, T2_DIMS
from remis.blocking import (
    BlockingMatrix,
    autocov_from_blocked,
    blocked_autocov,
    blocked_system,
    blocking_matrix,
    flow_weights,
)
from remis.errors import LagOrderTooSmall
from remis.params import ModelDims, Scheme, random_system
from remis.simulate import SimConfig, simulate_path
from remis.statespace import diff_state_space, hf_moments


# -- independent constructions from a level path --------------------------------

def shocks_from_path(y, th):
    """VECM residuals; row t is nu_t (valid for t >= p)."""
    dy = np.diff(y, axis=0, prepend=np.nan * y[:1])
    nu = np.full_like(y, np.nan)
    for t in range(th.p, len(y)):
        fit = th.alpha @ (th.beta.T @ y[t - 1])
        for j, ph in enumerate(th.phi, start=1):
            fit = fit + ph @ dy[t - j]
        nu[t] = dy[t] - fit
    return nu


def state_at(y, th, t):
    """x_{t+1} = (beta'y_t, dy_t, ..., dy_{t-p+2})."""
    parts = [th.beta.T @ y[t]] + [y[t - d] - y[t - d - 1] for d in range(th.p - 1)]
    return np.concatenate(parts)


def blocked_vector(y, th, dims, t):
    """Observed blocked vector at time t, straight from its definition."""
    N, nf = dims.N, dims.n_f
    if dims.scheme is Scheme.STOCK:
        first = th.beta.T @ y[t]
        second = y[t] - y[t - N]
    else:
        agg = lambda s: sum(y[s - j] for j in range(N))  # noqa: E731
        first = th.beta.T @ agg(t)
        second = agg(t) - agg(t - N)
    lags = [y[t - j, :nf] - y[t - j - N, :nf] for j in range(1, N)]
    return np.concatenate([first, second] + lags)


def _path(th, T=400, seed=0):
    return simulate_path(th, None, SimConfig(T, burn_in=50), rng=np.random.default_rng(seed))


# -- blocking matrix ------------------------------------------------------------

def test_flow_weights():
    np.testing.assert_array_equal(flow_weights(2), [1, 2, 1])
    np.testing.assert_array_equal(flow_weights(3), [1, 2, 3, 2, 1])


def test_blocking_matrix_stock_pattern():
    c = blocking_matrix(T1_DIMS, t1_theta().beta).c
    assert c.shape == (7, 7)
    np.testing.assert_array_equal(c[1:3], np.hstack([np.zeros((2, 1)), np.eye(2), np.eye(2), np.zeros((2, 2))]))
    np.testing.assert_array_equal(c[0], [1, 0, 0, 0, 0, 0, 0])


def test_blocking_matrix_flow_first_row():
    th = t1_theta(5)
    c = blocking_matrix(T2_DIMS, th.beta).c
    np.testing.assert_array_equal(c[0], [2, -1, 1, 0, 0, 0, 0, 0, 0])


@pytest.mark.parametrize("scheme", ["stock", "flow"])
def test_blocking_matrix_maps_state_to_observed_blocks(scheme):
    th = t1_theta(5)
    dims = ModelDims(2, 1, 1, 5, 2, scheme)
    c = blocking_matrix(dims, th.beta).c
    y = _path(th)
    for t in range(20, 40):
        np.testing.assert_allclose(c[:3] @ state_at(y, th, t), blocked_vector(y, th, dims, t)[:3], atol=1e-9)


def test_lag_order_enforced():
    with pytest.raises(LagOrderTooSmall):
        blocking_matrix(ModelDims(2, 1, 1, 3, 2, "stock"), [[1.0], [-1.0]])
    with pytest.raises(LagOrderTooSmall):
        blocking_matrix(ModelDims(2, 1, 1, 4, 2, "flow"), [[1.0], [-1.0]])


# -- blocked system ---------------------------------------------------------------

@pytest.mark.parametrize("fixture", ["t1", "t2"])
def test_blocked_system_reproduces_path(fixture, request):
    th, dims = request.getfixturevalue(fixture)
    bs = blocked_system(th, dims)
    y = _path(th, seed=3)
    nu = shocks_from_path(y, th)
    N = dims.N
    for t in range(30, 60):
        noise = np.concatenate([nu[t - j] for j in range(N)])
        pred = bs.C_b @ state_at(y, th, t - N) + bs.D_b @ noise
        np.testing.assert_allclose(pred, blocked_vector(y, th, dims, t), atol=1e-9)
        nxt = bs.A_N @ state_at(y, th, t - N) + bs.B_b @ noise
        np.testing.assert_allclose(nxt, state_at(y, th, t), atol=1e-9)


def test_blocked_system_shapes_and_spectrum(t1):
    th, dims = t1
    bs = blocked_system(th, dims)
    assert bs.C_bc.shape == (4, 7)
    assert bs.D_b.shape == (4, 4) and bs.B_bc.shape == (7, 4)
    lam = np.linalg.eigvals(diff_state_space(th).A)
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(bs.A_bc)), np.sort_complex(lam ** 2), atol=1e-12)
    c = bs.c.c
    np.testing.assert_allclose(bs.A_bc, c @ np.linalg.matrix_power(diff_state_space(th).A, 2) @ np.linalg.inv(c))


def test_trailing_rows_identity_stock(t1):
    th, dims = t1
    bs = blocked_system(th, dims)
    Ac = bs.A_bc  # N = 2 so A_c^N = A_bc; the one-step matrix is c A c^-1
    c = bs.c.c
    A1 = c @ diff_state_space(th).A @ np.linalg.inv(c)
    r, n, nf, N = dims.r, dims.n, dims.n_f, dims.N
    for j in range(1, N):
        rows = slice(r + n + (j - 1) * nf, r + n + j * nf)
        expect = np.linalg.matrix_power(A1, N - j)[r: r + nf]
        assert max_abs(bs.C_bc[rows] - expect) <= 1e-12
    assert Ac.shape == (7, 7)


# -- autocovariances --------------------------------------------------------------

def test_autocov_zero_noise(t1):
    th, dims = t1
    th.sigma = np.zeros((2, 2))
    g = blocked_autocov(th, dims)
    assert all(max_abs(x) == 0.0 for x in g.gamma)


def test_autocov_default_length_and_symmetry(t1):
    th, dims = t1
    g = blocked_autocov(th, dims)
    assert g.H == 2 * dims.m + 2 and g.ntilde == 4 and g.N == 2
    assert max_abs(g[0] - g[0].T) == 0.0
    np.testing.assert_array_equal(g[-3], g[3].T)


def test_similarity_invariance(t1):
    th, dims = t1
    bs = blocked_system(th, dims)
    G = hf_moments(th).gamma_rp
    T = np.random.default_rng(5).standard_normal((7, 7))
    Ti = np.linalg.inv(T)
    moved = dataclasses.replace(bs, A_bc=Ti @ bs.A_bc @ T, B_bc=Ti @ bs.B_bc, C_bc=bs.C_bc @ T,
                                c=BlockingMatrix(Ti @ bs.c.c, bs.c.scheme))
    a, b = autocov_from_blocked(bs, G, 10), autocov_from_blocked(moved, G, 10)
    for h in range(11):
        assert max_abs(a[h] - b[h]) <= 1e-10 * max_abs(a[0])


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 1000), scheme=st.sampled_from(["stock", "flow"]))
def test_block_toeplitz_psd(seed, scheme):
    dims = ModelDims(2, 1, 1, 4 if scheme == "stock" else 5, 2, scheme)
    g = blocked_autocov(random_system(dims, seed=seed), dims)
    T = g.toeplitz()
    ev = np.linalg.eigvalsh(0.5 * (T + T.T))
    assert ev[0] >= -1e-10 * ev[-1]


def test_all_fast_stock_flow_aggregation():
    stock = ModelDims(2, 2, 1, 5, 2, "stock")
    flow = ModelDims(2, 2, 1, 5, 2, "flow")
    th = random_system(flow, seed=4)
    gs, gf = blocked_autocov(th, stock, 6), blocked_autocov(th, flow, 6)
    # flow's window-sum difference is the stock difference plus the lagged difference block
    M = np.zeros((4, 5))
    M[:2, 1:3] = np.eye(2)
    M[:2, 3:5] = np.eye(2)
    M[2:, 3:5] = np.eye(2)
    for h in range(7):
        assert max_abs(M @ gs[h] @ M.T - gf[h][1:, 1:]) <= 1e-10 * max_abs(gf[0])


@pytest.mark.parametrize("fixture", ["t1", "t2"])
def test_autocov_matches_simulation(fixture, request):
    th, dims = request.getfixturevalue(fixture)
    y = request.getfixturevalue("t1_long_path" if fixture == "t1" else "t2_long_path")
    g = blocked_autocov(th, dims, 2)
    N = dims.N
    Y = _blocked_matrix(y, th, dims, np.arange(4 * N + 4, len(y), N))
    for h in range(3):
        past, future = Y[: len(Y) - h], Y[h:]
        for i in range(dims.ntilde):
            for j in range(dims.ntilde):
                est, se = mean_and_se(future[:, i] * past[:, j])
                assert abs(est - g[h][i, j]) <= 3 * se, (h, i, j, est, g[h][i, j], se)


def _blocked_matrix(y, th, dims, times):
    N, nf = dims.N, dims.n_f
    if dims.scheme is Scheme.STOCK:
        lev = y[times]
        first = lev @ th.beta
        second = lev - y[times - N]
    else:
        csum = np.vstack([np.zeros((1, y.shape[1])), np.cumsum(y, axis=0)])
        agg = lambda s: csum[s + 1] - csum[s + 1 - N]  # noqa: E731
        first = agg(times) @ th.beta
        second = agg(times) - agg(times - N)
    lags = [y[times - j, :nf] - y[times - j - N, :nf] for j in range(1, N)]
    return np.hstack([first, second] + lags)
