import dataclasses

import numpy as np
import pytest

from conftest import max_abs
from remis.blocking import AutocovSequence, blocked_autocov, blocked_system
from remis.errors import ConfigError, RankDeficient
from remis.params import system_from_spectrum
from remis.realization import cpf, hankel_matrix, hankel_realization, innovation_from_hankel
from remis.statespace import spectral_radius


def kalman_oracle(bs, steps=500):
    """Prediction-error covariance recursion from zero; the singular output covariance is pseudo-inverted."""
    F, H, Sb = bs.A_bc, bs.C_bc, bs.sigma_b
    Q, R, S = bs.B_bc @ Sb @ bs.B_bc.T, bs.D_b @ Sb @ bs.D_b.T, bs.B_bc @ Sb @ bs.D_b.T
    P = np.zeros_like(F)
    for _ in range(steps):
        L = F @ P @ H.T + S
        P = F @ P @ F.T + Q - L @ np.linalg.pinv(H @ P @ H.T + R, rcond=1e-10, hermitian=True) @ L.T
        P = 0.5 * (P + P.T)
    sig = H @ P @ H.T + R
    return P, (F @ P @ H.T + S) @ np.linalg.pinv(sig, rcond=1e-10, hermitian=True), sig


def markov(A, K, C, k):
    out, M = [], K
    for _ in range(k):
        out.append(C @ M)
        M = A @ M
    return np.hstack(out)


@pytest.fixture(params=["t1", "t2"])
def system(request):
    th, dims = request.getfixturevalue(request.param)
    return th, dims, blocked_system(th, dims), blocked_autocov(th, dims)


# -- canonical projection form -------------------------------------------------------

def test_cpf_reproduces_autocov(system):
    th, dims, bs, g = system
    inn = cpf(bs)
    rep = inn.autocov(5)
    for h in range(6):
        assert max_abs(rep[h] - g[h]) <= 1e-8
    np.testing.assert_array_equal(inn.A, bs.A_bc)
    np.testing.assert_array_equal(inn.C, bs.C_bc)


def test_cpf_matches_kalman_iteration(system):
    _, _, bs, _ = system
    inn = cpf(bs)
    P, K, sig = kalman_oracle(bs)
    assert max_abs(inn.P - P) <= 1e-9
    assert max_abs(inn.sigma - sig) <= 1e-9
    assert max_abs(inn.K - K) <= 1e-9


def test_cpf_no_state_noise(t1):
    th, dims = t1
    bs = blocked_system(th, dims)
    bare = dataclasses.replace(bs, B_bc=np.zeros_like(bs.B_bc))
    inn = cpf(bare)
    assert max_abs(inn.K) <= 1e-12
    np.testing.assert_allclose(inn.sigma, bs.D_b @ bs.sigma_b @ bs.D_b.T, atol=1e-15)


def test_cpf_stability_and_zeros(system):
    _, dims, bs, _ = system
    inn = cpf(bs)
    assert spectral_radius(inn.A) < 1
    # the blocked process has r exact one-lag relations: one zero sits on the unit circle
    assert spectral_radius(inn.A - inn.K @ inn.C) <= 1 + 1e-6
    ev = np.linalg.eigvalsh(inn.sigma)
    assert np.sum(ev > 1e-8 * ev[-1]) == dims.ntilde - dims.r
    assert ev[0] >= -1e-10 * ev[-1]


def test_cpf_observability(system):
    _, dims, bs, _ = system
    obs = np.vstack([bs.C_bc @ np.linalg.matrix_power(bs.A_bc, k) for k in range(dims.m)])
    s = np.linalg.svd(obs, compute_uv=False)
    assert s[-1] > 1e-8 * s[0]


# -- Hankel realization ---------------------------------------------------------------

def test_hankel_order_t1(t1):
    th, dims = t1
    hr = hankel_realization(blocked_autocov(th, dims))
    assert hr.order == 7
    s = hr.singular_values / hr.singular_values[0]
    assert s[6] > 1e-6 and s[7] < 1e-8


def test_hankel_zero_sequence(t1):
    _, dims = t1
    g = AutocovSequence([np.zeros((4, 4)) for _ in range(17)], dims)
    assert hankel_realization(g).order == 0


def test_hankel_rank_deficient_for_singular_last_lag(t1):
    _, dims = t1
    stable = np.array([0.6, -0.3, 0.4 * np.exp(1j), 0.4 * np.exp(-1j), 0.0, 0.75, 0.2])
    th = system_from_spectrum(stable, dims, np.random.default_rng(100))
    g = blocked_autocov(th, dims)
    assert hankel_realization(g).order < 7
    with pytest.raises(RankDeficient):
        hankel_realization(g, m_hint=7)


def test_hankel_reproduces_markov_sequence(system):
    _, _, bs, g = system
    hr = hankel_realization(g)
    M = hr.G
    for h in range(1, g.H + 1):
        assert max_abs(hr.C @ M - g[h]) <= 1e-9 * max_abs(g[0])
        M = hr.A @ M
    assert hr.shift_residual <= 1e-8
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(hr.A)),
                               np.sort_complex(np.linalg.eigvals(bs.A_bc)), atol=1e-7)


def test_hankel_matrix_layout(t1):
    th, dims = t1
    g = blocked_autocov(th, dims, 6)
    Hk = hankel_matrix(g, rows=2, cols=3)
    np.testing.assert_array_equal(Hk[4:8, 8:12], g[4])
    with pytest.raises(ConfigError):
        hankel_matrix(g, rows=4, cols=4)


def test_hankel_needs_lags(t1):
    th, dims = t1
    with pytest.raises(ConfigError):
        hankel_realization(blocked_autocov(th, dims, 0))


# -- innovation form from the realization ------------------------------------------

def test_innovation_from_hankel_reproduces_autocov(system):
    _, _, _, g = system
    inn = innovation_from_hankel(hankel_realization(g), g)
    rep = inn.autocov(5)
    for h in range(6):
        assert max_abs(rep[h] - g[h]) <= 1e-7


def test_innovation_from_hankel_agrees_with_cpf(system):
    _, _, bs, g = system
    a = cpf(bs)
    b = innovation_from_hankel(hankel_realization(g), g)
    assert max_abs(a.sigma - b.sigma) <= 1e-7
    # the gain is unique only on the range of the singular innovation covariance,
    # so compare the basis-free responses to actual innovations
    ma, mb = markov(a.A, a.K @ a.sigma, a.C, 6), markov(b.A, b.K @ b.sigma, b.C, 6)
    assert max_abs(ma - mb) <= 1e-6 * max(1.0, max_abs(ma))
