import numpy as np
import pytest

from remis.params import ModelDims, Scheme, VecmParams


def t1_theta(p=4):
    """Stock instance: two variables, one fast, rank one, N = 2."""
    phis = [0.2, 0.1, 0.05, 0.025][: p - 1]
    return VecmParams(
        alpha=np.array([[-0.4], [0.2]]),
        beta=np.array([[1.0], [-1.0]]),
        phi=np.array([c * np.eye(2) for c in phis]),
        sigma=np.eye(2),
    )


T1_DIMS = ModelDims(n=2, n_f=1, r=1, p=4, N=2, scheme=Scheme.STOCK)
T2_DIMS = ModelDims(n=2, n_f=1, r=1, p=5, N=2, scheme=Scheme.FLOW)


@pytest.fixture
def t1():
    return t1_theta(4), T1_DIMS


@pytest.fixture
def t2():
    # the lag pattern continues by halving (0.2, 0.1, 0.05, 0.025); a zero last lag would break I1
    return t1_theta(5), T2_DIMS


def max_abs(x):
    x = np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


def mean_and_se(z, batches=200):
    """Sample mean of a stationary series and its batch-means standard error."""
    z = np.asarray(z, dtype=float)
    k = len(z) // batches
    means = z[: k * batches].reshape(batches, k).mean(axis=1)
    return float(z.mean()), float(means.std(ddof=1) / np.sqrt(batches))


@pytest.fixture(scope="session")
def t1_long_path():
    from remis.simulate import SimConfig, simulate_path

    return simulate_path(t1_theta(4), None, SimConfig(1_000_000), rng=np.random.default_rng(2024))


@pytest.fixture(scope="session")
def t2_long_path():
    from remis.simulate import SimConfig, simulate_path

    return simulate_path(t1_theta(5), None, SimConfig(1_000_000), rng=np.random.default_rng(2024))
