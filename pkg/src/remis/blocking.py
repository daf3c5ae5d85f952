"""Blocking of the high-frequency system at the slow sampling rate.

The observed vector at a slow time point ``t`` is

* stock: ``(beta'y_t, D_N y_t, D_N y^f_{t-1}, ..., D_N y^f_{t-N+1})``
* flow:  ``(beta' sum_{j<N} y_{t-j}, D^S_N y_t, D_N y^f_{t-1}, ..., D_N y^f_{t-N+1})``

with ``D_N y_t = y_t - y_{t-N}`` and ``D^S_N y_t = sum_{j<N} (y_{t-j} - y_{t-N-j})``.
Every row is a linear combination of ``beta'y_t`` and ``dy_{t-d}``, which in turn
are read from the differenced states ``x_{t+1}, ..., x_{t-N+2}``.  Unrolling the
state recursion back to ``x_{t-N+1}`` yields the blocked system.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SingularC
from .params import ModelDims, Scheme, VecmParams
from .statespace import DiffStateSpace, diff_state_space, solve_lyapunov


def flow_weights(N) -> np.ndarray:
    """Weights of ``dy_{t-k}``, ``k = 0..2N-2``, in ``D^S_N y_t``."""
    k = np.arange(2 * N - 1)
    return (N - np.abs(k - (N - 1))).astype(float)


def _check_dims(dims: ModelDims, beta):
    dims.require_lag_order()
    beta = np.asarray(beta, dtype=float).reshape(dims.n, dims.r)
    return beta


def _state_index(dims: ModelDims, block):
    if block == 0:
        return slice(0, dims.r)
    start = dims.r + (block - 1) * dims.n
    return slice(start, start + dims.n)


def output_selectors(dims: ModelDims, beta) -> list:
    """Matrices ``L_0..L_{N-1}`` with ``y~_t = sum_k L_k x_{t+1-k}``.

    ``dy_{t-d}`` is read from state ``x_{t+1-k}`` with ``k = min(d, N-1)``.
    """
    beta = _check_dims(dims, beta)
    n, nf, r, N = dims.n, dims.n_f, dims.r, dims.N
    L = [np.zeros((dims.ntilde, dims.m)) for _ in range(N)]

    def put_dy(row_slice, d, coef):
        k = min(d, N - 1)
        L[k][row_slice, _state_index(dims, 1 + d - k)] += coef

    rows_u = slice(0, r)
    rows_d = slice(r, r + n)
    if dims.scheme is Scheme.STOCK:
        L[0][rows_u, _state_index(dims, 0)] = np.eye(r)
        for d in range(N):
            put_dy(rows_d, d, np.eye(n))
    else:
        L[0][rows_u, _state_index(dims, 0)] = N * np.eye(r)
        for i in range(N - 1):
            put_dy(rows_u, i, -(N - 1 - i) * beta.T)
        for d, w in enumerate(flow_weights(N)):
            put_dy(rows_d, d, w * np.eye(n))
    sel = np.eye(n)[:nf]
    for j in range(1, N):
        rows = slice(r + n + (j - 1) * nf, r + n + j * nf)
        for d in range(j, j + N):
            put_dy(rows, d, sel)
    return L


@dataclass
class BlockingMatrix:
    c: np.ndarray
    scheme: Scheme

    @property
    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.c)


def blocking_matrix(dims: ModelDims, beta) -> BlockingMatrix:
    """Invertible state transformation whose first ``r + n`` rows map
    ``x_{t+1}`` to the first two observed blocks.

    Lower row-blocks hold ``D_N y_{t-k}`` while its window fits in the state
    and ``dy_{t-k}`` afterwards; the matrix is block upper triangular with
    identity diagonal blocks.
    """
    beta = _check_dims(dims, beta)
    n, r, p, N, m = dims.n, dims.r, dims.p, dims.N, dims.m
    c = np.zeros((m, m))
    b0 = _state_index(dims, 0)
    if dims.scheme is Scheme.STOCK:
        c[b0, b0] = np.eye(r)
        for d in range(N):
            c[_state_index(dims, 1), _state_index(dims, 1 + d)] = np.eye(n)
    else:
        c[b0, b0] = N * np.eye(r)
        for i in range(N - 1):
            c[b0, _state_index(dims, 1 + i)] = -(N - 1 - i) * beta.T
        for d, w in enumerate(flow_weights(N)):
            c[_state_index(dims, 1), _state_index(dims, 1 + d)] = w * np.eye(n)
    for blk in range(2, p):
        k = blk - 1
        rows = _state_index(dims, blk)
        width = N if k + N <= p - 1 else 1
        for d in range(width):
            c[rows, _state_index(dims, 1 + k + d)] = np.eye(n)
    if np.linalg.cond(c) > 1e12:
        raise SingularC("blocking matrix is numerically singular")
    return BlockingMatrix(c, dims.scheme)


@dataclass
class BlockedSystem:
    """``s_{t+N} = A_bc s_t + B_bc nu^b_t``, ``y~_t = C_bc s_t + D_b nu^b_t``.

    ``s_t = c x_{t-N+1}`` and ``nu^b_t = (nu_t, ..., nu_{t-N+1})``.  The
    uncoordinated matrices ``A_N = A^N``, ``B_b`` and ``C_b`` act on
    ``x_{t-N+1}`` directly.
    """

    A_bc: np.ndarray
    B_bc: np.ndarray
    C_bc: np.ndarray
    D_b: np.ndarray
    sigma_b: np.ndarray
    c: BlockingMatrix
    A_N: np.ndarray
    B_b: np.ndarray
    C_b: np.ndarray
    dims: ModelDims

    @property
    def S_zeta(self) -> np.ndarray:
        """Read-out of the observed vector from the advanced state ``A_bc s_t``."""
        return np.linalg.solve(self.A_bc.T, self.C_bc.T).T


def blocked_matrices(A, B, L):
    """``(A^N, B_b, C_b, D_b)`` from the differenced ``(A, B)`` and selectors ``L``."""
    N = len(L)
    powers = [np.eye(A.shape[0])]
    for _ in range(N):
        powers.append(A @ powers[-1])
    C_b = sum(L[k] @ powers[N - k] for k in range(N))
    B_b = np.hstack([powers[j] @ B for j in range(N)])
    D_b = np.hstack([sum(L[k] @ powers[j - k] @ B for k in range(j + 1)) for j in range(N)])
    return powers[N], B_b, C_b, D_b


def blocked_system(theta: VecmParams, dims: ModelDims) -> BlockedSystem:
    _check_consistent(theta, dims)
    ss = diff_state_space(theta)
    return _blocked_from_ss(ss, theta.sigma, theta.beta, dims)


def _blocked_from_ss(ss: DiffStateSpace, sigma, beta, dims) -> BlockedSystem:
    L = output_selectors(dims, beta)
    cm = blocking_matrix(dims, beta)
    A_N, B_b, C_b, D_b = blocked_matrices(ss.A, ss.B, L)
    cinv = cm.inv
    return BlockedSystem(
        A_bc=cm.c @ A_N @ cinv,
        B_bc=cm.c @ B_b,
        C_bc=C_b @ cinv,
        D_b=D_b,
        sigma_b=np.kron(np.eye(dims.N), sigma),
        c=cm,
        A_N=A_N,
        B_b=B_b,
        C_b=C_b,
        dims=dims,
    )


def _check_consistent(theta: VecmParams, dims: ModelDims):
    if (theta.n, theta.r, theta.p) != (dims.n, dims.r, dims.p):
        raise ConfigError(
            f"parameter shapes (n={theta.n}, r={theta.r}, p={theta.p}) do not match "
            f"dims (n={dims.n}, r={dims.r}, p={dims.p})"
        )


@dataclass
class AutocovSequence:
    """Blocked autocovariances ``gamma[h] = E y~_{t+hN} y~_t'`` for ``h = 0..H``."""

    gamma: list
    dims: ModelDims

    @property
    def N(self) -> int:
        return self.dims.N

    @property
    def H(self) -> int:
        return len(self.gamma) - 1

    @property
    def ntilde(self) -> int:
        return self.gamma[0].shape[0]

    def __getitem__(self, h):
        if h < 0:
            return self.gamma[-h].T
        return self.gamma[h]

    def toeplitz(self, k=None) -> np.ndarray:
        """Block Toeplitz covariance of ``(y~_t, y~_{t-N}, ..., y~_{t-(k-1)N})``."""
        k = self.H + 1 if k is None else k
        return np.block([[self[j - i] for j in range(k)] for i in range(k)])


def blocked_autocov(theta: VecmParams, dims: ModelDims, H=None) -> AutocovSequence:
    bs = blocked_system(theta, dims)
    if H is None:
        H = 2 * dims.m + 2
    gamma_rp = solve_lyapunov(diff_state_space(theta).A, _state_noise(theta))
    return autocov_from_blocked(bs, gamma_rp, H)


def _state_noise(theta):
    ss = diff_state_space(theta)
    return ss.B @ theta.sigma @ ss.B.T


def autocov_from_blocked(bs: BlockedSystem, gamma_rp, H) -> AutocovSequence:
    c = bs.c.c
    g = c @ gamma_rp @ c.T
    S = bs.sigma_b
    gammas = [bs.C_bc @ g @ bs.C_bc.T + bs.D_b @ S @ bs.D_b.T]
    cross = bs.A_bc @ g @ bs.C_bc.T + bs.B_bc @ S @ bs.D_b.T
    for _ in range(H):
        gammas.append(bs.C_bc @ cross)
        cross = bs.A_bc @ cross
    gammas[0] = 0.5 * (gammas[0] + gammas[0].T)
    return AutocovSequence(gammas, bs.dims)
