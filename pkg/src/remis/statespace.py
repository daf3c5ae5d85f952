"""Companion form, differenced state-space form and exact second moments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import Unstable, UnstableDiffSystem
from .params import TOL_UNIT, VarParams, VecmParams, companion_matrix


@dataclass
class CompanionSystem:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)


def companion(var: VarParams) -> CompanionSystem:
    A = companion_matrix(var.coefs)
    n, k = var.n, A.shape[0]
    B = np.zeros((k, n))
    B[:n] = np.eye(n)
    return CompanionSystem(A, B, A[:n].copy())


@dataclass
class DiffStateSpace:
    """State ``x_{t+1} = (beta' y_t, dy_t, ..., dy_{t-p+2})`` with
    ``x_{t+1} = A x_t + B nu_t`` and output ``(beta' y_t, dy_t) = C x_t + D nu_t``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    n: int
    r: int
    p: int

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def block(self, i) -> slice:
        """Slice of the state belonging to block ``i`` (0 is ``beta'y``, ``i >= 1`` is ``dy`` lag ``i-1``)."""
        if i == 0:
            return slice(0, self.r)
        start = self.r + (i - 1) * self.n
        return slice(start, start + self.n)


def spectral_radius(A) -> float:
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def diff_state_space(theta: VecmParams, tol=TOL_UNIT) -> DiffStateSpace:
    n, r, p = theta.n, theta.r, theta.p
    m = r + n * (p - 1)
    bt = theta.beta.T
    phis = np.hstack(list(theta.phi))
    top = np.vstack([
        np.hstack([bt @ theta.alpha + np.eye(r), bt @ phis]),
        np.hstack([theta.alpha, phis]),
    ])
    A = np.zeros((m, m))
    A[: r + n] = top
    if p > 2:
        A[r + n:, r: r + n * (p - 2)] = np.eye(n * (p - 2))
    B = np.zeros((m, n))
    B[:r] = bt
    B[r: r + n] = np.eye(n)
    C = A[: r + n].copy()
    D = B[: r + n].copy()
    rho = spectral_radius(A)
    if rho >= 1.0 - tol:
        raise UnstableDiffSystem(f"spectral radius of the differenced system is {rho:.6g}")
    return DiffStateSpace(A, B, C, D, n, r, p)


def solve_lyapunov(A, Q) -> np.ndarray:
    """Solve ``G = A G A' + Q`` for stable ``A``."""
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if A.size == 0:
        return np.zeros_like(Q)
    rho = spectral_radius(A)
    if rho >= 1.0:
        raise Unstable(f"Lyapunov equation needs a stable matrix, spectral radius {rho:.6g}")
    Q = 0.5 * (Q + Q.T)
    G = sla.solve_discrete_lyapunov(A, Q, method="bilinear" if A.shape[0] > 10 else "direct")
    G = 0.5 * (G + G.T)
    # one refinement step against the exact residual
    res = A @ G @ A.T + Q - G
    if np.max(np.abs(res)) > 1e-12 * max(1.0, np.max(np.abs(Q))):
        G = G + sla.solve_discrete_lyapunov(A, 0.5 * (res + res.T), method="bilinear")
        G = 0.5 * (G + G.T)
    return G


@dataclass
class HfMoments:
    """Exact stationary moments of the differenced state.

    ``state_cov[h] = E x_{t+h} x_t'`` for ``h = 0..H``; the named accessors
    read the ``beta'y`` and ``dy`` blocks from it and accept negative lags.
    """

    gamma_rp: np.ndarray
    state_cov: list
    n: int
    r: int
    p: int

    @property
    def H(self) -> int:
        return len(self.state_cov) - 1

    def _lag(self, h, i, j):
        ri = slice(0, self.r) if i == 0 else slice(self.r, self.r + self.n)
        rj = slice(0, self.r) if j == 0 else slice(self.r, self.r + self.n)
        if h >= 0:
            return self.state_cov[h][ri, rj]
        return self.state_cov[-h][rj, ri].T

    def gamma_dy(self, h) -> np.ndarray:
        """``E dy_{t+h} dy_t'``."""
        return self._lag(h, 1, 1)

    def gamma_beta(self, h) -> np.ndarray:
        """``E beta'y_{t+h} (beta'y_t)'``."""
        return self._lag(h, 0, 0)

    def gamma_beta_dy(self, h) -> np.ndarray:
        """``E beta'y_{t+h} dy_t'``."""
        return self._lag(h, 0, 1)

    def gamma_dy_beta(self, h) -> np.ndarray:
        """``E dy_{t+h} (beta'y_t)'``."""
        return self._lag(h, 1, 0)


def hf_moments(theta: VecmParams, H=None) -> HfMoments:
    ss = diff_state_space(theta)
    if H is None:
        H = 2 * ss.m + 2
    gamma = solve_lyapunov(ss.A, ss.B @ theta.sigma @ ss.B.T)
    covs = [gamma]
    for _ in range(H):
        covs.append(ss.A @ covs[-1])
    return HfMoments(gamma, covs, theta.n, theta.r, theta.p)
