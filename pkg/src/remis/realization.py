"""Innovation-form representations and covariance-Hankel realization."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .blocking import AutocovSequence, BlockedSystem
from .errors import ConfigError, NonPDInnovation, RankDeficient, RiccatiDivergence
from .params import TOL_RANK
from .statespace import solve_lyapunov, spectral_radius


@dataclass
class InnovationForm:
    """``s_{t+1} = A s_t + K e_t``, ``y_t = C s_t + e_t`` with ``E e e' = sigma``."""

    A: np.ndarray
    K: np.ndarray
    C: np.ndarray
    sigma: np.ndarray
    P: np.ndarray = None

    @property
    def m(self) -> int:
        return self.A.shape[0]

    def autocov(self, H) -> list:
        """``E y_{t+h} y_t'`` for ``h = 0..H``."""
        KS = self.K @ self.sigma
        pi = solve_lyapunov(self.A, KS @ self.K.T)
        out = [self.C @ pi @ self.C.T + self.sigma]
        cross = self.A @ pi @ self.C.T + KS
        for _ in range(H):
            out.append(self.C @ cross)
            cross = self.A @ cross
        return out

    def transform(self, T) -> "InnovationForm":
        """Same system in coordinates ``s' = T^{-1} s``."""
        Ti = np.linalg.inv(T)
        P = None if self.P is None else Ti @ self.P @ Ti.T
        return InnovationForm(Ti @ self.A @ T, Ti @ self.K, self.C @ T, self.sigma.copy(), P)


def psd_pinv(M, rcond=1e-10):
    """Pseudo-inverse of a symmetric PSD matrix with a relative eigenvalue cutoff."""
    return np.linalg.pinv(0.5 * (M + M.T), rcond=rcond, hermitian=True)


def kalman_riccati_step(P, F, H, Q, R, S):
    """One step of the one-step-ahead prediction covariance recursion.

    The blocked observations carry ``r`` exact linear dependencies on their
    own past, so the innovation covariance is singular and is pseudo-inverted.
    """
    gain_num = F @ P @ H.T + S
    P_new = F @ P @ F.T + Q - gain_num @ psd_pinv(H @ P @ H.T + R) @ gain_num.T
    return 0.5 * (P_new + P_new.T)


def _iterate(step, P0, max_iter=20000, tol=1e-14):
    P = P0
    for _ in range(max_iter):
        P_new = step(P)
        if not np.all(np.isfinite(P_new)):
            break
        if np.max(np.abs(P_new - P)) <= tol * max(1.0, np.max(np.abs(P_new))):
            return P_new
        P = P_new
    raise RiccatiDivergence("Riccati iteration did not converge")


def _solve_dare(a, b, q, r, s):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return sla.solve_discrete_are(a, b, q, r, s=s)


def _riccati_residual(P, step):
    return float(np.max(np.abs(step(P) - P), initial=0.0))


def cpf(bs: BlockedSystem) -> InnovationForm:
    """Steady-state Kalman predictor of the blocked system (innovation form
    in the coordinates of ``bs``)."""
    F, Hm = bs.A_bc, bs.C_bc
    S_b = bs.sigma_b
    Q = bs.B_bc @ S_b @ bs.B_bc.T
    R = bs.D_b @ S_b @ bs.D_b.T
    S = bs.B_bc @ S_b @ bs.D_b.T
    Q, R = 0.5 * (Q + Q.T), 0.5 * (R + R.T)
    step = lambda P: kalman_riccati_step(P, F, Hm, Q, R, S)  # noqa: E731
    P = _solve_riccati(step, F.shape[0], lambda: _solve_dare(F.T, Hm.T, Q, R, S),
                       max(1.0, np.max(np.abs(Q)), np.max(np.abs(R))))
    return _complete(F, Hm, P, Hm @ P @ Hm.T + R, F @ P @ Hm.T + S)


def _solve_riccati(step, m, direct, scale):
    """Direct solver when it succeeds and satisfies the fixed point,
    otherwise the recursion started at zero."""
    try:
        P = direct()
        if np.all(np.isfinite(P)) and _riccati_residual(P, step) <= 1e-10 * scale:
            return 0.5 * (P + P.T)
    except (ValueError, np.linalg.LinAlgError):
        pass
    return _iterate(step, np.zeros((m, m)))


def _complete(A, C, P, sig, gain_num):
    sig = 0.5 * (sig + sig.T)
    ev = np.linalg.eigvalsh(sig)
    if ev[-1] <= 0 or ev[0] < -1e-8 * ev[-1]:
        raise NonPDInnovation(f"innovation covariance is not positive semidefinite (eigenvalues {ev})")
    K = gain_num @ psd_pinv(sig)
    return InnovationForm(A.copy(), K, C.copy(), sig, P)


def positive_real_doubling(A, G, C, g0, max_doublings=80, tol=1e-14):
    """Minimal solution of the positive-real Riccati equation.

    With ``X = -P`` the forward recursion from ``P = 0`` is a filtering
    Riccati recursion; the doubling iteration below returns its ``2^k``-th
    iterate, which matters here because the blocked spectrum is singular and
    the plain recursion converges only sublinearly.
    """
    m = A.shape[0]
    g0_inv = np.linalg.inv(g0)
    F = A - G @ g0_inv @ C
    Ak = F.T
    Gk = C.T @ g0_inv @ C
    Hk = -G @ g0_inv @ G.T
    eye = np.eye(m)
    for _ in range(max_doublings):
        W = np.linalg.solve(eye + Gk @ Hk, eye)
        A_next = Ak @ W @ Ak
        G_next = Gk + Ak @ W @ Gk @ Ak.T
        H_next = Hk + Ak.T @ Hk @ W @ Ak
        H_next = 0.5 * (H_next + H_next.T)
        G_next = 0.5 * (G_next + G_next.T)
        done = np.max(np.abs(H_next - Hk)) <= tol * max(1.0, np.max(np.abs(H_next)))
        Ak, Gk, Hk = A_next, G_next, H_next
        if done:
            break
    if not np.all(np.isfinite(Hk)):
        raise np.linalg.LinAlgError("doubling iteration diverged")
    return -Hk


@dataclass
class HankelRealization:
    """Minimal realisation ``gamma(h) = C A^{h-1} G`` (``h >= 1``) in balanced coordinates."""

    A: np.ndarray
    G: np.ndarray
    C: np.ndarray
    order: int
    singular_values: np.ndarray
    shift_residual: float = 0.0
    diagnostics: dict = field(default_factory=dict)


def hankel_matrix(gamma: AutocovSequence, rows=None, cols=None) -> np.ndarray:
    """Block Hankel matrix with block ``(i, j) = gamma(i + j + 1)`` (lags in slow periods)."""
    H = gamma.H
    if rows is None:
        rows = (H + 1) // 2
    if cols is None:
        cols = H + 1 - rows
    if rows < 1 or cols < 1 or rows + cols - 1 > H:
        raise ConfigError(f"Hankel of {rows}x{cols} blocks needs lags up to {rows + cols - 1}, have {H}")
    return np.block([[gamma[i + j + 1] for j in range(cols)] for i in range(rows)])


def numerical_rank(s, tol=TOL_RANK) -> int:
    if s.size == 0 or s[0] <= 0:
        return 0
    return int(np.sum(s > tol * s[0]))


def hankel_realization(gamma: AutocovSequence, m_hint=None, tol=TOL_RANK, rows=None) -> HankelRealization:
    """Ho-Kalman realisation from the covariance Hankel matrix.

    Without ``m_hint`` the order is the numerical rank.  With ``m_hint`` the
    factorisation is truncated at ``m_hint`` (so sample moments, whose Hankel
    matrix has full rank, can be used), and :class:`RankDeficient` is raised if
    the Hankel matrix has fewer than ``m_hint`` significant singular values.
    """
    if gamma.H < 2:
        raise ConfigError("at least two nonzero lags are needed for a realisation")
    Hk = hankel_matrix(gamma, rows)
    ny = gamma.ntilde
    U, s, Vt = np.linalg.svd(Hk)
    rank = numerical_rank(s, tol)
    if m_hint is None:
        order = rank
    else:
        if m_hint > rank:
            raise RankDeficient(
                f"Hankel matrix has numerical rank {rank} < {m_hint}: no admissible parameter generates these moments"
            )
        order = m_hint
    n_rows = Hk.shape[0] // ny
    if order > (n_rows - 1) * ny:
        raise ConfigError(f"order {order} needs more Hankel block rows than {n_rows}")
    if order == 0:
        z = np.zeros((0, 0))
        return HankelRealization(z, np.zeros((0, ny)), np.zeros((ny, 0)), 0, s)
    root = np.sqrt(s[:order])
    obs = U[:, :order] * root
    ctr = root[:, None] * Vt[:order]
    C = obs[:ny]
    G = ctr[:, :ny]
    A, *_ = np.linalg.lstsq(obs[:-ny], obs[ny:], rcond=None)
    shift = float(np.linalg.norm(obs[:-ny] @ A - obs[ny:]) / max(np.linalg.norm(obs[ny:]), 1e-300))
    return HankelRealization(A, G, C, order, s, shift, {"numerical_rank": rank})


def predictable_directions(gamma: AutocovSequence, tol=1e-10):
    """Exact relations ``w y_t + v y_{t-1} = 0`` of the blocked process.

    Returned as the rows of ``(w, v)`` spanning the null space of the
    two-lag block Toeplitz covariance.
    """
    T2 = gamma.toeplitz(2)
    ev, U = np.linalg.eigh(0.5 * (T2 + T2.T))
    k = int(np.sum(ev <= tol * ev[-1]))
    null = U[:, :k].T
    ny = gamma.ntilde
    return null[:, :ny], null[:, ny:]


def _reduction(w, v, ny):
    """Rows ``V`` whose past spans the past of ``y`` and ``J`` with ``y_t = J V y_t``
    on the innovation subspace."""
    k = w.shape[0]
    if k == 0:
        return np.eye(ny), np.eye(ny)
    q, _ = np.linalg.qr(np.vstack([v, w]).T, mode="complete")
    V = np.vstack([v, q[:, 2 * k:].T])
    full = np.vstack([V, w])
    if V.shape[0] != ny - k or np.linalg.cond(full) > 1e10:
        # relations not of the one-step form; project on the complement of w
        q, _ = np.linalg.qr(w.T, mode="complete")
        V = q[:, k:].T
        full = np.vstack([V, w])
    J = np.linalg.inv(full)[:, : ny - k]
    return V, J


def innovation_from_hankel(hr: HankelRealization, gamma: AutocovSequence, tol=1e-10) -> InnovationForm:
    """Complete a covariance realisation to the forward innovation form.

    The blocked observations satisfy ``r`` exact relations with their first
    lag, which makes the innovation covariance singular and puts a zero of the
    spectral factor on the unit circle.  The Riccati equation is therefore
    solved for a reduced observation ``V y_t`` with the same past, and the
    innovation form of ``y_t`` is mapped back (``K = K_V V``,
    ``sigma = J sigma_V J'``).
    """
    A, G, C = hr.A, hr.G, hr.C
    m = A.shape[0]
    if m == 0:
        g0 = 0.5 * (gamma[0] + gamma[0].T)
        return InnovationForm(A.copy(), np.zeros((0, g0.shape[0])), C.copy(), g0, np.zeros((0, 0)))
    w, v = predictable_directions(gamma, tol)
    V, J = _reduction(w, v, gamma.ntilde)
    Cv, Gv = V @ C, G @ V.T
    g0 = V @ gamma[0] @ V.T
    g0 = 0.5 * (g0 + g0.T)

    def step(P):
        num = Gv - A @ P @ Cv.T
        P_new = A @ P @ A.T + num @ np.linalg.solve(g0 - Cv @ P @ Cv.T, num.T)
        return 0.5 * (P_new + P_new.T)

    P = None
    try:
        P = -_solve_dare(A.T, Cv.T, np.zeros((m, m)), g0, Gv)
    except (ValueError, np.linalg.LinAlgError):
        try:
            P = positive_real_doubling(A, Gv, Cv, g0)
        except np.linalg.LinAlgError as exc:
            raise RiccatiDivergence(f"positive-real Riccati equation has no solution: {exc}") from exc
    P = 0.5 * (P + P.T)
    try:
        resid = _riccati_residual(P, step)
    except np.linalg.LinAlgError:
        resid = np.inf
    if not np.isfinite(resid) or resid > 1e-6 * max(1.0, np.max(np.abs(g0))):
        raise RiccatiDivergence(f"positive-real Riccati residual {resid:.3g}")
    sig_v = g0 - Cv @ P @ Cv.T
    red = _complete(A, Cv, P, sig_v, Gv - A @ P @ Cv.T)
    sig = J @ red.sigma @ J.T
    inn = InnovationForm(A.copy(), red.K @ V, C.copy(), 0.5 * (sig + sig.T), P)
    if spectral_radius(A - inn.K @ C) > 1.0 + 1e-6:
        raise RiccatiDivergence("innovation form is not minimum phase")
    return inn
