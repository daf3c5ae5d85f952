"""Deterministic terms: trend moments and recovery of constants and trends.

The VECM with ``mu_t = mu0 + mu1 t`` has ``E dy_t = g0 + g1 t`` and
``E beta'y_{t-1} = h0 + h1 t``.  Matching coefficients gives

    [I - sum Phi, -alpha] [g1; h1] = mu1,       beta' g1 = 0
    [I - sum Phi, -alpha] [g0; h0] = mu0 - sum_j j Phi_j g1,   beta' g0 = h1
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import C2Violated, CaseMismatch, SingularMmu, SingularSteadyState
from .params import TOL_RANK, VecmParams, orth_complement


class Case(str, enum.Enum):
    H2 = "H2"          # no deterministic terms
    H1 = "H1"          # unrestricted constant
    H1STAR = "H1star"  # constant inside the cointegrating relations
    H = "H"            # unrestricted constant and trend
    HSTAR = "Hstar"    # trend inside the cointegrating relations


@dataclass
class TrendMoments:
    g0: np.ndarray
    g1: np.ndarray
    h0: np.ndarray
    h1: np.ndarray

    def mean_dy(self, t):
        return self.g0 + self.g1 * t

    def mean_beta_lag(self, t):
        """``E beta'y_{t-1}``."""
        return self.h0 + self.h1 * t

    def to_dict(self):
        return {k: getattr(self, k).tolist() for k in ("g0", "g1", "h0", "h1")}


@dataclass
class DeterministicSpec:
    case: Case
    mu0: np.ndarray = None
    mu1: np.ndarray = None
    rho0: np.ndarray = None
    rho1: np.ndarray = None
    residuals: dict = field(default_factory=dict)

    def effective(self, alpha):
        """``(mu0, mu1)`` of the unrestricted representation."""
        n, r = alpha.shape
        mu0 = np.zeros(n) if self.mu0 is None else np.asarray(self.mu0, float)
        mu1 = np.zeros(n) if self.mu1 is None else np.asarray(self.mu1, float)
        if self.rho0 is not None:
            mu0 = mu0 + alpha @ np.asarray(self.rho0, float)
        if self.rho1 is not None:
            mu1 = mu1 + alpha @ np.asarray(self.rho1, float)
        return mu0, mu1

    def to_dict(self):
        def conv(x):
            return None if x is None else np.asarray(x, float).tolist()
        return {"case": Case(self.case).value, "mu0": conv(self.mu0), "mu1": conv(self.mu1),
                "rho0": conv(self.rho0), "rho1": conv(self.rho1)}

    @classmethod
    def from_dict(cls, d):
        def conv(x):
            return None if x is None else np.asarray(x, float)
        return cls(Case(d["case"]), conv(d.get("mu0")), conv(d.get("mu1")),
                   conv(d.get("rho0")), conv(d.get("rho1")))


def granger_C(theta: VecmParams, tol=TOL_RANK) -> np.ndarray:
    """Long-run impact matrix ``beta_perp (alpha_perp' Psi beta_perp)^{-1} alpha_perp'``."""
    n = theta.n
    psi = np.eye(n) - theta.phi.sum(axis=0)
    a_perp = orth_complement(theta.alpha, "alpha")
    b_perp = orth_complement(theta.beta, "beta")
    core = a_perp.T @ psi @ b_perp
    if core.size and abs(np.linalg.det(core)) <= tol * max(1.0, np.linalg.norm(core)) ** core.shape[0]:
        raise C2Violated("alpha_perp'(I - sum Phi) beta_perp is singular")
    return b_perp @ np.linalg.solve(core, a_perp.T)


def _steady_state_matrix(theta):
    n, r = theta.n, theta.r
    psi = np.eye(n) - theta.phi.sum(axis=0)
    M = np.zeros((n + r, n + r))
    M[:n, :n] = psi
    M[:n, n:] = -theta.alpha
    M[n:, :n] = theta.beta.T
    if np.linalg.cond(M) > 1.0 / TOL_RANK:
        raise SingularSteadyState("steady-state system is singular")
    return M


def trend_moments(theta: VecmParams, mu0=None, mu1=None) -> TrendMoments:
    n, r = theta.n, theta.r
    mu0 = np.zeros(n) if mu0 is None else np.asarray(mu0, float).reshape(n)
    mu1 = np.zeros(n) if mu1 is None else np.asarray(mu1, float).reshape(n)
    M = _steady_state_matrix(theta)
    sol1 = np.linalg.solve(M, np.concatenate([mu1, np.zeros(r)]))
    g1, h1 = sol1[:n], sol1[n:]
    lag_weighted = sum((j + 1) * theta.phi[j] for j in range(theta.p - 1))
    sol0 = np.linalg.solve(M, np.concatenate([mu0 - lag_weighted @ g1, h1]))
    g0, h0 = sol0[:n], sol0[n:]
    if n > r:
        C = granger_C(theta)
        gap = np.max(np.abs(g1 - C @ mu1))
        if gap > 1e-8 * max(1.0, np.max(np.abs(mu1))):
            raise SingularSteadyState(f"trend slope disagrees with the long-run matrix by {gap:.3g}")
    return TrendMoments(g0, g1, h0, h1)


def _observables(tm: TrendMoments, s_c, t):
    """``v(t) = (E beta'y_{t-1}, S_C E dy_t)``."""
    return np.concatenate([tm.mean_beta_lag(t), s_c @ tm.mean_dy(t)])


def _jacobian(fn, k):
    base = fn(np.zeros(k))
    cols = [fn(e) - base for e in np.eye(k)]
    return np.column_stack(cols) if cols else np.zeros((base.size, 0)), base


def m_mu_matrices(theta: VecmParams, t=1):
    """``(M_mu, M_mu11)``: maps from ``(mu0, mu1)`` to ``(v(t), v(t-1))`` and
    from ``mu0`` to ``v(t)`` (with ``mu1 = 0``)."""
    n = theta.n
    s_c = orth_complement(theta.alpha, "alpha").T

    def full(x):
        tm = trend_moments(theta, x[:n], x[n:])
        return np.concatenate([_observables(tm, s_c, t), _observables(tm, s_c, t - 1)])

    def const(x):
        return _observables(trend_moments(theta, x, None), s_c, t)

    return _jacobian(full, 2 * n)[0], _jacobian(const, n)[0]


def _is_zero(x, tol):
    return x.size == 0 or np.max(np.abs(x)) <= tol


def classify_case(tm: TrendMoments, theta: VecmParams = None, tol=1e-8) -> Case:
    """Most restrictive case consistent with the trend moments."""
    z = lambda x: _is_zero(x, tol)  # noqa: E731
    if z(tm.g0) and z(tm.g1) and z(tm.h0) and z(tm.h1):
        return Case.H2
    if z(tm.g1) and z(tm.h1):
        return Case.H1STAR if z(tm.g0) else Case.H1
    if z(tm.g1):
        return Case.HSTAR
    return Case.H


_ALLOWED = {
    Case.H2: {Case.H2},
    Case.H1STAR: {Case.H2, Case.H1STAR},
    Case.H1: {Case.H2, Case.H1STAR, Case.H1},
    Case.HSTAR: {Case.H2, Case.H1STAR, Case.H1, Case.HSTAR},
    Case.H: set(Case),
}


def recover_deterministic(case, tm: TrendMoments, theta: VecmParams, tol=1e-8) -> DeterministicSpec:
    case = Case(case)
    found = classify_case(tm, theta, tol)
    if found not in _ALLOWED[case]:
        raise CaseMismatch(f"trend moments imply case {found.value}, incompatible with declared {case.value}")
    n, r = theta.n, theta.r
    s_c = orth_complement(theta.alpha, "alpha").T
    if case is Case.H2:
        return DeterministicSpec(case)
    if case is Case.H1STAR:
        rho0 = -tm.h0
        direct = trend_moments(theta, theta.alpha @ rho0, None)
        return DeterministicSpec(case, rho0=rho0,
                                 residuals={"moments": float(np.max(np.abs(direct.h0 - tm.h0), initial=0.0))})
    if case is Case.H1:
        _, M11 = m_mu_matrices(theta)
        _check_invertible(M11)
        mu0 = np.linalg.solve(M11, _observables(tm, s_c, 1))
        return DeterministicSpec(case, mu0=mu0, residuals=_moment_residual(theta, tm, mu0, None))
    if case is Case.H:
        rows = []
        for t in (1, 2):
            M, _ = m_mu_matrices(theta, t)
            _check_invertible(M)
            rhs = np.concatenate([_observables(tm, s_c, t), _observables(tm, s_c, t - 1)])
            rows.append(np.linalg.solve(M, rhs))
        sol = rows[0]
        res = _moment_residual(theta, tm, sol[:n], sol[n:])
        res["t_invariance"] = float(np.max(np.abs(rows[1] - rows[0])))
        return DeterministicSpec(case, mu0=sol[:n], mu1=sol[n:], residuals=res)
    # Hstar: unknowns (mu0, rho1) with mu1 = alpha rho1
    def reduced(x, t):
        tm_x = trend_moments(theta, x[:n], theta.alpha @ x[n:])
        return np.concatenate([_observables(tm_x, s_c, t), tm_x.mean_beta_lag(t - 1)])

    sols = []
    for t in (1, 2):
        M, base = _jacobian(lambda x: reduced(x, t), n + r)
        _check_invertible(M)
        rhs = np.concatenate([_observables(tm, s_c, t), tm.mean_beta_lag(t - 1)])
        sols.append(np.linalg.solve(M, rhs - base))
    sol = sols[0]
    res = _moment_residual(theta, tm, sol[:n], theta.alpha @ sol[n:])
    res["t_invariance"] = float(np.max(np.abs(sols[1] - sols[0])))
    return DeterministicSpec(case, mu0=sol[:n], rho1=sol[n:], residuals=res)


def _check_invertible(M):
    if np.linalg.cond(M) > 1.0 / TOL_RANK:
        raise SingularMmu("system for the deterministic parameters is singular")


def _moment_residual(theta, tm, mu0, mu1):
    back = trend_moments(theta, mu0, mu1)
    return {"moments": float(max(np.max(np.abs(getattr(back, k) - getattr(tm, k)), initial=0.0)
                                 for k in ("g0", "g1", "h0", "h1")))}
