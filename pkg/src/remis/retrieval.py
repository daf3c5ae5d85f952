"""Recovery of the high-frequency parameters from blocked second moments.

Given any minimal realisation ``(A_r, C_r)`` of the blocked covariance
sequence, ``A_r = R^{-1} A^N R`` and ``C_r = C_b R`` for an unknown similarity
``R`` (state of the differenced system in realisation coordinates).  The
steps are:

1. eigendecompose ``A_r`` and resolve the N-th roots ``lambda_i`` from the
   fast-variable rows, which carry ``lambda_i^k`` for ``k = 1..N``;
2. rebuild ``A_c = R^{-1} A R`` with those roots;
3. the first ``r + n`` rows of ``C_r A_r^{-1}`` equal ``c[:r+n] R``, which
   pins down ``R`` block by block;
4. ``A = R A_c R^{-1}`` gives ``alpha`` and ``Phi``;
5. the state covariance and ``Sigma`` follow from least squares on the
   observed covariances and a Yule-Walker equation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .blocking import AutocovSequence, BlockingMatrix, blocking_matrix, flow_weights, output_selectors
from .errors import (
    AsymmetryTooLarge,
    ConfigError,
    ConsistencyFail,
    NonPDSigma,
    NonRealResult,
    ObsRankDeficient,
    RepeatedEigenvalue,
    SingularR,
    SingularSum,
    StructureResidualTooLarge,
    ZeroDenominator,
)
from .params import TOL_GAP, TOL_RANK, TOL_UNIT, ModelDims, Scheme, VecmParams, check_c
from .realization import HankelRealization, hankel_realization, innovation_from_hankel


@dataclass
class EigStructure:
    lam_N: np.ndarray
    lam: np.ndarray
    W: np.ndarray
    A_c: np.ndarray
    ratio_residual: np.ndarray = None
    imag_residual: float = 0.0


def _pair_conjugates(mu, tol):
    """Index of the conjugate partner of every eigenvalue (itself if real)."""
    partner = np.arange(len(mu))
    used = np.zeros(len(mu), dtype=bool)
    for i, z in enumerate(mu):
        if used[i] or abs(z.imag) <= tol * max(1.0, abs(z)):
            continue
        cand = [j for j in range(len(mu)) if j != i and not used[j]]
        j = min(cand, key=lambda q: abs(mu[q] - np.conj(z)))
        partner[i], partner[j] = j, i
        used[i] = used[j] = True
    return partner


def fast_ladder(CW, dims: ModelDims) -> list:
    """Rows ``F_1..F_N`` of ``C_r W`` with ``F_k`` proportional to ``lambda^k``.

    ``F_{N-j}`` is the block of the observed ``D_N y^f_{t-j}``; ``F_N`` is the
    fast part of ``D_N y_t`` (stock) or of ``D^S_N y_t`` minus the lagged
    blocks (flow).
    """
    r, n, nf, N = dims.r, dims.n, dims.n_f, dims.N
    lagged = {N - j: CW[r + n + (j - 1) * nf: r + n + j * nf] for j in range(1, N)}
    top = CW[r: r + nf]
    if dims.scheme is Scheme.FLOW:
        top = top - sum(lagged.values())
    return [lagged[k] for k in range(1, N)] + [top]


def recover_eigstructure(real, beta, dims: ModelDims, tol_gap=TOL_GAP, tol_unit=TOL_UNIT,
                         tol_zero=1e-8, strict=True) -> EigStructure:
    """Eigenvalues of the high-frequency state matrix and the matrix
    ``A_c`` similar to it in realisation coordinates.

    ``real`` is any object with attributes ``A`` and ``C`` holding a minimal
    realisation of the blocked covariances.
    """
    A_r, C_r = np.asarray(real.A), np.asarray(real.C)
    m = A_r.shape[0]
    if dims.n_f == 0:
        raise ZeroDenominator("no fast variables: eigenvalue ratios are unavailable")
    mu, W = np.linalg.eig(A_r)
    if m > 1:
        gaps = np.abs(mu[:, None] - mu[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() <= tol_gap * max(1.0, np.max(np.abs(mu))):
            raise RepeatedEigenvalue(f"blocked state matrix has a repeated eigenvalue (gap {gaps.min():.3g})")
    CW = C_r @ W
    F = fast_ladder(CW, dims)
    num = sum(np.sum(np.conj(F[k]) * F[k + 1], axis=0) for k in range(len(F) - 1))
    den = sum(np.sum(np.abs(F[k]) ** 2, axis=0) for k in range(len(F) - 1))
    scale = np.linalg.norm(CW, axis=0)
    N = dims.N
    lam = np.empty(m, dtype=complex)
    resid = np.zeros(m)
    for i in range(m):
        if abs(mu[i] - 1.0) < tol_unit:
            lam[i] = 1.0
            continue
        if np.sqrt(den[i]) <= tol_zero * scale[i]:
            raise ZeroDenominator(f"fast rows vanish on eigenvector {i}: eigenvalue ratio undefined")
        est = num[i] / den[i]
        roots = mu[i] ** (1.0 / N) * np.exp(2j * np.pi * np.arange(N) / N)
        lam[i] = roots[np.argmin(np.abs(roots - est))]
        resid[i] = abs(est - lam[i]) / max(abs(lam[i]), 1e-300)
    partner = _pair_conjugates(mu, 1e-12)
    for i, j in enumerate(partner):
        if j > i:
            # keep the better-determined member and mirror it
            keep = i if resid[i] <= resid[j] else j
            other = j if keep == i else i
            lam[other] = np.conj(lam[keep])
        elif j == i and abs(mu[i].imag) <= 1e-12 * max(1.0, abs(mu[i])):
            if N % 2 == 1 or abs(lam[i].imag) > 1e-8:
                lam[i] = lam[i].real if abs(lam[i].imag) < 1e-8 else lam[i]
    Ac = W @ np.diag(lam) @ np.linalg.inv(W)
    imag = float(np.max(np.abs(Ac.imag)) / max(1.0, np.max(np.abs(Ac.real))))
    if strict and imag > 1e-6:
        raise NonRealResult(f"recombined state matrix has imaginary part {imag:.3g}")
    return EigStructure(mu, lam, W, Ac.real.copy(), resid, imag)


def _sum_matrix(Ac_inv, dims: ModelDims):
    k = Ac_inv.shape[0]
    weights = np.ones(dims.N) if dims.scheme is Scheme.STOCK else flow_weights(dims.N)
    out = np.zeros((k, k))
    power = np.eye(k)
    for w in weights:
        out += w * power
        power = power @ Ac_inv
    return out


def recover_T_R(real, es: EigStructure, c: BlockingMatrix, dims: ModelDims, beta):
    """Similarities ``T = c R`` and ``R`` between the realisation and the
    differenced state."""
    r, n, p, N = dims.r, dims.n, dims.p, dims.N
    A_r, C_r = np.asarray(real.A), np.asarray(real.C)
    if np.linalg.cond(A_r) > 1.0 / TOL_RANK:
        raise SingularR("blocked state matrix is singular (a zero eigenvalue)")
    top = np.linalg.solve(A_r.T, C_r[: r + n].T).T
    T_beta, T_1 = top[:r], top[r: r + n]
    Ac_inv = np.linalg.inv(es.A_c)
    S = _sum_matrix(Ac_inv, dims)
    if np.linalg.cond(S) > 1.0 / TOL_RANK:
        raise SingularSum("lag-sum matrix is singular (an eigenvalue with lambda^N = 1, lambda != 1)")
    R_blocks = [np.linalg.solve(S.T, T_1.T).T]
    for _ in range(p - 2):
        R_blocks.append(R_blocks[-1] @ Ac_inv)
    if dims.scheme is Scheme.STOCK:
        R_beta = T_beta
    else:
        beta = np.asarray(beta).reshape(n, r)
        R_beta = (T_beta + sum((N - j) * beta.T @ R_blocks[j - 1] for j in range(1, N))) / N
    R = np.vstack([R_beta] + R_blocks)
    T = c.c @ R
    return T, R


@dataclass
class PartialVecm:
    alpha: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    A: np.ndarray
    structure_residual: float


def structure_residual(A, beta, n, r, p) -> float:
    """Largest deviation of ``A`` from the differenced-system pattern given its
    ``dy`` row block."""
    alpha = A[r: r + n, :r]
    phis = A[r: r + n, r:]
    expect_top = np.hstack([beta.T @ alpha + np.eye(r), beta.T @ phis])
    res = np.max(np.abs(A[:r] - expect_top), initial=0.0)
    if p > 2:
        shift = np.zeros((n * (p - 2), A.shape[1]))
        shift[:, r: r + n * (p - 2)] = np.eye(n * (p - 2))
        res = max(res, np.max(np.abs(A[r + n:] - shift)))
    return float(res)


def recover_var(R, es: EigStructure, beta, dims: ModelDims, strict=True, tol_struct=1e-6) -> PartialVecm:
    r, n, p = dims.r, dims.n, dims.p
    if np.linalg.cond(R) > 1e12:
        raise SingularR(f"state similarity is singular (cond {np.linalg.cond(R):.3g})")
    A = R @ es.A_c @ np.linalg.inv(R)
    beta = np.asarray(beta).reshape(n, r)
    alpha = A[r: r + n, :r].copy()
    phi = np.stack([A[r: r + n, r + j * n: r + (j + 1) * n] for j in range(p - 1)])
    res = structure_residual(A, beta, n, r, p)
    if strict and res > tol_struct * max(1.0, np.max(np.abs(A))):
        raise StructureResidualTooLarge(f"recovered state matrix deviates from its pattern by {res:.3g}")
    return PartialVecm(alpha, beta.copy(), phi, A, res)


def blocked_readout(A, beta, dims: ModelDims):
    """``C_b`` (acting on ``x_{t-N+1}``) for a state matrix ``A``."""
    L = output_selectors(dims, beta)
    N = dims.N
    out = np.zeros_like(L[0])
    power = np.eye(A.shape[0])
    for k in range(N - 1, -1, -1):
        power = A @ power
        out += L[k] @ power
    return out


def recover_gamma_rp(gamma: AutocovSequence, partial: PartialVecm, dims: ModelDims, n_lags=None,
                     strict=True, tol_asym=1e-6):
    """Stationary covariance of the differenced state.

    ``Z = Gamma c[:r+n]'`` solves the stacked equations
    ``c[:r+n] Z = gamma(0)[:r+n, :r+n]`` and
    ``C_b A^{N(h-1)} Z = gamma(hN)[:, :r+n]``; the remaining columns follow
    from ``E x_{t+1} dy_{t-j}' = A^j E x_{t+1} dy_t'``.
    Returns ``(Gamma, asymmetry)``.
    """
    r, n, p, N, m = dims.r, dims.n, dims.p, dims.N, dims.m
    A, beta = partial.A, partial.beta
    c12 = blocking_matrix(dims, beta).c[: r + n]
    C_b = blocked_readout(A, beta, dims)
    AN = np.linalg.matrix_power(A, N)
    H = gamma.H if n_lags is None else min(n_lags, gamma.H)
    rows, rhs = [c12], [gamma[0][: r + n, : r + n]]
    block = C_b
    for h in range(1, H + 1):
        rows.append(block)
        rhs.append(gamma[h][:, : r + n])
        block = block @ AN
    O = np.vstack(rows)
    s = np.linalg.svd(O, compute_uv=False)
    if s[-1] <= TOL_RANK * s[0]:
        raise ObsRankDeficient(f"stacked observability matrix is rank deficient (sigma_min/sigma_max = {s[-1] / s[0]:.3g})")
    Z, *_ = np.linalg.lstsq(O, np.vstack(rhs), rcond=None)
    Z_u, Z_d = Z[:, :r], Z[:, r:]
    weights = np.ones(N) if dims.scheme is Scheme.STOCK else flow_weights(N)
    powers = [np.eye(m)]
    for _ in range(max(len(weights), p)):
        powers.append(A @ powers[-1])
    S = sum(w * powers[k] for k, w in enumerate(weights))
    if np.linalg.cond(S) > 1.0 / TOL_RANK:
        raise SingularSum("lag-sum of the state matrix is singular")
    G1 = np.linalg.solve(S, Z_d)
    if dims.scheme is Scheme.STOCK:
        G_beta = Z_u
    else:
        G_beta = (Z_u + sum((N - j) * powers[j - 1] @ G1 @ beta for j in range(1, N))) / N
    gamma_rp = np.hstack([G_beta] + [powers[j] @ G1 for j in range(p - 1)])
    asym = float(np.max(np.abs(gamma_rp - gamma_rp.T)) / max(np.max(np.abs(gamma_rp)), 1e-300))
    if strict and asym > tol_asym:
        raise AsymmetryTooLarge(f"recovered state covariance is asymmetric (relative {asym:.3g})")
    return 0.5 * (gamma_rp + gamma_rp.T), asym


def recover_sigma(partial: PartialVecm, gamma_rp, dims: ModelDims, strict=True):
    """Yule-Walker: ``Sigma = E dy_t dy_t' - [alpha, Phi] E x_t dy_t'``.

    Returns ``(Sigma, asymmetry)``.
    """
    r, n = dims.r, dims.n
    A = partial.A
    Ad = A[r: r + n]
    cross = gamma_rp @ Ad.T            # E x_t dy_t'
    sig = gamma_rp[r: r + n, r: r + n] - Ad @ cross
    asym = float(np.max(np.abs(sig - sig.T)))
    sig = 0.5 * (sig + sig.T)
    ev = np.linalg.eigvalsh(sig)
    if strict and ev[0] <= TOL_RANK * max(1.0, ev[-1]):
        raise NonPDSigma(f"recovered noise covariance is not positive definite (min eigenvalue {ev[0]:.3g})")
    return sig, asym


def eigvec_relation_residual(A, beta, dims: ModelDims) -> float:
    """max over eigenpairs of ``|q_beta - lambda/(lambda - 1) beta' q_1| / |q|``."""
    r, n = dims.r, dims.n
    lam, Q = np.linalg.eig(A)
    worst = 0.0
    for i in range(len(lam)):
        q = Q[:, i]
        rel = q[:r] - lam[i] / (lam[i] - 1.0) * (beta.T @ q[r: r + n])
        worst = max(worst, float(np.linalg.norm(rel) / np.linalg.norm(q)))
    return worst


@dataclass
class RetrievalResult:
    theta: VecmParams
    gamma_rp: np.ndarray
    eig: EigStructure = None
    diagnostics: dict = field(default_factory=dict)


def retrieve_from_realization(real, gamma: AutocovSequence, beta, dims: ModelDims, strict=True,
                              tol_consistency=1e-6) -> RetrievalResult:
    """Recover the parameters from a minimal realisation (any basis) of ``gamma``."""
    dims.require_lag_order()
    beta = _normalised_beta(beta, dims)
    diag = {}
    clock = time.perf_counter()

    def tick(name):
        nonlocal clock
        now = time.perf_counter()
        diag.setdefault("timings", {})[name] = now - clock
        clock = now

    es = recover_eigstructure(real, beta, dims, strict=strict)
    tick("eigen")
    cm = blocking_matrix(dims, beta)
    T, R = recover_T_R(real, es, cm, dims, beta)
    tick("similarity")
    part = recover_var(R, es, beta, dims, strict=strict)
    tick("var")

    A_r, C_r = np.asarray(real.A), np.asarray(real.C)
    Rinv = np.linalg.inv(R)
    AN = np.linalg.matrix_power(part.A, dims.N)
    res_a = float(np.max(np.abs(Rinv @ AN @ R - A_r)) / max(1.0, np.max(np.abs(A_r))))
    res_c = float(np.max(np.abs(blocked_readout(part.A, beta, dims) @ R - C_r)) / max(1.0, np.max(np.abs(C_r))))
    if strict and max(res_a, res_c) > tol_consistency:
        raise ConsistencyFail(f"recovered system does not reproduce the realisation (residuals {res_a:.3g}, {res_c:.3g})")

    gamma_rp, asym_g = recover_gamma_rp(gamma, part, dims, strict=strict)
    tick("gamma_rp")
    sigma, asym_s = recover_sigma(part, gamma_rp, dims, strict=strict)
    tick("sigma")
    theta = VecmParams(part.alpha, beta, part.phi, sigma)

    ss_B = np.zeros((dims.m, dims.n))
    ss_B[: dims.r] = beta.T
    ss_B[dims.r: dims.r + dims.n] = np.eye(dims.n)
    lyap = gamma_rp - part.A @ gamma_rp @ part.A.T - ss_B @ sigma @ ss_B.T
    diag.update({
        "eigenvalues": es.lam,
        "eigenvalues_blocked": es.lam_N,
        "ratio_residual": float(np.max(es.ratio_residual, initial=0.0)),
        "imag_residual": es.imag_residual,
        "cond_R": float(np.linalg.cond(R)),
        "cond_W": float(np.linalg.cond(es.W)),
        "consistency_A": res_a,
        "consistency_C": res_c,
        "structure_residual": part.structure_residual,
        "gamma_asymmetry": asym_g,
        "sigma_asymmetry": asym_s,
        "lyapunov_residual": float(np.max(np.abs(lyap))),
        "eigvec_relation_residual": eigvec_relation_residual(part.A, beta, dims),
    })
    if strict:
        rep = check_c(theta)
        diag["check_c"] = rep.to_dict()
        if not rep.passed:
            raise ConsistencyFail(f"recovered parameters fail {rep.failed()}")
    return RetrievalResult(theta, gamma_rp, es, diag)


def _normalised_beta(beta, dims):
    beta = np.asarray(beta, dtype=float).reshape(dims.n, dims.r)
    if dims.r and np.max(np.abs(beta[: dims.r] - np.eye(dims.r))) > 1e-12:
        raise ConfigError("beta must be normalised with an identity top block")
    return beta


def retrieve(gamma: AutocovSequence, beta, dims: ModelDims, strict=True, hankel_rows=None,
             with_innovation=False) -> RetrievalResult:
    """Parameters of the high-frequency VECM from blocked autocovariances.

    ``strict=True`` is meant for exact (population) moments and turns every
    structural residual into an error; ``strict=False`` is the plug-in mode
    for sample moments, where the residuals are only reported.
    """
    dims.require_lag_order()
    if gamma.H < 2 * dims.m + 1 and hankel_rows is None:
        raise ConfigError(f"need at least {2 * dims.m + 1} blocked lags, got {gamma.H}")
    hr = hankel_realization(gamma, m_hint=dims.m, rows=hankel_rows)
    res = retrieve_from_realization(hr, gamma, beta, dims, strict=strict)
    s = hr.singular_values
    res.diagnostics["hankel_singular_values"] = s
    res.diagnostics["hankel_gap"] = float(s[dims.m - 1] / s[0])
    res.diagnostics["hankel_shift_residual"] = hr.shift_residual
    # first-order amplification of moment errors: similarity, eigenbasis and truncation conditioning
    res.diagnostics["condition"] = res.diagnostics["cond_R"] * res.diagnostics["cond_W"] * float(s[0] / s[dims.m - 1])
    if with_innovation:
        try:
            inn = innovation_from_hankel(hr, gamma)
            res.diagnostics["innovation_sigma"] = inn.sigma
        except Exception as exc:  # diagnostic only
            res.diagnostics["innovation_error"] = str(exc)
    return res


__all__ = [
    "EigStructure", "PartialVecm", "RetrievalResult", "HankelRealization", "fast_ladder",
    "recover_eigstructure", "recover_T_R", "recover_var", "recover_gamma_rp", "recover_sigma",
    "retrieve", "retrieve_from_realization", "blocked_readout", "eigvec_relation_residual", "structure_residual",
]
