"""Parameterisations of the high-frequency cointegrated VAR.

Conventions used throughout the package:

* ``phi`` is stored as an array of shape ``(p - 1, n, n)`` and VAR lag
  matrices as ``(p, n, n)``.
* ``beta`` is kept in normalised (reduced echelon) form, i.e. its top
  ``r x r`` block is the identity.
* Every rank decision uses a relative singular-value cutoff (``tol_rank``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import (
    BudgetExhausted,
    ConfigError,
    EchelonSingular,
    InconsistentTelescope,
    NonDiagonalizable,
    RankMismatch,
    SingularPivot,
)

TOL_RANK = 1e-8
TOL_UNIT = 1e-6
TOL_GAP = 1e-6


class Scheme(str, enum.Enum):
    STOCK = "stock"
    FLOW = "flow"


@dataclass(frozen=True)
class ModelDims:
    """Dimensions of the mixed-frequency problem.

    The first ``n_f`` variables are fast (observed every period), the
    remaining ``n_s`` slow ones are observed every ``N``-th period, either as
    point values (stock) or as window sums (flow).
    """

    n: int
    n_f: int
    r: int
    p: int
    N: int
    scheme: Scheme = Scheme.STOCK

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.n < 1 or not 0 <= self.n_f <= self.n:
            raise ConfigError(f"need 0 <= n_f <= n and n >= 1, got n={self.n}, n_f={self.n_f}")
        if not 0 <= self.r < self.n:
            raise ConfigError(f"cointegration rank must satisfy 0 <= r < n, got r={self.r}")
        if self.p < 2:
            raise ConfigError(f"lag order p must be >= 2, got {self.p}")
        if self.N < 2:
            raise ConfigError(f"slow sampling rate N must be >= 2, got {self.N}")

    @property
    def n_s(self) -> int:
        return self.n - self.n_f

    @property
    def m(self) -> int:
        """State dimension of the differenced system."""
        return self.r + self.n * (self.p - 1)

    @property
    def ntilde(self) -> int:
        """Dimension of the blocked observation vector."""
        return self.r + self.n + (self.N - 1) * self.n_f

    @property
    def min_lag(self) -> int:
        return self.N + 2 if self.scheme is Scheme.STOCK else 2 * self.N + 1

    def require_lag_order(self):
        from .errors import LagOrderTooSmall

        if self.p < self.min_lag:
            raise LagOrderTooSmall(
                f"{self.scheme.value} scheme needs p >= {self.min_lag} for N={self.N}, got p={self.p}"
            )

    def to_dict(self) -> dict:
        return {"n": self.n, "n_f": self.n_f, "r": self.r, "p": self.p,
                "N": self.N, "scheme": self.scheme.value}


@dataclass
class VecmParams:
    """High-frequency VECM ``dy_t = alpha beta' y_{t-1} + sum_j phi_j dy_{t-j} + nu_t``."""

    alpha: np.ndarray
    beta: np.ndarray
    phi: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=float)
        n = self.phi.shape[-1]
        self.alpha = np.asarray(self.alpha, dtype=float).reshape(n, -1)
        self.beta = np.asarray(self.beta, dtype=float).reshape(n, -1)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if self.phi.ndim != 3 or self.phi.shape[1:] != (n, n):
            raise ConfigError("phi must have shape (p-1, n, n)")
        if self.alpha.shape != self.beta.shape:
            raise ConfigError("alpha and beta must both be n x r")
        if self.sigma.shape != (n, n):
            raise ConfigError("sigma must be n x n")

    @property
    def n(self) -> int:
        return self.phi.shape[1]

    @property
    def r(self) -> int:
        return self.alpha.shape[1]

    @property
    def p(self) -> int:
        return self.phi.shape[0] + 1

    @property
    def pi(self) -> np.ndarray:
        return self.alpha @ self.beta.T

    def copy(self) -> "VecmParams":
        return VecmParams(self.alpha.copy(), self.beta.copy(), self.phi.copy(), self.sigma.copy())


@dataclass
class VarParams:
    """Levels VAR(p) ``y_t = A_1 y_{t-1} + ... + A_p y_{t-p} + nu_t``."""

    coefs: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.coefs = np.asarray(self.coefs, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)

    @property
    def n(self) -> int:
        return self.coefs.shape[1]

    @property
    def p(self) -> int:
        return self.coefs.shape[0]


def param_distance(a: VecmParams, b: VecmParams, include_sigma=True) -> float:
    """Max-abs distance between two parameter sets."""
    parts = [a.alpha - b.alpha, a.beta - b.beta, a.phi - b.phi]
    if include_sigma:
        parts.append(a.sigma - b.sigma)
    return max((float(np.max(np.abs(x))) for x in parts if x.size), default=0.0)


def param_scale(theta: VecmParams) -> float:
    arrays = [theta.alpha, theta.beta, theta.phi, theta.sigma]
    return max((float(np.max(np.abs(x))) for x in arrays if x.size), default=0.0)


# ---------------------------------------------------------------------------
# psi / psi^{-1} and the factorisation of Pi
# ---------------------------------------------------------------------------

def factor_pi(pi, r, tol=TOL_RANK):
    """Factor ``pi = alpha beta'`` with ``beta' = [I_r, beta_{n-r}']``.

    The rank-``r`` part of the SVD is reduced to echelon form by solving
    against its leading ``r x r`` block (LU with partial pivoting).  Variables
    are never permuted: a singular leading block is an error.
    """
    pi = np.asarray(pi, dtype=float)
    n = pi.shape[0]
    if r == 0:
        if np.max(np.abs(pi), initial=0.0) > tol * max(1.0, n):
            raise RankMismatch(f"r=0 requested but Pi is nonzero (max |Pi| = {np.max(np.abs(pi)):.3g})")
        return np.zeros((n, 0)), np.zeros((n, 0))
    u, s, vt = np.linalg.svd(pi)
    if s[0] == 0.0 or s[r - 1] <= tol * s[0]:
        raise RankMismatch(f"Pi has numerical rank < {r} (singular values {s})")
    if r < n and s[r] > tol * s[0]:
        raise RankMismatch(f"Pi has numerical rank > {r}: sigma_{r + 1}/sigma_1 = {s[r] / s[0]:.3g}")
    right = s[:r, None] * vt[:r]          # D V1'
    pivot = right[:, :r]
    if np.linalg.cond(pivot) > 1.0 / tol:
        raise EchelonSingular("leading r x r block of the right factor is singular; "
                              "reorder variables so the first r enter the cointegrating relations")
    beta_t = np.linalg.solve(pivot, right)
    beta_t[:, :r] = np.eye(r)
    alpha = u[:, :r] @ pivot
    return alpha, beta_t.T


def vecm_to_var(theta: VecmParams) -> VarParams:
    n, p = theta.n, theta.p
    coefs = np.zeros((p, n, n))
    phi = theta.phi
    coefs[0] = np.eye(n) + theta.pi + (phi[0] if p > 1 else 0.0)
    for j in range(1, p - 1):
        coefs[j] = phi[j] - phi[j - 1]
    coefs[p - 1] = -phi[p - 2]
    return VarParams(coefs, theta.sigma.copy())


def var_to_vecm(var: VarParams, r=None, tol=TOL_RANK) -> VecmParams:
    """Inverse of :func:`vecm_to_var`.

    ``r`` defaults to the numerical rank of ``Pi = -I + sum_j A_j``.
    """
    n, p = var.n, var.p
    if p < 2:
        raise ConfigError("a VECM needs p >= 2")
    pi_full = -np.eye(n) + var.coefs.sum(axis=0)
    if r is None:
        s = np.linalg.svd(pi_full, compute_uv=False)
        r = int(np.sum(s > tol * s[0])) if s[0] > 0 else 0
    alpha, beta = factor_pi(pi_full, r, tol)
    pi = alpha @ beta.T
    phi = np.zeros((p - 1, n, n))
    phi[0] = -np.eye(n) + var.coefs[0] - pi
    for j in range(1, p - 1):
        phi[j] = phi[j - 1] + var.coefs[j]
    # the recursion and the closed form for the last lag must agree
    gap = np.max(np.abs(phi[p - 2] + var.coefs[p - 1]))
    scale = max(1.0, np.max(np.abs(var.coefs)))
    if gap > 1e-10 * scale * max(1.0, n * p) and gap > 10 * tol * scale:
        raise InconsistentTelescope(f"Phi_(p-1) recursion and -A_p differ by {gap:.3g}")
    return VecmParams(alpha, beta, phi, var.sigma.copy())


def orth_complement(M, kind="beta"):
    """Orthogonal complement ``M_perp`` (n x (n-k)) with ``M' M_perp = 0``.

    ``kind="beta"`` uses the echelon-based formula
    ``(I - c (M' c)^{-1} M') c_perp`` with ``c = [I_k; 0]``; ``kind="alpha"``
    projects ``c_perp`` on the orthogonal complement of ``range(M)``, which
    only needs ``M'M`` invertible.
    """
    M = np.asarray(M, dtype=float)
    n, k = M.shape
    if k == 0:
        return np.eye(n)
    c = np.zeros((n, k))
    c[:k] = np.eye(k)
    c_perp = np.zeros((n, n - k))
    c_perp[k:] = np.eye(n - k)
    if kind == "beta":
        pivot = M.T @ c
        if np.linalg.cond(pivot) > 1.0 / TOL_RANK:
            raise SingularPivot("beta' c is singular")
        return c_perp - c @ np.linalg.solve(pivot, M.T @ c_perp)
    if kind == "alpha":
        gram = M.T @ M
        if np.linalg.cond(gram) > 1.0 / TOL_RANK:
            raise SingularPivot("alpha' alpha is singular")
        out = c_perp - M @ np.linalg.solve(gram, M.T @ c_perp)
        if np.linalg.matrix_rank(out) < n - k:
            # c_perp meets range(M); fall back to an SVD basis
            u = np.linalg.svd(M)[0]
            out = u[:, k:]
        return out
    raise ValueError(f"unknown kind {kind!r}")


def companion_matrix(coefs) -> np.ndarray:
    coefs = np.asarray(coefs, dtype=float)
    p, n, _ = coefs.shape
    comp = np.zeros((n * p, n * p))
    comp[:n] = np.hstack(list(coefs))
    comp[n:, :-n] = np.eye(n * (p - 1))
    return comp


# ---------------------------------------------------------------------------
# assumption predicates
# ---------------------------------------------------------------------------

@dataclass
class Condition:
    name: str
    passed: bool
    margin: float
    note: str = ""


@dataclass
class AssumptionReport:
    conditions: dict = field(default_factory=dict)

    def add(self, name, passed, margin, note=""):
        margin = float(max(margin, 0.0)) if np.isfinite(margin) else float("inf")
        self.conditions[name] = Condition(name, bool(passed), margin, note)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def failed(self) -> list:
        return [c.name for c in self.conditions.values() if not c.passed]

    def __getitem__(self, name) -> Condition:
        return self.conditions[name]

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        return AssumptionReport({**self.conditions, **other.conditions})

    def to_dict(self) -> dict:
        return {name: {"pass": c.passed, "margin": c.margin, "note": c.note}
                for name, c in self.conditions.items()}

    def table(self) -> str:
        lines = [f"{'cond':<5} {'status':<6} {'margin':>12}  note"]
        for c in self.conditions.values():
            lines.append(f"{c.name:<5} {'pass' if c.passed else 'FAIL':<6} {c.margin:>12.4e}  {c.note}")
        return "\n".join(lines)


def _split_spectrum(eigvals, tol_unit):
    dist = np.abs(eigvals - 1.0)
    unit = dist < tol_unit
    stable = np.abs(eigvals) < 1.0 - tol_unit
    return unit, stable


def check_c(theta: VecmParams, tol_rank=TOL_RANK, tol_unit=TOL_UNIT) -> AssumptionReport:
    """Predicates C1-C4 of the cointegrated VAR."""
    rep = AssumptionReport()
    n, r = theta.n, theta.r
    pi = theta.pi
    s = np.linalg.svd(pi, compute_uv=False)
    if r == 0:
        ok = s[0] <= tol_rank
        rep.add("C1", ok, 1.0 if ok else 0.0, "Pi = 0")
    else:
        top = s[0] if s[0] > 0 else 1.0
        margin = s[r - 1] / top
        drop = s[r] / top if r < n else 0.0
        rep.add("C1", margin > tol_rank and drop <= tol_rank, margin if drop <= tol_rank else 0.0,
                f"sigma_r/sigma_1={margin:.3g}, sigma_(r+1)/sigma_1={drop:.3g}")

    try:
        a_perp = orth_complement(theta.alpha, "alpha")
        b_perp = orth_complement(theta.beta, "beta")
        psi = np.eye(n) - theta.phi.sum(axis=0)
        d = abs(np.linalg.det(a_perp.T @ psi @ b_perp)) if n > r else 1.0
        rep.add("C2", d > tol_rank, d, "|det(alpha_perp'(I - sum Phi) beta_perp)|")
    except SingularPivot as exc:
        rep.add("C2", False, 0.0, str(exc))

    eig = np.linalg.eigvals(companion_matrix(vecm_to_var(theta).coefs))
    unit, stable = _split_spectrum(eig, tol_unit)
    n_unit = int(unit.sum())
    indeterminate = int((~unit & ~stable).sum())
    stab_margin = float(1.0 - np.max(np.abs(eig[stable]), initial=0.0))
    ok = n_unit == n - r and indeterminate == 0
    rep.add("C3", ok, stab_margin if ok else 0.0,
            f"{n_unit} unit roots (need {n - r}), {indeterminate} indeterminate")

    sig = 0.5 * (theta.sigma + theta.sigma.T)
    lam = float(np.linalg.eigvalsh(sig)[0]) if n else 1.0
    rep.add("C4", lam > tol_rank * max(1.0, np.max(np.abs(sig))), lam, "lambda_min(Sigma)")
    return rep


def _fast_selector(n, n_f, p):
    sel = np.zeros((n_f, n * p))
    sel[:, :n_f] = np.eye(n_f)
    return sel


def check_i(theta: VecmParams, dims: ModelDims, tol_rank=TOL_RANK, tol_unit=TOL_UNIT,
            tol_gap=TOL_GAP) -> AssumptionReport:
    """Predicates I1-I6 of generic identifiability.

    I2 is evaluated on the stationary covariance of the differenced state,
    I6 by a PBH test restricted to the stable eigenvalues (those are the ones
    whose eigenvectors enter the eigenvalue-ratio step).
    """
    from .statespace import diff_state_space, solve_lyapunov

    rep = AssumptionReport()
    n, r, p, N = theta.n, theta.r, theta.p, dims.N
    var = vecm_to_var(theta)
    comp = companion_matrix(var.coefs)

    s = np.linalg.svd(var.coefs[-1], compute_uv=False)
    margin = s[-1] / s[0] if s[0] > 0 else 0.0
    rep.add("I1", margin > tol_rank, margin, "sigma_min(A_p)/sigma_max(A_p)")

    try:
        ss = diff_state_space(theta)
        gamma = solve_lyapunov(ss.A, ss.B @ theta.sigma @ ss.B.T)
        ev = np.linalg.eigvalsh(0.5 * (gamma + gamma.T))
        margin = ev[0] / ev[-1] if ev[-1] > 0 else 0.0
        rep.add("I2", margin > tol_rank, margin, "lambda_min/lambda_max of stationary Gamma_rp")
    except Exception as exc:  # unstable or singular input: report, never raise
        rep.add("I2", False, 0.0, f"Gamma_rp unavailable: {exc}")

    eig, vecs = np.linalg.eig(comp)
    unit, stable = _split_spectrum(eig, tol_unit)
    lam = eig[stable]
    if lam.size > 1:
        d = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(d, np.inf)
        gap = float(d.min())
    else:
        gap = 1.0
    count_ok = int(unit.sum()) == n - r and int(stable.sum()) == len(eig) - (n - r)
    rep.add("I3", count_ok and gap > tol_gap, gap if count_ok else 0.0,
            f"{int(unit.sum())} unit roots, min stable gap {gap:.3g}")

    gapN = 1.0
    if lam.size > 1:
        lp = lam ** N
        d = np.abs(lp[:, None] - lp[None, :])
        # only distinct eigenvalues are constrained; coincident ones belong to I3
        distinct = np.abs(lam[:, None] - lam[None, :]) > tol_gap
        if distinct.any():
            gapN = float(d[distinct].min())
    rep.add("I4", gapN > tol_gap, gapN, f"min |lambda_i^N - lambda_j^N| over distinct stable pairs (N={N})")

    i5 = np.inf
    for k in np.flatnonzero(stable):
        lk = eig[k]
        poly = abs(np.sum(lk ** np.arange(N + 1)))
        v1 = vecs[:n, k]
        bv = np.linalg.norm(theta.beta.T @ v1) / max(np.linalg.norm(v1), 1e-300) if r else 0.0
        i5 = min(i5, max(poly, bv))
    i5 = 1.0 if not np.isfinite(i5) else i5
    rep.add("I5", i5 > tol_rank, i5, "min over stable lambda of max(|1+...+lambda^N|, |beta'v_1|)")

    if dims.n_f == 0:
        rep.add("I6", False, 0.0, "no fast variables")
    else:
        sel = _fast_selector(n, dims.n_f, p)
        scale = max(1.0, np.linalg.norm(comp, 2))
        pbh = np.inf
        for lk in lam:
            mat = np.vstack([comp - lk * np.eye(n * p), sel])
            pbh = min(pbh, np.linalg.svd(mat, compute_uv=False)[-1] / scale)
        pbh = 1.0 if not np.isfinite(pbh) else pbh
        rep.add("I6", pbh > tol_rank, pbh, "PBH sigma_min([A - lambda I; S_f]) over stable lambda")
    return rep


def check_all(theta, dims, **tols) -> AssumptionReport:
    c = check_c(theta, tols.get("tol_rank", TOL_RANK), tols.get("tol_unit", TOL_UNIT))
    if not c.passed:
        return c
    return c.merge(check_i(theta, dims, **tols))


# ---------------------------------------------------------------------------
# spectral construction and generic perturbation
# ---------------------------------------------------------------------------

def companion_from_matrix(abar, n, p):
    """Companion matrix similar to ``abar`` (np x np).

    The similarity ``T`` is anchored at the last block row,
    ``T_p = [0 ... 0 I_n]`` and ``T_{j-1} = T_j abar``, which reproduces the
    identity when ``abar`` already has companion structure and needs no
    inverse of ``abar`` (so singular inputs are fine).
    Returns the VAR lag matrices, shape ``(p, n, n)``.
    """
    k = n * p
    blocks = [None] * p
    last = np.zeros((n, k))
    last[:, -n:] = np.eye(n)
    blocks[p - 1] = last
    for j in range(p - 1, 0, -1):
        blocks[j - 1] = blocks[j] @ abar
    T = np.vstack(blocks)
    if np.linalg.cond(T) > 1e12:
        raise NonDiagonalizable("companion similarity is singular (unobservable from the last lag block)")
    top = np.linalg.solve(T.T, (blocks[0] @ abar).T).T
    return top.reshape(n, p, n).transpose(1, 0, 2)


@dataclass
class PerturbationConfig:
    eps: float = 1e-3
    seed: int = 0
    max_attempts: int = 100

    def __post_init__(self):
        if not self.eps > 0:
            raise ConfigError("eps must be positive")


def _sorted_real_schur(a, tol_unit):
    t, z, sdim = sla.schur(a, output="real", sort=lambda re, im: abs(complex(re, im) - 1.0) < tol_unit)
    return t, z, sdim


def _diag_blocks(t):
    """(start, size) of the 1x1 and 2x2 diagonal blocks of a real Schur form."""
    k = t.shape[0]
    blocks, i = [], 0
    while i < k:
        if i + 1 < k and t[i + 1, i] != 0.0:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    return blocks


def _block_gap(t, start):
    ev = np.linalg.eigvals(t[start: start + 2, start: start + 2])
    return float(abs(ev[0] - ev[1]))


def perturb_to_generic(theta0: VecmParams, cfg: PerturbationConfig, dims: ModelDims,
                       tol_unit=TOL_UNIT) -> VecmParams:
    """Move ``theta0`` into the generic identifiable set by shifting its
    non-unit eigenvalues.

    The companion matrix is brought to sorted real Schur form (unit roots
    first), each non-unit diagonal block is shifted by a real
    ``xi ~ U[-eps/10, eps/10]`` (both members of a conjugate pair receive the
    same shift, except for nearly defective pairs, whose diagonal entries are
    shifted independently), and the result is mapped back to companion
    structure.
    Failed draws are resampled.
    """
    if not check_c(theta0).passed:
        raise ConfigError("perturb_to_generic needs theta0 to satisfy C1-C4")
    if check_i(theta0, dims).passed:
        return theta0.copy()
    n, p, r = theta0.n, theta0.p, theta0.r
    comp = companion_matrix(vecm_to_var(theta0).coefs)
    t, z, sdim = _sorted_real_schur(comp, tol_unit)
    if sdim != n - r:
        raise ConfigError(f"expected {n - r} unit roots, Schur form found {sdim}")
    blocks = [b for b in _diag_blocks(t) if b[0] >= sdim]
    rng = np.random.default_rng(cfg.seed)
    delta = cfg.eps / 10.0
    last_err = None
    # a 2x2 block whose eigenvalues nearly coincide is a (near) Jordan block;
    # an equal shift cannot split it, so its two diagonal entries move independently
    split = [size == 2 and _block_gap(t, start) < delta for start, size in blocks]
    for _ in range(cfg.max_attempts):
        xi = rng.uniform(-delta, delta, size=(len(blocks), 2))
        shifted = t.copy()
        for (start, size), x, sep in zip(blocks, xi, split):
            idx = np.arange(start, start + size)
            shifted[idx, idx] += x[:size] if sep else x[0]
        abar = z @ shifted @ z.T
        try:
            coefs = companion_from_matrix(abar, n, p)
            cand = var_to_vecm(VarParams(coefs, theta0.sigma.copy()), r=r)
        except Exception as exc:  # unlucky draw; the success set has full measure
            last_err = exc
            continue
        if param_distance(cand, theta0) > cfg.eps:
            last_err = f"distance {param_distance(cand, theta0):.3g} > eps"
            continue
        if check_all(cand, dims).passed:
            return cand
        last_err = check_all(cand, dims).failed()
    if isinstance(last_err, NonDiagonalizable):
        raise last_err
    raise BudgetExhausted(f"no admissible perturbation in {cfg.max_attempts} draws (last: {last_err})")


def _draw_spectrum(rng, count, band, complex_share=0.3, min_gap=0.02, N=2):
    """Real-closed set of ``count`` stable eigenvalues with moduli in ``band``."""
    lo, hi = band
    for _ in range(1000):
        vals = []
        while len(vals) < count:
            rho = rng.uniform(lo, hi)
            if count - len(vals) >= 2 and rng.random() < complex_share:
                ang = rng.uniform(0.15, np.pi - 0.15)
                vals += [rho * np.exp(1j * ang), rho * np.exp(-1j * ang)]
            else:
                vals.append(rho * rng.choice([-1.0, 1.0]))
        lam = np.array(vals)
        if count < 2:
            return lam
        d = np.abs(lam[:, None] - lam[None, :])
        dN = np.abs(lam[:, None] ** N - lam[None, :] ** N)
        np.fill_diagonal(d, np.inf)
        np.fill_diagonal(dN, np.inf)
        if d.min() > min_gap and dN.min() > min_gap:
            return lam
    raise BudgetExhausted("could not draw a separated spectrum")


def real_block_diagonal(eigvals) -> np.ndarray:
    """Real matrix with the given (conjugate-closed) spectrum."""
    eigvals = np.asarray(eigvals, dtype=complex)
    k = len(eigvals)
    out = np.zeros((k, k))
    i = 0
    used = np.zeros(k, dtype=bool)
    for j, lam in enumerate(eigvals):
        if used[j]:
            continue
        used[j] = True
        if abs(lam.imag) < 1e-14:
            out[i, i] = lam.real
            i += 1
        else:
            partner = next(q for q in range(j + 1, k)
                           if not used[q] and abs(eigvals[q] - np.conj(lam)) < 1e-12)
            used[partner] = True
            out[i:i + 2, i:i + 2] = [[lam.real, lam.imag], [-lam.imag, lam.real]]
            i += 2
    return out


def system_from_spectrum(stable_eigs, dims: ModelDims, rng, sigma=None, max_tries=50) -> VecmParams:
    """VECM whose companion matrix has ``n - r`` unit roots plus ``stable_eigs``.

    A random real matrix with the requested spectrum is carried to companion
    form by :func:`companion_from_matrix`.  Draws with an ill-conditioned
    eigenbasis or a non-normalisable beta are retried.
    """
    n, r, p = dims.n, dims.r, dims.p
    stable_eigs = np.asarray(stable_eigs, dtype=complex)
    if len(stable_eigs) != n * p - (n - r):
        raise ConfigError(f"need {n * p - (n - r)} stable eigenvalues, got {len(stable_eigs)}")
    diag = real_block_diagonal(np.concatenate([np.ones(n - r), stable_eigs]))
    if sigma is None:
        L = rng.standard_normal((n, n))
        sigma = L @ L.T + 0.1 * np.eye(n)
    last = None
    for _ in range(max_tries):
        V = rng.standard_normal((n * p, n * p))
        if np.linalg.cond(V) > 1e4:
            continue
        abar = V @ diag @ np.linalg.inv(V)
        try:
            coefs = companion_from_matrix(abar, n, p)
            theta = var_to_vecm(VarParams(coefs, sigma.copy()), r=r)
        except Exception as exc:
            last = exc
            continue
        if np.max(np.abs(theta.phi), initial=0.0) > 20 or np.max(np.abs(theta.alpha), initial=0.0) > 20:
            continue
        return theta
    raise BudgetExhausted(f"could not assemble a companion system from the spectrum ({last})")


def _blocked_hankel_gap(theta: VecmParams, dims: ModelDims) -> float:
    from .blocking import blocked_autocov
    from .errors import LagOrderTooSmall
    from .realization import hankel_realization

    try:
        dims.require_lag_order()
    except LagOrderTooSmall:
        return np.inf  # no blocked process to check
    s = hankel_realization(blocked_autocov(theta, dims)).singular_values
    return float(s[dims.m - 1] / s[0]) if s.size >= dims.m and s[0] > 0 else 0.0


def random_system(dims: ModelDims, seed=0, eig_band=(0.3, 0.9), max_attempts=200,
                  min_hankel_gap=100 * TOL_RANK) -> VecmParams:
    """Random VECM that satisfies C1-C4 and I1-I6 for ``dims``.

    Draws whose exact blocked Hankel matrix has relative gap
    ``sigma_m / sigma_1`` below ``min_hankel_gap`` are rejected: they pass the
    checks but sit numerically on the edge of the identifiable set.
    """
    lo, hi = eig_band
    if not 0.0 < lo < hi < 1.0:
        raise ConfigError("eig_band must be a sub-interval of (0, 1)")
    rng = np.random.default_rng(seed)
    count = dims.n * dims.p - (dims.n - dims.r)
    for _ in range(max_attempts):
        lam = _draw_spectrum(rng, count, eig_band, N=dims.N)
        try:
            theta = system_from_spectrum(lam, dims, rng)
        except BudgetExhausted:
            continue
        if check_all(theta, dims).passed and _blocked_hankel_gap(theta, dims) >= min_hankel_gap:
            return theta
    raise BudgetExhausted(f"random_system: no admissible draw in {max_attempts} attempts")
