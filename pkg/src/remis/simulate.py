"""Simulation, mixed-frequency observation, sample moments and Monte Carlo."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .blocking import AutocovSequence, flow_weights
from .deterministic import Case, DeterministicSpec, trend_moments
from .errors import CaseMismatch, InsufficientSample, RemisError
from .params import ModelDims, Scheme, VecmParams
from .statespace import diff_state_space, solve_lyapunov


@dataclass
class SimConfig:
    T: int
    burn_in: int = 1000
    seed: int = 0
    deterministic: DeterministicSpec = None

    def __post_init__(self):
        if self.T < 1 or self.burn_in < 0:
            raise ValueError("need T >= 1 and burn_in >= 0")


def _propagate_state(A, B, x0, shocks):
    """``x_{t+1} = A x_t + B nu_t`` for all rows of ``shocks``; returns ``x_2..x_{T+1}``.

    Runs one first-order recursive filter per eigenvalue when the eigenbasis
    is well conditioned, otherwise a plain loop.
    """
    T = shocks.shape[0]
    lam, V = np.linalg.eig(A)
    if np.linalg.cond(V) < 1e6:
        Vi = np.linalg.inv(V)
        drive = shocks @ (Vi @ B).T
        z0 = Vi @ x0
        z = np.empty((T, len(lam)), dtype=complex)
        for i, l in enumerate(lam):
            z[:, i], _ = lfilter([1.0], [1.0, -l], drive[:, i], zi=[l * z0[i]])
        return (z @ V.T).real
    out = np.empty((T, A.shape[0]))
    x = x0
    for t in range(T):
        x = A @ x + B @ shocks[t]
        out[t] = x
    return out


def deterministic_path(theta: VecmParams, det: DeterministicSpec, T) -> np.ndarray:
    """Noise-free solution with ``E dy_t = g0 + g1 t``, ``E beta'y_{t-1} = h0 + h1 t``, ``t = 1..T``."""
    n, r = theta.n, theta.r
    if det is None or Case(det.case) is Case.H2:
        return np.zeros((T, n))
    mu0, mu1 = det.effective(theta.alpha)
    tm = trend_moments(theta, mu0, mu1)
    t = np.arange(1, T + 1)
    y0 = np.zeros(n)
    y0[:r] = tm.h0 + tm.h1
    return y0 + np.outer(t, tm.g0) + np.outer(t * (t + 1) / 2.0, tm.g1)


def simulate_path(theta: VecmParams, det: DeterministicSpec, cfg: SimConfig, rng=None) -> np.ndarray:
    """High-frequency levels ``y_1..y_T`` (shape ``(T, n)``).

    The stationary coordinates start from their exact stationary law; the
    level starts at ``y_0 = (beta'y_0, 0)``.
    """
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n, r = theta.n, theta.r
    ss = diff_state_space(theta)
    gamma = solve_lyapunov(ss.A, ss.B @ theta.sigma @ ss.B.T)
    total = cfg.T + cfg.burn_in
    x1 = _gaussian(rng, gamma, 1)[0]
    shocks = _gaussian(rng, theta.sigma, total)
    states = _propagate_state(ss.A, ss.B, x1, shocks)
    dy = states[:, r: r + n]
    y = np.cumsum(dy, axis=0)
    y[:, :r] += x1[:r]
    y = y[cfg.burn_in:]
    return y + deterministic_path(theta, det, cfg.T)


def _gaussian(rng, cov, size):
    ev, U = np.linalg.eigh(0.5 * (cov + cov.T))
    root = U * np.sqrt(np.clip(ev, 0.0, None))
    return rng.standard_normal((size, cov.shape[0])) @ root.T


@dataclass
class MixedSample:
    """Fast series every period, slow series every ``N``-th period.

    ``fast`` has shape ``(n_f, T)`` with times ``1..T``; ``slow`` has shape
    ``(n_s, T // N)`` with times ``N, 2N, ...`` (point values for stock,
    window sums for flow).
    """

    fast: np.ndarray
    slow: np.ndarray
    dims: ModelDims
    latent: np.ndarray = None

    @property
    def T(self) -> int:
        return self.fast.shape[1] if self.fast.size else self.slow.shape[1] * self.dims.N

    @property
    def fast_times(self):
        return np.arange(1, self.T + 1)

    @property
    def slow_times(self):
        return self.dims.N * np.arange(1, self.slow.shape[1] + 1)


def observe_mixed(path, dims: ModelDims, keep_latent=False) -> MixedSample:
    path = np.asarray(path, dtype=float)
    if path.ndim == 1:
        path = path[:, None]
    N, nf = dims.N, dims.n_f
    T = path.shape[0]
    if T < N:
        raise InsufficientSample(f"path of length {T} is shorter than N={N}")
    n_slow = T // N
    slow_part = path[: n_slow * N, nf:]
    if dims.scheme is Scheme.STOCK:
        slow = slow_part[N - 1:: N]
    else:
        slow = slow_part.reshape(n_slow, N, -1).sum(axis=1)
    return MixedSample(path[:, :nf].T.copy(), slow.T.copy(), dims, path.copy() if keep_latent else None)


@dataclass
class BlockedSample:
    """Observed blocked vectors ``y~_t`` (rows) at high-frequency times ``t``."""

    values: np.ndarray
    times: np.ndarray


def blocked_observations(ms: MixedSample, beta, dims: ModelDims) -> BlockedSample:
    N, nf, r = dims.N, dims.n_f, dims.r
    beta = np.asarray(beta, float).reshape(dims.n, r)
    fast = ms.fast.T                     # (T, n_f), row t-1 is time t
    slow = ms.slow.T                     # (T//N, n_s), row j-1 is time jN
    j = np.arange(2, slow.shape[0] + 1)  # slow index; time t = jN
    t = j * N
    if dims.scheme is Scheme.STOCK:
        level = np.hstack([fast[t - 1], slow[j - 1]])
        level_lag = np.hstack([fast[t - N - 1], slow[j - 2]])
    else:
        csum = np.vstack([np.zeros((1, nf)), np.cumsum(fast, axis=0)])
        agg_fast = csum[t] - csum[t - N]
        agg_fast_lag = csum[t - N] - csum[t - 2 * N]
        level = np.hstack([agg_fast, slow[j - 1]])
        level_lag = np.hstack([agg_fast_lag, slow[j - 2]])
    parts = [level @ beta, level - level_lag]
    for k in range(1, N):
        parts.append(fast[t - k - 1] - fast[t - k - N - 1])
    return BlockedSample(np.hstack(parts), t.astype(float))


@dataclass
class TrendFit:
    """Per-coordinate least-squares fit ``y~_t = a + b t`` of the blocked observations."""

    intercept: np.ndarray
    slope: np.ndarray


def _fit_trend(bs: BlockedSample, with_slope: bool):
    X = np.column_stack([np.ones_like(bs.times), bs.times]) if with_slope else np.ones((len(bs.times), 1))
    coef, *_ = np.linalg.lstsq(X, bs.values, rcond=None)
    resid = bs.values - X @ coef
    slope = coef[1] if with_slope else np.zeros(bs.values.shape[1])
    return resid, TrendFit(coef[0], slope)


def trend_moments_from_fit(fit: TrendFit, dims: ModelDims):
    """Map blocked-coordinate trends back to ``(g0, g1, h0, h1)``."""
    from .deterministic import TrendMoments

    r, n, N = dims.r, dims.n, dims.N
    a_u, b_u = fit.intercept[:r], fit.slope[:r]
    a_d, b_d = fit.intercept[r: r + n], fit.slope[r: r + n]
    if dims.scheme is Scheme.STOCK:
        h1 = b_u
        h0 = a_u - h1
        g1 = b_d / N
        g0 = (a_d + g1 * N * (N - 1) / 2.0) / N
    else:
        h1 = b_u / N
        h0 = (a_u - h1 * (N - N * (N - 1) / 2.0)) / N
        g1 = b_d / N ** 2
        g0 = (a_d + g1 * N ** 2 * (N - 1)) / N ** 2
    return TrendMoments(g0, g1, h0, h1)


def _batch_mean_z(values, batches=20):
    n = values.shape[0] // batches * batches
    means = values[:n].reshape(batches, -1, values.shape[1]).mean(axis=1)
    se = means.std(axis=0, ddof=1) / np.sqrt(batches)
    return np.abs(values.mean(axis=0)) / np.where(se > 0, se, np.inf)


def sample_blocked_autocov(ms: MixedSample, beta, dims: ModelDims, H=None, case=Case.H2,
                           return_trend=False, mean_guard=6.0):
    """Sample autocovariances (divided by the sample count) of the blocked observations.

    For ``case`` H1/H1star the sample mean is removed, for H/Hstar a linear
    time trend.  Under H2 nothing is removed and a mean significantly
    different from zero (batch-means z-score above ``mean_guard``) raises
    :class:`CaseMismatch`.
    """
    case = Case(case)
    if H is None:
        H = 2 * dims.m + 2
    bs = blocked_observations(ms, beta, dims)
    Tb = bs.values.shape[0]
    if Tb <= H + dims.p:
        raise InsufficientSample(f"{Tb} blocked observations are too few for {H} lags")
    fit = None
    if case is Case.H2:
        z = _batch_mean_z(bs.values) if Tb >= 40 else np.zeros(1)
        if np.max(z) > mean_guard:
            raise CaseMismatch(f"blocked observations have a nonzero mean (z = {np.max(z):.1f}); declare a deterministic case")
        Y = bs.values
    else:
        Y, fit = _fit_trend(bs, case in (Case.H, Case.HSTAR))
    gammas = [Y[h:].T @ Y[: Tb - h] / Tb for h in range(H + 1)]
    gammas[0] = 0.5 * (gammas[0] + gammas[0].T)
    ac = AutocovSequence(gammas, dims)
    if return_trend:
        return ac, (None if fit is None else trend_moments_from_fit(fit, dims))
    return ac


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

CSV_COLUMNS = ["scheme", "n", "r", "p", "N", "T", "rep", "err_alpha", "err_phi", "err_sigma", "status"]


@dataclass
class MonteCarloReport:
    rows: list = field(default_factory=list)

    def errors(self, T) -> np.ndarray:
        """``max(err_alpha, err_phi, err_sigma)`` per replication (inf on failure)."""
        return np.array([max(r["err_alpha"], r["err_phi"], r["err_sigma"]) for r in self.rows if r["T"] == T])

    def summary(self) -> dict:
        out = {}
        for T in sorted({r["T"] for r in self.rows}):
            e = self.errors(T)
            finite = e[np.isfinite(e)]
            # failures count as infinite errors in the median; the spread uses successes only
            q1, q3 = np.percentile(finite, [25, 75]) if finite.size else (np.nan, np.nan)
            out[T] = {"median": float(np.median(e)), "iqr": float(q3 - q1),
                      "failures": int(np.sum(~np.isfinite(e)))}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in self.rows:
            w.writerow({k: (f"{row[k]:.10e}" if k.startswith("err_") else row[k]) for k in CSV_COLUMNS})
        return buf.getvalue()


def monte_carlo(theta: VecmParams, dims: ModelDims, T_grid=(10_000, 100_000), reps=20, seed=0,
                H=None, hankel_rows=None, burn_in=1000) -> MonteCarloReport:
    """Simulate, observe, estimate blocked moments and retrieve, per replication.

    The exact map is first applied to the population moments of ``theta``; if
    it detects a violated assumption, every replication records that
    detection instead of an estimate.
    """
    from .blocking import blocked_autocov
    from .errors import AssumptionViolation
    from .retrieval import retrieve

    detected = None
    try:
        retrieve(blocked_autocov(theta, dims, H), theta.beta, dims, hankel_rows=hankel_rows)
    except AssumptionViolation as exc:
        detected = type(exc).__name__

    report = MonteCarloReport()
    for iT, T in enumerate(T_grid):
        for rep in range(reps):
            rng = np.random.default_rng(np.random.SeedSequence([seed, iT, rep]))
            row = {"scheme": dims.scheme.value, "n": dims.n, "r": dims.r, "p": dims.p, "N": dims.N,
                   "T": int(T), "rep": rep}
            if detected is not None:
                row.update(err_alpha=np.inf, err_phi=np.inf, err_sigma=np.inf, status=detected)
                report.rows.append(row)
                continue
            try:
                path = simulate_path(theta, None, SimConfig(int(T), burn_in, seed), rng=rng)
                ac = sample_blocked_autocov(observe_mixed(path, dims), theta.beta, dims, H=H)
                est = retrieve(ac, theta.beta, dims, strict=False, hankel_rows=hankel_rows).theta
                row.update(err_alpha=float(np.max(np.abs(est.alpha - theta.alpha), initial=0.0)),
                           err_phi=float(np.max(np.abs(est.phi - theta.phi))),
                           err_sigma=float(np.max(np.abs(est.sigma - theta.sigma))),
                           status="ok")
            except (RemisError, np.linalg.LinAlgError) as exc:
                row.update(err_alpha=np.inf, err_phi=np.inf, err_sigma=np.inf, status=type(exc).__name__)
            report.rows.append(row)
    return report
