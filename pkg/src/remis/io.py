"""JSON and CSV serialisation of the package's data types.

Matrices are nested row-major lists of doubles.  Complex numbers are written
as ``[re, im]`` pairs.  Output is deterministic for identical inputs.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .blocking import AutocovSequence
from .deterministic import DeterministicSpec, TrendMoments
from .errors import ConfigError
from .params import ModelDims, VecmParams
from .retrieval import RetrievalResult
from .simulate import MixedSample
from .statespace import HfMoments


def to_jsonable(x):
    """Recursively convert numpy containers and scalars to plain JSON types."""
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [to_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        if np.iscomplexobj(x):
            return to_jsonable(np.stack([x.real, x.imag], axis=-1))
        return x.tolist()
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.generic):
        return x.item()
    if hasattr(x, "value") and isinstance(getattr(x, "value"), str):
        return x.value
    return x


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(obj, path):
    text = dumps(obj)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read JSON from {path}: {exc}") from exc


def _mat(x, shape, name):
    try:
        a = np.asarray(x, dtype=float).reshape(shape)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"field {name!r} cannot be read as shape {shape}") from exc
    return a


# -- parameters -----------------------------------------------------------

def theta_to_dict(theta: VecmParams, dims: ModelDims, det: DeterministicSpec = None, mu0=None, mu1=None) -> dict:
    out = dims.to_dict()
    out.update({
        "alpha": theta.alpha, "beta": theta.beta, "phi": theta.phi, "sigma": theta.sigma,
        "mu0": None if mu0 is None else np.asarray(mu0, float),
        "mu1": None if mu1 is None else np.asarray(mu1, float),
    })
    if det is not None:
        out["deterministic"] = det.to_dict()
    return to_jsonable(out)


def dims_from_dict(d: dict, scheme=None) -> ModelDims:
    try:
        return ModelDims(int(d["n"]), int(d["n_f"]), int(d["r"]), int(d["p"]), int(d["N"]),
                         scheme or d.get("scheme", "stock"))
    except KeyError as exc:
        raise ConfigError(f"missing dimension field {exc}") from exc


def theta_from_dict(d: dict, scheme=None):
    """``(theta, dims, extras)`` where ``extras`` holds ``mu0``, ``mu1`` and
    the optional ``DeterministicSpec``."""
    dims = dims_from_dict(d, scheme)
    n, r, p = dims.n, dims.r, dims.p
    try:
        theta = VecmParams(_mat(d["alpha"], (n, r), "alpha"), _mat(d["beta"], (n, r), "beta"),
                           _mat(d["phi"], (p - 1, n, n), "phi"), _mat(d["sigma"], (n, n), "sigma"))
    except KeyError as exc:
        raise ConfigError(f"missing parameter field {exc}") from exc
    extras = {
        "mu0": None if d.get("mu0") is None else _mat(d["mu0"], (n,), "mu0"),
        "mu1": None if d.get("mu1") is None else _mat(d["mu1"], (n,), "mu1"),
        "deterministic": None if d.get("deterministic") is None else DeterministicSpec.from_dict(d["deterministic"]),
    }
    return theta, dims, extras


def load_theta(path, scheme=None):
    return theta_from_dict(read_json(path), scheme)


# -- moments --------------------------------------------------------------

def autocov_to_dict(gamma: AutocovSequence, beta=None) -> dict:
    out = {"N": gamma.N, "ntilde": gamma.ntilde, "H": gamma.H, "gamma": gamma.gamma,
           "dims": gamma.dims.to_dict()}
    if beta is not None:
        out["beta"] = np.asarray(beta, float)
    return to_jsonable(out)


def autocov_from_dict(d: dict, dims: ModelDims = None):
    """``(AutocovSequence, beta or None)``."""
    if dims is None:
        if "dims" not in d:
            raise ConfigError("autocovariance file has no 'dims'; pass --dims and --scheme")
        dims = dims_from_dict(d["dims"])
    g = np.asarray(d["gamma"], dtype=float)
    if g.ndim != 3 or g.shape[1:] != (dims.ntilde, dims.ntilde):
        raise ConfigError(f"gamma must have shape (H+1, {dims.ntilde}, {dims.ntilde}), got {g.shape}")
    if int(d.get("N", dims.N)) != dims.N:
        raise ConfigError("N in the autocovariance file disagrees with dims")
    beta = None if d.get("beta") is None else _mat(d["beta"], (dims.n, dims.r), "beta")
    return AutocovSequence([x for x in g], dims), beta


def hf_moments_to_dict(mom: HfMoments) -> dict:
    lags = range(-(mom.p - 1), mom.H + 1)
    return to_jsonable({
        "gamma_rp": mom.gamma_rp,
        "lags": list(lags),
        "gamma_dy": [mom.gamma_dy(h) for h in lags],
        "gamma_beta": [mom.gamma_beta(h) for h in lags],
        "gamma_beta_dy": [mom.gamma_beta_dy(h) for h in lags],
    })


def trend_from_dict(d: dict) -> TrendMoments:
    try:
        return TrendMoments(*(np.asarray(d[k], float) for k in ("g0", "g1", "h0", "h1")))
    except KeyError as exc:
        raise ConfigError(f"missing trend-moment field {exc}") from exc


# -- results --------------------------------------------------------------

_VOLATILE = {"timings"}


def retrieval_to_dict(res: RetrievalResult, dims: ModelDims) -> dict:
    out = theta_to_dict(res.theta, dims)
    out["gamma_rp"] = to_jsonable(res.gamma_rp)
    out["diagnostics"] = to_jsonable({k: v for k, v in res.diagnostics.items() if k not in _VOLATILE})
    return out


def mixed_sample_to_dict(ms: MixedSample) -> dict:
    return to_jsonable({"dims": ms.dims.to_dict(), "T": ms.T, "fast": ms.fast, "slow": ms.slow,
                        "fast_times": ms.fast_times, "slow_times": ms.slow_times})


def mixed_sample_to_csv(ms: MixedSample) -> str:
    """One row per high-frequency period; slow columns are empty off the grid."""
    nf, ns, N = ms.dims.n_f, ms.dims.n_s, ms.dims.N
    header = ["t"] + [f"fast{i + 1}" for i in range(nf)] + [f"slow{i + 1}" for i in range(ns)]
    lines = [",".join(header)]
    for t in range(1, ms.T + 1):
        row = [str(t)] + [repr(float(v)) for v in ms.fast[:, t - 1]]
        j = t // N
        if t % N == 0 and j <= ms.slow.shape[1]:
            row += [repr(float(v)) for v in ms.slow[:, j - 1]]
        else:
            row += [""] * ns
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
