"""Identification of high-frequency cointegrated VARs from mixed-frequency data."""

from .blocking import AutocovSequence, blocked_autocov, blocked_system
from .deterministic import Case, DeterministicSpec, recover_deterministic, trend_moments
from .errors import AssumptionViolation, ConfigError, RemisError
from .params import (
    ModelDims,
    PerturbationConfig,
    Scheme,
    VarParams,
    VecmParams,
    check_all,
    perturb_to_generic,
    random_system,
    var_to_vecm,
    vecm_to_var,
)
from .realization import cpf, hankel_realization, innovation_from_hankel
from .retrieval import RetrievalResult, retrieve
from .simulate import SimConfig, monte_carlo, observe_mixed, sample_blocked_autocov, simulate_path
from .statespace import diff_state_space, hf_moments

__all__ = [
    "AssumptionViolation", "AutocovSequence", "Case", "ConfigError", "DeterministicSpec", "ModelDims",
    "PerturbationConfig", "RemisError", "RetrievalResult", "Scheme", "SimConfig", "VarParams", "VecmParams",
    "blocked_autocov", "blocked_system", "check_all", "cpf", "diff_state_space", "hankel_realization",
    "hf_moments", "innovation_from_hankel", "monte_carlo", "observe_mixed", "perturb_to_generic",
    "random_system", "recover_deterministic", "retrieve", "sample_blocked_autocov", "simulate_path",
    "trend_moments", "var_to_vecm", "vecm_to_var",
]
