"""Trace formulae for Schroedinger operators with delta and delta-prime
interactions supported on a circle (d=2) or a sphere (d=3)."""

from __future__ import annotations

from .birman_schwinger import EigResult, SpectrumScan, bs_function, bs_root_find, bs_spectrum
from .errors import (ConfigurationError, DomainError, NotBelowSpectrumError, NumericError,
                     PlanError, SingularityError, TraceError, UsageError)
from .geometry import Coupling, EnginePlan, FormulaId, Geometry, ModeSpec, enumerate_modes, mode_weight
from .jets import Jet
from .ntd import m_hat, m_tilde, ntd_exterior, ntd_interior, ntd_mode_values, schatten_decay_probe
from .oracle_fd import OracleConfig, oracle_eigenvalues, oracle_trace
from .trace_engine import TraceResult, deltaprime_identity, sweep, trace_formula

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "Coupling", "DomainError", "EigResult", "EnginePlan", "FormulaId",
    "Geometry", "Jet", "ModeSpec", "NotBelowSpectrumError", "NumericError", "OracleConfig",
    "PlanError", "SingularityError", "SpectrumScan", "TraceError", "TraceResult", "UsageError",
    "bs_function", "bs_root_find", "bs_spectrum", "deltaprime_identity", "enumerate_modes",
    "m_hat", "m_tilde", "mode_weight", "ntd_exterior", "ntd_interior", "ntd_mode_values",
    "oracle_eigenvalues", "oracle_trace", "schatten_decay_probe", "sweep", "trace_formula",
]
