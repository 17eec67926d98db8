"""Discrete eigenvalues as roots of the per-mode Birman-Schwinger functions.

On mode n the interacting operator has an eigenvalue at ``lam < 0`` exactly
when ``g_n(lam) = 1 - s M_n(lam)`` vanishes, with ``M = M~`` for a delta
interaction (``s = alpha``) and ``M = M^`` for delta-prime (``s = omega``).
``M_n`` is increasing in ``lam`` on ``(-inf, 0)``, so each mode has at most one
root, and only for ``s > 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NumericError, UsageError
from .geometry import MODE_CEILING, Geometry, ModeSpec, mode_weight
from .ntd import m_hat, m_tilde

RESIDUAL_TOL = 1e-12
UPPER_EDGE = -1e-8
SCAN_POINTS = 33
_MODEL_KEYS = {"delta": "delta", "delta_prime": "delta_prime", "deltaprime": "delta_prime",
               "delta-prime": "delta_prime"}


@dataclass(frozen=True)
class EigResult:
    mode: ModeSpec
    lam: float
    multiplicity: int
    residual: float
    model: str = "delta"

    def to_dict(self) -> dict:
        return {"mode": self.mode.index, "lambda": self.lam, "multiplicity": self.multiplicity,
                "residual": self.residual, "model": self.model}


def _model(model: str) -> str:
    key = _MODEL_KEYS.get(str(model).lower())
    if key is None:
        raise UsageError(f"unknown model {model!r} (delta or delta_prime)")
    return key


def _mode_spec(mode, geom: Geometry) -> ModeSpec:
    if isinstance(mode, ModeSpec):
        return mode
    return ModeSpec(int(mode), mode_weight(geom.dim, int(mode)))


def bs_function(model: str, mode, geom: Geometry, strength: float, lam: float,
                order: int = 0):
    """Jet of ``g(lam) = 1 - strength M(lam)`` on one mode."""
    model = _model(model)
    n = _mode_spec(mode, geom).index
    M = m_tilde(n, geom, lam, order) if model == "delta" else m_hat(n, geom, lam, order)
    return 1.0 - strength * M


def default_bracket(geom: Geometry, strength: float) -> tuple[float, float]:
    """``[-max(10, s^2) / R^2, -1e-8]``."""
    return -max(10.0, strength * strength) / geom.radius ** 2, UPPER_EDGE


def _g(model, n, geom, strength, lam) -> float:
    return float(bs_function(model, n, geom, strength, lam).coeffs[0])


def bs_root_find(model: str, mode, geom: Geometry, strength: float,
                 bracket: tuple[float, float] | None = None) -> list[EigResult]:
    """All roots of ``g`` on one mode inside the bracket (zero or one of them).

    With the default bracket the lower edge is pushed further down while
    ``g`` is still non-positive there, so deep bound states are not missed.
    """
    model = _model(model)
    spec = _mode_spec(mode, geom)
    if strength == 0:
        raise UsageError("coupling strength must be non-zero")
    if not math.isfinite(strength):
        raise DomainError("coupling strength must be finite")
    extend = bracket is None
    a, b = default_bracket(geom, strength) if bracket is None else (float(bracket[0]), float(bracket[1]))
    if not a < b < 0:
        raise DomainError(f"bracket must satisfy a < b < 0, got [{a}, {b}]")
    if strength < 0:
        return []      # g > 1 everywhere

    n = spec.index
    ga, gb = _g(model, n, geom, strength, a), _g(model, n, geom, strength, b)
    if extend:
        for _ in range(60):
            if ga > 0:
                break
            a *= 4.0
            ga = _g(model, n, geom, strength, a)
        else:  # pragma: no cover - would need an absurd coupling
            raise NumericError(f"could not bracket the root on mode {n}")
    if ga == 0.0 or gb == 0.0:
        raise DomainError("bracket endpoint is a root; widen or shift the bracket")

    # g is non-increasing in lam for strength > 0: check on a log-spaced scan
    grid = -np.geomspace(-a, -b, SCAN_POINTS)
    values = np.array([_g(model, n, geom, strength, x) for x in grid])
    scale = np.maximum(1.0, np.abs(values))
    if np.any(np.diff(values) > 1e-9 * scale[1:]):
        raise NumericError(f"Birman-Schwinger function is not monotone on mode {n}")
    if not (ga > 0 > gb):
        return []

    root = brentq(lambda x: _g(model, n, geom, strength, x), a, b, xtol=1e-300, rtol=1e-15,
                  maxiter=400)
    # Newton polish with the exact derivative from the jet
    for _ in range(4):
        jet = bs_function(model, n, geom, strength, root, order=1)
        g0, g1 = float(jet.coeffs[0]), float(jet.coeffs[1])
        if abs(g0) <= RESIDUAL_TOL or g1 == 0.0:
            break
        step = g0 / g1
        cand = root - step
        if not a < cand < b:
            break
        root = cand
    residual = _g(model, n, geom, strength, root)
    if abs(residual) > RESIDUAL_TOL:
        raise NumericError(f"root on mode {n} polished only to |g| = {abs(residual):.3g}")
    return [EigResult(spec, float(root), spec.weight, float(residual), model)]


@dataclass
class SpectrumScan:
    roots: list[EigResult]
    cutoff_mode: int | None          # highest mode carrying an eigenvalue
    modes_scanned: int
    notes: list[str] = field(default_factory=list)

    @property
    def lowest(self) -> float | None:
        return min((r.lam for r in self.roots), default=None)


def bs_spectrum(model: str, geom: Geometry, strength: float, modes=None,
                bracket: tuple[float, float] | None = None) -> SpectrumScan:
    """Roots on the given modes, or on all modes that can carry one.

    Without ``modes`` the scan ascends until ``strength * M_n`` stays below 1
    at the top of the bracket; ``M_n`` decreases with n there, so no higher
    mode has a root.
    """
    model = _model(model)
    if strength == 0:
        raise UsageError("coupling strength must be non-zero")
    if strength < 0:
        return SpectrumScan([], None, 0, ["repulsive coupling: no eigenvalues below 0"])
    roots: list[EigResult] = []
    if modes is not None:
        indices = [int(k) for k in modes]
        for k in indices:
            roots.extend(bs_root_find(model, k, geom, strength, bracket))
        scanned = len(indices)
    else:
        top = UPPER_EDGE if bracket is None else float(bracket[1])
        scanned = 0
        for k in range(MODE_CEILING + 1):
            scanned += 1
            if _g(model, k, geom, strength, top) > 0:
                break
            roots.extend(bs_root_find(model, k, geom, strength, bracket))
    cutoff = max((r.mode.index for r in roots), default=None)
    return SpectrumScan(roots, cutoff, scanned)
