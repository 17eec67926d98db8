r"""Mode sums for the traces of resolvent-power differences.

For a constant coupling on the circle/sphere every operator in the trace
formulae is diagonal in the angular basis, so the trace is a weighted sum over
modes of scalar jet coefficients.  With ``M`` the relevant boundary function
(``M~`` for delta, ``M^`` otherwise) the per-mode function is

    delta_vs_free          (1 - a M)^-1 a M'
    deltaprime_vs_neumann  (1 - w M)^-1 w M'
    deltaprime_vs_free     (1 - w M)^-1 M^-1 M'
    neumann_vs_free        M^-1 M'

and the trace of the m-th power difference is coefficient ``m - 1`` of its
jet (Taylor normalisation takes care of the ``1/(m-1)!``).

Summation runs over ascending modes in geometrically growing blocks.  Terms
decay like a power of the mode index, so the remaining tail is extrapolated
from a power-law fit to the last ten terms and added to the partial sum; the
reported ``tail_bound`` is the uncertainty of that extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NotBelowSpectrumError, TraceError, UsageError
from .geometry import (Coupling, EnginePlan, FormulaId, Geometry, ModeSpec,
                       mode_weight, validate_plan)
from .jets import jet_shift_derivative, jet_truncate
from .ntd import ntd_mode_values

TAIL_WINDOW = 10
MIN_TAIL_EXPONENT = 1.5


@dataclass
class TraceResult:
    """Trace value with truncation diagnostics.

    ``value = partial_sum + tail_estimate``; ``partial_sum`` is the compensated
    sum of the weighted per-mode terms over ``modes_used`` modes (0, 1, ...).
    """

    value: float
    modes_used: int
    tail_bound: float
    converged: bool
    partial_sum: float = 0.0
    tail_estimate: float = 0.0
    tail_exponent: float | None = None
    per_mode: list[tuple[int, int, float]] | None = None
    formula: str = ""

    def to_dict(self, include_per_mode: bool = False) -> dict:
        out = {
            "formula": self.formula,
            "value": self.value,
            "partial_sum": self.partial_sum,
            "tail_estimate": self.tail_estimate,
            "tail_bound": self.tail_bound,
            "tail_exponent": self.tail_exponent,
            "modes_used": self.modes_used,
            "converged": self.converged,
        }
        if include_per_mode and self.per_mode is not None:
            out["per_mode"] = [list(t) for t in self.per_mode]
        return out


def _coupling_strength(which: FormulaId, coupling: Coupling | None) -> float:
    model = which.model
    if model is None:
        return 0.0
    if coupling is None:
        raise UsageError(f"{which.value} needs a {model} coupling")
    if coupling.model != model:
        raise UsageError(f"{which.value} needs a {model} coupling, got {coupling.model}")
    return float(coupling.strength)


def _mode_functions(which: FormulaId, n: np.ndarray, geom: Geometry, strength: float,
                    m: int, lam0: float):
    """Jets (order m-1) of the per-mode functions and the denominators ``1 - s M``."""
    vals = ntd_mode_values(n, geom, lam0, m)
    M = vals.m_tilde if which is FormulaId.DELTA_VS_FREE else vals.m_hat
    dM = jet_shift_derivative(M)
    M = jet_truncate(M, m - 1)
    denom = 1.0 - strength * M
    if which is FormulaId.NEUMANN_VS_FREE:
        f = dM / M
    elif which is FormulaId.DELTAPRIME_VS_FREE:
        f = dM / (denom * M)
    else:
        f = (dM * strength) / denom
    return f, denom.coeffs[0]


def _check_denominators(which: FormulaId, n: np.ndarray, denom0, strength: float, lam0: float):
    if which is FormulaId.NEUMANN_VS_FREE:
        return
    bad = np.flatnonzero(np.asarray(denom0) <= 0.0)
    if bad.size:
        k = int(n[bad[0]])
        symbol = "alpha*M~" if which is FormulaId.DELTA_VS_FREE else "omega*M^"
        raise NotBelowSpectrumError(
            f"lam0={lam0:g} is not below the spectrum: 1 - {symbol} = "
            f"{float(np.asarray(denom0)[bad[0]]):.6g} <= 0 on mode {k} "
            f"(strength {strength:g}); locate the eigenvalues with the eigs command",
            mode=k,
        )


def mode_terms(which, modes, geom: Geometry, coupling: Coupling | None, m: int,
               lam0: float, check_spectrum: bool = True) -> np.ndarray:
    """Unweighted per-mode terms (coefficient m-1) for an array of mode indices."""
    which = FormulaId.parse(which)
    n = np.atleast_1d(np.asarray(modes))
    strength = _coupling_strength(which, coupling)
    f, denom0 = _mode_functions(which, n, geom, strength, m, lam0)
    if check_spectrum:
        _check_denominators(which, n, denom0, strength, lam0)
    return f.coeffs[m - 1]


def per_mode_term(which, mode: ModeSpec | int, geom: Geometry, coupling: Coupling | None,
                  m: int, lam0: float) -> float:
    """Coefficient m-1 of the per-mode function on a single mode (unweighted)."""
    index = mode.index if isinstance(mode, ModeSpec) else int(mode)
    plan = EnginePlan(m=m, lam0=lam0)
    validate_plan(plan, geom, which)
    return float(mode_terms(which, [index], geom, coupling, m, lam0)[0])


def _tail(n: np.ndarray, t: np.ndarray):
    """Power-law tail beyond ``n[-1]``: (estimate, uncertainty, exponent)."""
    if t.size < 2 * TAIL_WINDOW:
        return 0.0, math.inf, None
    last = t[-TAIL_WINDOW:]
    scale = float(np.max(np.abs(last)))
    if scale == 0.0:
        return 0.0, 0.0, None
    if not (np.all(last > 0) or np.all(last < 0)):
        # no clean power law: every remaining term is bounded by the window maximum
        return 0.0, math.inf, None
    sign = 1.0 if last[0] > 0 else -1.0

    def fit(nn, tt):
        A = np.column_stack([np.log(nn), np.ones_like(nn)])
        (slope, c), *_ = np.linalg.lstsq(A, np.log(np.abs(tt)), rcond=None)
        return -float(slope), math.exp(c)

    def integral(c, p, start):
        # sum_{k > start} c k^-p  ~  int_{start + 1/2}^inf c x^-p dx
        return c * (start + 0.5) ** (1.0 - p) / (p - 1.0)

    nn = n.astype(float)
    p, c = fit(nn[-TAIL_WINDOW:], last)
    if not p > MIN_TAIL_EXPONENT:
        return 0.0, math.inf, p
    estimate = integral(c, p, nn[-1])
    # The fit bias shrinks like a power of N.  Redo the extrapolation from a
    # window ending near N/2 and compare with what was actually summed since:
    # the disagreement is at least the bias left at N.
    half = max(TAIL_WINDOW + 1, nn.size // 2)
    window = t[half - TAIL_WINDOW:half]
    p2 = 0.0
    if np.all(window * sign > 0) and nn[half - TAIL_WINDOW] > 0:
        p2, c2 = fit(nn[half - TAIL_WINDOW:half], window)
    if p2 > 1.0:
        other = integral(c2, p2, nn[half - 1]) - math.fsum(np.abs(t[half:]).tolist())
        spread = abs(estimate - other)
    else:
        spread = estimate
    # midpoint-rule defect of the sum-to-integral replacement
    defect = c * p * (p + 1.0) / 24.0 * (nn[-1] + 0.5) ** (-p - 1.0) / (p + 1.0)
    return sign * estimate, spread + defect, p


def trace_formula(which, geom: Geometry, coupling: Coupling | None, m: int, lam0: float,
                  plan: EnginePlan | None = None) -> TraceResult:
    """Evaluate one trace formula as an adaptive mode sum."""
    which = FormulaId.parse(which)
    if plan is None:
        plan = EnginePlan(m=m, lam0=lam0)
    elif plan.m != m or plan.lam0 != lam0:
        raise UsageError("plan (m, lam0) disagree with the call arguments")
    validate_plan(plan, geom, which)
    strength = _coupling_strength(which, coupling)

    last_mode = plan.max_modes
    pieces_n: list[np.ndarray] = []
    pieces_t: list[np.ndarray] = []
    start, block = 0, max(int(plan.block), 16)
    converged = False
    partial = 0.0
    tail_est, tail_bound, tail_p = 0.0, math.inf, None
    while start <= last_mode:
        stop = min(start + block, last_mode + 1)
        n = np.arange(start, stop)
        terms = mode_terms(which, n, geom, coupling, m, lam0)
        pieces_n.append(n)
        pieces_t.append(terms * mode_weight(geom.dim, n))
        start = stop
        block *= 2
        if not plan.adaptive:
            continue
        all_n = np.concatenate(pieces_n)
        all_t = np.concatenate(pieces_t)
        partial = math.fsum(all_t.tolist())
        if all_n.size < plan.min_modes:
            continue
        tol = plan.abs_tol + plan.rel_tol * abs(partial)
        small = bool(np.all(np.abs(all_t[-3:]) <= tol))
        tail_est, tail_bound, tail_p = _tail(all_n, all_t)
        if small and tail_bound <= tol:
            converged = True
            break

    all_n = np.concatenate(pieces_n)
    all_t = np.concatenate(pieces_t)
    partial = math.fsum(all_t.tolist())
    if not plan.adaptive or not converged:
        tail_est, tail_bound, tail_p = _tail(all_n, all_t)
        if not plan.adaptive:
            tol = plan.abs_tol + plan.rel_tol * abs(partial)
            converged = bool(np.all(np.abs(all_t[-3:]) <= tol)) and tail_bound <= tol
    if not math.isfinite(tail_bound):
        tail_est = 0.0
    per_mode = None
    if plan.keep_per_mode:
        w = mode_weight(geom.dim, all_n)
        per_mode = [(int(k), int(wk), float(tk)) for k, wk, tk in zip(all_n, w, all_t)]
    return TraceResult(
        value=partial + tail_est,
        modes_used=int(all_n.size),
        tail_bound=float(tail_bound),
        converged=bool(converged),
        partial_sum=partial,
        tail_estimate=float(tail_est),
        tail_exponent=tail_p,
        per_mode=per_mode,
        formula=which.value,
    )


@dataclass
class SweepPoint:
    lam0: float
    result: TraceResult | None = None
    error: str | None = None
    error_type: str | None = None


def sweep(which, geom: Geometry, coupling: Coupling | None, m: int, lam_grid,
          plan_kwargs: dict | None = None) -> list[SweepPoint]:
    """Evaluate on every grid point; failures are recorded in their slot."""
    plan_kwargs = dict(plan_kwargs or {})
    out = []
    for lam in lam_grid:
        lam = float(lam)
        try:
            plan = EnginePlan(m=m, lam0=lam, **plan_kwargs)
            out.append(SweepPoint(lam, trace_formula(which, geom, coupling, m, lam, plan)))
        except TraceError as exc:
            out.append(SweepPoint(lam, None, str(exc), type(exc).__name__))
    return out


@dataclass
class IdentityCheck:
    """``deltaprime_vs_free`` against ``deltaprime_vs_neumann + neumann_vs_free``."""

    lhs: float
    rhs: float
    rel_gap: float
    per_mode_max_rel_gap: float
    modes: int
    per_mode_gaps: np.ndarray = field(repr=False, default=None)


def deltaprime_identity(geom: Geometry, omega: float, m: int, lam0: float,
                        mode_cap: int = 400) -> IdentityCheck:
    """Check the splitting of the delta-prime trace on a common mode set.

    The identity is algebraic per mode, so it is evaluated wherever every
    denominator ``1 - omega M^`` is non-zero (not only below the spectrum).
    """
    for which in (FormulaId.DELTAPRIME_VS_FREE, FormulaId.NEUMANN_VS_FREE):
        validate_plan(EnginePlan(m=m, lam0=lam0, mode_cap=mode_cap), geom, which)
    coupling = Coupling("delta_prime", omega)
    n = np.arange(mode_cap + 1)
    w = mode_weight(geom.dim, n)
    full = mode_terms(FormulaId.DELTAPRIME_VS_FREE, n, geom, coupling, m, lam0, check_spectrum=False)
    part = mode_terms(FormulaId.DELTAPRIME_VS_NEUMANN, n, geom, coupling, m, lam0,
                      check_spectrum=False)
    neu = mode_terms(FormulaId.NEUMANN_VS_FREE, n, geom, None, m, lam0)
    rhs_modes = part + neu
    gaps = np.abs(full - rhs_modes) / np.maximum(np.abs(full), np.finfo(float).tiny)
    lhs = math.fsum((w * full).tolist())
    rhs = math.fsum((w * part).tolist()) + math.fsum((w * neu).tolist())
    rel = abs(lhs - rhs) / max(abs(lhs), np.finfo(float).tiny)
    return IdentityCheck(lhs, rhs, rel, float(np.max(gaps)), int(n.size), gaps)
