r"""Neumann-to-Dirichlet maps of ``-Delta - lam`` for the ball and its exterior.

On the circle/sphere every boundary operator here is diagonal in the angular
basis, so each map is represented by its eigenvalue on mode ``n`` as a jet in
``lam`` (``kappa = sqrt(-lam)``, ``x = kappa R``):

* interior  ``M_-``: ``I_n(x) / (kappa I_n'(x))``   (``i_l`` in d=3)
* exterior  ``M_+``: ``-K_n(x) / (kappa K_n'(x))``  (``k_l`` in d=3)
* ``M~ = (M_+^{-1} + M_-^{-1})^{-1}``, ``M^ = M_+ + M_-``.

The exterior normal points into the ball, hence the minus sign in ``M_+``.
Everything is expressed through the logarithmic derivatives ``W = x f'/f``:
``M_- = R / W_I``, ``M_+ = -R / W_K`` and ``M~ = R / (W_I - W_K)``.  By the
Wronskian the last one is also ``R I_nu(x) K_nu(x)`` with ``nu = n`` (d=2) or
``l + 1/2`` (d=3); that closed form is the default route for d=2.

Jet coefficients are not obtained by multiplying Taylor series of ``I`` and
``K``: those products cancel catastrophically (the k-th coefficient of ``M~``
is ~ n^(-2k-1) while the partial products grow like n^k).  Instead

* orders ``nu >= DEBYE_MIN_ORDER`` use the uniform asymptotic expansion, in
  which every quantity is a polynomial in ``p = nu / sqrt(nu^2 - lam R^2)``;
* lower orders take Cauchy integrals of complex Bessel ratios on a circle of
  radius ``|lam0|/2`` (the branch point ``lam = 0`` is the nearest singularity).
  Samples carry a rounding error ~ eps |f|, so coefficient k is accurate to
  about eps (2 nu^2 / |lam0|)^k relative; that is why the Debye switch-over
  sits as low as ``nu = 10`` (with enough terms to keep ~1e-9 there).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UsageError
from .geometry import Geometry, ModeSpec, mode_weight
from .jets import Jet, jet_from_contour
from .specfun import debye_polynomials, log_derivatives, order_nu, order_product

DEBYE_MIN_ORDER = 10.0
DEBYE_TERMS = 18


def _indices(mode):
    if isinstance(mode, ModeSpec):
        return mode.index
    if isinstance(mode, (list, tuple)) and mode and isinstance(mode[0], ModeSpec):
        return np.array([m.index for m in mode])
    return mode


def _horner(coeffs: np.ndarray, p: Jet) -> Jet:
    out = p * 0.0 + coeffs[-1]
    for c in coeffs[-2::-1]:
        out = out * p + c
    return out


def _debye(nu: np.ndarray, radius: float, lam0: float, order: int, shift: float):
    U, V = debye_polynomials(DEBYE_TERMS)
    k = np.arange(DEBYE_TERMS + 1)
    # q(lam) = sqrt(nu^2 - lam R^2) about lam0, binomial series in t = lam - lam0
    q0 = np.sqrt(nu * nu - lam0 * radius * radius)
    qc = np.empty((order + 1,) + nu.shape)
    binom = 1.0
    for j in range(order + 1):
        qc[j] = q0 * binom * (-radius * radius / (q0 * q0)) ** j
        binom *= (0.5 - j) / (j + 1)
    q = Jet(lam0, qc)
    p = nu / q
    series = {}
    for sign in (1.0, -1.0):
        weights = (sign / nu[None, :]) ** k[:, None]        # (terms, batch)
        su = _horner(np.einsum("kj,kb->jb", U, weights), p)
        sv = _horner(np.einsum("kj,kb->jb", V, weights), p)
        series[sign] = (su, sv)
    (su_p, sv_p), (su_m, sv_m) = series[1.0], series[-1.0]
    wi = q * (sv_p / su_p) - shift
    wk = -(q * (sv_m / su_m) + shift)
    prod = p * (su_p * su_m) / (2.0 * nu)
    return wi, wk, prod


def _contour(kind: str, n: np.ndarray, radius: float, lam0: float, order: int):
    def sample(lam):
        z = (np.sqrt(-lam) * radius)[:, None]
        wi, wk = log_derivatives(kind, n[None, :], z)
        return np.stack([wi, wk, order_product(kind, n[None, :], z)], axis=1)

    jet = jet_from_contour(sample, lam0, order, 0.5 * abs(lam0))
    return jet[0], jet[1], jet[2]


def boundary_jets(mode, geom: Geometry, lam0: float, order: int):
    """Jets of ``W_I``, ``W_K`` and ``I_nu K_nu`` on the given mode(s)."""
    if not lam0 < 0:
        raise DomainError(f"NtD maps are evaluated for lam < 0 only, got {lam0}")
    if order < 0:
        raise UsageError("jet order must be >= 0")
    idx = np.asarray(_indices(mode))
    if idx.dtype.kind not in "iu":
        if not np.all(np.mod(idx, 1) == 0):
            raise DomainError("mode indices must be integers")
        idx = idx.astype(int)
    if np.any(idx < 0):
        raise DomainError("mode indices must be non-negative")
    flat = idx.reshape(-1)
    kind = geom.bessel_kind
    nu = order_nu(kind, flat)
    shift = 0.0 if geom.dim == 2 else 0.5
    out = np.empty((3, order + 1, flat.size))
    large = nu >= DEBYE_MIN_ORDER
    if np.any(large):
        parts = _debye(nu[large], geom.radius, lam0, order, shift)
        for slot, jet in enumerate(parts):
            out[slot][:, large] = jet.coeffs
    if np.any(~large):
        parts = _contour(kind, flat[~large], geom.radius, lam0, order)
        for slot, jet in enumerate(parts):
            out[slot][:, ~large] = jet.coeffs
    shape = (order + 1,) + idx.shape
    return tuple(Jet(lam0, c.reshape(shape)) for c in out)


def ntd_interior(mode, geom: Geometry, lam0: float, order: int) -> Jet:
    """Eigenvalue jet of the interior map ``M_-(lam)`` on ``mode``."""
    wi, _, _ = boundary_jets(mode, geom, lam0, order)
    return geom.radius / wi


def ntd_exterior(mode, geom: Geometry, lam0: float, order: int) -> Jet:
    """Eigenvalue jet of the exterior map ``M_+(lam)`` on ``mode``."""
    _, wk, _ = boundary_jets(mode, geom, lam0, order)
    return -geom.radius / wk


def m_tilde(mode, geom: Geometry, lam0: float, order: int, route: str = "auto") -> Jet:
    """Jet of ``(M_+^{-1} + M_-^{-1})^{-1}`` on ``mode``.

    ``route`` is "closed" (Wronskian product ``R I_nu K_nu``), "harmonic"
    (from the two NtD maps) or "auto" (closed for d=2, harmonic for d=3).
    """
    if route == "auto":
        route = "closed" if geom.dim == 2 else "harmonic"
    if route not in ("closed", "harmonic"):
        raise UsageError(f"unknown m_tilde route {route!r}")
    wi, wk, prod = boundary_jets(mode, geom, lam0, order)
    if route == "closed":
        return prod * geom.radius
    return 1.0 / (1.0 / (-geom.radius / wk) + 1.0 / (geom.radius / wi))


def m_hat(mode, geom: Geometry, lam0: float, order: int) -> Jet:
    """Jet of ``M_+ + M_-`` on ``mode``."""
    wi, wk, _ = boundary_jets(mode, geom, lam0, order)
    return geom.radius / wi - geom.radius / wk


@dataclass(frozen=True)
class NtdModeValue:
    m_minus: Jet
    m_plus: Jet
    m_tilde: Jet
    m_hat: Jet


def ntd_mode_values(mode, geom: Geometry, lam0: float, order: int) -> NtdModeValue:
    """All four boundary functions on ``mode`` from one Bessel evaluation."""
    wi, wk, prod = boundary_jets(mode, geom, lam0, order)
    R = geom.radius
    m_minus = R / wi
    m_plus = -R / wk
    if geom.dim == 2:
        mt = prod * R
    else:
        mt = 1.0 / (1.0 / m_plus + 1.0 / m_minus)
    return NtdModeValue(m_minus, m_plus, mt, m_plus + m_minus)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    prefactor: float
    points: int
    residual: float
    against: str


def schatten_decay_probe(which: str, k: int, geom: Geometry, lam0: float,
                         n_range: tuple[int, int], against: str = "index") -> DecayFit:
    """Fit ``|d^k/dlam^k M(lam0)|_n ~ C n^p`` over modes in ``n_range``.

    The per-mode values are the eigenvalues of the (diagonal) operator.  With
    ``against="rank"`` they are expanded by multiplicity and sorted, and the
    fit is taken against the singular-value rank instead of the mode index.
    """
    n_lo, n_hi = (int(v) for v in n_range)
    if not n_hi > n_lo >= 10:
        raise UsageError(f"need n_hi > n_lo >= 10, got [{n_lo}, {n_hi}]")
    if n_hi - n_lo + 1 < 5:
        raise UsageError("decay fit needs at least 5 modes")
    key = str(which).lower().replace("-", "_")
    func = {"m_tilde": m_tilde, "m_hat": m_hat}.get(key)
    if func is None:
        raise UsageError(f"unknown operator {which!r} (m_tilde or m_hat)")
    if k < 0:
        raise UsageError("derivative order must be >= 0")

    if against == "index":
        n = np.arange(n_lo, n_hi + 1)
        s = np.abs(func(n, geom, lam0, k).coeffs[k])
        x = n.astype(float)
    elif against == "rank":
        n = np.arange(0, n_hi + 1)
        vals = np.abs(func(n, geom, lam0, k).coeffs[k])
        weights = mode_weight(geom.dim, n)
        owner = np.repeat(n, weights)
        expanded = np.repeat(vals, weights)
        order = np.argsort(-expanded, kind="stable")
        s = expanded[order]
        rank = np.arange(1, s.size + 1, dtype=float)
        keep = (owner[order] >= n_lo) & (owner[order] <= n_hi)
        s, x = s[keep], rank[keep]
    else:
        raise UsageError(f"against must be 'index' or 'rank', got {against!r}")

    if np.any(s <= 0):
        raise UsageError("decay fit needs non-vanishing values")
    A = np.column_stack([np.log(x), np.ones_like(x)])
    (p, c), res, *_ = np.linalg.lstsq(A, np.log(s), rcond=None)
    resid = float(np.sqrt(res[0] / x.size)) if res.size else 0.0
    return DecayFit(float(p), float(np.exp(c)), int(x.size), resid, against)
