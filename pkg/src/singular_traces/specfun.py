r"""Exponentially scaled modified Bessel functions on the positive real axis.

Cylindrical functions ``I_n, K_n`` and modified spherical functions
``i_l(x) = sqrt(pi/2x) I_{l+1/2}(x)``, ``k_l(x) = sqrt(2/(pi x)) K_{l+1/2}(x)``
(so ``i_0 = sinh(x)/x``, ``k_0 = exp(-x)/x``) are computed for all orders
``0..n_top`` at once:

* ``I`` by Miller's backward recurrence on the ratios ``I_{n+1}/I_n``,
  normalised with ``exp(x) = I_0 + 2 sum_{k>=1} I_k`` (cylindrical) or the
  closed form of ``i_0`` (spherical);
* ``K`` by forward recurrence of ``K_{n+1}/K_n`` seeded from ``K_0, K_1``
  (cylindrical) or the closed forms of ``k_0, k_1`` (spherical).

Everything is held in logarithmic form, so orders in the thousands at small
argument neither overflow nor underflow.  A :class:`BesselPair` stores the
scaled values ``e^{-x} I`` and ``e^{x} K`` multiplied by ``exp(-b)`` and
``exp(b)`` respectively, where the balance exponent ``b`` is zero unless the
values would leave the float range.  Products ``I*K`` and ratios such as
``I/I'`` are unaffected by either scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

from .errors import DomainError, UsageError
from .jets import Jet, jet_compose, jet_exp

N_MAX = 10000
X_MIN = 1e-8
X_MAX = 1e6
# keep |log scaled value| below this before balancing kicks in
_LOG_SAFE = 600.0

CYLINDRICAL = "cylindrical"
SPHERICAL = "spherical"


@dataclass(frozen=True)
class BesselPair:
    """Scaled values and argument derivatives at a common argument ``x``.

    True values: ``I = i_scaled * exp(x + log_balance)``,
    ``K = k_scaled * exp(-x - log_balance)``, and the same for the derivative
    fields.  Fields may be numpy arrays when several orders are requested.
    """

    x: float
    i_scaled: np.ndarray | float
    k_scaled: np.ndarray | float
    di_scaled: np.ndarray | float
    dk_scaled: np.ndarray | float
    log_balance: np.ndarray | float = 0.0
    kind: str = CYLINDRICAL

    def unscaled(self):
        """Return ``(I, K, I', K')``; may overflow for extreme orders."""
        up = np.exp(self.x + self.log_balance)
        return (self.i_scaled * up, self.k_scaled / up,
                self.di_scaled * up, self.dk_scaled / up)

    def product(self):
        """``I * K`` (identical to ``i_scaled * k_scaled``)."""
        return self.i_scaled * self.k_scaled

    def wronskian(self):
        """``I' K - I K'``: equals ``1/x`` (cylindrical) or ``1/x**2`` (spherical)."""
        return self.di_scaled * self.k_scaled - self.i_scaled * self.dk_scaled


def _check_x(x: float) -> float:
    x = float(x)
    if not X_MIN < x < X_MAX:
        raise DomainError(f"Bessel argument x={x} outside ({X_MIN}, {X_MAX})")
    return x


def _check_orders(n) -> np.ndarray:
    arr = np.asarray(n)
    if arr.dtype.kind not in "iu":
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise DomainError("Bessel orders must be integers")
        arr = arr.astype(int)
    if np.any(arr < 0) or np.any(arr > N_MAX):
        raise DomainError(f"Bessel order outside [0, {N_MAX}]")
    return arr


def _start_index(n_top: int, x: float) -> int:
    # ratios settle once the index passes both n_top and the turning point ~x
    return int(max(n_top, x + 10.0 * math.sqrt(x))) + 40


@lru_cache(maxsize=64)
def _log_tables(kind: str, n_top: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Logs of scaled ``I_n`` (resp. ``i_n``) and ``K_n`` for n = 0..n_top."""
    start = _start_index(n_top, x)
    # backward recurrence for rho[k] = I_{k+1} / I_k
    rho = np.empty(start)
    r = 0.0
    if kind == CYLINDRICAL:
        for k in range(start - 1, -1, -1):
            r = 1.0 / (2.0 * (k + 1) / x + r)
            rho[k] = r
    else:
        for k in range(start - 1, -1, -1):
            r = 1.0 / ((2 * k + 3) / x + r)
            rho[k] = r
    log_rho = np.log(rho)
    log_ratio = np.concatenate(([0.0], np.cumsum(log_rho)))  # log(I_k / I_0)

    if kind == CYLINDRICAL:
        # e^x = I_0 + 2 sum_{k>=1} I_k  =>  1 = I0~ (1 + 2 sum ratio_k)
        total = math.fsum(np.exp(log_ratio[1:]).tolist())
        log_i0 = -math.log1p(2.0 * total)
    else:
        log_i0 = math.log(-math.expm1(-2.0 * x) / (2.0 * x))
    log_i = log_i0 + log_ratio[: n_top + 1]

    # forward recurrence for s[k] = K_{k+1} / K_k
    log_k = np.empty(n_top + 1)
    if kind == CYLINDRICAL:
        k0, k1 = special.k0e(x), special.k1e(x)
        log_k[0] = math.log(k0)
        s = k1 / k0
        for k in range(1, n_top + 1):
            log_k[k] = log_k[k - 1] + math.log(s)
            s = 1.0 / s + 2.0 * k / x
    else:
        log_k[0] = -math.log(x)
        s = 1.0 + 1.0 / x
        for k in range(1, n_top + 1):
            log_k[k] = log_k[k - 1] + math.log(s)
            s = 1.0 / s + (2 * k + 1) / x
    log_i.setflags(write=False)
    log_k.setflags(write=False)
    return log_i, log_k


def _pairs(kind: str, n, x: float) -> BesselPair:
    x = _check_x(x)
    n = _check_orders(n)
    n_top = int(np.max(n, initial=0)) + 1
    log_i, log_k = _log_tables(kind, n_top, x)

    li, lk = log_i[n], log_k[n]
    lower = np.abs(n - 1)  # I_{-1} = I_1, K_{-1} = K_1
    ri_lo, ri_hi = np.exp(log_i[lower] - li), np.exp(log_i[n + 1] - li)
    rk_lo, rk_hi = np.exp(log_k[lower] - lk), np.exp(log_k[n + 1] - lk)

    needs = (np.abs(li) > _LOG_SAFE) | (np.abs(lk) > _LOG_SAFE)
    balance = np.where(needs, 0.5 * (li - lk), 0.0)
    i_s = np.exp(li - balance)
    k_s = np.exp(lk + balance)
    if kind == CYLINDRICAL:
        di = 0.5 * i_s * (ri_lo + ri_hi)
        dk = -0.5 * k_s * (rk_lo + rk_hi)
    else:
        # l i_{l-1} + (l+1) i_{l+1} over 2l+1; the l=0 case reduces to i_1
        di = i_s * (n * ri_lo + (n + 1) * ri_hi) / (2 * n + 1)
        dk = -k_s * (n * rk_lo + (n + 1) * rk_hi) / (2 * n + 1)
    if np.ndim(n) == 0:
        i_s, k_s, di, dk, balance = (float(v) for v in (i_s, k_s, di, dk, balance))
    return BesselPair(x, i_s, k_s, di, dk, balance, kind)


def bessel_pair(n, x: float) -> BesselPair:
    """Scaled ``I_n(x), K_n(x)`` and their derivatives; ``n`` may be an int array."""
    return _pairs(CYLINDRICAL, n, x)


def sph_bessel_pair(l, x: float) -> BesselPair:
    """Scaled modified spherical ``i_l(x), k_l(x)`` and their derivatives."""
    return _pairs(SPHERICAL, l, x)


def order_nu(kind: str, n) -> np.ndarray:
    """Cylindrical order behind mode ``n``: ``n`` itself, or ``n + 1/2`` for spherical."""
    n = np.asarray(n, dtype=float)
    if kind == CYLINDRICAL:
        return n
    if kind == SPHERICAL:
        return n + 0.5
    raise UsageError(f"unknown Bessel kind {kind!r}")


def log_derivatives(kind: str, n, z):
    """``W_I = z f'/f`` for ``f = I_n`` (or ``i_n``) and ``W_K`` likewise for ``K_n``.

    ``z`` may be complex with positive real part; the result broadcasts ``n``
    against ``z``.  Only ratios of equally scaled values enter, so the
    exponential scaling of ``ive``/``kve`` drops out.
    """
    nu = order_nu(kind, n)
    z = np.asarray(z)
    wi = 0.5 * z * (special.ive(nu - 1, z) + special.ive(nu + 1, z)) / special.ive(nu, z)
    wk = -0.5 * z * (special.kve(nu - 1, z) + special.kve(nu + 1, z)) / special.kve(nu, z)
    if kind == SPHERICAL:
        # i_l = sqrt(pi/2z) I_{l+1/2}: the square-root prefactor shifts z f'/f by -1/2
        wi, wk = wi - 0.5, wk - 0.5
    return wi, wk


def order_product(kind: str, n, z):
    """``I_nu(z) K_nu(z)`` with ``nu = order_nu(kind, n)``, complex ``z`` allowed."""
    nu = order_nu(kind, n)
    z = np.asarray(z)
    # ive carries exp(-|Re z|), kve carries exp(z): undo the leftover phase
    return special.ive(nu, z) * special.kve(nu, z) * np.exp(-1j * np.imag(z))


def _poly_add(a, b):
    n = max(len(a), len(b))
    return [(a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(n)]


def _poly_mul(a, b):
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def _poly_der(a):
    return [i * a[i] for i in range(1, len(a))] or [Fraction(0)]


@lru_cache(maxsize=4)
def debye_polynomials(terms: int) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients of the uniform-asymptotic polynomials ``U_k(p)``, ``V_k(p)``.

    Returns two arrays of shape ``(terms + 1, 3 * terms + 1)`` holding the
    ascending-power coefficients; generated exactly in rational arithmetic by

        U_{k+1} = p^2 (1 - p^2) U_k' / 2 + 1/8 int_0^p (1 - 5 t^2) U_k(t) dt
        V_{k+1} = U_{k+1} - p (1 - p^2) U_k / 2 - p^2 (1 - p^2) U_k'
    """
    one_m_p2 = [Fraction(1), Fraction(0), Fraction(-1)]
    U = [[Fraction(1)]]
    V = [[Fraction(1)]]
    for _ in range(terms):
        u = U[-1]
        du = _poly_der(u)
        lead = _poly_mul(_poly_mul([0, 0, Fraction(1, 2)], one_m_p2), du)
        integrand = _poly_mul([Fraction(1), Fraction(0), Fraction(-5)], u)
        integral = [Fraction(0)] + [c / (i + 1) / 8 for i, c in enumerate(integrand)]
        u_next = _poly_add(lead, integral)
        v_next = _poly_add(u_next, _poly_mul(_poly_mul([0, Fraction(-1, 2)], one_m_p2), u))
        v_next = _poly_add(v_next, _poly_mul(_poly_mul([0, 0, Fraction(-1)], one_m_p2), du))
        U.append(u_next)
        V.append(v_next)
    width = 3 * terms + 1
    out = []
    for polys in (U, V):
        arr = np.zeros((terms + 1, width))
        for k, poly in enumerate(polys):
            while len(poly) > 1 and poly[-1] == 0:
                poly = poly[:-1]
            arr[k, : len(poly)] = [float(c) for c in poly]
        arr.setflags(write=False)
        out.append(arr)
    return out[0], out[1]


def argument_series(kind: str, n, x0: float, value, slope, order: int) -> np.ndarray:
    """Taylor coefficients in ``t`` of the Bessel-equation solution through ``x0``.

    The solution of ``x^2 y'' + a x y' - (x^2 + nu) y = 0`` with ``y(x0) =
    value`` and ``y'(x0) = slope`` is expanded as ``sum_k c_k t^k``, ``x = x0 +
    t``; (a, nu) = (1, n^2) for cylindrical, (2, n(n+1)) for spherical orders.
    Returns shape ``(order + 1, *shape(n))``.
    """
    n = np.asarray(n, dtype=float)
    if kind == CYLINDRICAL:
        a, nu = 1.0, n * n
    elif kind == SPHERICAL:
        a, nu = 2.0, n * (n + 1.0)
    else:
        raise UsageError(f"unknown Bessel kind {kind!r}")
    value = np.broadcast_to(np.asarray(value, dtype=float), n.shape)
    slope = np.broadcast_to(np.asarray(slope, dtype=float), n.shape)
    c = np.zeros((max(order, 1) + 1,) + n.shape)
    c[0], c[1] = value, slope
    x2 = x0 * x0
    for k in range(0, order - 1):
        acc = (2.0 * x0 * (k + 1) * k + a * x0 * (k + 1)) * c[k + 1]
        acc = acc + (k * (k - 1) + a * k - (x2 + nu)) * c[k]
        if k >= 1:
            acc = acc - 2.0 * x0 * c[k - 1]
        if k >= 2:
            acc = acc - c[k - 2]
        c[k + 2] = -acc / (x2 * (k + 2) * (k + 1))
    return c[: order + 1]


def bessel_pair_jet(n, x_jet: Jet, kind: str = CYLINDRICAL) -> tuple[Jet, Jet, Jet, Jet]:
    """Jets in ``lam`` of the scaled functions at argument ``x_jet(lam)``.

    Returns jets of ``e^{-x} I_n(x)``, ``e^{x} K_n(x)``, ``e^{-x} I_n'(x)`` and
    ``e^{x} K_n'(x)`` with ``x = x_jet(lam)`` (times the constant balance
    factors of the underlying :class:`BesselPair`).  ``n`` may be an array;
    the jets then carry its shape as batch shape.
    """
    x0 = float(x_jet.coeffs[0])
    if not x0 > 0:
        raise DomainError(f"Bessel argument jet must have positive value, got {x0}")
    if x_jet.batch_shape:
        raise UsageError("argument jet must be unbatched")
    pair = _pairs(kind, n, x0)
    K = x_jet.order
    batch = np.shape(n)

    def lift(value, slope):
        series = argument_series(kind, n, x0, value, slope, K + 1)
        deriv = series[1:] * np.arange(1, K + 2).reshape((-1,) + (1,) * len(batch))
        return jet_compose(series, x_jet), jet_compose(deriv, x_jet)

    i_jet, di_jet = lift(pair.i_scaled, pair.di_scaled)
    k_jet, dk_jet = lift(pair.k_scaled, pair.dk_scaled)
    shift = x_jet - x0
    down, up = jet_exp(-shift), jet_exp(shift)
    return i_jet * down, k_jet * up, di_jet * down, dk_jet * up
