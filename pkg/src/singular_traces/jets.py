"""Truncated Taylor series ("jets") in the spectral parameter.

A jet of order K at base point ``lam0`` stores ``coeffs[k] = f^(k)(lam0) / k!``
for k = 0..K.  Arithmetic is exact up to order K: sums are coefficient-wise,
products are truncated Cauchy convolutions (the Leibniz rule) and quotients
solve the convolution recursively (the derivative-of-inverse rule).

Coefficients may carry trailing batch dimensions, ``coeffs.shape ==
(K + 1, *batch)``, so one jet can represent the same function family for many
angular modes at once.  Batch dimensions broadcast like numpy arrays.
"""

from __future__ import annotations

import math
import numpy as np

from .errors import DomainError, SingularityError, UsageError

MAX_ORDER = 8
# |b0| below this fraction of the largest coefficient counts as a pole
SINGULAR_RTOL = 1e-13


class Jet:
    """Truncated Taylor expansion of a real function of ``lam`` about ``base_point``."""

    __slots__ = ("base_point", "coeffs")
    __array_priority__ = 1000  # make ndarray * Jet defer to Jet.__rmul__

    def __init__(self, base_point: float, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 0:
            raise UsageError("jet coefficients need at least one entry")
        if coeffs.shape[0] - 1 > MAX_ORDER:
            raise UsageError(f"jet order {coeffs.shape[0] - 1} exceeds MAX_ORDER={MAX_ORDER}")
        self.base_point = float(base_point)
        self.coeffs = coeffs

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[1:]

    @property
    def value(self):
        return self.coeffs[0]

    def __repr__(self) -> str:
        return f"Jet(base_point={self.base_point!r}, coeffs={self.coeffs.tolist()!r})"

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def derivative(self, k: int):
        """k-th derivative at the base point (undoes the Taylor normalisation)."""
        return self.coeffs[k] * math.factorial(k)

    def __getitem__(self, idx) -> "Jet":
        """Select batch entries; the order axis is kept."""
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.base_point, self.coeffs[(slice(None),) + idx])

    # -- arithmetic -------------------------------------------------------

    def _coerce(self, other) -> "Jet":
        if isinstance(other, Jet):
            _check_compatible(self, other)
            return other
        c = np.zeros((self.order + 1,) + np.shape(other))
        c[0] = other
        return Jet(self.base_point, c)

    def __add__(self, other):
        return jet_arith(self, self._coerce(other), "add")

    __radd__ = __add__

    def __sub__(self, other):
        return jet_arith(self, self._coerce(other), "sub")

    def __rsub__(self, other):
        return jet_arith(self._coerce(other), self, "sub")

    def __mul__(self, other):
        if not isinstance(other, Jet):
            a, b = _align(self.coeffs, np.asarray(other, dtype=float)[None])
            return Jet(self.base_point, a * b)
        return jet_arith(self, other, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            a, b = _align(self.coeffs, np.asarray(other, dtype=float)[None])
            return Jet(self.base_point, a / b)
        return jet_arith(self, other, "div")

    def __rtruediv__(self, other):
        return jet_arith(self._coerce(other), self, "div")

    def __neg__(self):
        return Jet(self.base_point, -self.coeffs)

    def __pos__(self):
        return self


def _check_compatible(a: Jet, b: Jet) -> None:
    if a.base_point != b.base_point:
        raise UsageError(f"jet base points differ: {a.base_point} vs {b.base_point}")
    if a.order != b.order:
        raise UsageError(f"jet orders differ: {a.order} vs {b.order}")


def _align(a: np.ndarray, b: np.ndarray):
    """Pad batch axes so that (order, *batch) arrays broadcast batch-wise."""
    nb = max(a.ndim, b.ndim) - 1
    a = a.reshape(a.shape[:1] + (1,) * (nb + 1 - a.ndim) + a.shape[1:])
    b = b.reshape(b.shape[:1] + (1,) * (nb + 1 - b.ndim) + b.shape[1:])
    return a, b


def _cauchy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = a.shape[0] - 1
    shape = (K + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:])
    out = np.zeros(shape)
    for k in range(K + 1):
        acc = a[0] * b[k]
        for i in range(1, k + 1):
            acc = acc + a[i] * b[k - i]
        out[k] = acc
    return out


def _divide(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    K = a.shape[0] - 1
    b0 = b[0]
    norm = np.max(np.abs(b), axis=0)
    bad = np.abs(b0) <= SINGULAR_RTOL * norm
    if np.any(bad):
        where = np.flatnonzero(np.atleast_1d(bad))
        mode = int(where[0]) if np.ndim(bad) else None
        raise SingularityError(
            "division by a jet with vanishing constant term (the base point is a pole)",
            mode=mode,
        )
    shape = (K + 1,) + np.broadcast_shapes(a.shape[1:], b.shape[1:])
    q = np.zeros(shape)
    for k in range(K + 1):
        acc = np.array(a[k], dtype=float, copy=True)
        for i in range(1, k + 1):
            acc = acc - b[i] * q[k - i]
        q[k] = acc / b0
    return q


def jet_arith(a: Jet, b: Jet, op: str) -> Jet:
    """Combine two jets with ``op`` in {"add", "sub", "mul", "div"}."""
    _check_compatible(a, b)
    if op == "add":
        x, y = _align(a.coeffs, b.coeffs)
        c = x + y
    elif op == "sub":
        x, y = _align(a.coeffs, b.coeffs)
        c = x - y
    elif op == "mul":
        c = _cauchy(a.coeffs, b.coeffs)
    elif op == "div":
        c = _divide(a.coeffs, b.coeffs)
    else:
        raise UsageError(f"unknown jet operation {op!r}")
    return Jet(a.base_point, c)


def jet_const(c, lam0: float, order: int) -> Jet:
    """Jet of the constant function ``c``."""
    if order < 0:
        raise UsageError("jet order must be >= 0")
    c = np.asarray(c, dtype=float)
    coeffs = np.zeros((order + 1,) + c.shape)
    coeffs[0] = c
    return Jet(lam0, coeffs)


def jet_var(lam0: float, order: int) -> Jet:
    """Jet of the identity ``f(lam) = lam``."""
    if order < 1:
        raise UsageError("the identity needs order >= 1")
    coeffs = np.zeros(order + 1)
    coeffs[0] = lam0
    coeffs[1] = 1.0
    return Jet(lam0, coeffs)


def jet_shift_derivative(a: Jet) -> Jet:
    """Jet of ``f'`` (order drops by one)."""
    if a.order < 1:
        raise UsageError("cannot differentiate an order-0 jet")
    k = np.arange(1, a.order + 1).reshape((-1,) + (1,) * len(a.batch_shape))
    return Jet(a.base_point, a.coeffs[1:] * k)


def jet_truncate(a: Jet, order: int) -> Jet:
    if not 0 <= order <= a.order:
        raise UsageError(f"cannot truncate order {a.order} jet to order {order}")
    return Jet(a.base_point, a.coeffs[: order + 1])


def jet_compose(series, inner: Jet) -> Jet:
    """Evaluate ``g(inner(lam))`` given the Taylor coefficients of ``g``.

    ``series[j] = g^(j)(x0) / j!`` about ``x0 = inner.coeffs[0]``; entries past
    ``inner.order`` are ignored.  Horner's scheme in ``inner - x0``, which has
    no constant term, so every product is exact to the jet order.
    """
    series = np.asarray(series, dtype=float)
    K = inner.order
    if series.shape[0] < K + 1:
        raise UsageError(f"need {K + 1} outer coefficients, got {series.shape[0]}")
    delta = inner.coeffs.copy()
    delta[0] = 0.0
    out = np.zeros((K + 1,) + np.broadcast_shapes(series.shape[1:], inner.batch_shape))
    out[0] = series[K]
    for j in range(K - 1, -1, -1):
        out = _cauchy(out, delta)
        out[0] += series[j]
    return Jet(inner.base_point, out)


def jet_exp(a: Jet) -> Jet:
    """``exp(a)`` for a jet ``a``."""
    K = a.order
    series = np.array([1.0 / math.factorial(j) for j in range(K + 1)])
    series = series.reshape((-1,) + (1,) * len(a.batch_shape))
    unit = jet_compose(series * np.ones((K + 1,) + a.batch_shape), a)
    return unit * np.exp(a.coeffs[0])


def jet_kappa(lam0: float, order: int) -> Jet:
    """Jet of ``kappa(lam) = sqrt(-lam)``, defined for ``lam0 < 0``."""
    if not lam0 < 0:
        raise DomainError(f"kappa(lam) = sqrt(-lam) needs lam < 0, got {lam0}")
    if order < 0:
        raise UsageError("jet order must be >= 0")
    kappa0 = math.sqrt(-lam0)
    # sqrt(-lam0 - t) = kappa0 * sum_k binom(1/2, k) (t / lam0)^k
    coeffs = np.empty(order + 1)
    binom = 1.0
    for k in range(order + 1):
        coeffs[k] = kappa0 * binom * lam0 ** (-k)
        binom *= (0.5 - k) / (k + 1)
    return Jet(lam0, coeffs)


CONTOUR_NODES = 64


def jet_from_contour(func, lam0: float, order: int, radius: float, nodes: int = CONTOUR_NODES) -> Jet:
    """Jet of a real-analytic ``func`` from samples on a circle about ``lam0``.

    ``func`` maps a complex array of shape ``(nodes,)`` to shape ``(nodes,
    *batch)``.  The Cauchy coefficients come from one FFT; the truncation error
    falls like ``(radius / rho)**nodes`` with ``rho`` the distance to the
    nearest singularity, and rounding gives an absolute error of order
    ``eps * max|func| / radius**k`` in coefficient k.
    """
    if not 0 <= order <= MAX_ORDER:
        raise UsageError(f"jet order must lie in [0, {MAX_ORDER}]")
    if not radius > 0:
        raise UsageError("contour radius must be positive")
    if nodes <= 2 * (order + 1):
        raise UsageError("too few contour nodes for the requested order")
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    samples = np.asarray(func(lam0 + radius * np.exp(1j * theta)))
    spectrum = np.fft.fft(samples, axis=0)[: order + 1] / nodes
    scale = radius ** np.arange(order + 1, dtype=float)
    coeffs = spectrum.real / scale.reshape((-1,) + (1,) * (samples.ndim - 1))
    return Jet(lam0, coeffs)
