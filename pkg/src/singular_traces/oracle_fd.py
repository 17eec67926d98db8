r"""Finite-difference left-hand sides: traces of resolvent-power differences.

Each angular mode gives a radial problem on ``[0, r_max]`` with a Dirichlet
wall at ``r_max``.  It is discretised in flux form on the vertex grid
``r_j = j h`` with the weight ``r^(d-1)``:

* mass      ``M_j = ((r_j + h/2)^d - (r_j - h/2)^d) / d``
* stiffness links ``(r_j + h/2)^(d-1) / h`` between neighbours
* angular potential ``c r_j^(d-3) h`` with ``c = n^2`` (d=2), ``l(l+1)`` (d=3).

``A = M^-1/2 K M^-1/2`` is then a symmetric tridiagonal matrix (the discrete
version of ``v = r^((d-1)/2) u``).  Mode 0 keeps the node at the origin; higher
modes pin ``u(0) = 0``.  Interface conditions at ``R`` (a grid node):

* delta: ``K[J, J] -= alpha R^(d-1)``, the weak form of ``u'(R+) - u'(R-) = -alpha u(R)``;
* split at ``R`` (Neumann on both sides): the node is doubled, each copy takes
  half a cell, no link between the copies;
* delta-prime: the split plus the coupling ``omega R^(d-1) (u+ - u-)^2`` in the
  energy, i.e. ``-omega R^(d-1)`` on both diagonals and ``+omega R^(d-1)`` on
  the link between the copies.

Traces ``Tr (A - lam)^-m`` are read off the LDL^T pivots: with ``q_j(lam)`` the
pivots, ``sum_j 1/(mu_j - lam) = -sum_j q_j'/q_j``, and higher powers follow
from the Taylor coefficients of that sum in ``lam``.  This is O(N) per matrix
and needs no eigenvectors; sorted eigenvalue pairing is available as a check.

Nothing here uses Bessel functions or boundary maps, so agreement with the
mode-sum engine is an independent verification.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

from .errors import ConfigurationError, NotBelowSpectrumError, NumericError, UsageError
from .geometry import Coupling, FormulaId, Geometry, ModeSpec, mode_weight

MODELS = ("free", "neumann_split", "delta", "delta_prime")
THREADS_ENV = "SINGULAR_TRACES_THREADS"
TAIL_WINDOW = 10


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class OracleConfig:
    grid_points: int = 8000
    r_max: float | None = None        # None: 40 R
    pairing: str = "pivot"            # "pivot" (LDL^T) or "sorted" (eigenvalue pairing)
    mode_cap: int = 60
    richardson: bool = True
    tail: bool = True
    threads: int | None = None

    def resolve(self, geom: Geometry) -> "OracleConfig":
        r_max = 40.0 * geom.radius if self.r_max is None else float(self.r_max)
        cfg = OracleConfig(int(self.grid_points), r_max, self.pairing, int(self.mode_cap),
                           self.richardson, self.tail,
                           default_threads() if self.threads is None else int(self.threads))
        cfg.check(geom)
        return cfg

    def check(self, geom: Geometry) -> None:
        if self.grid_points < 100:
            raise ConfigurationError("grid_points must be >= 100")
        if not self.r_max > 3.0 * geom.radius:
            raise ConfigurationError(f"r_max={self.r_max} must exceed 3 R = {3 * geom.radius}")
        if self.pairing not in ("pivot", "sorted"):
            raise ConfigurationError(f"pairing must be 'pivot' or 'sorted', got {self.pairing!r}")
        if self.mode_cap < 0:
            raise ConfigurationError("mode_cap must be non-negative")
        grids = [self.grid_points]
        if self.richardson:
            if self.grid_points % 2:
                raise ConfigurationError("Richardson extrapolation needs an even grid_points")
            grids.append(self.grid_points // 2)
        for n_pts in grids:
            _interface_index(geom.radius, self.r_max, n_pts)


def _interface_index(R: float, r_max: float, n_pts: int) -> int:
    h = r_max / n_pts
    J = R / h
    if abs(J - round(J)) > 1e-9 * max(1.0, J) or round(J) < 1:
        raise ConfigurationError(
            f"interface radius {R} is not a grid node (R/h = {J:.6g} with N={n_pts}, r_max={r_max})"
        )
    return int(round(J))


@dataclass
class RadialOperator:
    """Symmetric tridiagonal surrogate of one operator on one angular mode."""

    diag: np.ndarray
    off: np.ndarray
    model: str
    mode: ModeSpec
    interface: int           # row of the interface node (left copy when split)
    h: float
    mass: np.ndarray = field(repr=False, default=None)

    @property
    def size(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)


def build_radial(model: str, mode, geom: Geometry, coupling: Coupling | None,
                 cfg: OracleConfig, grid_points: int | None = None) -> RadialOperator:
    """Discretise ``model`` on one mode (see the module docstring)."""
    if model not in MODELS:
        raise UsageError(f"unknown radial model {model!r} (choose from {', '.join(MODELS)})")
    if not isinstance(mode, ModeSpec):
        mode = ModeSpec(int(mode), mode_weight(geom.dim, int(mode)))
    r_max = 40.0 * geom.radius if cfg.r_max is None else float(cfg.r_max)
    N = int(grid_points or cfg.grid_points)
    d, R, n = geom.dim, geom.radius, mode.index
    J = _interface_index(R, r_max, N)
    h = r_max / N
    strength = 0.0
    if model in ("delta", "delta_prime"):
        if coupling is None:
            raise UsageError(f"model {model} needs a coupling")
        expected = "delta" if model == "delta" else "delta_prime"
        if coupling.model != expected:
            raise UsageError(f"model {model} needs a {expected} coupling, got {coupling.model}")
        strength = float(coupling.strength)

    j0 = 0 if n == 0 else 1
    r = np.arange(j0, N) * h
    c = n * n if d == 2 else n * (n + 1)
    mass = ((r + h / 2) ** d - np.maximum(r - h / 2, 0.0) ** d) / d
    link = (r + h / 2) ** (d - 1) / h                 # link j -> j+1 (last one: to the wall)
    safe_r = np.where(r > 0, r, 1.0)
    pot = np.where(r > 0, c * safe_r ** (d - 3) * h, 0.0)
    origin_link = (h / 2) ** (d - 1) / h if j0 == 1 else 0.0
    jj = J - j0

    if model in ("free", "delta"):
        Kd = pot + link
        Kd[1:] += link[:-1]
        Kd[0] += origin_link
        Ko = -link[:-1].copy()
        if model == "delta":
            Kd[jj] -= strength * R ** (d - 1)
    else:
        half_in = (R ** d - (R - h / 2) ** d) / d
        half_out = ((R + h / 2) ** d - R ** d) / d
        mass = np.concatenate([mass[:jj], [half_in, half_out], mass[jj + 1:]])
        half_pot = c * R ** (d - 3) * h / 2
        pot = np.concatenate([pot[:jj], [half_pot, half_pot], pot[jj + 1:]])
        links = np.concatenate([link[:jj], [0.0], link[jj:-1]])   # between consecutive rows
        Kd = pot.copy()
        Kd[:-1] += links
        Kd[1:] += links
        Kd[-1] += link[-1]
        Kd[0] += origin_link
        Ko = -links
        if model == "delta_prime":
            w = strength * R ** (d - 1)
            Kd[jj] -= w
            Kd[jj + 1] -= w
            Ko[jj] += w
    scale = 1.0 / np.sqrt(mass)
    return RadialOperator(Kd * scale * scale, Ko * scale[:-1] * scale[1:], model, mode, jj, h, mass)


def _pivot_traces(diag: np.ndarray, off: np.ndarray, lam: float, m: int):
    """``Tr (A - lam)^-m`` for each column of a batch of tridiagonals.

    ``diag`` has shape (L, B), ``off`` (L-1, B).  Returns the traces and the
    number of negative pivots per column (eigenvalues below ``lam``).
    """
    L, B = diag.shape
    K = m + 1
    inv_prev = np.zeros((K, B))
    acc = np.zeros((m, B))            # running sum of the Taylor coefficients of q'/q
    negatives = np.zeros(B, dtype=int)
    q = np.zeros((K, B))
    inv = np.zeros((K, B))
    for j in range(L):
        q[:] = 0.0
        q[0] = diag[j] - lam
        if K > 1:
            q[1] = -1.0
        if j > 0:
            q -= (off[j - 1] ** 2) * inv_prev
        negatives += q[0] < 0
        inv[0] = 1.0 / q[0]
        for k in range(1, K):
            s = q[1] * inv[k - 1]
            for i in range(2, k + 1):
                s = s + q[i] * inv[k - i]
            inv[k] = -s * inv[0]
        for k in range(m):
            s = q[1] * inv[k]
            for i in range(1, k + 1):
                s = s + (i + 1) * q[i + 1] * inv[k - i]
            acc[k] += s
        inv_prev, inv = inv, inv_prev
    return -acc[m - 1], negatives


def _stack(ops: list[RadialOperator], pad_value: float):
    """Pad to a common size with decoupled rows in front."""
    L = max(op.size for op in ops)
    diag = np.full((L, len(ops)), pad_value)
    off = np.zeros((L - 1, len(ops)))
    pads = np.zeros(len(ops), dtype=int)
    for k, op in enumerate(ops):
        p = L - op.size
        pads[k] = p
        diag[p:, k] = op.diag
        off[p:, k] = op.off
    return diag, off, pads


def _traces(ops: list[RadialOperator], lam: float, m: int, threads: int) -> np.ndarray:
    pad_value = 1.0 + abs(lam)
    diag, off, pads = _stack(ops, pad_value)
    cols = np.arange(len(ops))
    chunks = [c for c in np.array_split(cols, max(1, min(threads, len(ops)))) if c.size]

    def run(c):
        return _pivot_traces(diag[:, c], off[:, c], lam, m)

    if len(chunks) == 1:
        parts = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(run, chunks))
    tr = np.concatenate([p[0] for p in parts])
    neg = np.concatenate([p[1] for p in parts])
    bad = np.flatnonzero(neg > 0)
    if bad.size:
        op = ops[bad[0]]
        raise NotBelowSpectrumError(
            f"lam0={lam:g} is not below the spectrum of the discrete {op.model} operator "
            f"on mode {op.mode.index}", mode=op.mode.index)
    return tr - pads * (pad_value - lam) ** (-m)


def _sorted_difference(a: RadialOperator, b: RadialOperator, lam: float, m: int) -> float:
    ea = eigvalsh_tridiagonal(a.diag, a.off)
    eb = eigvalsh_tridiagonal(b.diag, b.off)
    if ea[0] <= lam or eb[0] <= lam:
        raise NotBelowSpectrumError(
            f"lam0={lam:g} is not below the spectrum of the discrete operators on mode "
            f"{a.mode.index}", mode=a.mode.index)
    k = min(ea.size, eb.size)
    paired = (ea[:k] - lam) ** (-m) - (eb[:k] - lam) ** (-m)
    extra = np.concatenate([(ea[k:] - lam) ** (-m), -(eb[k:] - lam) ** (-m)])
    return math.fsum(paired.tolist() + extra.tolist())


_PAIRS = {
    FormulaId.DELTA_VS_FREE: ("delta", "free"),
    FormulaId.DELTAPRIME_VS_NEUMANN: ("delta_prime", "neumann_split"),
    FormulaId.DELTAPRIME_VS_FREE: ("delta_prime", "free"),
    FormulaId.NEUMANN_VS_FREE: ("neumann_split", "free"),
}


def oracle_mode_terms(which, geom: Geometry, coupling: Coupling | None, m: int, lam0: float,
                      cfg: OracleConfig, grid_points: int | None = None) -> np.ndarray:
    """Unweighted per-mode differences ``Tr (A-lam)^-m - Tr (B-lam)^-m`` on one grid."""
    which = FormulaId.parse(which)
    cfg = cfg.resolve(geom) if cfg.r_max is None or cfg.threads is None else cfg
    if m < 1:
        raise UsageError("m must be >= 1")
    if not lam0 < 0:
        raise UsageError("the oracle evaluates at lam0 < 0 only")
    model_a, model_b = _PAIRS[which]
    modes = [ModeSpec(n, mode_weight(geom.dim, n)) for n in range(cfg.mode_cap + 1)]
    ops_a = [build_radial(model_a, md, geom, coupling, cfg, grid_points) for md in modes]
    ops_b = [build_radial(model_b, md, geom, coupling, cfg, grid_points) for md in modes]
    if cfg.pairing == "sorted":
        return np.array([_sorted_difference(a, b, lam0, m) for a, b in zip(ops_a, ops_b)])
    tr = _traces(ops_a + ops_b, lam0, m, cfg.threads)
    k = len(modes)
    return tr[:k] - tr[k:]


def _power_tail(n: np.ndarray, t: np.ndarray):
    """Power-law extrapolation of sum_{k > n[-1]} t_k: (estimate, uncertainty)."""
    if t.size < 2 * TAIL_WINDOW:
        return 0.0, float(np.sum(np.abs(t[-3:]))) * n[-1] if t.size else 0.0
    last = t[-TAIL_WINDOW:]
    if np.all(last == 0):
        return 0.0, 0.0
    if not (np.all(last > 0) or np.all(last < 0)):
        return 0.0, float(np.max(np.abs(last))) * n[-1]
    sign = np.sign(last[0])

    def fit(nn, tt):
        A = np.column_stack([np.log(nn), np.ones_like(nn)])
        (slope, c), *_ = np.linalg.lstsq(A, np.log(np.abs(tt)), rcond=None)
        return -float(slope), math.exp(c)

    nn = n.astype(float)
    p, c = fit(nn[-TAIL_WINDOW:], last)
    if not p > 1.0:
        return 0.0, float(np.max(np.abs(last))) * n[-1]
    est = c * (nn[-1] + 0.5) ** (1 - p) / (p - 1)
    # compare with the extrapolation from a window ending near the middle
    half = max(TAIL_WINDOW + 1, nn.size // 2)
    window = t[half - TAIL_WINDOW:half]
    p2 = 0.0
    if np.all(window * sign > 0) and nn[half - TAIL_WINDOW] > 0:
        p2, c2 = fit(nn[half - TAIL_WINDOW:half], window)
    if p2 > 1.0:
        other = c2 * (nn[half - 1] + 0.5) ** (1 - p2) / (p2 - 1) - math.fsum(np.abs(t[half:]).tolist())
        spread = abs(est - other)
    else:
        spread = est
    return float(sign * est), float(spread)


@dataclass
class OracleResult:
    value: float
    error_estimate: float
    partial_sum: float
    tail_estimate: float
    richardson_gap: float
    domain_error: float
    tail_error: float
    per_mode: np.ndarray = field(repr=False, default=None)   # weighted, extrapolated
    config: OracleConfig | None = None

    def __iter__(self):
        # allows ``value, err = oracle_trace(...)``
        yield self.value
        yield self.error_estimate


def oracle_trace(which, geom: Geometry, coupling: Coupling | None, m: int, lam0: float,
                 cfg: OracleConfig | None = None) -> OracleResult:
    """Direct trace of the m-th resolvent-power difference, all modes up to the cap.

    With ``cfg.richardson`` the per-mode values from N and N/2 points are
    combined as ``(4 v_N - v_{N/2}) / 3``; with ``cfg.tail`` the remaining modes
    are added by a power-law extrapolation of the last ten weighted terms.
    """
    which = FormulaId.parse(which)
    cfg = (cfg or OracleConfig()).resolve(geom)
    fine = oracle_mode_terms(which, geom, coupling, m, lam0, cfg)
    if cfg.richardson:
        coarse = oracle_mode_terms(which, geom, coupling, m, lam0, cfg, cfg.grid_points // 2)
        terms = (4.0 * fine - coarse) / 3.0
        rich_gap = abs(math.fsum((mode_weight(geom.dim, np.arange(fine.size)) * (fine - coarse)).tolist())) / 3.0
    else:
        terms = fine
        rich_gap = 0.0
    n = np.arange(terms.size)
    weighted = terms * mode_weight(geom.dim, n)
    partial = math.fsum(weighted.tolist())
    tail_est, tail_err = _power_tail(n, weighted) if cfg.tail else (0.0, 0.0)
    value = partial + tail_est
    kappa = math.sqrt(-lam0)
    domain = abs(value) * math.exp(-2.0 * kappa * (cfg.r_max - geom.radius))
    return OracleResult(value, rich_gap + domain + tail_err, partial, tail_est, rich_gap,
                        domain, tail_err, weighted, cfg)


def _negative_eigs(op: RadialOperator) -> np.ndarray:
    lower = float(np.min(op.diag - np.abs(np.concatenate([[0.0], op.off])) -
                         np.abs(np.concatenate([op.off, [0.0]]))))
    if lower >= 0:
        return np.empty(0)
    try:
        vals = eigvalsh_tridiagonal(op.diag, op.off, select="v",
                                    select_range=(lower - 1.0, 0.0))
    except np.linalg.LinAlgError as exc:   # pragma: no cover - LAPACK failure
        raise NumericError(f"eigensolver failed on mode {op.mode.index}: {exc}") from exc
    return np.sort(vals)


def oracle_eigenvalues(model: str, mode, geom: Geometry, coupling: Coupling | None,
                       cfg: OracleConfig | None = None) -> np.ndarray:
    """Negative eigenvalues of the discrete operator, Richardson-extrapolated.

    Eigenvalues are paired by index between N and N/2 points; if the two grids
    disagree on the count, the fine-grid values are returned unextrapolated.
    """
    cfg = (cfg or OracleConfig()).resolve(geom)
    fine = _negative_eigs(build_radial(model, mode, geom, coupling, cfg))
    if not cfg.richardson:
        return fine
    coarse = _negative_eigs(build_radial(model, mode, geom, coupling, cfg, cfg.grid_points // 2))
    if coarse.size != fine.size:
        return fine
    return (4.0 * fine - coarse) / 3.0
