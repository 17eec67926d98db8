"""Interface geometry, angular modes, couplings and evaluation plans."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, PlanError, UsageError
from .jets import MAX_ORDER

MODE_CEILING = 10000
RADIUS_WINDOW = (1e-3, 1e3)


class FormulaId(str, enum.Enum):
    """The four resolvent-power differences whose traces are evaluated."""

    DELTA_VS_FREE = "delta_vs_free"
    DELTAPRIME_VS_NEUMANN = "deltaprime_vs_neumann"
    DELTAPRIME_VS_FREE = "deltaprime_vs_free"
    NEUMANN_VS_FREE = "neumann_vs_free"

    @classmethod
    def parse(cls, name: "str | FormulaId") -> "FormulaId":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(f.value for f in cls)
            raise UsageError(f"unknown formula {name!r} (choose from {choices})") from None

    @property
    def model(self) -> str | None:
        """Coupling model the formula needs (``None``: no coupling involved)."""
        if self is FormulaId.DELTA_VS_FREE:
            return "delta"
        if self is FormulaId.NEUMANN_VS_FREE:
            return None
        return "delta_prime"

    def min_m_bound(self, dim: int) -> tuple[float, str]:
        """Lower bound on m (strict) and its symbolic form."""
        if self in (FormulaId.DELTA_VS_FREE, FormulaId.DELTAPRIME_VS_NEUMANN):
            return (dim - 2) / 2, "(d-2)/2"
        return (dim - 1) / 2, "(d-1)/2"


@dataclass(frozen=True)
class Geometry:
    """Circle (dim=2) or sphere (dim=3) of the given radius, centred at the origin."""

    dim: int = 2
    radius: float = 1.0

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise DomainError(f"dimension must be 2 or 3, got {self.dim}")
        lo, hi = RADIUS_WINDOW
        if not lo <= self.radius <= hi:
            raise DomainError(f"radius {self.radius} outside [{lo}, {hi}]")

    @property
    def bessel_kind(self) -> str:
        return "cylindrical" if self.dim == 2 else "spherical"


@dataclass(frozen=True)
class ModeSpec:
    index: int
    weight: int


def mode_weight(dim: int, index):
    """Multiplicity of angular mode ``index``; vectorised over arrays."""
    index = np.asarray(index)
    if dim == 2:
        w = np.where(index == 0, 1, 2)
    elif dim == 3:
        w = 2 * index + 1
    else:
        raise DomainError(f"dimension must be 2 or 3, got {dim}")
    return int(w) if w.ndim == 0 else w


def enumerate_modes(geom: Geometry, cap: int) -> list[ModeSpec]:
    """Modes 0..cap with their multiplicities, ascending."""
    if cap < 0:
        raise UsageError("mode cap must be non-negative")
    return [ModeSpec(n, mode_weight(geom.dim, n)) for n in range(cap + 1)]


_MODELS = {"delta": "delta", "delta_prime": "delta_prime", "deltaprime": "delta_prime",
           "delta-prime": "delta_prime"}


@dataclass(frozen=True)
class Coupling:
    """Constant interaction strength (alpha for delta, omega for delta-prime)."""

    model: str = "delta"
    strength: float = 0.0

    def __post_init__(self):
        model = _MODELS.get(str(self.model).lower())
        if model is None:
            raise UsageError(f"unknown coupling model {self.model!r}")
        object.__setattr__(self, "model", model)
        if not np.isfinite(self.strength):
            raise DomainError("coupling strength must be finite")


@dataclass(frozen=True)
class EnginePlan:
    """Settings for one trace evaluation.

    ``mode_cap="auto"`` means adaptive summation up to the hard ceiling.
    With ``adaptive=False`` exactly the modes ``0..mode_cap`` are summed.
    """

    m: int
    lam0: float
    mode_cap: int | str = "auto"
    abs_tol: float = 1e-12
    rel_tol: float = 1e-6
    adaptive: bool = True
    keep_per_mode: bool = False
    min_modes: int = 12
    block: int = 64

    @property
    def jet_order(self) -> int:
        return self.m

    @property
    def max_modes(self) -> int:
        if self.mode_cap == "auto":
            return MODE_CEILING
        return int(self.mode_cap)


def validate_plan(plan: EnginePlan, geom: Geometry, which) -> None:
    """Reject plans for which the resolvent power difference is not trace class."""
    which = FormulaId.parse(which)
    if int(plan.m) != plan.m or plan.m < 1:
        raise PlanError(f"m must be a positive integer, got {plan.m}")
    if plan.m > MAX_ORDER:
        raise PlanError(f"m={plan.m} exceeds the supported jet order {MAX_ORDER}")
    bound, symbol = which.min_m_bound(geom.dim)
    if not plan.m > bound:
        raise PlanError(
            f"{which.value} in d={geom.dim} requires m > {symbol} = {bound:g}, got m={plan.m}"
        )
    if not plan.lam0 < 0:
        raise DomainError(f"spectral parameter must be negative, got {plan.lam0}")
    if plan.mode_cap != "auto":
        cap = int(plan.mode_cap)
        if not 0 <= cap <= MODE_CEILING:
            raise PlanError(f"mode_cap must lie in [0, {MODE_CEILING}], got {cap}")
    if plan.abs_tol < 0 or plan.rel_tol < 0:
        raise PlanError("tolerances must be non-negative")
