"""Classical observables on the phase space R^4.

Points are ``r = (x1, x2, y1, y2)``. The closed family used throughout is the
product of one "Gaussian plus constant" factor per coordinate,

    F(r) = prod_k ( a_k exp(-(r_k - b_k)^2 / s_k^2) + c_k ),

which is bounded, has finite limits as any coordinate goes to infinity, and
stays in closed form under Gaussian smoothing. Arbitrary bounded functions
can be wrapped with :meth:`SepGaussFunction.from_callable`; those only work
with the quadrature and Monte Carlo evaluators.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

__all__ = [
    "COORDS",
    "GaussFactor",
    "SepGaussFunction",
    "PhaseVector",
    "NotSeparableError",
    "coord_index",
    "evaluate",
    "f_infinity",
]

COORDS = ("x1", "x2", "y1", "y2")


class NotSeparableError(TypeError):
    """The operation needs the closed separable form, not a bare callable."""


def coord_index(name) -> int:
    if isinstance(name, (int, np.integer)):
        if not 0 <= name < 4:
            raise ValueError(f"coordinate index out of range: {name}")
        return int(name)
    try:
        return COORDS.index(name)
    except ValueError:
        raise ValueError(f"unknown coordinate {name!r}; expected one of {COORDS}") from None


@dataclass(frozen=True)
class GaussFactor:
    """``amplitude * exp(-(u - center)^2 / width^2) + offset``."""

    amplitude: float = 0.0
    center: float = 0.0
    width: float = 1.0
    offset: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError("width must be positive")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    @classmethod
    def constant(cls, value: float) -> "GaussFactor":
        return cls(amplitude=0.0, offset=value)

    @property
    def is_constant(self) -> bool:
        return self.amplitude == 0

    @property
    def limit(self) -> float:
        """Value as the argument tends to +infinity (or -infinity)."""
        return self.offset

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.is_constant:
            return np.full(u.shape, self.offset)
        return self.amplitude * np.exp(-((u - self.center) / self.width) ** 2) + self.offset

    def to_dict(self) -> dict:
        return {"a": self.amplitude, "b": self.center, "s": self.width, "c": self.offset}

    @classmethod
    def from_dict(cls, d: dict) -> "GaussFactor":
        return cls(amplitude=float(d.get("a", 0.0)), center=float(d.get("b", 0.0)),
                   width=float(d.get("s", 1.0)), offset=float(d.get("c", 0.0)))


@dataclass(frozen=True)
class SepGaussFunction:
    """A separable observable, or a wrapped callable.

    ``factors`` holds four :class:`GaussFactor` (x1, x2, y1, y2). When built
    with :meth:`from_callable`, ``factors`` is ``None`` and ``func`` maps an
    array of shape ``(..., 4)`` to values of shape ``(...)``; it must be pure.
    """

    factors: Optional[tuple] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if (self.factors is None) == (self.func is None):
            raise ValueError("give exactly one of factors or func")
        if self.factors is not None:
            factors = tuple(self.factors)
            if len(factors) != 4 or not all(isinstance(f, GaussFactor) for f in factors):
                raise ValueError("need exactly four GaussFactor entries")
            object.__setattr__(self, "factors", factors)

    @classmethod
    def from_factors(cls, x1=None, x2=None, y1=None, y2=None) -> "SepGaussFunction":
        one = GaussFactor.constant(1.0)
        return cls(factors=tuple(f if f is not None else one for f in (x1, x2, y1, y2)))

    @classmethod
    def one(cls) -> "SepGaussFunction":
        return cls.from_factors()

    @classmethod
    def gaussian(cls, centers=(0.0, 0.0, 0.0, 0.0), widths=(1.0, 1.0, 1.0, 1.0)) -> "SepGaussFunction":
        """Product of unit-amplitude Gaussians with no offsets."""
        return cls(factors=tuple(GaussFactor(1.0, b, s, 0.0) for b, s in zip(centers, widths)))

    @classmethod
    def from_callable(cls, func: Callable) -> "SepGaussFunction":
        return cls(func=func)

    @property
    def is_separable(self) -> bool:
        return self.factors is not None

    def require_separable(self, what: str = "this operation"):
        if not self.is_separable:
            raise NotSeparableError(f"{what} needs a separable Gaussian-plus-constant function")

    def __call__(self, points):
        """Evaluate at points of shape ``(..., 4)``."""
        pts = np.asarray(points, dtype=float)
        if pts.shape[-1] != 4:
            raise ValueError("points must have a trailing axis of length 4")
        if self.func is not None:
            return np.asarray(self.func(pts), dtype=float)
        out = self.factors[0](pts[..., 0])
        for k in range(1, 4):
            out = out * self.factors[k](pts[..., k])
        return out

    @property
    def sup_bound(self) -> float:
        """An upper bound on ``|F|`` (exact for non-negative factors)."""
        self.require_separable("sup_bound")
        bound = 1.0
        for f in self.factors:
            bound *= max(abs(f.offset), abs(f.offset + f.amplitude))
        return bound

    def to_dict(self) -> dict:
        self.require_separable("serialisation")
        return {"factors": [f.to_dict() for f in self.factors]}

    @classmethod
    def from_dict(cls, d: dict) -> "SepGaussFunction":
        factors = d["factors"]
        if len(factors) != 4:
            raise ValueError("function description needs exactly four factors")
        return cls(factors=tuple(GaussFactor.from_dict(f) for f in factors))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "SepGaussFunction":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PhaseVector:
    """A phase-space point ``(x1, x2, y1, y2)``."""

    x1: float = 0.0
    x2: float = 0.0
    y1: float = 0.0
    y2: float = 0.0

    def __post_init__(self):
        if not np.all(np.isfinite([self.x1, self.x2, self.y1, self.y2])):
            raise ValueError("phase-space coordinates must be finite")

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x1, self.x2, self.y1, self.y2], dtype=dtype or float)

    def __iter__(self):
        return iter((self.x1, self.x2, self.y1, self.y2))

    @classmethod
    def from_array(cls, r: Sequence[float]) -> "PhaseVector":
        x1, x2, y1, y2 = (float(v) for v in r)
        return cls(x1, x2, y1, y2)


def as_point(r) -> np.ndarray:
    arr = np.asarray(r, dtype=float)
    if arr.shape != (4,):
        raise ValueError(f"expected a phase-space point of length 4, got shape {arr.shape}")
    return arr


def evaluate(F: SepGaussFunction, r) -> float:
    return float(F(as_point(r)))


def f_infinity(F: SepGaussFunction, dirs: Iterable) -> SepGaussFunction:
    """Send the coordinates in ``dirs`` to +infinity.

    Each named factor is replaced by its offset constant, so the result is
    constant along those coordinates.
    """
    F.require_separable("f_infinity")
    idx = {coord_index(d) for d in dirs}
    return SepGaussFunction(factors=tuple(
        GaussFactor.constant(f.limit) if k in idx else f for k, f in enumerate(F.factors)))
