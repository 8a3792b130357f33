"""Divisor-class arithmetic on the one-point blow-up of projective space.

A class ``h[H] - e[E]`` on ``Bl_p P^m`` is stored as the pair ``(h, e)``.
The Kahler cone is ``h > e > 0`` and the first Chern class is
``(m+1)[H] - (m-1)[E]``, so under the Kahler-Ricci flow the class moves
along a straight line until it leaves the cone.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

#: absolute tolerance for cone-boundary equality tests
CONE_ATOL = 1e-12


class InvalidDimensionError(ValueError):
    pass


class NotKahlerError(ValueError):
    pass


class CurveClass(enum.Enum):
    """Curves whose areas are read off by intersection pairing."""

    LINE = "Line"
    EXC_LINE = "ExcLine"
    PROPER_TRANSFORM_LINE = "ProperTransformLine"

    def pairing(self) -> tuple[float, float]:
        """Return ``(H.C, E.C)``."""
        return _PAIRINGS[self]


_PAIRINGS = {
    CurveClass.LINE: (1.0, 0.0),
    CurveClass.EXC_LINE: (0.0, -1.0),
    CurveClass.PROPER_TRANSFORM_LINE: (1.0, 1.0),
}


class ScenarioKind(enum.Enum):
    CONTRACT_EXCEPTIONAL = "ContractExceptional"
    COLLAPSE_FIBER = "CollapseFiber"
    OTHER_BOUNDARY = "OtherBoundary"


@dataclass(frozen=True)
class KahlerClass:
    """The class ``h[H] - e[E]`` on ``Bl_p P^m``.

    Construction does not enforce positivity: flowed classes leave the cone
    at the singular time and callers test membership with
    :meth:`is_kahler`.
    """

    m: int
    h: float
    e: float

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise InvalidDimensionError(f"fiber dimension must be an integer >= 2, got {self.m}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "e", float(self.e))

    def is_kahler(self) -> bool:
        return self.h > self.e > 0.0

    def scaled(self, s: float) -> "KahlerClass":
        return KahlerClass(self.m, s * self.h, s * self.e)

    def as_dict(self) -> dict:
        return {"m": self.m, "h": self.h, "e": self.e}


def first_chern(m: int) -> KahlerClass:
    """``c_1(Bl_p P^m) = (m+1)[H] - (m-1)[E]``."""
    if int(m) != m or m < 2:
        raise InvalidDimensionError(f"fiber dimension must be an integer >= 2, got {m}")
    return KahlerClass(m, m + 1.0, m - 1.0)


def class_at(c0: KahlerClass, t: float) -> KahlerClass:
    """Class of ``omega(t)``, i.e. ``[omega_0] - t c_1``.

    The result may lie outside the Kahler cone.
    """
    if t < 0:
        raise ValueError("flow time must be non-negative")
    m = c0.m
    return KahlerClass(m, c0.h - (m + 1) * t, c0.e - (m - 1) * t)


def _require_kahler(c0: KahlerClass) -> None:
    if not c0.is_kahler():
        raise NotKahlerError(f"class not Kähler: h={c0.h}, e={c0.e} (need h > e > 0)")


def _edge_times(c0: KahlerClass) -> tuple[float, float]:
    # time at which e(t) hits 0, and at which h(t) - e(t) hits 0
    return c0.e / (c0.m - 1), (c0.h - c0.e) / 2.0


def first_singular_time(c0: KahlerClass) -> float:
    """Supremum of times for which ``class_at(c0, t)`` stays Kahler."""
    _require_kahler(c0)
    return min(_edge_times(c0))


def classify(c0: KahlerClass) -> ScenarioKind:
    """Which face of the Kahler cone the flowed class reaches first.

    ``ContractExceptional`` when only the exceptional coefficient dies,
    ``CollapseFiber`` when both edges are reached simultaneously (the class
    is proportional to ``c_1``), ``OtherBoundary`` when ``h - e`` dies first.
    """
    _require_kahler(c0)
    t_exc, t_vol = _edge_times(c0)
    if abs(t_exc - t_vol) <= CONE_ATOL:
        return ScenarioKind.COLLAPSE_FIBER
    if t_exc < t_vol:
        return ScenarioKind.CONTRACT_EXCEPTIONAL
    return ScenarioKind.OTHER_BOUNDARY


def curve_area(c: KahlerClass, curve: CurveClass) -> float:
    """Area of ``curve`` in class ``c``: ``(hH - eE).C``."""
    ph, pe = curve.pairing()
    return c.h * ph - c.e * pe


def is_on_cone_boundary(c: KahlerClass, atol: float = CONE_ATOL) -> bool:
    inside_closure = c.h - c.e >= -atol and c.e >= -atol
    return inside_closure and (abs(c.e) <= atol or abs(c.h - c.e) <= atol)
