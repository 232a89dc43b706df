"""Transforms between the slice chart (x, y, z) and the order-parameter
chart (S1, S2, theta), with domain bookkeeping.

The transform is a diffeomorphism on each half-space x - y > 0 and x - y < 0;
the plane x = y is the chart boundary, where the director angle degenerates.
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .state import ChartSingularityError, PhysState, ReducedState

__all__ = [
    "ChartDomain",
    "PhysState",
    "ChartSingularityError",
    "phys_to_xyz",
    "xyz_to_phys",
    "chart_domain",
]


class ChartDomain(enum.Enum):
    """Which half-space of the slice chart a state belongs to."""

    V_PLUS = "v-plus"
    V_MINUS = "v-minus"
    BOUNDARY = "boundary"


def _phys_triple(s):
    if isinstance(s, PhysState):
        return s.S1, s.S2, s.theta
    s1, s2, th = (float(t) for t in np.asarray(s, dtype=float))
    return s1, s2, th


def _xyz_triple(s):
    if isinstance(s, ReducedState):
        return s.x, s.y, s.z
    x, y, z = (float(t) for t in np.asarray(s, dtype=float))
    return x, y, z


def phys_to_xyz(s) -> ReducedState:
    """Map order parameters and director angle to slice coordinates."""
    s1, s2, th = _phys_triple(s)
    cos2 = math.cos(th) ** 2
    sin2 = math.sin(th) ** 2
    x = 1.5 * s1 * (cos2 - 1.0 / 3.0) + 1.5 * s2 * sin2
    y = 1.5 * s1 * (sin2 - 1.0 / 3.0) + 1.5 * s2 * cos2
    z = 0.75 * (s1 - s2) * math.sin(2.0 * th)
    return ReducedState(x, y, z)


def xyz_to_phys(s) -> PhysState:
    """Map slice coordinates to order parameters and director angle.

    Defined only off the plane x = y; on it the director angle is arbitrary
    and a ChartSingularityError is raised.
    """
    x, y, z = _xyz_triple(s)
    if x == y:
        raise ChartSingularityError(
            f"the order-parameter chart degenerates at x == y (= {x}); "
            "the director angle is arbitrary there"
        )
    diff = x - y
    sgn = 1.0 if diff > 0.0 else -1.0
    root = math.hypot(diff, 2.0 * z)
    half_sum = 0.5 * (x + y)
    theta = 0.5 * math.atan(2.0 * z / diff)
    s1 = half_sum + 0.5 * sgn * root
    s2 = half_sum - sgn * root / 6.0
    return PhysState(s1, s2, theta)


def chart_domain(s, tol: float = 1e-12) -> ChartDomain:
    """Classify a slice state by the sign of x - y."""
    x, y, _ = _xyz_triple(s)
    diff = x - y
    if abs(diff) <= tol:
        return ChartDomain.BOUNDARY
    return ChartDomain.V_PLUS if diff > 0.0 else ChartDomain.V_MINUS
