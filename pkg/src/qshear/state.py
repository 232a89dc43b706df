"""Coordinate charts shared by the dynamics, transform, and analysis layers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["ChartSingularityError", "ReducedState", "EigenState", "PhysState"]


class ChartSingularityError(ValueError):
    """A state sits on a coordinate-chart singularity or outside a formula's domain."""


@dataclass(frozen=True)
class ReducedState:
    """The v = w = 0 chart (x, y, z) of a Q-tensor."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        for name in ("x", "y", "z"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_array(cls, u) -> "ReducedState":
        x, y, z = (float(t) for t in u)
        return cls(x, y, z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


@dataclass(frozen=True)
class EigenState:
    """Two eigenvalues (lam, mu) of a diagonal Q-tensor; the third is -lam-mu."""

    lam: float
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "mu", float(self.mu))

    @classmethod
    def from_array(cls, u) -> "EigenState":
        lam, mu = (float(t) for t in u)
        return cls(lam, mu)

    def as_array(self) -> np.ndarray:
        return np.array([self.lam, self.mu])


_QUARTER_PI = 0.25 * math.pi
_HALF_PI = 0.5 * math.pi


@dataclass(frozen=True)
class PhysState:
    """Scalar order parameters (S1, S2) and in-plane director angle theta.

    theta is normalized into [-pi/4, pi/4) at construction.  Shifting theta by
    an odd multiple of pi/2 exchanges the roles of the in-plane eigenvectors,
    so the normalization applies the compensating order-parameter swap
    (S1, S2) -> ((3 S2 - S1)/2, (S1 + S2)/2) and leaves the represented tensor
    unchanged.
    """

    S1: float
    S2: float
    theta: float

    def __post_init__(self):
        s1, s2, th = float(self.S1), float(self.S2), float(self.theta)
        k = math.floor((th + _QUARTER_PI) / _HALF_PI)
        if k != 0:
            th = th - k * _HALF_PI
            if k % 2:
                s1, s2 = 0.5 * (3.0 * s2 - s1), 0.5 * (s1 + s2)
        object.__setattr__(self, "S1", s1)
        object.__setattr__(self, "S2", s2)
        object.__setattr__(self, "theta", th)

    @classmethod
    def from_array(cls, u) -> "PhysState":
        s1, s2, th = (float(t) for t in u)
        return cls(s1, s2, th)

    def as_array(self) -> np.ndarray:
        return np.array([self.S1, self.S2, self.theta])
