"""Right-hand sides of the shear-driven Q-tensor systems and their reductions.

Every function here is pure.  Matrix-valued systems act on the five-entry
chart (x, y, z, v, w); the matrix algebra is expanded into polynomial chart
components once, so the same expressions serve the typed tensor API and the
array-based fast path used by the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .state import ChartSingularityError, EigenState, PhysState, ReducedState
from .tensor import MaterialParams, QTensor, _grad_terms

__all__ = [
    "SystemKind",
    "FULL",
    "COROTATIONAL",
    "GRADIENT_FLOW",
    "EIGEN_PAIR",
    "REDUCED3D",
    "RESCALED",
    "SHORTTIME_MATRIX",
    "SHORTTIME3D",
    "PHYS",
    "plane_h",
    "legacy",
    "ReducedState",
    "EigenState",
    "dimension",
    "columns",
    "state_to_array",
    "state_norm",
    "vector_field",
    "rhs_full",
    "rhs_corotational",
    "rhs_gradient",
    "rhs_eigen",
    "rhs_reduced",
    "rhs_rescaled",
    "rhs_shorttime_matrix",
    "rhs_shorttime_coords",
    "rhs_plane_h",
    "rhs_phys",
    "rhs_legacy",
    "stationary_residual",
    "jacobian",
]

_TWO_THIRDS = 2.0 / 3.0


@dataclass(frozen=True)
class SystemKind:
    """Tag identifying one of the integrable systems, plus leaf parameters.

    ``plane-h`` carries the conserved-ratio level h of its invariant plane;
    ``legacy`` carries the (delta, gamma) coefficients of the comparison model.
    """

    tag: str
    h: float | None = None
    delta: float | None = None
    gamma: float | None = None

    def __post_init__(self):
        if self.tag not in _DIMENSION:
            raise ValueError(f"unknown system kind {self.tag!r}")
        if self.tag == "plane-h" and self.h is None:
            raise ValueError("plane-h requires the leaf level h")
        if self.tag == "legacy" and (self.delta is None or self.gamma is None):
            raise ValueError("legacy requires delta and gamma")

    def __str__(self):
        if self.tag == "plane-h":
            return f"plane-h(h={self.h})"
        if self.tag == "legacy":
            return f"legacy(delta={self.delta}, gamma={self.gamma})"
        return self.tag


_DIMENSION = {
    "full": 5,
    "corotational": 5,
    "gradient-flow": 5,
    "rescaled": 5,
    "shorttime-matrix": 5,
    "legacy": 5,
    "reduced3d": 3,
    "shorttime3d": 3,
    "phys": 3,
    "eigen-pair": 2,
    "plane-h": 2,
}

MATRIX_TAGS = frozenset(
    {"full", "corotational", "gradient-flow", "rescaled", "shorttime-matrix", "legacy"}
)

FULL = SystemKind("full")
COROTATIONAL = SystemKind("corotational")
GRADIENT_FLOW = SystemKind("gradient-flow")
EIGEN_PAIR = SystemKind("eigen-pair")
REDUCED3D = SystemKind("reduced3d")
RESCALED = SystemKind("rescaled")
SHORTTIME_MATRIX = SystemKind("shorttime-matrix")
SHORTTIME3D = SystemKind("shorttime3d")
PHYS = SystemKind("phys")


def plane_h(h: float) -> SystemKind:
    """Planar restriction of the short-time system to the leaf y = 1/6 - h(1-6x)."""
    return SystemKind("plane-h", h=float(h))


def legacy(delta: float, gamma: float) -> SystemKind:
    """Comparison shear-flow model with linear flow coupling delta([W,Q] + gamma D)."""
    return SystemKind("legacy", delta=float(delta), gamma=float(gamma))


def dimension(kind: SystemKind) -> int:
    return _DIMENSION[kind.tag]


def columns(kind: SystemKind) -> tuple[str, ...]:
    """CSV column names of the state components."""
    if kind.tag in MATRIX_TAGS:
        return ("x", "y", "z", "v", "w")
    if kind.tag == "phys":
        return ("S1", "S2", "theta")
    if kind.tag == "eigen-pair":
        return ("lambda", "mu")
    if kind.tag == "plane-h":
        return ("x", "z")
    return ("x", "y", "z")


def state_to_array(kind: SystemKind, state) -> np.ndarray:
    """Coerce a typed state / QTensor / sequence into the chart array."""
    if isinstance(state, QTensor):
        u = state.as_array()
    elif isinstance(state, (ReducedState, EigenState, PhysState)):
        u = state.as_array()
    else:
        u = np.asarray(state, dtype=float)
    u = np.atleast_1d(u).astype(float)
    dim = dimension(kind)
    if u.shape != (dim,):
        raise ValueError(f"system {kind} expects a state of dimension {dim}, got shape {u.shape}")
    return u


def state_norm(kind, u) -> float:
    """Norm used for convergence and periodicity tests of a given system.

    Matrix systems use the Frobenius norm of the represented tensor; the
    coordinate systems use the Euclidean norm.
    """
    u = np.asarray(u, dtype=float)
    if isinstance(kind, SystemKind) and kind.tag in MATRIX_TAGS:
        x, y, z, v, w = u
        return math.sqrt(2.0 * (x * x + y * y + x * y + z * z + v * v + w * w))
    return float(np.linalg.norm(u))


# ---------------------------------------------------------------------------
# Chart components of the matrix vector fields.  All helpers broadcast.

def _commutator_terms(x, y, z, v, w):
    """[W, Q] for the shear vorticity W."""
    return 2.0 * z, -2.0 * z, y - x, w, -v


def _aligning_terms(x, y, z, v, w):
    """DQ + QD + (2/3) D - 2 (Q + Id/3) tr(QD): the strain-alignment part."""
    return (
        z * (_TWO_THIRDS - 4.0 * x),
        z * (_TWO_THIRDS - 4.0 * y),
        _TWO_THIRDS + x + y - 4.0 * z * z,
        w - 4.0 * z * v,
        v - 4.0 * z * w,
    )


def _full_terms(x, y, z, v, w, a, b, c, xi):
    cx, cy, cz, cv, cw = _commutator_terms(x, y, z, v, w)
    fx, fy, fz, fv, fw = _aligning_terms(x, y, z, v, w)
    gx, gy, gz, gv, gw = _grad_terms(x, y, z, v, w, a, b, c)
    return (
        cx + xi * fx - gx,
        cy + xi * fy - gy,
        cz + xi * fz - gz,
        cv + xi * fv - gv,
        cw + xi * fw - gw,
    )


def _corotational_terms(x, y, z, v, w, a, b, c):
    cx, cy, cz, cv, cw = _commutator_terms(x, y, z, v, w)
    gx, gy, gz, gv, gw = _grad_terms(x, y, z, v, w, a, b, c)
    return cx - gx, cy - gy, cz - gz, cv - gv, cw - gw


def _rescaled_terms(x, y, z, v, w, a, b, c, inv_xi):
    cx, cy, cz, cv, cw = _corotational_terms(x, y, z, v, w, a, b, c)
    fx, fy, fz, fv, fw = _aligning_terms(x, y, z, v, w)
    return (
        fx + inv_xi * cx,
        fy + inv_xi * cy,
        fz + inv_xi * cz,
        fv + inv_xi * cv,
        fw + inv_xi * cw,
    )


def _eigen_terms(lam, mu, a, b, c):
    shared = 2.0 * c * (lam * lam + mu * mu + lam * mu) + a
    dlam = -lam * shared + b * (lam * lam - 2.0 * mu * mu - 2.0 * lam * mu) / 3.0
    dmu = -mu * shared + b * (mu * mu - 2.0 * lam * lam - 2.0 * lam * mu) / 3.0
    return dlam, dmu


def _phys_terms(s1, s2, th):
    if s1 == s2:
        raise ChartSingularityError(
            f"order-parameter chart is singular at S1 == S2 (= {s1}); "
            "the angle equation divides by S1 - S2"
        )
    sin2 = math.sin(2.0 * th)
    cos2 = math.cos(2.0 * th)
    ds1 = (1.0 + 3.0 * s1) * (3.0 * s2 - 3.0 * s1 + 2.0) * sin2 / 3.0
    ds2 = (27.0 * s2 * s2 - 27.0 * s1 * s2 - 9.0 * s2 + 3.0 * s1 - 2.0) * sin2 / 9.0
    dth = (4.0 + 3.0 * s1 + 9.0 * s2) * cos2 / (9.0 * (s1 - s2))
    return ds1, ds2, dth


# ---------------------------------------------------------------------------
# Typed public right-hand sides.

def rhs_full(q: QTensor, p: MaterialParams) -> QTensor:
    """Full shear dynamics: rotation, strain alignment, and bulk relaxation."""
    return QTensor(*_full_terms(q.x, q.y, q.z, q.v, q.w, p.a, p.b, p.c, p.xi))


def rhs_corotational(q: QTensor, p: MaterialParams) -> QTensor:
    """Co-rotational dynamics [W,Q] - grad F(Q) (the xi = 0 case)."""
    return QTensor(*_corotational_terms(q.x, q.y, q.z, q.v, q.w, p.a, p.b, p.c))


def rhs_gradient(u: QTensor, p: MaterialParams) -> QTensor:
    """Plain bulk gradient flow -grad F(U)."""
    gx, gy, gz, gv, gw = _grad_terms(u.x, u.y, u.z, u.v, u.w, p.a, p.b, p.c)
    return QTensor(-gx, -gy, -gz, -gv, -gw)


def rhs_rescaled(q: QTensor, p: MaterialParams) -> QTensor:
    """Time-rescaled dynamics: strain alignment plus (1/xi) co-rotational part.

    Satisfies xi * rhs_rescaled(Q) = rhs_full(Q) up to floating point.
    """
    if p.xi == 0.0:
        raise ValueError("the rescaled system is undefined at xi = 0")
    return QTensor(*_rescaled_terms(q.x, q.y, q.z, q.v, q.w, p.a, p.b, p.c, 1.0 / p.xi))


def rhs_shorttime_matrix(r: QTensor) -> QTensor:
    """Strain-only dynamics governing the initial-time regime."""
    return QTensor(*_aligning_terms(r.x, r.y, r.z, r.v, r.w))


def rhs_legacy(q: QTensor, delta: float, gamma: float, p: MaterialParams) -> QTensor:
    """Comparison model delta([W,Q] + gamma D) - grad F(Q)."""
    cx, cy, cz, cv, cw = _commutator_terms(q.x, q.y, q.z, q.v, q.w)
    gx, gy, gz, gv, gw = _grad_terms(q.x, q.y, q.z, q.v, q.w, p.a, p.b, p.c)
    return QTensor(
        delta * cx - gx,
        delta * cy - gy,
        delta * (cz + gamma) - gz,
        delta * cv - gv,
        delta * cw - gw,
    )


def stationary_residual(q: QTensor, p: MaterialParams) -> QTensor:
    """Residual [W,Q] - grad F(Q) of the long-time stationary balance.

    Its zero set consists of the isotropic state and the uniaxial critical
    tensors aligned with the vorticity axis e3; uniaxial critical tensors
    with other directors leave a nonzero commutator.
    """
    return rhs_corotational(q, p)


def rhs_eigen(s, p: MaterialParams) -> np.ndarray:
    """Closed eigenvalue dynamics of the gradient flow on diagonal tensors."""
    lam, mu = _unpack(s, 2)
    return np.array(_eigen_terms(lam, mu, p.a, p.b, p.c))


def rhs_reduced(s, p: MaterialParams) -> np.ndarray:
    """Full dynamics restricted to the invariant v = w = 0 slice."""
    x, y, z = _unpack(s, 3)
    tx, ty, tz, _, _ = _full_terms(x, y, z, 0.0, 0.0, p.a, p.b, p.c, p.xi)
    return np.array([tx, ty, tz])


def rhs_shorttime_coords(s) -> np.ndarray:
    """Short-time system in slice coordinates (x, y, z)."""
    x, y, z = _unpack(s, 3)
    return np.array(
        [
            _TWO_THIRDS * (1.0 - 6.0 * x) * z,
            _TWO_THIRDS * (1.0 - 6.0 * y) * z,
            _TWO_THIRDS + x + y - 4.0 * z * z,
        ]
    )


def rhs_plane_h(x: float, z: float, h: float) -> np.ndarray:
    """Short-time system restricted to the invariant leaf y = 1/6 - h(1-6x)."""
    return np.array(
        [
            _TWO_THIRDS * (1.0 - 6.0 * x) * z,
            5.0 / 6.0 + x - 4.0 * z * z - h * (1.0 - 6.0 * x),
        ]
    )


def rhs_phys(s) -> np.ndarray:
    """Short-time dynamics of the order parameters and director angle.

    Undefined on the plane S1 = S2, where the director angle degenerates.
    """
    s1, s2, th = _unpack(s, 3)
    return np.array(_phys_terms(s1, s2, th))


def _unpack(state, n: int):
    if isinstance(state, (ReducedState, EigenState, PhysState)):
        vals = state.as_array()
    else:
        vals = np.asarray(state, dtype=float)
        if vals.shape != (n,):
            raise ValueError(f"expected a state of dimension {n}, got shape {vals.shape}")
    return (float(t) for t in vals)


# ---------------------------------------------------------------------------
# Array-based dispatch for the integrator.

def vector_field(kind, p: MaterialParams | None = None) -> Callable[[float, np.ndarray], np.ndarray]:
    """Return f(t, u) -> du/dt operating on chart arrays.

    ``kind`` may also be a callable f(t, u), which is returned unchanged; this
    keeps the integrator testable on scalar problems.
    """
    if callable(kind) and not isinstance(kind, SystemKind):
        return kind
    tag = kind.tag
    if tag in ("full", "corotational", "gradient-flow", "rescaled", "legacy",
               "reduced3d", "eigen-pair"):
        if p is None:
            raise ValueError(f"system {kind} requires material parameters")
        a, b, c, xi = p.a, p.b, p.c, p.xi

    if tag == "full":
        def f(t, u):
            x, y, z, v, w = u.tolist()
            return np.array(_full_terms(x, y, z, v, w, a, b, c, xi))
    elif tag == "corotational":
        def f(t, u):
            x, y, z, v, w = u.tolist()
            return np.array(_corotational_terms(x, y, z, v, w, a, b, c))
    elif tag == "gradient-flow":
        def f(t, u):
            x, y, z, v, w = u.tolist()
            gx, gy, gz, gv, gw = _grad_terms(x, y, z, v, w, a, b, c)
            return np.array([-gx, -gy, -gz, -gv, -gw])
    elif tag == "rescaled":
        if xi == 0.0:
            raise ValueError("the rescaled system is undefined at xi = 0")
        inv_xi = 1.0 / xi

        def f(t, u):
            x, y, z, v, w = u.tolist()
            return np.array(_rescaled_terms(x, y, z, v, w, a, b, c, inv_xi))
    elif tag == "legacy":
        delta, gamma = kind.delta, kind.gamma

        def f(t, u):
            x, y, z, v, w = u.tolist()
            cx, cy, cz, cv, cw = _commutator_terms(x, y, z, v, w)
            gx, gy, gz, gv, gw = _grad_terms(x, y, z, v, w, a, b, c)
            return np.array([
                delta * cx - gx,
                delta * cy - gy,
                delta * (cz + gamma) - gz,
                delta * cv - gv,
                delta * cw - gw,
            ])
    elif tag == "shorttime-matrix":
        def f(t, u):
            x, y, z, v, w = u.tolist()
            return np.array(_aligning_terms(x, y, z, v, w))
    elif tag == "reduced3d":
        def f(t, u):
            x, y, z = u.tolist()
            tx, ty, tz, _, _ = _full_terms(x, y, z, 0.0, 0.0, a, b, c, xi)
            return np.array([tx, ty, tz])
    elif tag == "shorttime3d":
        def f(t, u):
            x, y, z = u.tolist()
            return np.array([
                _TWO_THIRDS * (1.0 - 6.0 * x) * z,
                _TWO_THIRDS * (1.0 - 6.0 * y) * z,
                _TWO_THIRDS + x + y - 4.0 * z * z,
            ])
    elif tag == "plane-h":
        h = kind.h

        def f(t, u):
            x, z = u.tolist()
            return np.array([
                _TWO_THIRDS * (1.0 - 6.0 * x) * z,
                5.0 / 6.0 + x - 4.0 * z * z - h * (1.0 - 6.0 * x),
            ])
    elif tag == "eigen-pair":
        def f(t, u):
            lam, mu = u.tolist()
            return np.array(_eigen_terms(lam, mu, a, b, c))
    elif tag == "phys":
        def f(t, u):
            s1, s2, th = u.tolist()
            return np.array(_phys_terms(s1, s2, th))
    else:  # pragma: no cover - guarded by SystemKind validation
        raise ValueError(f"unknown system kind {tag!r}")
    return f


# ---------------------------------------------------------------------------
# Jacobians.

def jacobian(kind: SystemKind, state, p: MaterialParams | None = None,
             step: float | None = None) -> np.ndarray:
    """Jacobian of the vector field at ``state``.

    Analytic for the short-time coordinate system and its planar leaves,
    central finite differences elsewhere (default step 1e-6 max(1, |state|)).
    """
    u = state_to_array(kind, state)
    if kind.tag == "shorttime3d":
        x, y, z = u
        return np.array([
            [-4.0 * z, 0.0, _TWO_THIRDS * (1.0 - 6.0 * x)],
            [0.0, -4.0 * z, _TWO_THIRDS * (1.0 - 6.0 * y)],
            [1.0, 1.0, -8.0 * z],
        ])
    if kind.tag == "plane-h":
        x, z = u
        return np.array([
            [-4.0 * z, _TWO_THIRDS * (1.0 - 6.0 * x)],
            [1.0 + 6.0 * kind.h, -8.0 * z],
        ])
    if kind.tag == "phys" and u[0] == u[1]:
        raise ChartSingularityError(
            "cannot linearize the order-parameter system on the singular plane S1 == S2"
        )
    f = vector_field(kind, p)
    if step is None:
        step = 1e-6 * max(1.0, float(np.linalg.norm(u)))
    dim = u.shape[0]
    jac = np.empty((dim, dim))
    for j in range(dim):
        up = u.copy()
        um = u.copy()
        up[j] += step
        um[j] -= step
        jac[:, j] = (f(0.0, up) - f(0.0, um)) / (2.0 * step)
    return jac
