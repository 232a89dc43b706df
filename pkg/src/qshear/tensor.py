"""Q-tensor algebra: construction, norms, the bulk potential and its gradient.

A Q-tensor is a symmetric traceless 3x3 matrix.  It is stored through five
independent entries (x, y, z, v, w) laid out as

    [[x, z, v],
     [z, y, w],
     [v, w, -x-y]]

so the trace-free constraint is an identity of the representation rather than
a runtime check.  All functions here are pure and all values immutable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MaterialParams",
    "QTensor",
    "EigenFrame",
    "shear_matrices",
    "commutator",
    "bulk_energy",
    "bulk_gradient",
    "frobenius",
    "inner",
    "uniaxial",
    "critical_s",
    "eigen_decomposition",
]

# Vorticity and strain of the imposed shear flow u = (2y, 0, 0).
_W = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_D = np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
_W.flags.writeable = False
_D.flags.writeable = False


@dataclass(frozen=True)
class MaterialParams:
    """Bulk-potential coefficients and the tumbling parameter.

    The bulk potential is F(Q) = a/2 tr(Q^2) - b/3 tr(Q^3) + c/4 tr^2(Q^2).
    Construction requires b > 0, c > 0 and b^2 - 24ac > 0 so that the nonzero
    uniaxial critical points exist; xi may be any real (xi = 0 is the
    co-rotational case).
    """

    a: float
    b: float
    c: float
    xi: float = 0.0

    def __post_init__(self):
        for name in ("a", "b", "c", "xi"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise ValueError(f"material parameter {name} must be finite, got {val!r}")
            object.__setattr__(self, name, val)
        if self.b <= 0.0 or self.c <= 0.0:
            raise ValueError(f"require b > 0 and c > 0, got b={self.b}, c={self.c}")
        if self.b * self.b - 24.0 * self.a * self.c <= 0.0:
            raise ValueError(
                "require b^2 - 24ac > 0, got "
                f"b^2-24ac={self.b * self.b - 24.0 * self.a * self.c}"
            )

    @property
    def discriminant(self) -> float:
        return self.b * self.b - 24.0 * self.a * self.c


@dataclass(frozen=True)
class QTensor:
    """Symmetric traceless 3x3 tensor in the five-entry chart (x, y, z, v, w)."""

    x: float
    y: float
    z: float
    v: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        for name in ("x", "y", "z", "v", "w"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_array(cls, u) -> "QTensor":
        x, y, z, v, w = (float(t) for t in u)
        return cls(x, y, z, v, w)

    @classmethod
    def from_matrix(cls, m, atol: float = 1e-8) -> "QTensor":
        """Build from a 3x3 matrix, rejecting inputs that are not symmetric
        traceless within ``atol``.  Small violations are projected away."""
        m = np.asarray(m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
        if np.max(np.abs(m - m.T)) > atol:
            raise ValueError("matrix is not symmetric within tolerance")
        if abs(m[0, 0] + m[1, 1] + m[2, 2]) > atol:
            raise ValueError("matrix is not traceless within tolerance")
        s = 0.5 * (m + m.T)
        return cls(s[0, 0], s[1, 1], s[0, 1], s[0, 2], s[1, 2])

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z, self.v, self.w])

    def matrix(self) -> np.ndarray:
        x, y, z, v, w = self.x, self.y, self.z, self.v, self.w
        return np.array([[x, z, v], [z, y, w], [v, w, -x - y]])

    def norm(self) -> float:
        return frobenius(self)

    def __add__(self, other: "QTensor") -> "QTensor":
        return QTensor(self.x + other.x, self.y + other.y, self.z + other.z,
                       self.v + other.v, self.w + other.w)

    def __sub__(self, other: "QTensor") -> "QTensor":
        return QTensor(self.x - other.x, self.y - other.y, self.z - other.z,
                       self.v - other.v, self.w - other.w)

    def __mul__(self, s: float) -> "QTensor":
        s = float(s)
        return QTensor(s * self.x, s * self.y, s * self.z, s * self.v, s * self.w)

    __rmul__ = __mul__

    def __neg__(self) -> "QTensor":
        return QTensor(-self.x, -self.y, -self.z, -self.v, -self.w)


@dataclass
class EigenFrame:
    """Descending eigenvalues and a right-handed orthonormal eigenvector frame.

    ``frame[:, i]`` is the unit eigenvector of ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    frame: np.ndarray

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        self.frame = np.asarray(self.frame, dtype=float)
        self.eigenvalues.flags.writeable = False
        self.frame.flags.writeable = False

    def reconstruct(self) -> np.ndarray:
        return (self.frame * self.eigenvalues) @ self.frame.T


def shear_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Vorticity W (antisymmetric) and strain D (symmetric) of the shear flow."""
    return _W.copy(), _D.copy()


def _as_matrix(q) -> np.ndarray:
    if isinstance(q, QTensor):
        return q.matrix()
    m = np.asarray(q, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"expected a QTensor or 3x3 matrix, got shape {m.shape}")
    return m


def commutator(a, q) -> np.ndarray:
    """Matrix commutator AQ - QA.

    For antisymmetric A and a Q-tensor the result is symmetric and traceless.
    """
    am = np.asarray(a, dtype=float)
    qm = _as_matrix(q)
    return am @ qm - qm @ am


def inner(a, b) -> float:
    """Matrix scalar product tr(B^t A)."""
    am = _coerce(a)
    bm = _coerce(b)
    return float(np.sum(am * bm))


def _coerce(a) -> np.ndarray:
    return a.matrix() if isinstance(a, QTensor) else np.asarray(a, dtype=float)


def frobenius(q) -> float:
    """Frobenius norm sqrt(tr(Q^t Q)); equals sqrt(tr(Q^2)) for symmetric Q."""
    if isinstance(q, QTensor):
        x, y, z, v, w = q.x, q.y, q.z, q.v, q.w
        return math.sqrt(2.0 * (x * x + y * y + x * y + z * z + v * v + w * w))
    m = np.asarray(q, dtype=float)
    return math.sqrt(float(np.sum(m * m)))


def bulk_energy(q, p: MaterialParams) -> float:
    """Bulk free energy a/2 tr(Q^2) - b/3 tr(Q^3) + c/4 tr^2(Q^2)."""
    m = _as_matrix(q)
    m2 = m @ m
    t2 = float(np.trace(m2))
    t3 = float(np.sum(m2 * m))  # tr(Q^3) for symmetric Q
    return 0.5 * p.a * t2 - (p.b / 3.0) * t3 + 0.25 * p.c * t2 * t2


def _grad_terms(x, y, z, v, w, a, b, c):
    """Chart components of aQ - b(Q^2 - |Q|^2 Id/3) + c|Q|^2 Q.

    Works elementwise on scalars or equally shaped arrays.  The Lagrange
    multiplier term makes the result traceless identically.
    """
    q2 = 2.0 * (x * x + y * y + x * y + z * z + v * v + w * w)
    m = a + c * q2
    t = q2 / 3.0
    gx = m * x - b * (x * x + z * z + v * v - t)
    gy = m * y - b * (y * y + z * z + w * w - t)
    gz = m * z - b * (z * (x + y) + v * w)
    gv = m * v - b * (z * w - y * v)
    gw = m * w - b * (z * v - x * w)
    return gx, gy, gz, gv, gw


def bulk_gradient(q: QTensor, p: MaterialParams) -> QTensor:
    """Gradient of the bulk energy on the symmetric-traceless space."""
    gx, gy, gz, gv, gw = _grad_terms(q.x, q.y, q.z, q.v, q.w, p.a, p.b, p.c)
    return QTensor(gx, gy, gz, gv, gw)


def uniaxial(s: float, n) -> QTensor:
    """Uniaxial tensor s (n x n - Id/3) for a unit director n."""
    n = np.asarray(n, dtype=float)
    if n.shape != (3,):
        raise ValueError(f"director must be a 3-vector, got shape {n.shape}")
    if abs(float(n @ n) - 1.0) > 2e-10:
        raise ValueError(f"director must be a unit vector, |n|={math.sqrt(float(n @ n))}")
    s = float(s)
    third = s / 3.0
    return QTensor(
        s * n[0] * n[0] - third,
        s * n[1] * n[1] - third,
        s * n[0] * n[1],
        s * n[0] * n[2],
        s * n[1] * n[2],
    )


def critical_s(p: MaterialParams) -> tuple[float, float, float]:
    """Scalar order parameters (0, s_plus, s_minus) of the uniaxial critical set.

    The nonzero values are the roots of 2c s^2 - b s + 3a = 0; the bulk
    gradient vanishes at s (n x n - Id/3) exactly for these s and any unit n.
    """
    root = math.sqrt(p.discriminant)
    return 0.0, (p.b + root) / (4.0 * p.c), (p.b - root) / (4.0 * p.c)


_OFF_PAIRS = ((0, 1), (0, 2), (1, 2))


def eigen_decomposition(q) -> EigenFrame:
    """Eigenvalues (descending) and right-handed eigenvector frame.

    Uses cyclic Jacobi rotations driven to an off-diagonal norm of 1e-14,
    which stays well conditioned near degenerate spectra.  Repeated
    eigenvalues get a deterministic frame: the eigenspace basis is rebuilt by
    orthogonalizing the projections of e1, e2, e3 in that order.
    """
    a = _as_matrix(q)
    a = 0.5 * (a + a.T)
    vecs = np.eye(3)
    for _ in range(50):
        off = math.sqrt(2.0 * (a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2))
        if off <= 1e-14:
            break
        for pi, qi in _OFF_PAIRS:
            apq = a[pi, qi]
            if apq == 0.0:
                continue
            theta = 0.5 * (a[qi, qi] - a[pi, pi]) / apq
            t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
            cos = 1.0 / math.hypot(t, 1.0)
            sin = t * cos
            app, aqq = a[pi, pi], a[qi, qi]
            a[pi, pi] = app - t * apq
            a[qi, qi] = aqq + t * apq
            a[pi, qi] = a[qi, pi] = 0.0
            ri = 3 - pi - qi
            arp, arq = a[ri, pi], a[ri, qi]
            a[ri, pi] = a[pi, ri] = cos * arp - sin * arq
            a[ri, qi] = a[qi, ri] = sin * arp + cos * arq
            for r in range(3):
                vrp, vrq = vecs[r, pi], vecs[r, qi]
                vecs[r, pi] = cos * vrp - sin * vrq
                vecs[r, qi] = sin * vrp + cos * vrq

    vals = np.diagonal(a).copy()
    order = np.argsort(-vals, kind="stable")
    vals = vals[order]
    frame = vecs[:, order]

    _fix_degenerate_frame(vals, frame)
    if np.linalg.det(frame) < 0.0:
        frame[:, 2] = -frame[:, 2]
    return EigenFrame(vals, frame)


def _fix_degenerate_frame(vals: np.ndarray, frame: np.ndarray) -> None:
    """Rebuild eigenvector columns of repeated eigenvalues deterministically."""
    scale = max(1.0, abs(vals[0]), abs(vals[2]))
    tol = 1e-12 * scale
    i = 0
    while i < 3:
        j = i + 1
        while j < 3 and abs(vals[j] - vals[j - 1]) <= tol:
            j += 1
        if j - i > 1:
            cols = frame[:, i:j]
            proj = cols @ cols.T
            basis: list[np.ndarray] = []
            for k in range(3):
                u = proj[:, k].copy()
                for b in basis:
                    u -= (b @ u) * b
                nu = math.sqrt(float(u @ u))
                if nu > 1e-6:
                    basis.append(u / nu)
                if len(basis) == j - i:
                    break
            if len(basis) == j - i:
                frame[:, i:j] = np.column_stack(basis)
        i = j
