"""Structure checks for the shear-driven dynamics: rotating-frame conjugacy,
conserved quantities, equilibrium atlases, invariant-surface residuals,
periodicity, long-run classification, and the two asymptotic-regime
experiments."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dynamics as dyn
from .coords import phys_to_xyz, xyz_to_phys
from .integrator import IntegrationError, IntegratorConfig, Trajectory, integrate
from .state import ChartSingularityError, PhysState, ReducedState
from .tensor import (
    MaterialParams,
    QTensor,
    bulk_energy,
    critical_s,
    eigen_decomposition,
    frobenius,
)

__all__ = [
    "EquilibriumReport",
    "EquilibriumAtlas",
    "ConservationReport",
    "RegimeReport",
    "OmegaLimit",
    "InvariantCheck",
    "SURFACES",
    "rotation_frame",
    "corotate",
    "conjugacy_check",
    "eigenframe_transport_check",
    "norm_ode_check",
    "energy_monotonicity",
    "first_integral_H",
    "first_integral_V",
    "conservation_reports",
    "find_equilibria",
    "default_seed_grid",
    "invariant_surface_residual",
    "detect_period",
    "omega_limit_classify",
    "convergence_time",
    "short_regime_experiment",
    "long_regime_experiment",
    "invariant_checks",
]

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


# ---------------------------------------------------------------------------
# Rotating frame and conjugacy with the plain gradient flow.

def rotation_frame(t: float) -> np.ndarray:
    """Rotation exp(W t) generated by the shear vorticity; acts in the flow plane."""
    c, s = math.cos(t), math.sin(t)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def corotate(q: QTensor, t: float) -> QTensor:
    """Pull a tensor back into the frame rotating with the flow: B^t Q B."""
    b = rotation_frame(t)
    return QTensor.from_matrix(b.T @ q.matrix() @ b, atol=1e-8)


def _as_tensor(state) -> QTensor:
    return state if isinstance(state, QTensor) else QTensor.from_array(state)


def conjugacy_check(q0: QTensor, p: MaterialParams, t_end: float,
                    cfg: IntegratorConfig | None = None) -> float:
    """Max deviation between the co-rotated shear solution and the gradient flow.

    Both systems are integrated from the same initial tensor; in the
    co-rotational case the two paths agree after pulling the shear solution
    back through the rotating frame.
    """
    cfg = cfg or IntegratorConfig()
    traj_q = integrate(dyn.COROTATIONAL, q0, p, (0.0, t_end), cfg)
    traj_u = integrate(dyn.GRADIENT_FLOW, q0, p, (0.0, t_end), cfg)
    dev = 0.0
    for t, uq, uu in zip(traj_q.times, traj_q.states, traj_u.states):
        b = rotation_frame(t)
        qm = QTensor.from_array(uq).matrix()
        um = QTensor.from_array(uu).matrix()
        dev = max(dev, frobenius(b.T @ qm @ b - um))
    return dev


def eigenframe_transport_check(q0: QTensor, p: MaterialParams, t_end: float,
                               cfg: IntegratorConfig | None = None) -> float:
    """Verify the rotating frame transports the initial eigenvectors.

    Along the co-rotational flow each rotated initial eigenvector must stay an
    eigenvector, with eigenvalue given by the closed eigenvalue system.
    Returns the max residual |Q(t) b_i(t) - lambda_i(t) b_i(t)|.
    """
    cfg = cfg or IntegratorConfig()
    ef = eigen_decomposition(q0)
    lam = ef.eigenvalues
    if min(abs(lam[0] - lam[1]), abs(lam[1] - lam[2])) < 1e-10:
        warnings.warn("degenerate spectrum: eigenframe is not unique", RuntimeWarning,
                      stacklevel=2)
    traj_q = integrate(dyn.COROTATIONAL, q0, p, (0.0, t_end), cfg)
    traj_l = integrate(dyn.EIGEN_PAIR, lam[:2], p, (0.0, t_end), cfg)
    dev = 0.0
    for t, uq, ul in zip(traj_q.times, traj_q.states, traj_l.states):
        qm = QTensor.from_array(uq).matrix()
        b = rotation_frame(t)
        lams = (ul[0], ul[1], -ul[0] - ul[1])
        for i in range(3):
            vec = b @ ef.frame[:, i]
            dev = max(dev, float(np.linalg.norm(qm @ vec - lams[i] * vec)))
    return dev


def _alpha(u: np.ndarray) -> float:
    x, y, z, v, w = u
    return 2.0 * (x * x + y * y + x * y + z * z + v * v + w * w)


def norm_ode_check(u0: QTensor, p: MaterialParams, t_end: float,
                   cfg: IntegratorConfig | None = None, fd_step: float = 1e-5) -> float:
    """Check the squared-norm balance along the gradient flow.

    Compares a centered finite difference of alpha = |U|^2 on the dense output
    against -2a alpha + 2b tr(U^3) - 2c alpha^2 (the trace of the flow
    equation multiplied by 2U); returns the max deviation.
    """
    cfg = cfg or IntegratorConfig()
    traj = integrate(dyn.GRADIENT_FLOW, u0, p, (0.0, t_end), cfg)
    dense = traj.dense
    if dense is None:
        raise ValueError("norm_ode_check requires dense output (cfg.store_dense)")
    dev = 0.0
    for t, u in zip(traj.times, traj.states):
        if t - fd_step < dense.t_min or t + fd_step > dense.t_max:
            continue
        d_fd = (_alpha(dense(t + fd_step)) - _alpha(dense(t - fd_step))) / (2.0 * fd_step)
        alpha = _alpha(u)
        m = QTensor.from_array(u).matrix()
        t3 = float(np.sum((m @ m) * m))
        rhs = -2.0 * p.a * alpha + 2.0 * p.b * t3 - 2.0 * p.c * alpha * alpha
        dev = max(dev, abs(d_fd - rhs))
    return dev


def energy_monotonicity(traj: Trajectory, p: MaterialParams,
                        slack: float = 1e-10) -> tuple[bool, float]:
    """Whether the bulk energy is non-increasing along a gradient-flow run.

    Returns (monotone within slack, worst single-interval increase).
    """
    energies = [bulk_energy(QTensor.from_array(u), p) for u in traj.states]
    worst = 0.0
    for prev, nxt in itertools.pairwise(energies):
        worst = max(worst, nxt - prev)
    return worst <= slack, worst


# ---------------------------------------------------------------------------
# First integrals.

def first_integral_H(state) -> tuple[float, float]:
    """The two rational first integrals of the short-time slice system.

    Defined off the plane x = 1/6, where both expressions blow up.
    """
    if isinstance(state, ReducedState):
        x, y, z = state.x, state.y, state.z
    else:
        x, y, z = (float(t) for t in np.asarray(state, dtype=float)[:3])
    den = 1.0 - 6.0 * x
    if den == 0.0:
        raise ChartSingularityError("first integrals are undefined on the plane x = 1/6")
    h1 = (1.0 - 6.0 * y) / (6.0 * den)
    h2 = (1.0 + 6.0 * x + 6.0 * y - 12.0 * z * z) / (36.0 * den * den)
    return h1, h2


def first_integral_V(state) -> tuple[float, float]:
    """The two first integrals of the order-parameter system.

    V1 is a rational function of 3 S1 + 9 S2 - 2 and 9 (S1 - S2) cos(2 theta);
    it is the image of the slice integral H1 under the chart transform.
    Raises when either denominator vanishes (outside the chart domain).
    """
    if isinstance(state, PhysState):
        s1, s2, th = state.S1, state.S2, state.theta
    else:
        s1, s2, th = (float(t) for t in np.asarray(state, dtype=float))
    cos2 = math.cos(2.0 * th)
    lin = -2.0 + 3.0 * s1 + 9.0 * s2
    den1 = 3.0 * lin + 27.0 * (s1 - s2) * cos2
    if den1 == 0.0:
        raise ChartSingularityError("first integral V1 is undefined at this state")
    v1 = lin / den1
    cth2 = math.cos(th) ** 2
    sth2 = math.sin(th) ** 2
    base = 1.0 + 3.0 * s1 - 9.0 * s1 * cth2 - 9.0 * s2 * sth2
    if base == 0.0:
        raise ChartSingularityError("first integral V2 is undefined at this state")
    num2 = (8.0 - 27.0 * s1 * s1 + 9.0 * (8.0 - 3.0 * s2) * s2
            + 6.0 * s1 * (4.0 + 9.0 * s2) + 27.0 * (s1 - s2) ** 2 * math.cos(4.0 * th))
    v2 = num2 / (288.0 * base * base)
    return v1, v2


@dataclass
class ConservationReport:
    """Drift of one conserved quantity along a trajectory."""

    name: str
    initial_value: float
    max_abs_drift: float
    max_rel_drift: float

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "initial_value": self.initial_value,
            "max_abs_drift": self.max_abs_drift,
            "max_rel_drift": self.max_rel_drift,
        }


def conservation_reports(traj: Trajectory) -> list[ConservationReport]:
    """Drift of the first integrals appropriate to the trajectory's chart."""
    cols = dyn.columns(traj.kind)
    if cols[:3] == ("x", "y", "z"):
        names, fn = ("h1", "h2"), first_integral_H
    elif cols == ("S1", "S2", "theta"):
        names, fn = ("v1", "v2"), first_integral_V
    else:
        raise ValueError(f"no first integrals registered for system {traj.kind}")
    values = np.array([fn(u[:3]) for u in traj.states])
    reports = []
    for j, name in enumerate(names):
        initial = float(values[0, j])
        drift = float(np.max(np.abs(values[:, j] - initial)))
        rel = drift / max(abs(initial), 1e-300)
        reports.append(ConservationReport(name, initial, drift, rel))
    return reports


# ---------------------------------------------------------------------------
# Equilibrium atlas.

@dataclass
class EquilibriumReport:
    """One converged equilibrium with its linearization."""

    location: np.ndarray
    rhs_norm: float
    jacobian_eigenvalues: np.ndarray
    classification: str

    def to_dict(self) -> dict:
        return {
            "location": [float(t) for t in self.location],
            "rhs_norm": self.rhs_norm,
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.jacobian_eigenvalues],
            "classification": self.classification,
        }


@dataclass
class EquilibriumAtlas:
    """Deduplicated equilibria found from a seed grid, plus search accounting."""

    reports: list[EquilibriumReport]
    n_seeds: int
    n_converged: int
    n_dropped: int

    def __iter__(self):
        return iter(self.reports)

    def __len__(self):
        return len(self.reports)

    def isolated(self) -> list[EquilibriumReport]:
        return [r for r in self.reports if r.classification != "non-hyperbolic"]

    def continuum_samples(self) -> list[EquilibriumReport]:
        """Samples of non-hyperbolic families (continua of equilibria)."""
        return [r for r in self.reports if r.classification == "non-hyperbolic"]

    def nearest(self, point) -> EquilibriumReport:
        point = np.asarray(point, dtype=float)
        return min(self.reports, key=lambda r: float(np.linalg.norm(r.location - point)))


def classify_spectrum(eigs: np.ndarray, tol: float = 1e-8) -> str:
    re = eigs.real
    im = eigs.imag
    if float(np.min(np.abs(re))) <= tol:
        return "non-hyperbolic"
    rotating = float(np.max(np.abs(im))) > tol
    if np.all(re > 0.0):
        return "focus-out" if rotating else "repelling node"
    if np.all(re < 0.0):
        return "focus-in" if rotating else "attracting node"
    return "saddle"


def _box_grid(lo: float, hi: float, step: float, ndim: int):
    axis = np.arange(lo, hi + 0.5 * step, step)
    return [np.array(pt) for pt in itertools.product(axis, repeat=ndim)]


def default_seed_grid(kind: dyn.SystemKind) -> list[np.ndarray]:
    """Newton seed grids sized to each system's interesting region."""
    tag = kind.tag
    if tag in ("shorttime3d", "reduced3d"):
        return _box_grid(-1.0, 1.0, 0.25, 3)
    if tag in dyn.MATRIX_TAGS:
        return _box_grid(-1.0, 1.0, 0.5, 5)
    if tag == "plane-h":
        return _box_grid(-2.0, 2.0, 0.25, 2)
    if tag == "eigen-pair":
        return _box_grid(-2.0, 2.0, 0.25, 2)
    if tag == "phys":
        seeds = []
        for s1 in np.arange(-1.0, 1.01, 0.25):
            for s2 in np.arange(-1.0, 1.01, 0.25):
                if abs(s1 - s2) < 0.1:
                    continue
                for th in (-0.75, -0.4, 0.0, 0.4, 0.75):
                    seeds.append(np.array([s1, s2, th]))
        return seeds
    raise ValueError(f"no default seed grid for system {kind}")


def _newton(f, kind, p, x0, tol, max_iter):
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        try:
            r = f(0.0, x)
        except ChartSingularityError:
            return None
        if not np.all(np.isfinite(r)):
            return None
        if np.linalg.norm(r) < tol:
            return x
        try:
            jac = dyn.jacobian(kind, x, p)
        except ChartSingularityError:
            return None
        if not np.all(np.isfinite(jac)):
            return None
        dx, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        x = x + dx
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e6:
            return None
    try:
        r = f(0.0, x)
    except ChartSingularityError:
        return None
    return x if np.all(np.isfinite(r)) and np.linalg.norm(r) < tol else None


def find_equilibria(kind: dyn.SystemKind, p: MaterialParams | None = None,
                    seeds=None, *, rhs_tol: float = 1e-12, dedup_tol: float = 1e-6,
                    max_iter: int = 50, nonhyperbolic_tol: float = 1e-8) -> EquilibriumAtlas:
    """Newton search from a seed grid, deduplicated and classified.

    Non-convergent seeds are dropped silently but counted; continua of
    equilibria show up as many distinct non-hyperbolic samples.
    """
    f = dyn.vector_field(kind, p)
    if seeds is None:
        seeds = default_seed_grid(kind)
    seeds = [np.asarray(s, dtype=float) for s in seeds]
    locations: list[np.ndarray] = []
    reports: list[EquilibriumReport] = []
    n_converged = 0
    n_dropped = 0
    for seed in seeds:
        root = _newton(f, kind, p, seed, rhs_tol, max_iter)
        if root is None:
            n_dropped += 1
            continue
        n_converged += 1
        if any(np.linalg.norm(root - loc) < dedup_tol for loc in locations):
            continue
        locations.append(root)
        jac = dyn.jacobian(kind, root, p)
        eigs = np.linalg.eigvals(jac)
        eigs = eigs[np.lexsort((eigs.imag, eigs.real))]
        reports.append(
            EquilibriumReport(
                location=root,
                rhs_norm=float(np.linalg.norm(f(0.0, root))),
                jacobian_eigenvalues=eigs,
                classification=classify_spectrum(eigs, nonhyperbolic_tol),
            )
        )
    reports.sort(key=lambda r: tuple(np.round(r.location, 9)))
    return EquilibriumAtlas(reports, len(seeds), n_converged, n_dropped)


# ---------------------------------------------------------------------------
# Invariant surfaces.

def _f_plus_plane(u):
    return u[:, 0] + u[:, 1] - 2.0 * u[:, 2] + 2.0 / 3.0


def _f_minus_plane(u):
    return u[:, 0] + u[:, 1] + 2.0 * u[:, 2] + 2.0 / 3.0


def _f_x_sixth(u):
    return u[:, 0] - 1.0 / 6.0


def _f_xy_diagonal(u):
    return u[:, 0] - u[:, 1]


def _f_sin_plus(u):
    s1, s2, th = u[:, 0], u[:, 1], u[:, 2]
    return s1 + 3.0 * s2 + 3.0 * (s1 - s2) * np.sin(2.0 * th) + 4.0 / 3.0


def _f_sin_minus(u):
    s1, s2, th = u[:, 0], u[:, 1], u[:, 2]
    return s1 + 3.0 * s2 - 3.0 * (s1 - s2) * np.sin(2.0 * th) + 4.0 / 3.0


def _f_theta_plus(u):
    return u[:, 2] - 0.25 * math.pi


def _f_theta_minus(u):
    return u[:, 2] + 0.25 * math.pi


#: Invariant surfaces by name: (chart, defining function on sample rows).
SURFACES = {
    "plus-plane": ("xyz", _f_plus_plane),
    "minus-plane": ("xyz", _f_minus_plane),
    "x-sixth": ("xyz", _f_x_sixth),
    "xy-diagonal": ("xyz", _f_xy_diagonal),
    "sin-plus-plane": ("phys", _f_sin_plus),
    "sin-minus-plane": ("phys", _f_sin_minus),
    "theta-plus": ("phys", _f_theta_plus),
    "theta-minus": ("phys", _f_theta_minus),
}


def invariant_surface_residual(traj: Trajectory, surface: str,
                               start_tol: float = 1e-10) -> float:
    """Max drift of a named invariant surface's defining function.

    The trajectory must start on the surface (|f| < start_tol at t = 0).
    """
    if surface not in SURFACES:
        raise KeyError(f"unknown surface {surface!r}; have {sorted(SURFACES)}")
    chart, fn = SURFACES[surface]
    cols = dyn.columns(traj.kind)
    if chart == "xyz" and cols[:3] != ("x", "y", "z"):
        raise ValueError(f"surface {surface!r} lives in the (x, y, z) chart, not {cols}")
    if chart == "phys" and cols != ("S1", "S2", "theta"):
        raise ValueError(f"surface {surface!r} lives in the order-parameter chart, not {cols}")
    values = np.abs(fn(traj.states))
    if values[0] > start_tol:
        raise ValueError(
            f"trajectory does not start on {surface!r}: |f(start)| = {values[0]:.3e}"
        )
    return float(np.max(values))


# ---------------------------------------------------------------------------
# Periodicity and long-run classification.

def detect_period(traj: Trajectory, candidate_period: float) -> float:
    """Distance of the trajectory from its start near one candidate period.

    Minimizes |state(t) - state(t0)| over the dense output in a small window
    around t0 + candidate_period.
    """
    t0 = float(traj.times[0])
    ref = traj.states[0]
    period = float(candidate_period)
    if traj.times[-1] - t0 < period:
        raise ValueError("trajectory is shorter than the candidate period")

    def dev(t):
        state = traj.dense(t) if traj.dense is not None else _nearest_sample(traj, t)
        return dyn.state_norm(traj.kind, state - ref)

    window = max(0.01 * period, 4.0 * 1e-3)
    lo = max(t0, t0 + period - window)
    hi = min(float(traj.times[-1]), t0 + period + window)
    ts = np.linspace(lo, hi, 201)
    vals = [dev(t) for t in ts]
    i = int(np.argmin(vals))
    a = ts[max(i - 1, 0)]
    b = ts[min(i + 1, len(ts) - 1)]
    for _ in range(70):
        m1 = a + (b - a) / 3.0
        m2 = b - (b - a) / 3.0
        if dev(m1) <= dev(m2):
            b = m2
        else:
            a = m1
    return min(min(vals), dev(0.5 * (a + b)))


def _nearest_sample(traj: Trajectory, t: float) -> np.ndarray:
    i = int(np.argmin(np.abs(traj.times - t)))
    return traj.states[i]


@dataclass
class OmegaLimit:
    """Nearest branch of the critical set at the end of a run."""

    branch: str           # "zero" | "s+" | "s-" | "none"
    distance: float       # sorted-eigenvalue distance to the branch
    axis: np.ndarray      # director of the matched uniaxial branch

    def to_dict(self) -> dict:
        return {"branch": self.branch, "distance": self.distance,
                "axis": [float(t) for t in self.axis]}


def critical_set_distance(q: QTensor, p: MaterialParams) -> OmegaLimit:
    """Distance from one tensor to the critical set of the bulk energy.

    Uses the sorted-eigenvalue distance, a lower bound of the Frobenius
    distance that is exact on the critical set itself.
    """
    ef = eigen_decomposition(q)
    _, s_plus, s_minus = critical_s(p)
    best_name, best_d, best_s = "zero", float(np.linalg.norm(ef.eigenvalues)), 0.0
    for name, s in (("s+", s_plus), ("s-", s_minus)):
        target = np.sort([2.0 * s / 3.0, -s / 3.0, -s / 3.0])[::-1]
        d = float(np.linalg.norm(ef.eigenvalues - target))
        if d < best_d:
            best_name, best_d, best_s = name, d, s
    # The director is the non-degenerate eigendirection of the matched branch:
    # the largest eigenvalue for s > 0, the smallest for s < 0.
    axis = ef.frame[:, 0] if best_s >= 0.0 else ef.frame[:, 2]
    return OmegaLimit(best_name, best_d, axis)


def omega_limit_classify(traj: Trajectory, p: MaterialParams,
                         branch_tol: float = 1e-3) -> OmegaLimit:
    """Classify the final state of a matrix-system run against the critical set.

    Returns branch "none" (keeping the measured distance) when no branch is
    within ``branch_tol``.
    """
    if not (isinstance(traj.kind, dyn.SystemKind) and traj.kind.tag in dyn.MATRIX_TAGS):
        raise ValueError("omega-limit classification needs a matrix-system trajectory")
    result = critical_set_distance(QTensor.from_array(traj.final_state), p)
    if result.distance > branch_tol:
        return OmegaLimit("none", result.distance, result.axis)
    return result


def convergence_time(traj: Trajectory, p: MaterialParams | None = None,
                     threshold: float = 1e-8, window: float = 1.0) -> float | None:
    """Earliest sample time from which |RHS| stays below ``threshold`` for a
    contiguous window; None if the run never settles that long."""
    f = dyn.vector_field(traj.kind, p)
    norms = np.array([dyn.state_norm(traj.kind, f(t, u))
                      for t, u in zip(traj.times, traj.states)])
    below = norms < threshold
    times = traj.times
    for i in range(len(times)):
        if not below[i]:
            continue
        j = np.searchsorted(times, times[i] + window, side="left")
        if j >= len(times):
            break
        if np.all(below[i:j + 1]):
            return float(times[i])
    return None


# ---------------------------------------------------------------------------
# Asymptotic-regime experiments.

@dataclass
class RegimeReport:
    """Deviation metrics of one regime sweep and the fitted decay exponent.

    The exponent comes from a least-squares fit of log(metric) against
    log(xi); it is a derived expectation, reported with its fit residual.
    """

    mode: str
    xis: list[float]
    metrics: list[float]
    exponent: float | None
    fit_residual: float | None
    max_norms: list[float] = field(default_factory=list)
    failures: dict[float, str] = field(default_factory=dict)
    horizon: float = 0.0

    def __post_init__(self):
        diffs = np.diff(self.xis)
        if len(self.xis) == 0 or not (np.all(diffs > 0) or np.all(diffs < 0)):
            if len(self.xis) > 1:
                raise ValueError("xi values must be strictly monotone")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "xis": self.xis,
            "metrics": self.metrics,
            "exponent": self.exponent,
            "fit_residual": self.fit_residual,
            "max_norms": self.max_norms,
            "failures": {str(k): v for k, v in self.failures.items()},
            "horizon": self.horizon,
        }


def _fro_rows(states: np.ndarray) -> np.ndarray:
    x, y, z, v, w = states.T
    return np.sqrt(2.0 * (x * x + y * y + x * y + z * z + v * v + w * w))


def _fit_exponent(xis, metrics):
    pairs = [(x, m) for x, m in zip(xis, metrics) if math.isfinite(m) and m > 0.0]
    if len(pairs) < 2:
        return None, None
    lx = np.log([x for x, _ in pairs])
    ly = np.log([m for _, m in pairs])
    coeffs, residuals, *_ = np.polyfit(lx, ly, 1, full=True)
    residual = float(residuals[0]) if len(residuals) else 0.0
    return float(coeffs[0]), residual


def short_regime_experiment(q0: QTensor, p_base: MaterialParams, xis, t_end: float = 0.5,
                            cfg: IntegratorConfig | None = None,
                            allow_large_q0: bool = False) -> RegimeReport:
    """Compare the rescaled flow against the strain-only flow for large xi.

    metric(xi) is the sup over [0, t_end] of the Frobenius deviation between
    the two runs started from the same tensor.  The strain-only system can
    blow up in finite time, so initial tensors with |Q0| >= 1 are refused
    unless explicitly overridden.
    """
    xis = [float(x) for x in xis]
    if not xis:
        raise ValueError("need at least one xi value")
    if any(x <= 0.0 for x in xis) or any(b <= a for a, b in itertools.pairwise(xis)):
        raise ValueError("xi values must be positive and strictly ascending")
    q0 = _as_tensor(q0)
    if frobenius(q0) >= 1.0 and not allow_large_q0:
        raise ValueError("refusing |Q0| >= 1 (finite-time blow-up guard); "
                         "pass allow_large_q0=True to override")
    cfg = cfg or IntegratorConfig(sample_dt=1e-3)
    ref = integrate(dyn.SHORTTIME_MATRIX, q0, None, (0.0, t_end), cfg)
    metrics: list[float] = []
    max_norms: list[float] = []
    failures: dict[float, str] = {}
    for xi in xis:
        p = MaterialParams(p_base.a, p_base.b, p_base.c, xi)
        try:
            traj = integrate(dyn.RESCALED, q0, p, (0.0, t_end), cfg)
            metrics.append(float(np.max(_fro_rows(traj.states - ref.states))))
            max_norms.append(float(np.max(_fro_rows(traj.states))))
        except IntegrationError as err:
            metrics.append(math.nan)
            max_norms.append(math.nan)
            failures[xi] = str(err)
    exponent, residual = _fit_exponent(xis, metrics)
    return RegimeReport("short", xis, metrics, exponent, residual, max_norms,
                        failures, t_end)


def long_regime_experiment(q0: QTensor, p_base: MaterialParams, xis, t_end: float = 1.0,
                           cfg: IntegratorConfig | None = None) -> RegimeReport:
    """Measure the stationary-balance residual of the rescaled flow for small xi.

    metric(xi) is the time integral of |[W,Q] - grad F(Q)|^2 along the
    rescaled run (trapezoid rule on the sample grid); max |Q(t)| is recorded
    for the uniform-boundedness check.
    """
    xis = [float(x) for x in xis]
    if not xis:
        raise ValueError("need at least one xi value")
    if any(x <= 0.0 for x in xis) or any(b >= a for a, b in itertools.pairwise(xis)):
        raise ValueError("xi values must be positive and strictly descending")
    q0 = _as_tensor(q0)
    cfg = cfg or IntegratorConfig(rel_tol=1e-8, abs_tol=1e-10, sample_dt=1e-4,
                                  store_dense=False)
    metrics: list[float] = []
    max_norms: list[float] = []
    failures: dict[float, str] = {}
    for xi in xis:
        p = MaterialParams(p_base.a, p_base.b, p_base.c, xi)
        try:
            traj = integrate(dyn.RESCALED, q0, p, (0.0, t_end), cfg)
        except IntegrationError as err:
            metrics.append(math.nan)
            max_norms.append(math.nan)
            failures[xi] = str(err)
            continue
        x, y, z, v, w = traj.states.T
        res = dyn._corotational_terms(x, y, z, v, w, p.a, p.b, p.c)
        rx, ry, rz, rv, rw = res
        sq = 2.0 * (rx * rx + ry * ry + rx * ry + rz * rz + rv * rv + rw * rw)
        metrics.append(float(_trapezoid(sq, traj.times)))
        max_norms.append(float(np.max(_fro_rows(traj.states))))
    exponent, residual = _fit_exponent(xis, metrics)
    return RegimeReport("long", xis, metrics, exponent, residual, max_norms,
                        failures, t_end)


# ---------------------------------------------------------------------------
# Named invariant checks used by the command-line "invariants" report.

@dataclass
class InvariantCheck:
    """One named structural check with its measured value and threshold."""

    name: str
    value: float
    threshold: float
    comparator: str = "<"  # "<" or ">="

    @property
    def passed(self) -> bool:
        if self.comparator == "<":
            return self.value < self.threshold
        return self.value >= self.threshold

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": self.value,
            "threshold": self.threshold,
            "comparator": self.comparator,
            "passed": self.passed,
        }


_FIG_PARAMS = dict(a=-0.2, b=0.1, c=0.1)


def _random_tensor(rng, scale=1.0) -> QTensor:
    u = rng.uniform(-1.0, 1.0, size=5)
    q = QTensor.from_array(u)
    n = frobenius(q)
    return q * (scale / n) if n > scale else q


def invariant_checks(suite: str = "all") -> list[InvariantCheck]:
    """Run the named structural checks of one suite (deterministic seeds)."""
    if suite not in ("all", "corotational", "shorttime", "phys"):
        raise ValueError(f"unknown suite {suite!r}")
    checks: list[InvariantCheck] = []
    p0 = MaterialParams(xi=0.0, **_FIG_PARAMS)

    if suite in ("all", "corotational"):
        rng = np.random.default_rng(20260810)
        dev = max(conjugacy_check(_random_tensor(rng), p0, 10.0) for _ in range(5))
        checks.append(InvariantCheck("corotational/conjugacy-deviation", dev, 1e-6))

        _, s_plus, _ = critical_s(p0)
        q0 = QTensor.from_matrix(s_plus * (np.outer([1, 0, 0], [1, 0, 0]) - np.eye(3) / 3.0))
        traj = integrate(dyn.COROTATIONAL, q0, p0, (0.0, 2.0 * math.pi + 0.5))
        checks.append(InvariantCheck("corotational/periodic-orbit-closure",
                                     detect_period(traj, 2.0 * math.pi), 1e-6))

        diag0 = QTensor(0.3, 0.1, 0.0, 0.0, 0.0)
        checks.append(InvariantCheck("corotational/eigenframe-transport",
                                     eigenframe_transport_check(diag0, p0, 5.0), 1e-6))

        u0 = _random_tensor(rng)
        gtraj = integrate(dyn.GRADIENT_FLOW, u0, p0, (0.0, 50.0))
        _, worst = energy_monotonicity(gtraj, p0)
        checks.append(InvariantCheck("corotational/energy-worst-increase", worst, 1e-10))
        checks.append(InvariantCheck("corotational/norm-balance",
                                     norm_ode_check(_random_tensor(rng), p0, 5.0), 1e-5))

        fd = 0.0
        w_mat = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        for t in rng.uniform(0.0, 20.0, size=100):
            h = 1e-6
            d_fd = (rotation_frame(t + h) - rotation_frame(t - h)) / (2.0 * h)
            fd = max(fd, float(np.max(np.abs(d_fd - w_mat @ rotation_frame(t)))))
        checks.append(InvariantCheck("corotational/rotation-frame-ode", fd, 1e-8))

    if suite in ("all", "shorttime"):
        traj = integrate(dyn.SHORTTIME3D, (0.05, -0.1, 0.2), None, (0.0, 10.0))
        drift = max(r.max_rel_drift for r in conservation_reports(traj))
        checks.append(InvariantCheck("shorttime/first-integral-drift", drift, 1e-8))

        rng = np.random.default_rng(31)
        lie = 0.0
        count = 0
        while count < 1000:
            x, y, z = rng.uniform(-1.0, 1.0, size=3)
            if abs(1.0 - 6.0 * x) < 0.1:
                continue
            count += 1
            lie = max(lie, _h_lie_derivative(x, y, z))
        checks.append(InvariantCheck("shorttime/first-integral-lie-derivative", lie, 1e-12))

        worst_surface = 0.0
        for surface, seed in (
            ("plus-plane", (-0.1, -0.3, ((-0.1) + (-0.3) + 2.0 / 3.0) / 2.0)),
            ("minus-plane", (-0.1, -0.3, -((-0.1) + (-0.3) + 2.0 / 3.0) / 2.0)),
            ("x-sixth", (1.0 / 6.0, -0.2, 0.1)),
            ("xy-diagonal", (0.2, 0.2, -0.1)),
        ):
            straj = integrate(dyn.SHORTTIME3D, seed, None, (0.0, 5.0))
            worst_surface = max(worst_surface, invariant_surface_residual(straj, surface))
        checks.append(InvariantCheck("shorttime/invariant-plane-residual", worst_surface, 1e-8))

        atlas = find_equilibria(dyn.SHORTTIME3D)
        node_err = max(
            float(np.linalg.norm(atlas.nearest([1 / 6, 1 / 6, -0.5]).location
                                 - np.array([1 / 6, 1 / 6, -0.5]))),
            float(np.linalg.norm(atlas.nearest([1 / 6, 1 / 6, 0.5]).location
                                 - np.array([1 / 6, 1 / 6, 0.5]))),
        )
        checks.append(InvariantCheck("shorttime/node-location-error", node_err, 1e-10))
        checks.append(InvariantCheck("shorttime/nonhyperbolic-line-samples",
                                     float(len(atlas.continuum_samples())), 10.0, ">="))

    if suite in ("all", "phys"):
        rng = np.random.default_rng(53)
        round_err = 0.0
        count = 0
        while count < 1000:
            x, y, z = rng.uniform(-1.0, 1.0, size=3)
            if abs(x - y) <= 1e-6:
                continue
            count += 1
            back = phys_roundtrip_error(x, y, z)
            round_err = max(round_err, back)
        checks.append(InvariantCheck("phys/chart-roundtrip-error", round_err, 1e-12))

        ptraj = integrate(dyn.PHYS, (0.8, 0.1, 0.3), None, (0.0, 5.0))
        vdrift = max(r.max_rel_drift for r in conservation_reports(ptraj))
        checks.append(InvariantCheck("phys/first-integral-drift", vdrift, 1e-7))

        straj = integrate(dyn.SHORTTIME3D, (0.4, -0.2, 0.1), None, (0.0, 5.0))
        pulled = np.array([xyz_to_phys(u).as_array() for u in straj.states])
        vals = np.array([first_integral_V(row) for row in pulled])
        pull_drift = float(np.max(np.abs(vals - vals[0])))
        checks.append(InvariantCheck("phys/pullback-integral-drift", pull_drift, 1e-7))

        lo = min(float(np.min(straj.states[:, 0] - straj.states[:, 1])), 1.0)
        checks.append(InvariantCheck("phys/halfspace-preserved", lo, 0.0, ">="))

    return checks


def _h_lie_derivative(x: float, y: float, z: float) -> float:
    """|grad H . f| for both rational first integrals at one slice point."""
    fx, fy, fz = dyn.rhs_shorttime_coords((x, y, z))
    den = 1.0 - 6.0 * x
    g1 = ((1.0 - 6.0 * y) / den**2, -1.0 / den, 0.0)
    n_lin = 1.0 + 6.0 * x + 6.0 * y - 12.0 * z * z
    g2 = (
        (1.0 / 6.0) / den**2 + (n_lin / 3.0) / den**3,
        (1.0 / 6.0) / den**2,
        (-2.0 * z / 3.0) / den**2,
    )
    l1 = abs(g1[0] * fx + g1[1] * fy + g1[2] * fz)
    l2 = abs(g2[0] * fx + g2[1] * fy + g2[2] * fz)
    return max(l1, l2)


def phys_roundtrip_error(x: float, y: float, z: float) -> float:
    """Round-trip error of the order-parameter chart at one slice point."""
    back = phys_to_xyz(xyz_to_phys((x, y, z)))
    return float(max(abs(back.x - x), abs(back.y - y), abs(back.z - z)))
