"""Adaptive explicit Runge-Kutta integration with dense output and events.

The stepper is a Dormand-Prince 5(4) embedded pair with PI step-size control
(Lund stabilization).  Dense output uses the pair's quartic continuous
extension, which is one order above the cubic-Hermite fallback and matches
the accepted solution at both step endpoints.  All arithmetic is
deterministic: identical inputs produce bit-identical trajectories on one
platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import dynamics as dyn
from .state import ChartSingularityError

__all__ = [
    "IntegratorConfig",
    "Diagnostics",
    "DenseOutput",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "integrate_until",
]

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = (
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
)
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# Difference between the 5th and the embedded 4th order weights (7 stages, FSAL).
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# Quartic continuous-extension coefficients.
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_BETA = 0.04  # PI stabilization weight
_EXP1 = 0.2 - 0.75 * _BETA
_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances, step limits, and the output sampling grid."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    max_steps: int = 10_000_000
    sample_dt: float = 0.01
    store_dense: bool = True

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "sample_dt"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


@dataclass
class Diagnostics:
    """Step accounting and the vector-field norm at the final state."""

    n_steps: int = 0
    n_rejected: int = 0
    n_rhs: int = 0
    final_rhs_norm: float = math.nan
    status: str = "ok"


class DenseOutput:
    """Piecewise-quartic interpolant over the accepted steps."""

    def __init__(self, breaks: np.ndarray, y_lefts: np.ndarray, coeffs: np.ndarray):
        self.breaks = breaks          # (n_seg + 1,)
        self.y_lefts = y_lefts        # (n_seg, dim)
        self.coeffs = coeffs          # (n_seg, dim, 4)

    def __call__(self, t: float) -> np.ndarray:
        ts = self.breaks
        if not ts[0] <= t <= ts[-1]:
            raise ValueError(f"time {t} outside the covered span [{ts[0]}, {ts[-1]}]")
        i = int(np.searchsorted(ts, t, side="right") - 1)
        i = min(max(i, 0), len(ts) - 2)
        h = ts[i + 1] - ts[i]
        return _eval_segment(self.y_lefts[i], self.coeffs[i], h, (t - ts[i]) / h)

    @property
    def t_min(self) -> float:
        return float(self.breaks[0])

    @property
    def t_max(self) -> float:
        return float(self.breaks[-1])


def _eval_segment(y_left: np.ndarray, coeff: np.ndarray, h: float, theta: float) -> np.ndarray:
    powers = np.array([theta, theta**2, theta**3, theta**4])
    return y_left + h * (coeff @ powers)


@dataclass
class Trajectory:
    """Sampled solution of one integration run."""

    kind: object
    times: np.ndarray
    states: np.ndarray
    diagnostics: Diagnostics
    dense: DenseOutput | None = None

    @property
    def initial_state(self) -> np.ndarray:
        return self.states[0]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def component(self, name: str) -> np.ndarray:
        cols = dyn.columns(self.kind) if isinstance(self.kind, dyn.SystemKind) else ()
        if name not in cols:
            raise KeyError(f"no component {name!r}; have {cols}")
        return self.states[:, cols.index(name)]


class IntegrationError(RuntimeError):
    """Integration failed; carries the partial trajectory up to the last good state."""

    def __init__(self, message: str, trajectory: Trajectory):
        super().__init__(message)
        self.trajectory = trajectory
        self.status = trajectory.diagnostics.status


def _rms(x: np.ndarray) -> float:
    return math.sqrt(float(np.mean(x * x)))


def _initial_step(f, t0, y0, f0, t_end, rel_tol, abs_tol, max_step):
    """Deterministic starting step heuristic based on two derivative samples."""
    scale = abs_tol + rel_tol * np.abs(y0)
    d0 = _rms(y0 / scale)
    d1 = _rms(f0 / scale)
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0, max_step)
    try:
        f1 = f(t0 + h0, y0 + h0 * f0)
        d2 = _rms((f1 - f0) / scale) / h0 if np.all(np.isfinite(f1)) else math.inf
    except (ChartSingularityError, FloatingPointError):
        d2 = math.inf
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    elif not math.isfinite(d2):
        h1 = h0 * 1e-3
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, t_end - t0, max_step)


def _sample_grid(t0: float, t1: float, sample_dt: float) -> np.ndarray:
    n = int(math.floor((t1 - t0) / sample_dt + 1e-9))
    grid = t0 + sample_dt * np.arange(n + 1)
    if t1 - grid[-1] > 1e-12 * max(1.0, abs(t1)):
        grid = np.append(grid, t1)
    else:
        grid[-1] = t1
    return grid


def _run(kind, state0, p, t_span, cfg, predicate=None):
    f = dyn.vector_field(kind, p)
    if isinstance(kind, dyn.SystemKind):
        y0 = dyn.state_to_array(kind, state0)
    else:
        y0 = np.atleast_1d(np.asarray(state0, dtype=float))
    t0, t_end = (float(t) for t in t_span)
    if not t_end > t0:
        raise ValueError(f"need t1 > t0, got span ({t0}, {t_end})")

    diag = Diagnostics()
    grid = _sample_grid(t0, t_end, cfg.sample_dt)
    sample_times: list[float] = [t0]
    sample_states: list[np.ndarray] = [y0.copy()]
    grid_idx = 1

    breaks: list[float] = [t0]
    y_lefts: list[np.ndarray] = []
    seg_coeffs: list[np.ndarray] = []

    k = np.empty((7, y0.shape[0]))
    f0 = f(t0, y0)
    diag.n_rhs += 1
    if not np.all(np.isfinite(f0)):
        raise ValueError("vector field is not finite at the initial state")
    h = _initial_step(f, t0, y0, f0, t_end, cfg.rel_tol, cfg.abs_tol, cfg.max_step)
    diag.n_rhs += 1

    t, y = t0, y0.copy()
    k[0] = f0
    fac_old = 1e-4
    rejected_last = False
    crossing = None
    g_prev = None
    if predicate is not None:
        g_prev = float(predicate(y0, t0))

    def _partial(status: str) -> Trajectory:
        diag.status = status
        diag.final_rhs_norm = float(np.linalg.norm(k[0]))
        dense = _build_dense(breaks, y_lefts, seg_coeffs) if (cfg.store_dense and seg_coeffs) else None
        return Trajectory(kind, np.array(sample_times), np.array(sample_states), diag, dense)

    attempts = 0
    while t < t_end:
        attempts += 1
        if attempts > cfg.max_steps:
            raise IntegrationError(
                f"step budget {cfg.max_steps} exhausted at t={t} (last state {y})",
                _partial("max_steps"),
            )
        h = min(h, cfg.max_step, t_end - t)
        h_floor = 16.0 * _EPS * max(abs(t), 1.0)
        if h < h_floor:
            raise IntegrationError(
                f"step size underflow (h={h}) at t={t} (last state {y})",
                _partial("step_underflow"),
            )

        failed = False
        try:
            for s in range(1, 6):
                ys = y + h * (k[:s].T @ _A[s - 1])
                k[s] = f(t + _C[s] * h, ys)
            y_new = y + h * (k[:6].T @ _B)
            k[6] = f(t + h, y_new)
            diag.n_rhs += 6
        except (ChartSingularityError, FloatingPointError, ZeroDivisionError):
            failed = True

        if not failed and np.all(np.isfinite(k)) and np.all(np.isfinite(y_new)):
            err_vec = h * (k.T @ _E)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
            err = _rms(err_vec / scale)
        else:
            err = math.inf

        if not err <= 1.0:
            diag.n_rejected += 1
            if math.isfinite(err):
                h *= max(_MIN_FACTOR, _SAFETY * err ** (-_EXP1))
            else:
                h *= 0.5
            rejected_last = True
            continue

        # Accepted step: record the quartic segment and fill the sample grid.
        coeff = k.T @ _P
        breaks.append(t + h)
        y_lefts.append(y.copy())
        seg_coeffs.append(coeff)
        t_new = t + h

        while grid_idx < len(grid) and grid[grid_idx] <= t_new + 1e-14 * max(1.0, abs(t_new)):
            tg = min(grid[grid_idx], t_new)
            sample_times.append(float(tg))
            sample_states.append(_eval_segment(y, coeff, h, (tg - t) / h))
            grid_idx += 1

        if predicate is not None:
            g_new = float(predicate(y_new, t_new))
            hit = None
            if g_prev != 0.0 and (g_new == 0.0 or g_prev * g_new < 0.0):
                hit = _bisect(predicate, y, coeff, h, t, t_new, g_prev, g_new)
            if hit is not None:
                crossing = hit
                y_cross = _eval_segment(y, coeff, h, (crossing - t) / h)
                while sample_times and sample_times[-1] > crossing:
                    sample_times.pop()
                    sample_states.pop()
                sample_times.append(crossing)
                sample_states.append(y_cross)
                k[0] = f(crossing, y_cross)
                diag.n_rhs += 1
                t, y = crossing, y_cross
                break
            g_prev = g_new

        diag.n_steps += 1
        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * err ** (-_EXP1) * fac_old**_BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        if rejected_last:
            factor = min(1.0, factor)
        fac_old = max(err, 1e-4)
        rejected_last = False
        t, y = t_new, y_new
        k[0] = k[6]  # FSAL
        h *= factor

    if sample_times[-1] < t - 1e-14 * max(1.0, abs(t)):
        sample_times.append(t)
        sample_states.append(y.copy())
    diag.final_rhs_norm = float(np.linalg.norm(k[0]))
    dense = _build_dense(breaks, y_lefts, seg_coeffs) if (cfg.store_dense and seg_coeffs) else None
    traj = Trajectory(kind, np.array(sample_times), np.array(sample_states), diag, dense)
    return traj, crossing


def _build_dense(breaks, y_lefts, seg_coeffs) -> DenseOutput:
    return DenseOutput(np.array(breaks), np.array(y_lefts), np.array(seg_coeffs))


def _bisect(predicate, y_left, coeff, h, t_a, t_b, g_a, g_b) -> float | None:
    """Locate the predicate sign change inside one step to 1e-10 in time."""
    a, b = t_a, t_b
    ga = g_a
    if g_b == 0.0:
        return t_b
    while b - a > 1e-10:
        m = 0.5 * (a + b)
        gm = float(predicate(_eval_segment(y_left, coeff, h, (m - t_a) / h), m))
        if gm == 0.0:
            return m
        if (gm > 0.0) == (ga > 0.0):
            a, ga = m, gm
        else:
            b = m
    return 0.5 * (a + b)


def integrate(kind, state0, p=None, t_span=(0.0, 1.0),
              cfg: IntegratorConfig | None = None) -> Trajectory:
    """Integrate one system over ``t_span`` and sample it on the output grid.

    ``kind`` is a SystemKind (or a raw callable f(t, y) for testing),
    ``state0`` a typed state, QTensor, or chart array.  Raises
    IntegrationError (carrying the partial trajectory) on step-budget
    exhaustion or step-size underflow.
    """
    cfg = cfg or IntegratorConfig()
    traj, _ = _run(kind, state0, p, t_span, cfg)
    return traj


def integrate_until(kind, state0, p, predicate: Callable[[np.ndarray, float], float],
                    t_max: float, cfg: IntegratorConfig | None = None):
    """Integrate until the signed predicate(state, t) changes sign.

    The crossing is located by bisection on the dense output to a time
    tolerance of 1e-10.  Returns (trajectory up to the crossing, crossing
    time); the crossing is None when the predicate never changes sign before
    ``t_max``.
    """
    cfg = cfg or IntegratorConfig()
    return _run(kind, state0, p, (0.0, float(t_max)), cfg, predicate=predicate)
