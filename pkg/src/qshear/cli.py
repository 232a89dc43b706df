"""Command-line front end: simulation runs, equilibrium atlases, phase
portraits, regime sweeps, and structural-invariant reports.

Exit codes: 0 success, 1 configuration error, 2 numerical failure (including
failed invariant checks).  With ``--format json`` errors go to stderr as JSON
objects.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, analysis
from . import dynamics as dyn
from .integrator import IntegrationError, IntegratorConfig, Trajectory, integrate
from .tensor import MaterialParams

SCHEMA = "qshear-report/1"

_SYSTEMS = ("full", "corotational", "gradient-flow", "rescaled", "shorttime-matrix",
            "legacy", "reduced3d", "shorttime3d", "phys", "eigen-pair", "plane-h")

#: Documented default initial states, one per chart dimension.
_DEFAULT_Q0 = {5: (0.3, 0.1, 0.2, 0.0, 0.0), 3: (0.3, 0.1, 0.2), 2: (0.3, 0.2)}
_DEFAULT_Q0_PHYS = (0.8, 0.1, 0.3)

PRESETS = {
    "fig1-top": {"system": "full", "a": -0.2, "b": 0.1, "c": 0.1, "xi": 0.5,
                 "q0": [0.3, 0.1, 0.2, 0.0, 0.0], "tmax": 50.0},
    "fig1-bottom": {"system": "full", "a": -0.2, "b": 0.1, "c": 0.1, "xi": 3.0,
                    "q0": [0.3, 0.1, 0.2, 0.0, 0.0], "tmax": 50.0},
}


class ConfigError(ValueError):
    """Bad flags, config file, or parameter values (exit code 1)."""


@dataclasses.dataclass
class RunConfig:
    """One reproducible simulation run; round-trips through the JSON echo."""

    system: str = "full"
    a: float = -0.2
    b: float = 0.1
    c: float = 0.1
    xi: float = 0.0
    q0: tuple[float, ...] | None = None
    t0: float = 0.0
    tmax: float = 10.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    max_steps: int = 10_000_000
    sample_dt: float = 0.01
    h: float | None = None
    delta: float | None = None
    gamma: float | None = None
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        if self.system not in _SYSTEMS:
            raise ConfigError(f"unknown system {self.system!r}; choose from {_SYSTEMS}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format must be csv or json, got {self.format!r}")
        if self.q0 is not None:
            self.q0 = tuple(float(t) for t in self.q0)

    def kind(self) -> dyn.SystemKind:
        if self.system == "plane-h":
            if self.h is None:
                raise ConfigError("system plane-h requires --h")
            return dyn.plane_h(self.h)
        if self.system == "legacy":
            if self.delta is None or self.gamma is None:
                raise ConfigError("system legacy requires --delta and --gamma")
            return dyn.legacy(self.delta, self.gamma)
        return dyn.SystemKind(self.system)

    def material(self) -> MaterialParams:
        try:
            return MaterialParams(self.a, self.b, self.c, self.xi)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def integrator(self) -> IntegratorConfig:
        try:
            return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                                    max_step=self.max_step, max_steps=self.max_steps,
                                    sample_dt=self.sample_dt)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def initial_state(self) -> np.ndarray:
        kind = self.kind()
        dim = dyn.dimension(kind)
        if self.q0 is None:
            q0 = _DEFAULT_Q0_PHYS if kind.tag == "phys" else _DEFAULT_Q0[dim]
        else:
            q0 = self.q0
        if len(q0) != dim:
            raise ConfigError(f"system {kind} expects {dim} initial components, got {len(q0)}")
        return np.array(q0, dtype=float)

    def to_mapping(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            val = getattr(self, f.name)
            if val is None:
                continue
            out[f.name] = list(val) if isinstance(val, tuple) else val
        return out

    @classmethod
    def from_mapping(cls, mapping: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(mapping)
        for key in ("a", "b", "c", "xi", "t0", "tmax", "rel_tol", "abs_tol",
                    "max_step", "sample_dt", "h", "delta", "gamma"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = float(kwargs[key])
        if "max_steps" in kwargs:
            kwargs["max_steps"] = int(kwargs["max_steps"])
        if "q0" in kwargs and kwargs["q0"] is not None:
            q0 = kwargs["q0"]
            if isinstance(q0, str):
                q0 = _parse_floats(q0)
            kwargs["q0"] = tuple(float(t) for t in q0)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _parse_floats(text: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"cannot parse number list {text!r}") from exc


def parse_config_text(text: str) -> dict:
    """Parse the flat ``key = value`` config format (``#`` starts a comment)."""
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        out[key.strip()] = val.strip()
    return out


def build_run_config(args) -> RunConfig:
    """Merge defaults, preset, config file, and explicit flags (in that order)."""
    mapping: dict = {}
    if args.preset:
        if args.preset not in PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; have {sorted(PRESETS)}")
        mapping.update(PRESETS[args.preset])
    if args.config:
        mapping.update(parse_config_text(Path(args.config).read_text(encoding="utf-8")))
    if args.params is not None:
        vals = _parse_floats(args.params)
        if len(vals) != 4:
            raise ConfigError("--params expects four values: a,b,c,xi")
        mapping.update(zip(("a", "b", "c", "xi"), vals))
    for flag, key in (("system", "system"), ("q0", "q0"), ("t0", "t0"), ("tmax", "tmax"),
                      ("rel_tol", "rel_tol"), ("abs_tol", "abs_tol"),
                      ("max_step", "max_step"), ("max_steps", "max_steps"),
                      ("sample_dt", "sample_dt"), ("h", "h"), ("delta", "delta"),
                      ("gamma", "gamma"), ("out", "out"), ("format", "format")):
        val = getattr(args, flag, None)
        if val is not None:
            mapping[key] = val
    return RunConfig.from_mapping(mapping)


# ---------------------------------------------------------------------------
# Output helpers.

def trajectory_csv(traj: Trajectory) -> str:
    """CSV text with 17-significant-digit values and LF line endings."""
    cols = dyn.columns(traj.kind)
    lines = ["t," + ",".join(cols)]
    for t, row in zip(traj.times, traj.states):
        lines.append(",".join(f"{val:.17g}" for val in (t, *row)))
    return "\n".join(lines) + "\n"


def envelope(config: dict, results: dict) -> dict:
    return {
        "schema": SCHEMA,
        "tool_version": __version__,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "config": config,
        "results": results,
    }


def _dump_json(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _write_text(out: str | None, text: str) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _emit_error(code: int, category: str, exc: Exception, json_mode: bool) -> None:
    if json_mode:
        payload: dict = {"error": {"code": code, "type": category, "message": str(exc)}}
        if isinstance(exc, IntegrationError):
            traj = exc.trajectory
            payload["error"]["status"] = exc.status
            payload["error"]["last_time"] = traj.final_time
            payload["error"]["last_state"] = [float(t) for t in traj.final_state]
        sys.stderr.write(_dump_json(payload))
    else:
        sys.stderr.write(f"qshear: {category} error: {exc}\n")
        if isinstance(exc, IntegrationError):
            traj = exc.trajectory
            sys.stderr.write(f"qshear: last valid state at t={traj.final_time}: "
                             f"{[float(t) for t in traj.final_state]}\n")


# ---------------------------------------------------------------------------
# Subcommands.

def simulate_run(cfg: RunConfig) -> Trajectory:
    """Execute one configured simulation (pure; used by tests and the CLI)."""
    kind = cfg.kind()
    p = cfg.material()
    return integrate(kind, cfg.initial_state(), p, (cfg.t0, cfg.tmax), cfg.integrator())


def cmd_simulate(args) -> int:
    cfg = build_run_config(args)
    traj = simulate_run(cfg)
    if cfg.format == "csv":
        _write_text(cfg.out, trajectory_csv(traj))
    else:
        results = {
            "trajectory": {
                "columns": ["t", *dyn.columns(traj.kind)],
                "times": [float(t) for t in traj.times],
                "states": [[float(v) for v in row] for row in traj.states],
            },
            "diagnostics": _diag_dict(traj),
        }
        _write_text(cfg.out, _dump_json(envelope(cfg.to_mapping(), results)))
    return 0


def _diag_dict(traj: Trajectory) -> dict:
    d = traj.diagnostics
    return {"n_steps": d.n_steps, "n_rejected": d.n_rejected, "n_rhs": d.n_rhs,
            "final_rhs_norm": d.final_rhs_norm, "status": d.status}


def _parse_box(grid: str | None) -> tuple[float, float, float] | None:
    if grid is None:
        return None
    parts = grid.split(":")
    if len(parts) != 3:
        raise ConfigError(f"--grid expects lo:hi:step, got {grid!r}")
    lo, hi, step = (float(t) for t in parts)
    if not (hi > lo and step > 0):
        raise ConfigError("--grid needs hi > lo and step > 0")
    return lo, hi, step


def cmd_equilibria(args) -> int:
    cfg = build_run_config(args)
    kind = cfg.kind()
    p = cfg.material()
    box = _parse_box(args.grid)
    if box is None:
        seeds = None
    else:
        lo, hi, step = box
        axis = np.arange(lo, hi + 0.5 * step, step)
        dim = dyn.dimension(kind)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        seeds = np.stack([m.ravel() for m in mesh], axis=1)
        if kind.tag == "phys":
            seeds = seeds[np.abs(seeds[:, 0] - seeds[:, 1]) >= 0.1]
    atlas = analysis.find_equilibria(kind, p, seeds)
    results = {
        "system": str(kind),
        "equilibria": [r.to_dict() for r in atlas.isolated()],
        "continua": [r.to_dict() for r in atlas.continuum_samples()],
        "search": {"n_seeds": atlas.n_seeds, "n_converged": atlas.n_converged,
                   "n_dropped": atlas.n_dropped},
    }
    config = cfg.to_mapping()
    if args.grid:
        config["grid"] = args.grid
    _write_text(cfg.out, _dump_json(envelope(config, results)))
    return 0


_LEAVES = {
    "plus-plane": lambda x, z: (x, -2.0 / 3.0 - x + 2.0 * z, z),
    "minus-plane": lambda x, z: (x, -2.0 / 3.0 - x - 2.0 * z, z),
    "x-sixth": lambda y, z: (1.0 / 6.0, y, z),
    "xy-diagonal": lambda x, z: (x, x, z),
}

# Invariant sets used to flag separatrix-adjacent portrait seeds.
_SEPARATRIX_3D = (
    lambda s: s[0] + s[1] - 2.0 * s[2] + 2.0 / 3.0,
    lambda s: s[0] + s[1] + 2.0 * s[2] + 2.0 / 3.0,
    lambda s: s[0] - 1.0 / 6.0,
    lambda s: s[0] - s[1],
)


def _separatrix_distance(kind: dyn.SystemKind, seed: np.ndarray) -> float:
    if kind.tag == "plane-h":
        h = kind.h
        x, z = seed
        fns = (
            x - 1.0 / 6.0,
            5.0 + 6.0 * x - 12.0 * z - 6.0 * h * (1.0 - 6.0 * x),
            5.0 + 6.0 * x + 12.0 * z - 6.0 * h * (1.0 - 6.0 * x),
        )
        return min(abs(f) for f in fns)
    return min(abs(f(seed)) for f in _SEPARATRIX_3D)


def _leaf_equilibria(kind: dyn.SystemKind) -> list[dict]:
    if kind.tag == "plane-h":
        eq = [
            {"classification": "repelling node", "location": [1.0 / 6.0, -0.5]},
            {"classification": "attracting node", "location": [1.0 / 6.0, 0.5]},
        ]
        h = kind.h
        if abs(1.0 + 6.0 * h) > 1e-12:
            x_saddle = (6.0 * h - 5.0) / (6.0 * (1.0 + 6.0 * h))
            eq.append({"classification": "saddle", "location": [x_saddle, 0.0]})
        return eq
    return [
        {"classification": "repelling node", "location": [1.0 / 6.0, 1.0 / 6.0, -0.5]},
        {"classification": "attracting node", "location": [1.0 / 6.0, 1.0 / 6.0, 0.5]},
        {"classification": "non-hyperbolic line", "definition": "x + y = -2/3, z = 0"},
    ]


def _portrait_seeds(args, kind: dyn.SystemKind) -> list[np.ndarray]:
    spec = args.grid or ("-1:1:5,-1:1:5" if kind.tag == "plane-h" or args.leaf
                         else "-1:1:3,-1:1:3,-1:1:3")
    axes = []
    for part in spec.split(","):
        toks = part.split(":")
        if len(toks) != 3:
            raise ConfigError(f"portrait --grid expects lo:hi:count per axis, got {part!r}")
        lo, hi, count = float(toks[0]), float(toks[1]), int(toks[2])
        if count < 1:
            raise ConfigError("portrait --grid count must be >= 1")
        axes.append(np.linspace(lo, hi, count))
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    if kind.tag == "plane-h":
        if points.shape[1] != 2:
            raise ConfigError("plane-h portraits need a two-axis grid (x, z)")
        return [pt for pt in points]
    if args.leaf:
        if args.leaf not in _LEAVES:
            raise ConfigError(f"unknown leaf {args.leaf!r}; have {sorted(_LEAVES)}")
        if points.shape[1] != 2:
            raise ConfigError("leaf portraits need a two-axis grid")
        return [np.array(_LEAVES[args.leaf](*pt)) for pt in points]
    if points.shape[1] != 3:
        raise ConfigError("shorttime3d portraits need a three-axis grid (x, y, z)")
    return [pt for pt in points]


def cmd_portrait(args) -> int:
    cfg = build_run_config(args)
    kind = cfg.kind()
    if kind.tag not in ("shorttime3d", "plane-h"):
        raise ConfigError("portraits are available for systems shorttime3d and plane-h")
    if cfg.out is None:
        raise ConfigError("portrait requires --out <directory>")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    seeds = _portrait_seeds(args, kind)
    tmax = cfg.tmax if args.tmax is not None else 5.0
    icfg = cfg.integrator()

    def _one(seed: np.ndarray):
        try:
            return integrate(kind, seed, None, (0.0, tmax), icfg), None
        except IntegrationError as err:
            return err.trajectory, str(err)

    jobs = max(1, args.jobs)
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_one, seeds))
    else:
        outcomes = [_one(seed) for seed in seeds]

    entries = []
    failures = []
    for i, (seed, (traj, failure)) in enumerate(zip(seeds, outcomes)):
        name = f"seed_{i:04d}.csv"
        _write_text(str(out_dir / name), trajectory_csv(traj))
        entry = {
            "index": i,
            "seed": [float(t) for t in seed],
            "file": name,
            "separatrix_adjacent": bool(_separatrix_distance(kind, seed) < 1e-3),
        }
        if failure is not None:
            entry["failure"] = failure
            failures.append(i)
        entries.append(entry)

    config = cfg.to_mapping()
    config["grid"] = args.grid
    config["leaf"] = args.leaf
    results = {
        "system": str(kind),
        "tmax": tmax,
        "seeds": entries,
        "failed_seeds": failures,
        "equilibria": _leaf_equilibria(kind),
    }
    _write_text(str(out_dir / "manifest.json"), _dump_json(envelope(config, results)))
    return 0


def cmd_regimes(args) -> int:
    cfg = build_run_config(args)
    if args.mode not in ("short", "long"):
        raise ConfigError("--mode must be short or long")
    default_xis = "10,100,1000" if args.mode == "short" else "0.1,0.01,0.001"
    xis = _parse_floats(args.xis if args.xis is not None else default_xis)
    if not xis:
        raise ConfigError("--xis must list at least one value")
    p = cfg.material()
    if args.mode == "short":
        q0 = cfg.q0 or (1.0 / 15.0, -1.0 / 30.0, 0.0, 0.0, 0.0)  # uniaxial s=0.1 along e1
        t_end = cfg.tmax if args.tmax is not None else 0.5
        report = analysis.short_regime_experiment(np.array(q0), p, xis, t_end)
    else:
        q0 = cfg.q0 or (2.0 / 15.0, -1.0 / 15.0, 0.0, 0.0, 0.0)  # uniaxial s=0.2 along e1
        t_end = cfg.tmax if args.tmax is not None else 1.0
        report = analysis.long_regime_experiment(np.array(q0), p, xis, t_end)
    config = cfg.to_mapping()
    config.update({"mode": args.mode, "xis": xis, "q0": list(q0), "tmax": t_end})
    _write_text(cfg.out, _dump_json(envelope(config, {"regime": report.to_dict()})))
    return 0


def cmd_invariants(args) -> int:
    cfg = build_run_config(args)
    checks = analysis.invariant_checks(args.suite)
    results = {
        "suite": args.suite,
        "checks": [c.to_dict() for c in checks],
        "all_passed": all(c.passed for c in checks),
    }
    _write_text(cfg.out, _dump_json(envelope({"suite": args.suite}, results)))
    return 0 if results["all_passed"] else 2


# ---------------------------------------------------------------------------
# Parser and entry point.

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--params", help="material parameters a,b,c,xi (default -0.2,0.1,0.1,0)")
    common.add_argument("--system", choices=_SYSTEMS, help="system kind")
    common.add_argument("--q0", help="comma-separated initial state")
    common.add_argument("--t0", type=float, help="start time (default 0)")
    common.add_argument("--tmax", type=float, help="end time")
    common.add_argument("--rel-tol", dest="rel_tol", type=float, help="relative tolerance")
    common.add_argument("--abs-tol", dest="abs_tol", type=float, help="absolute tolerance")
    common.add_argument("--max-step", dest="max_step", type=float, help="largest step size")
    common.add_argument("--max-steps", dest="max_steps", type=int, help="step budget")
    common.add_argument("--sample-dt", dest="sample_dt", type=float, help="output grid spacing")
    common.add_argument("--h", type=float, help="leaf level for system plane-h")
    common.add_argument("--delta", type=float, help="flow weight for system legacy")
    common.add_argument("--gamma", type=float, help="strain offset for system legacy")
    common.add_argument("--out", help="output path (default stdout; directory for portrait)")
    common.add_argument("--format", choices=("csv", "json"), help="output format")
    common.add_argument("--jobs", type=int, default=1, help="parallel integrations")
    common.add_argument("--preset", help="named run preset: " + ", ".join(sorted(PRESETS)))
    common.add_argument("--config", help="flat key = value config file")

    parser = _Parser(prog="qshear",
                     description="Shear-driven Q-tensor dynamics toolkit")
    parser.add_argument("--version", action="version", version=f"qshear {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", parents=[common], help="integrate one system and export the trajectory")
    sp.set_defaults(func=cmd_simulate)

    eq = sub.add_parser("equilibria", parents=[common], help="Newton equilibrium atlas as a JSON report")
    eq.add_argument("--grid", help="seed box lo:hi:step (uniform across axes)")
    eq.set_defaults(func=cmd_equilibria, format="json")

    po = sub.add_parser("portrait", parents=[common], help="trajectory bundle over a seed grid")
    po.add_argument("--grid", help="per-axis grid lo:hi:count[,lo:hi:count...]")
    po.add_argument("--leaf", help="seed on an invariant surface: " + ", ".join(sorted(_LEAVES)))
    po.set_defaults(func=cmd_portrait)

    rg = sub.add_parser("regimes", parents=[common], help="asymptotic-regime sweep as a JSON report")
    rg.add_argument("--mode", choices=("short", "long"), required=True)
    rg.add_argument("--xis", help="comma-separated xi values")
    rg.set_defaults(func=cmd_regimes, format="json")

    iv = sub.add_parser("invariants", parents=[common], help="run named structural checks")
    iv.add_argument("--suite", choices=("all", "corotational", "shorttime", "phys"),
                    default="all")
    iv.set_defaults(func=cmd_invariants, format="json")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except ConfigError as exc:
        _emit_error(1, "config", exc, json_mode=False)
        return 1
    json_mode = getattr(args, "format", None) == "json"
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error(1, "config", exc, json_mode)
        return 1
    except IntegrationError as exc:
        _emit_error(2, "numerical", exc, json_mode)
        return 2
    except ValueError as exc:
        _emit_error(1, "config", exc, json_mode)
        return 1


if __name__ == "__main__":
    sys.exit(main())
