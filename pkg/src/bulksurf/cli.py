"""Batch front end: parse a run configuration, simulate, write machine-readable outputs.

Configuration files are flat ``key = value`` text with ``#`` comments; every
key has a documented default, so an empty file is a valid configuration.  See
DEFAULTS below for the full key list.  Outputs are deterministic: identical
configurations produce bit-identical CSV files.

Exit codes: 0 on completion, 2 on configuration errors, 3 on solver
non-convergence (partial outputs are still written).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagnostics, model, solver
from .mesh import EDGE_NAMES, build_mesh

DIAGNOSTICS_HEADER = (
    "t,mass,entropy,entropy_L,u_env_max,v_env_max,u_env_min,v_env_min,"
    "reaction_diss,diff_diss_bulk,diff_diss_surf,clamp_activations"
)

DEFAULTS: dict[str, str] = {
    # mesh
    "nx": "16",
    "ny": "16",
    "lx": "1.0",
    "ly": "1.0",
    "active_edges": "bottom",
    # kinetics
    "k": "1.0",
    "kappa": "1.0",
    "alpha": "1.0",
    "beta": "1.0",
    # diffusion laws
    "bulk_law": "constant",
    "bulk_law_param": "1.0",
    "surface_law": "constant",
    "surface_law_param": "1.0",
    # initial data
    "initial": "constant",
    "u0": "1.0",
    "v0": "1.0",
    "blob_base_u": "1.2",
    "blob_amplitude_1": "0.5",
    "blob_amplitude_2": "0.5",
    "blob_width": "0.12",
    "blob_x1": "0.35",
    "blob_y1": "0.6",
    "blob_x2": "0.65",
    "blob_y2": "0.4",
    "initial_u_file": "",
    "initial_v_file": "",
    # time controls
    "dt": "1e-3",
    "t_final": "0.05",
    "theta": "1.0",
    # tolerances
    "newton_tol": "1e-12",
    "newton_max_iter": "25",
    "max_dt_halvings": "5",
    # clamp window (empty = derive from initial data)
    "clamp_lower": "",
    "clamp_upper": "",
    "clamp_v_exponent": "alpha",
    # scheme switches
    "face_average": "arithmetic",
    "jacobian": "analytic",
    # outputs
    "out_dir": "out",
    "output_every": "1",
    "outputs": "diagnostics,final_state,summary",
}


@dataclass(frozen=True)
class MissingKey:
    key: str

    def __str__(self) -> str:
        return f"missing required key: {self.key}"


@dataclass(frozen=True)
class BadValue:
    key: str
    reason: str

    def __str__(self) -> str:
        return f"bad value for {self.key}: {self.reason}"


@dataclass(frozen=True)
class NonPositiveInitialData:
    detail: str

    def __str__(self) -> str:
        return f"initial data must be strictly positive: {self.detail}"


class ConfigError(ValueError):
    """Carries every violated constraint, not just the first."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(str(p) for p in self.problems))


@dataclass
class RunConfig:
    """Fully validated run description."""

    nx: int
    ny: int
    lx: float
    ly: float
    active_edges: tuple[str, ...]
    k: float
    kappa: float
    alpha: float
    beta: float
    bulk_law: str
    bulk_law_param: float
    surface_law: str
    surface_law_param: float
    initial: str
    u0: float
    v0: float
    blob_base_u: float
    blob_amplitude_1: float
    blob_amplitude_2: float
    blob_width: float
    blob_x1: float
    blob_y1: float
    blob_x2: float
    blob_y2: float
    initial_u_file: str
    initial_v_file: str
    dt: float
    t_final: float
    theta: float
    newton_tol: float
    newton_max_iter: int
    max_dt_halvings: int
    clamp_lower: float | None
    clamp_upper: float | None
    clamp_v_exponent: str
    face_average: str
    jacobian: str
    out_dir: str
    output_every: int
    outputs: tuple[str, ...] = field(default=("diagnostics", "final_state", "summary"))


def read_key_values(path: Path) -> dict[str, str]:
    """Read a flat key = value file; '#' starts a comment, blank lines skipped."""
    raw: dict[str, str] = {}
    problems: list = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            problems.append(BadValue(f"line {lineno}", f"expected 'key = value', got {stripped!r}"))
            continue
        key, value = stripped.split("=", 1)
        raw[key.strip()] = value.strip()
    if problems:
        raise ConfigError(problems)
    return raw


def _validated(raw: dict[str, str]) -> RunConfig:
    problems: list = []
    merged = dict(DEFAULTS)
    for key, value in raw.items():
        if key not in DEFAULTS:
            problems.append(BadValue(key, "unrecognized key"))
        else:
            merged[key] = value

    def get_float(key, low=None, low_strict=True, high=None) -> float:
        text = merged[key]
        try:
            val = float(text)
        except ValueError:
            problems.append(BadValue(key, f"not a number: {text!r}"))
            return float("nan")
        if not np.isfinite(val):
            problems.append(BadValue(key, "must be finite"))
        elif low is not None and (val <= low if low_strict else val < low):
            bound = "> " if low_strict else ">= "
            problems.append(BadValue(key, f"must be {bound}{low}"))
        elif high is not None and val > high:
            problems.append(BadValue(key, f"must be <= {high}"))
        return val

    def get_int(key, low) -> int:
        text = merged[key]
        try:
            val = int(text)
        except ValueError:
            problems.append(BadValue(key, f"not an integer: {text!r}"))
            return low
        if val < low:
            problems.append(BadValue(key, f"must be >= {low}"))
        return val

    def get_choice(key, choices) -> str:
        val = merged[key]
        if val not in choices:
            problems.append(BadValue(key, f"must be one of {', '.join(choices)}"))
        return val

    nx = get_int("nx", 1)
    ny = get_int("ny", 1)
    lx = get_float("lx", 0.0)
    ly = get_float("ly", 0.0)
    edges = tuple(e.strip() for e in merged["active_edges"].split(",") if e.strip())
    if not edges:
        problems.append(BadValue("active_edges", "must name at least one edge"))
    for e in edges:
        if e not in EDGE_NAMES:
            problems.append(BadValue("active_edges", f"unknown edge {e!r}"))

    k = get_float("k", 0.0)
    kappa = get_float("kappa", 0.0)
    alpha = get_float("alpha", 1.0, low_strict=False)
    beta = get_float("beta", 1.0, low_strict=False)

    bulk_law = get_choice("bulk_law", ("power", "exponential", "constant"))
    bulk_param = get_float("bulk_law_param")
    if bulk_law == "constant" and not bulk_param > 0:
        problems.append(BadValue("bulk_law_param", "constant coefficient must be > 0"))
    surface_law = get_choice("surface_law", ("power", "exponential", "constant", "surface_cross"))
    surface_param = get_float("surface_law_param")
    if surface_law == "constant" and not surface_param > 0:
        problems.append(BadValue("surface_law_param", "constant coefficient must be > 0"))

    initial = get_choice("initial", ("constant", "two-blob", "file"))
    u0 = get_float("u0")
    v0 = get_float("v0")
    if initial == "constant" and (not u0 > 0 or not v0 > 0):
        problems.append(NonPositiveInitialData(f"u0={merged['u0']}, v0={merged['v0']}"))
    blob_base_u = get_float("blob_base_u")
    blob_width = get_float("blob_width")
    blob_amp_1 = get_float("blob_amplitude_1")
    blob_amp_2 = get_float("blob_amplitude_2")
    blob_x1 = get_float("blob_x1")
    blob_y1 = get_float("blob_y1")
    blob_x2 = get_float("blob_x2")
    blob_y2 = get_float("blob_y2")
    if initial == "two-blob":
        if not blob_base_u > 0:
            problems.append(NonPositiveInitialData(f"blob_base_u={merged['blob_base_u']}"))
        if not blob_width > 0:
            problems.append(BadValue("blob_width", "must be > 0"))
    if initial == "file":
        if not merged["initial_u_file"]:
            problems.append(MissingKey("initial_u_file"))
        if not merged["initial_v_file"]:
            problems.append(MissingKey("initial_v_file"))

    dt = get_float("dt", 0.0)
    t_final = get_float("t_final", 0.0, low_strict=False)
    theta = get_float("theta", 0.5, low_strict=False, high=1.0)
    newton_tol = get_float("newton_tol", 0.0)
    newton_max_iter = get_int("newton_max_iter", 1)
    max_dt_halvings = get_int("max_dt_halvings", 0)

    clamp_lower = None if merged["clamp_lower"] == "" else get_float("clamp_lower", 0.0)
    clamp_upper = None if merged["clamp_upper"] == "" else get_float("clamp_upper", 0.0)
    if (clamp_lower is None) != (clamp_upper is None):
        problems.append(BadValue("clamp_lower", "clamp_lower and clamp_upper must be given together"))
    if clamp_lower is not None and clamp_upper is not None and clamp_lower > clamp_upper:
        problems.append(BadValue("clamp_upper", "must be >= clamp_lower"))
    clamp_v_exponent = get_choice("clamp_v_exponent", ("alpha", "beta"))
    face_average = get_choice("face_average", ("arithmetic", "harmonic"))
    jacobian = get_choice("jacobian", ("analytic", "fd"))

    output_every = get_int("output_every", 1)
    outputs = tuple(s.strip() for s in merged["outputs"].split(",") if s.strip())
    for name in outputs:
        if name not in ("diagnostics", "final_state", "summary"):
            problems.append(BadValue("outputs", f"unknown output {name!r}"))

    if problems:
        raise ConfigError(problems)
    return RunConfig(
        nx=nx,
        ny=ny,
        lx=lx,
        ly=ly,
        active_edges=edges,
        k=k,
        kappa=kappa,
        alpha=alpha,
        beta=beta,
        bulk_law=bulk_law,
        bulk_law_param=bulk_param,
        surface_law=surface_law,
        surface_law_param=surface_param,
        initial=initial,
        u0=u0,
        v0=v0,
        blob_base_u=blob_base_u,
        blob_amplitude_1=blob_amp_1,
        blob_amplitude_2=blob_amp_2,
        blob_width=blob_width,
        blob_x1=blob_x1,
        blob_y1=blob_y1,
        blob_x2=blob_x2,
        blob_y2=blob_y2,
        initial_u_file=merged["initial_u_file"],
        initial_v_file=merged["initial_v_file"],
        dt=dt,
        t_final=t_final,
        theta=theta,
        newton_tol=newton_tol,
        newton_max_iter=newton_max_iter,
        max_dt_halvings=max_dt_halvings,
        clamp_lower=clamp_lower,
        clamp_upper=clamp_upper,
        clamp_v_exponent=clamp_v_exponent,
        face_average=face_average,
        jacobian=jacobian,
        out_dir=merged["out_dir"],
        output_every=output_every,
        outputs=outputs,
    )


def parse_config(path: str | Path, overrides: list[str] | None = None) -> RunConfig:
    """Parse and validate a configuration file, applying 'key=value' overrides."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError([MissingKey(f"config file {path}")])
    raw = read_key_values(path)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError([BadValue("--override", f"expected key=value, got {item!r}")])
        key, value = item.split("=", 1)
        raw[key.strip()] = value.strip()
    return _validated(raw)


def _gaussian(cx, cy, x0, y0, width):
    return np.exp(-((cx - x0) ** 2 + (cy - y0) ** 2) / (2.0 * width**2))


def initial_state(cfg: RunConfig, mesh) -> solver.State:
    """Build the initial fields from the configured preset.

    two-blob places two Gaussian bumps on top of a reaction-balanced
    background (base_v is derived from base_u through the detailed-balance
    relation), clipped away from zero; file reads one value per line for the
    bulk (row-major) and surface cells.
    """
    if cfg.initial == "constant":
        u = np.full(mesh.n_bulk, cfg.u0)
        v = np.full(mesh.n_surface, cfg.v0)
    elif cfg.initial == "two-blob":
        base_u = cfg.blob_base_u
        base_v = (base_u**cfg.alpha / cfg.kappa) ** (1.0 / cfg.beta)
        width = cfg.blob_width * min(cfg.lx, cfg.ly)
        u = base_u + cfg.blob_amplitude_1 * _gaussian(
            mesh.cell_center_x, mesh.cell_center_y, cfg.blob_x1 * cfg.lx, cfg.blob_y1 * cfg.ly, width
        )
        u += cfg.blob_amplitude_2 * _gaussian(
            mesh.cell_center_x, mesh.cell_center_y, cfg.blob_x2 * cfg.lx, cfg.blob_y2 * cfg.ly, width
        )
        u = np.maximum(u, 1e-8 * base_u)
        v = np.full(mesh.n_surface, base_v)
    else:  # file
        try:
            u = np.loadtxt(cfg.initial_u_file, dtype=float, ndmin=1)
            v = np.loadtxt(cfg.initial_v_file, dtype=float, ndmin=1)
        except OSError as exc:
            raise ConfigError([BadValue("initial_u_file", str(exc))]) from exc
        if u.size != mesh.n_bulk or v.size != mesh.n_surface:
            raise ConfigError(
                [
                    BadValue(
                        "initial_u_file",
                        f"expected {mesh.n_bulk} bulk and {mesh.n_surface} surface values, "
                        f"got {u.size} and {v.size}",
                    )
                ]
            )
        if np.min(u) <= 0 or np.min(v) <= 0:
            raise ConfigError([NonPositiveInitialData("file values must be > 0")])
    return solver.State(t=0.0, u=u, v=v)


def build_problem(cfg: RunConfig):
    """Assemble mesh, kinetics, laws, initial state, equilibrium and window."""
    mesh = build_mesh(cfg.nx, cfg.ny, cfg.lx, cfg.ly, cfg.active_edges)
    kin = model.Kinetics(k=cfg.k, kappa=cfg.kappa, alpha=cfg.alpha, beta=cfg.beta)
    if cfg.bulk_law == "constant":
        bulk_law = model.constant_law(cfg.bulk_law_param)
    elif cfg.bulk_law == "power":
        bulk_law = model.power_law(cfg.bulk_law_param)
    else:
        bulk_law = model.exponential_law(cfg.bulk_law_param)
    if cfg.surface_law == "surface_cross":
        surf_law = model.surface_cross_law(kin)
    elif cfg.surface_law == "constant":
        surf_law = model.constant_law(cfg.surface_law_param, role="surface")
    elif cfg.surface_law == "power":
        surf_law = model.power_law(cfg.surface_law_param, role="surface")
    else:
        surf_law = model.exponential_law(cfg.surface_law_param, role="surface")

    state = initial_state(cfg, mesh)
    mass = diagnostics.weighted_mass(state, mesh, kin)
    eq = model.solve_equilibrium(kin, mass, mesh.total_bulk_measure, mesh.total_surface_measure)
    if cfg.clamp_lower is not None:
        window = model.ClampWindow(
            lower=cfg.clamp_lower,
            upper=cfg.clamp_upper,
            u_star=eq.u_star,
            v_star=eq.v_star,
            alpha=kin.alpha,
            beta=kin.beta,
            v_exponent=cfg.clamp_v_exponent,
        )
    else:
        window = model.window_from_initial_data(
            state.u, state.v, eq, kin, v_exponent=cfg.clamp_v_exponent
        )
    step_cfg = solver.StepConfig(
        dt=cfg.dt,
        newton_tol=cfg.newton_tol,
        newton_max_iter=cfg.newton_max_iter,
        theta=cfg.theta,
        face_average=cfg.face_average,
        jacobian=cfg.jacobian,
        max_dt_halvings=cfg.max_dt_halvings,
    )
    return mesh, kin, bulk_law, surf_law, state, eq, window, step_cfg


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_diagnostics_csv(records, path: Path, output_every: int = 1) -> None:
    """Diagnostics series, one row per retained record (the last is always kept)."""
    keep = list(records[::output_every])
    if records and records[-1] is not keep[-1]:
        keep.append(records[-1])
    lines = [DIAGNOSTICS_HEADER]
    for rec in keep:
        lines.append(
            ",".join(
                [
                    _fmt(rec.t),
                    _fmt(rec.mass),
                    _fmt(rec.entropy),
                    _fmt(rec.envelope_entropy),
                    _fmt(rec.u_env_max),
                    _fmt(rec.v_env_max),
                    _fmt(rec.u_env_min),
                    _fmt(rec.v_env_min),
                    _fmt(rec.reaction_dissipation),
                    _fmt(rec.diffusion_dissipation_bulk),
                    _fmt(rec.diffusion_dissipation_surface),
                    str(rec.clamp_activations),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n")


def write_final_state_csv(state, mesh, path: Path) -> None:
    """Per-cell values with coordinates: bulk field u rows, then surface field v."""
    lines = ["field,index,x,y,value"]
    for i in range(mesh.n_bulk):
        lines.append(
            f"u,{i},{_fmt(mesh.cell_center_x[i])},{_fmt(mesh.cell_center_y[i])},{_fmt(state.u[i])}"
        )
    for j in range(mesh.n_surface):
        lines.append(
            f"v,{j},{_fmt(mesh.surf_center_x[j])},{_fmt(mesh.surf_center_y[j])},{_fmt(state.v[j])}"
        )
    path.write_text("\n".join(lines) + "\n")


def write_summary_json(path: Path, eq, state, records, wall_time: float, completed: bool) -> None:
    sup = max(
        float(np.max(np.abs(state.u - eq.u_star))),
        float(np.max(np.abs(state.v - eq.v_star))),
    )
    payload = {
        "u_star": eq.u_star,
        "v_star": eq.v_star,
        "mass": eq.mass,
        "steps": max(len(records) - 1, 0),
        "final_time": state.t,
        "final_sup_distance": sup,
        "wall_time_seconds": wall_time,
        "completed": completed,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_outputs(cfg, out_dir, mesh, eq, state, records, wall_time, completed, quiet):
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "diagnostics" in cfg.outputs:
        p = out_dir / "diagnostics.csv"
        write_diagnostics_csv(records, p, cfg.output_every)
        written.append(p)
    if "final_state" in cfg.outputs:
        p = out_dir / "final_state.csv"
        write_final_state_csv(state, mesh, p)
        written.append(p)
    if "summary" in cfg.outputs:
        p = out_dir / "summary.json"
        write_summary_json(p, eq, state, records, wall_time, completed)
        written.append(p)
    if not quiet:
        for p in written:
            print(f"wrote {p}")


def main(argv: list[str] | None = None) -> int:
    """Entry point: returns 0 on success, 2 on config errors, 3 on solver failure."""
    parser = argparse.ArgumentParser(
        prog="bulksurf",
        description="Finite-volume simulation of coupled bulk-surface reaction-diffusion.",
    )
    parser.add_argument("--config", required=True, help="path to a key = value run configuration")
    parser.add_argument("--out", default=None, help="output directory (overrides out_dir)")
    parser.add_argument(
        "--override",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a configuration key (repeatable)",
    )
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0

    try:
        cfg = parse_config(args.config, args.override)
        mesh, kin, bulk_law, surf_law, state, eq, window, step_cfg = build_problem(cfg)
    except (ConfigError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            for problem in exc.problems:
                print(f"config error: {problem}", file=sys.stderr)
        else:
            print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out) if args.out else Path(cfg.out_dir)
    if not args.quiet:
        print(
            f"mesh {cfg.nx}x{cfg.ny}, {mesh.n_surface} surface cells on "
            f"{'+'.join(cfg.active_edges)}; equilibrium (u*, v*) = "
            f"({eq.u_star:.6g}, {eq.v_star:.6g}), mass {eq.mass:.6g}"
        )
    started = time.perf_counter()
    try:
        final, records = solver.run(
            state, cfg.t_final, mesh, kin, eq, bulk_law, surf_law, window, step_cfg
        )
    except solver.NonConvergence as exc:
        wall = time.perf_counter() - started
        print(f"solver failed: {exc}", file=sys.stderr)
        last = exc.last_state if exc.last_state is not None else state
        recs = exc.records if exc.records is not None else []
        _write_outputs(cfg, out_dir, mesh, eq, last, recs, wall, completed=False, quiet=args.quiet)
        return 3
    wall = time.perf_counter() - started
    _write_outputs(cfg, out_dir, mesh, eq, final, records, wall, completed=True, quiet=args.quiet)
    if not args.quiet:
        print(f"completed {len(records) - 1} steps to t = {final.t:.6g} in {wall:.2f} s")
    return 0


def console_main() -> None:
    sys.exit(main())
