"""Command-line driver.

Usage::

    deltabox COMMAND [CONFIG] [--recipe NAME] [--set KEY=VALUE ...] [--output DIR]

Commands: simulate, approx, design, observables, postsplit, compare. The
config is a UTF-8 file of ``key = value`` lines; ``#`` starts a comment.
Every key, its type and its default is listed in :data:`PARAMETERS`.
Exit status: 0 success, 1 tolerance failure or numerical breakdown,
2 configuration error.
"""

from __future__ import annotations

import argparse
import math
import os
import shutil
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import design as dsg
from . import modes
from .core import (BoxGeometry, Constant, Linear, Reversed, SpatialGrid, Table, TangentDivergent,
                   TimeGrid, eigenmode)
from .errors import ConfigurationError, DeltaBoxError
from .observables import (TARGETS, adiabatic_decomposition, density_distance, energy,
                          side_probabilities, wavefunction_distance)
from .oracle import FdmConfig, barrier_index, cn_evolve
from .postsplit import (build_superposition, left_probabilities, project_sub_boxes,
                        spectral_trajectory, time_reverse)
from .volterra import (WavefunctionSnapshot, check_configuration, default_steps, mode_coefficients,
                       run)

COMMANDS = ("simulate", "approx", "design", "observables", "postsplit", "compare")
PROTOCOL_UNIT = 8.0 / math.pi  # protocol lengths in sweeps are multiples of this
EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG = 0, 1, 2


# --------------------------------------------------------------------------- parameters


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip()) if text.strip() else ()


def _ints(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip()) if text.strip() else ()


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _auto_float(text: str):
    return None if text.strip().lower() in ("auto", "none") else float(text)


def _auto_int(text: str):
    return None if text.strip().lower() in ("auto", "none") else int(text)


def _choice(*options):
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    return parse


@dataclass(frozen=True)
class Param:
    parse: object
    default: str
    help: str


PARAMETERS: dict[str, Param] = {
    # geometry
    "L": Param(float, "1.0", "box half-width; the box spans [-L, L]"),
    "x0": Param(float, "0.0", "barrier position"),
    "n": Param(int, "1", "initial eigenmode index"),
    # protocol
    "protocol": Param(_choice("tan", "linear", "constant", "table"), "tan", "barrier schedule kind"),
    "t_star": Param(_auto_float, "auto", "tan divergence time; auto = 2 pi / k^2"),
    "cap_fraction": Param(float, "0.99", "tan horizon as a fraction of t_star"),
    "rate": Param(float, "1.0", "linear protocol slope c0"),
    "strength": Param(float, "0.0", "constant protocol value"),
    "table": Param(str, "", "CSV file of (t, c) rows for the table protocol"),
    "horizon": Param(_auto_float, "auto", "simulated time; auto = protocol horizon"),
    "c_stop": Param(_auto_float, "none", "stop when a tan protocol reaches this strength"),
    # Volterra solver
    "N": Param(int, "128", "mode cutoff; modes 1 .. 2N+1 are kept"),
    "theta_max": Param(float, "1.0", "phase-step limit of the fastest mode"),
    "M": Param(_auto_int, "auto", "time steps; auto = smallest count meeting theta_max"),
    "J": Param(int, "513", "spatial grid points"),
    "snapshots": Param(int, "11", "uniformly spaced snapshots over [0, horizon]"),
    "boundary_rows": Param(int, "4001", "rows of the decimated boundary trace"),
    "target": Param(_choice(*TARGETS), "side-grounds", "adiabatic target for a_perp_sq"),
    "sweep": Param(_floats, "", "tan protocol lengths in units of 8/pi (simulate sweeps)"),
    "workers": Param(int, "1", "processes for sweep points"),
    # few-mode approximations
    "modes": Param(_ints, "1,2,3", "truncation orders for approx / compare ladders"),
    "rk2_steps": Param(int, "100000", "RK2 steps over the horizon"),
    # design
    "design_target": Param(_choice("eigenmode1", "eigenmode2", "decay", "roundtrip", "file"),
                           "eigenmode1", "boundary target to steer"),
    "design_c0": Param(float, "0.0", "initial barrier strength c(0)"),
    "design_horizon": Param(float, "1.0", "design time window"),
    "design_steps": Param(int, "10000", "design time intervals"),
    "lambda": Param(float, "0.05", "amplitude decay rate of the decay target"),
    "A0": Param(float, "1.0", "initial amplitude of the decay target"),
    "target_file": Param(str, "", "CSV of (t, Re psi, Im psi) for the file target"),
    # observables
    "input": Param(str, "", "directory holding snapshots.csv and snapshot files"),
    "N_obs": Param(int, "128", "modes used for quadrature energies"),
    # postsplit
    "submodes": Param(int, "64", "sine modes per sub-box"),
    "evolve_time": Param(float, "1.0", "spectral evolution time after the split"),
    "evolve_snapshots": Param(int, "11", "snapshots of the spectral evolution"),
    "superpose": Param(_bool, "false", "build the phi_2 superposition and its time reversal"),
    "t0_samples": Param(int, "256", "t0 scan resolution"),
    "reverse_check": Param(_bool, "false", "replay the reversal with the Crank-Nicolson oracle"),
    # oracle / compare
    "fdm_dt": Param(float, "2e-4", "Crank-Nicolson time step"),
    "c_cap": Param(float, "50.0", "largest strength the oracle accepts"),
    "compare_times": Param(int, "5", "matched times, uniform over (0, horizon]"),
    "compare_metric": Param(_choice("density", "psi"), "density", "L2 metric checked against tolerance"),
    "tolerance": Param(float, "1e-2", "pass threshold for oracle discrepancies"),
    "ladder": Param(_bool, "true", "also report the few-mode ladder (x0 = 0 only)"),
    # output
    "output": Param(str, "out", "output directory"),
}

RECIPES: dict[str, tuple[str, dict[str, str]]] = {
    "fig1": ("approx", {"x0": "0.0", "protocol": "tan", "t_star": "auto", "modes": "1,2,3",
                        "rk2_steps": "100000", "N": "128", "theta_max": "1.0"}),
    "fig2": ("simulate", {"x0": "0.0", "protocol": "tan", "t_star": "auto", "snapshots": "11",
                          "target": "symmetric-split", "N": "128", "theta_max": "1.0"}),
    "fig3a": ("simulate", {"x0": "0.3", "protocol": "tan", "t_star": "auto", "snapshots": "11",
                           "target": "side-grounds", "N": "128", "theta_max": "1.0"}),
    "fig4": ("simulate", {"x0": "0.0", "protocol": "tan", "sweep": "0.01,0.1,1,10",
                          "target": "symmetric-split", "N": "128", "theta_max": "1.0"}),
    "fig4c": ("postsplit", {"x0": "0.0", "protocol": "tan", "t_star": f"{0.08 / math.pi!r}",
                            "snapshots": "11", "evolve_time": "1.0", "evolve_snapshots": "11",
                            "submodes": "64", "superpose": "false"}),
    "fig5": ("simulate", {"x0": "0.1", "protocol": "tan", "sweep": "0.01,0.1,1,10",
                          "target": "side-grounds", "N": "128", "theta_max": "1.0"}),
    "fig6": ("postsplit", {"x0": "0.0", "protocol": "tan", "t_star": "auto", "c_stop": "50",
                           "snapshots": "101", "superpose": "true", "reverse_check": "true",
                           "N": "256", "theta_max": "0.25", "J": "401", "fdm_dt": "2e-4"}),
    "oracle0": ("compare", {"x0": "0.0", "protocol": "tan", "t_star": "auto", "c_stop": "50",
                            "N": "128", "theta_max": "0.5", "J": "401", "fdm_dt": "2e-4",
                            "compare_times": "5", "tolerance": "1e-2", "ladder": "true"}),
    "oracle3": ("compare", {"x0": "0.3", "protocol": "tan", "t_star": "auto", "c_stop": "50",
                            "N": "128", "theta_max": "0.5", "J": "401", "fdm_dt": "2e-4",
                            "compare_times": "5", "tolerance": "1e-2", "ladder": "false"}),
}


def parse_config_text(text: str) -> dict[str, str]:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key in raw:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def resolve(raw: dict[str, str]) -> dict:
    """Validate every key and fill documented defaults."""
    unknown = sorted(set(raw) - set(PARAMETERS))
    if unknown:
        raise ConfigurationError(f"unknown key(s): {', '.join(unknown)}")
    cfg = {}
    for key, param in PARAMETERS.items():
        text = raw.get(key, param.default)
        try:
            cfg[key] = param.parse(text)
        except ValueError as exc:
            raise ConfigurationError(f"{key} = {text!r}: {exc}") from None
    return cfg


def load_config(command: str, path: str | None, recipe: str | None, overrides) -> tuple[dict, dict]:
    raw: dict[str, str] = {}
    if recipe:
        if recipe not in RECIPES:
            raise ConfigurationError(f"unknown recipe {recipe!r}; choose from {', '.join(RECIPES)}")
        rcmd, params = RECIPES[recipe]
        if rcmd != command:
            raise ConfigurationError(f"recipe {recipe} belongs to the {rcmd} command")
        raw.update(params)
    if path:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigurationError(f"cannot read config: {exc}") from None
        raw.update(parse_config_text(text))
    for item in overrides or ():
        raw.update(parse_config_text(item))
    return resolve(raw), raw


# --------------------------------------------------------------------------- builders


def build_geometry(cfg) -> BoxGeometry:
    return BoxGeometry(L=cfg["L"], x0=cfg["x0"], n=cfg["n"])


def build_protocol(cfg, geom: BoxGeometry, t_star: float | None = None):
    kind = cfg["protocol"]
    if kind == "tan":
        ts = t_star if t_star is not None else (cfg["t_star"] or geom.t_star)
        return TangentDivergent(ts, cfg["cap_fraction"])
    if kind == "linear":
        return Linear(cfg["rate"])
    if kind == "constant":
        return Constant(cfg["strength"])
    if not cfg["table"]:
        raise ConfigurationError("table protocol needs table = <file>")
    data = read_csv(cfg["table"])
    if data.shape[1] < 2:
        raise ConfigurationError("table file needs (t, c) columns")
    return Table(tuple(data[:, 0]), tuple(data[:, 1]))


def build_horizon(cfg, protocol) -> float:
    h = cfg["horizon"]
    if cfg["c_stop"] is not None:
        if not isinstance(protocol, TangentDivergent):
            raise ConfigurationError("c_stop applies to the tan protocol only")
        h = protocol.time_at_strength(cfg["c_stop"])
    if h is None:
        h = protocol.horizon
    if h is None:
        raise ConfigurationError(f"the {cfg['protocol']} protocol needs an explicit horizon")
    if not h > 0:
        raise ConfigurationError("horizon must be positive")
    if isinstance(protocol, TangentDivergent) and h >= protocol.t_star:
        raise ConfigurationError("horizon reaches the divergence time")
    return float(h)


def build_time_grid(cfg, geom: BoxGeometry, horizon: float, intervals: int = 1) -> TimeGrid:
    M = cfg["M"] or default_steps(geom, horizon, cfg["N"], cfg["theta_max"], max(1, intervals))
    grid = TimeGrid(horizon, M)
    check_configuration(geom, grid, cfg["N"], cfg["theta_max"])
    return grid


def uniform_times(horizon: float, count: int) -> np.ndarray:
    if count < 1:
        raise ConfigurationError("need at least one snapshot")
    return np.linspace(0.0, horizon, count) if count > 1 else np.array([horizon])


def require_on_grid(geom: BoxGeometry, J: int) -> None:
    x = SpatialGrid(geom.L, J).points
    if abs(x[barrier_index(geom, x)] - geom.x0) > 1e-9 * geom.L:
        raise ConfigurationError(f"x0 = {geom.x0} is not a grid point for J = {J}")


# --------------------------------------------------------------------------- output


COL = {
    "t": ("t", "time"), "x": ("x", "length"), "c": ("c", "1/length"),
    "re": ("re_psi", "length^-1/2"), "im": ("im_psi", "length^-1/2"), "abs2": ("abs2_psi", "1/length"),
}


class Output:
    """Stage files in a scratch directory and publish them only on success."""

    def __init__(self, target: str):
        self.target = Path(target)
        self.target.parent.mkdir(parents=True, exist_ok=True)
        self.stage = Path(tempfile.mkdtemp(prefix=".deltabox-", dir=self.target.parent))
        self.names: list[str] = []

    def csv(self, name: str, columns, rows) -> None:
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        header = ",".join(f"{c} [{u}]" for c, u in columns)
        np.savetxt(self.stage / name, rows, fmt="%.12g", delimiter=",", header=header, comments="# ")
        self.names.append(name)

    def text(self, name: str, content: str) -> None:
        (self.stage / name).write_text(content, encoding="utf-8")
        self.names.append(name)

    def publish(self) -> None:
        self.target.mkdir(parents=True, exist_ok=True)
        for name in self.names:
            os.replace(self.stage / name, self.target / name)
        shutil.rmtree(self.stage, ignore_errors=True)

    def discard(self) -> None:
        shutil.rmtree(self.stage, ignore_errors=True)


def read_csv(path) -> np.ndarray:
    try:
        return np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#"))
    except (OSError, ValueError) as exc:
        raise ConfigurationError(f"cannot read {path}: {exc}") from None


def snapshot_rows(s: WavefunctionSnapshot) -> np.ndarray:
    return np.column_stack([s.x, s.psi.real, s.psi.imag, s.density])


SNAPSHOT_COLUMNS = [COL["x"], COL["re"], COL["im"], COL["abs2"]]


def write_snapshots(out: Output, snaps, prefix: str = "snapshot") -> None:
    for i, s in enumerate(snaps):
        out.csv(f"{prefix}_{i:04d}.csv", SNAPSHOT_COLUMNS, snapshot_rows(s))
    out.csv(f"{prefix}s.csv", [("index", "1"), COL["t"]], [[i, s.t] for i, s in enumerate(snaps)])


def config_dump(cfg: dict, command: str) -> str:
    lines = [f"# effective configuration for {command}"]
    for key in PARAMETERS:
        v = cfg[key]
        if isinstance(v, tuple):
            v = ",".join(repr(e) for e in v)
        elif v is None:
            v = "auto"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------- gnuplot


def _gp_header(title: str) -> str:
    return ("set datafile separator ','\nset datafile commentschars '#'\n"
            f"set title '{title}'\nset key outside\n")


def plot_script(kind: str, n_snaps: int = 0, extra: dict | None = None) -> str:
    extra = extra or {}
    if kind == "approx":
        cols = extra.get("modes", ())
        curves = ["'approx.csv' using 1:2 with lines title 'full'"]
        curves += [f"'approx.csv' using 1:{i + 3} with lines title '{m}-mode'" for i, m in enumerate(cols)]
        return _gp_header("|psi(0,t)|^2") + "set xlabel 't'\nplot " + ", \\\n     ".join(curves) + "\n"
    if kind == "sweep":
        return (_gp_header("non-adiabatic weight at the cap time") + "set logscale xy\n"
                "set xlabel 't_star [8/pi]'\nset ylabel '|A_perp|^2'\n"
                "plot 'sweep.csv' using 2:3 with linespoints title 'a_perp_sq'\n")
    if kind == "design":
        return (_gp_header("designed protocol") + "set xlabel 't'\n"
                "plot 'protocol.csv' using 1:2 with lines title 'c', "
                "'protocol.csv' using 1:3 with lines title 'imaginary residual'\n")
    if kind == "postsplit":
        s = _gp_header("after the split") + "set xlabel 't'\n"
        s += "plot 'split.csv' using 1:2 with lines title 'p_left'"
        if extra.get("superpose"):
            s += (", 'superposition.csv' using 1:2 with lines title 'p_left superposed', "
                  "'reversal.csv' using 1:2 with lines title 'p_left reversed'")
        return s + "\n"
    if kind == "compare":
        return (_gp_header("Volterra vs Crank-Nicolson") + "set logscale y\nset xlabel 't'\n"
                "plot 'compare.csv' using 1:2 with linespoints title 'density L2', "
                "'compare.csv' using 1:3 with linespoints title 'psi L2'\n")
    curves = [f"'snapshot_{i:04d}.csv' using 1:4 with lines title 'snapshot {i}'" for i in range(n_snaps)]
    return (_gp_header("density snapshots") + "set xlabel 'x'\nset ylabel '|psi|^2'\nplot "
            + ", \\\n     ".join(curves) + "\n\n"
            "set title 'boundary trace'\nset xlabel 't'\n"
            "plot 'boundary.csv' using 1:4 with lines title '|psi(x0,t)|^2'\n\n"
            "set title 'energy'\nplot 'observables.csv' using 1:5 with linespoints title 'total', "
            "'observables.csv' using 1:3 with linespoints title 'kinetic'\n")


# --------------------------------------------------------------------------- commands


def _decimate(M: int, rows: int) -> np.ndarray:
    stride = max(1, M // max(1, rows - 1))
    idx = np.arange(0, M + 1, stride)
    return idx if idx[-1] == M else np.append(idx, M)


def _observable_rows(tr, geom: BoxGeometry, target: str) -> np.ndarray:
    rows = []
    for snap, coeffs in zip(tr.snapshots, tr.coefficients):
        T = tr.grid.nearest_index(snap.t)
        e = energy(coeffs, tr.boundary[T], tr.strength[T], geom)
        side = side_probabilities(snap, geom)
        a = adiabatic_decomposition(snap, target, geom)
        rows.append([snap.t, coeffs.norm, e.kinetic, e.potential, e.total, a.a_perp_sq, side.p_left, side.p_right])
    return np.array(rows)


OBSERVABLE_COLUMNS = [COL["t"], ("norm", "1"), ("kinetic", "1/length^2"), ("potential", "1/length^2"),
                      ("total", "1/length^2"), ("a_perp_sq", "1"), ("p_left", "1"), ("p_right", "1")]


def _sweep_point(args):
    cfg, units = args
    geom = build_geometry(cfg)
    protocol = TangentDivergent(units * PROTOCOL_UNIT, cfg["cap_fraction"])
    horizon = protocol.horizon
    grid = TimeGrid(horizon, default_steps(geom, horizon, cfg["N"], cfg["theta_max"]))
    tr = run(geom, protocol, grid, N=cfg["N"], snapshot_times=[horizon],
             x_grid=SpatialGrid(geom.L, cfg["J"]), theta_max=cfg["theta_max"])
    snap = tr.snapshots[-1]
    a = adiabatic_decomposition(snap, cfg["target"], geom)
    side = side_probabilities(snap, geom)
    return [protocol.t_star, units, a.a_perp_sq, side.p_left, tr.coefficients[-1].norm], snap


def cmd_simulate(cfg, out: Output, log) -> int:
    geom = build_geometry(cfg)
    if cfg["target"] == "symmetric-split" and geom.x0 != 0:
        raise ConfigurationError("the symmetric-split target needs x0 = 0")
    if cfg["sweep"]:
        if cfg["protocol"] != "tan":
            raise ConfigurationError("sweeps vary the tan protocol length")
        if any(u <= 0 for u in cfg["sweep"]):
            raise ConfigurationError("sweep lengths must be positive")
        points = [(cfg, u) for u in cfg["sweep"]]
        if cfg["workers"] > 1:
            with ProcessPoolExecutor(cfg["workers"]) as pool:
                results = list(pool.map(_sweep_point, points))
        else:
            results = [_sweep_point(p) for p in points]
        out.csv("sweep.csv", [("t_star", "time"), ("t_star_units", "8/pi"), ("a_perp_sq", "1"),
                              ("p_left", "1"), ("norm", "1")], [r for r, _ in results])
        write_snapshots(out, [s for _, s in results], prefix="final")
        out.text("plot.gp", plot_script("sweep"))
        for row, _ in results:
            log(f"t_star = {row[1]:g} x 8/pi: a_perp_sq = {row[2]:.4g}, p_left = {row[3]:.4g}")
        return EXIT_OK

    protocol = build_protocol(cfg, geom)
    horizon = build_horizon(cfg, protocol)
    grid = build_time_grid(cfg, geom, horizon, cfg["snapshots"] - 1)
    times = uniform_times(horizon, cfg["snapshots"])
    log(f"Volterra run: N = {cfg['N']}, M = {grid.M}, horizon = {horizon:.6g}")
    tr = run(geom, protocol, grid, N=cfg["N"], snapshot_times=times,
             x_grid=SpatialGrid(geom.L, cfg["J"]), theta_max=cfg["theta_max"])
    idx = _decimate(grid.M, cfg["boundary_rows"])
    b = tr.boundary[idx]
    out.csv("boundary.csv", [COL["t"], ("re_psi_x0", "length^-1/2"), ("im_psi_x0", "length^-1/2"),
                             ("abs2_psi_x0", "1/length"), COL["c"]],
            np.column_stack([tr.times[idx], b.real, b.imag, np.abs(b) ** 2, tr.strength[idx]]))
    write_snapshots(out, tr.snapshots)
    obs = _observable_rows(tr, geom, cfg["target"])
    out.csv("observables.csv", OBSERVABLE_COLUMNS, obs)
    out.text("plot.gp", plot_script("simulate", len(tr.snapshots)))
    log(f"final: norm = {obs[-1, 1]:.6g}, total energy = {obs[-1, 4]:.6g}, p_left = {obs[-1, 6]:.4g}")
    return EXIT_OK


def cmd_approx(cfg, out: Output, log) -> int:
    geom = build_geometry(cfg)
    if geom.x0 != 0 or geom.n != 1:
        raise ConfigurationError("few-mode approximations need x0 = 0 and n = 1")
    if not cfg["modes"] or min(cfg["modes"]) < 1:
        raise ConfigurationError("modes must list positive truncation orders")
    protocol = build_protocol(cfg, geom)
    horizon = build_horizon(cfg, protocol)
    grid = build_time_grid(cfg, geom, horizon)
    rk_grid = TimeGrid(horizon, cfg["rk2_steps"])
    tr = run(geom, protocol, grid, N=cfg["N"], theta_max=cfg["theta_max"])
    traces = {m: modes.integrate_truncated(m, protocol, geom, rk_grid) for m in cfg["modes"]}
    errors = modes.truncation_errors(tr.times, tr.boundary, {m: (t.t, t.psi0) for m, t in traces.items()})
    idx = _decimate(rk_grid.M, cfg["boundary_rows"])
    t = rk_grid.times[idx]
    full = np.interp(t, tr.times, np.abs(tr.boundary) ** 2)
    cols = [COL["t"], ("full_abs2", "1/length")] + [(f"m{m}_abs2", "1/length") for m in cfg["modes"]]
    out.csv("approx.csv", cols, np.column_stack([t, full] + [np.abs(traces[m].psi0[idx]) ** 2 for m in cfg["modes"]]))
    out.csv("approx_errors.csv", [("m", "1"), ("sup_error", "1/length")], [[m, e] for m, e in errors.items()])
    out.text("plot.gp", plot_script("approx", extra={"modes": cfg["modes"]}))
    for m, e in errors.items():
        log(f"m = {m}: sup error {e:.4g}")
    return EXIT_OK


def cmd_design(cfg, out: Output, log) -> int:
    geom = build_geometry(cfg)
    kind = cfg["design_target"]
    if cfg["design_steps"] < 2 or not cfg["design_horizon"] > 0:
        raise ConfigurationError("design grid needs design_steps >= 2 and a positive horizon")
    t = np.linspace(0.0, cfg["design_horizon"], cfg["design_steps"] + 1)
    reference = None
    if kind in ("eigenmode1", "eigenmode2"):
        target = dsg.Eigenmode(int(kind[-1]))
    elif kind == "decay":
        target = dsg.AmplitudeDecay(cfg["A0"], cfg["lambda"])
    elif kind == "roundtrip":
        protocol = build_protocol(cfg, geom)
        trace = modes.integrate_truncated(2, protocol, geom, TimeGrid(cfg["design_horizon"], cfg["design_steps"]))
        target = dsg.Sampled(trace.t, trace.psi0)
        reference = np.asarray(protocol(trace.t), dtype=float)
    else:
        if not cfg["target_file"]:
            raise ConfigurationError("file target needs target_file = <csv>")
        data = read_csv(cfg["target_file"])
        if data.shape[1] < 3:
            raise ConfigurationError("target file needs (t, Re psi, Im psi) columns")
        target = dsg.Sampled(data[:, 0], data[:, 1] + 1j * data[:, 2])
    c0 = cfg["design_c0"] if reference is None else float(reference[0])
    result = dsg.protocol_from_boundary(target, c0, geom, None if kind in ("roundtrip", "file") else t)
    cols = [COL["t"], COL["c"], ("imag_residual", "1/length")]
    rows = [result.t, result.c, result.imag_residual]
    if reference is not None:
        cols.append(("c_input", "1/length"))
        rows.append(reference)
    out.csv("protocol.csv", cols, np.column_stack(rows))
    out.text("plot.gp", plot_script("design"))
    log(f"designed {kind}: max |c| = {np.max(np.abs(result.c)):.6g}, "
        f"max |imag| = {np.max(np.abs(result.imag_residual)):.3g}, consistent = {result.consistent}")
    return EXIT_OK


def read_snapshot_dir(path: Path, L: float) -> list[WavefunctionSnapshot]:
    index = read_csv(path / "snapshots.csv")
    snaps = []
    for i, t in index:
        data = read_csv(path / f"snapshot_{int(i):04d}.csv")
        snaps.append(WavefunctionSnapshot(float(t), data[:, 0], data[:, 1] + 1j * data[:, 2], L))
    return snaps


def cmd_observables(cfg, out: Output, log) -> int:
    if not cfg["input"]:
        raise ConfigurationError("observables needs input = <directory of snapshots>")
    geom = build_geometry(cfg)
    protocol = build_protocol(cfg, geom)
    snaps = read_snapshot_dir(Path(cfg["input"]), geom.L)
    rows = []
    for s in snaps:
        coeffs = mode_coefficients(s, cfg["N_obs"], geom)
        psi_x0 = complex(np.interp(geom.x0, s.x, s.psi.real), np.interp(geom.x0, s.x, s.psi.imag))
        e = energy(coeffs, psi_x0, float(protocol(s.t)), geom)
        side = side_probabilities(s, geom)
        a = adiabatic_decomposition(s, cfg["target"], geom)
        rows.append([s.t, s.norm, e.kinetic, e.potential, e.total, a.a_perp_sq, side.p_left, side.p_right])
    out.csv("observables.csv", OBSERVABLE_COLUMNS, rows)
    log(f"{len(rows)} snapshots processed")
    return EXIT_OK


def cmd_postsplit(cfg, out: Output, log) -> int:
    geom = build_geometry(cfg)
    if cfg["superpose"] and geom.x0 != 0:
        raise ConfigurationError("the phi_2 superposition needs x0 = 0")
    protocol = build_protocol(cfg, geom)
    horizon = build_horizon(cfg, protocol)
    grid = build_time_grid(cfg, geom, horizon, cfg["snapshots"] - 1)
    if cfg["reverse_check"]:
        require_on_grid(geom, cfg["J"])
        FdmConfig(cfg["J"], cfg["fdm_dt"], cfg["c_cap"])
    xg = SpatialGrid(geom.L, cfg["J"])
    tr = run(geom, protocol, grid, N=cfg["N"], snapshot_times=uniform_times(horizon, cfg["snapshots"]),
             x_grid=xg, theta_max=cfg["theta_max"])
    final = tr.snapshots[-1]
    *_, residual = project_sub_boxes(final, geom, cfg["submodes"])
    log(f"split at t = {final.t:.6g}, c = {float(protocol(final.t)):.4g}, projection residual {residual:.3g}")
    after = spectral_trajectory(final, geom, uniform_times(cfg["evolve_time"], cfg["evolve_snapshots"]),
                                cfg["submodes"])
    write_snapshots(out, after, prefix="evolved")
    probs = [[s.t, side_probabilities(s, geom).p_left, side_probabilities(s, geom).p_right] for s in tr.snapshots]
    out.csv("split.csv", [COL["t"], ("p_left", "1"), ("p_right", "1")], probs)
    status = EXIT_OK
    if cfg["superpose"]:
        sup = build_superposition(tr.snapshots, geom, samples=cfg["t0_samples"])
        pl = left_probabilities(sup.snapshots, geom)
        out.csv("superposition.csv", [COL["t"], ("p_left", "1"), ("p_right", "1")],
                np.column_stack([[s.t for s in sup.snapshots], pl, 1 - pl]))
        rev = time_reverse(sup.snapshots, final.t)
        pr = left_probabilities(rev, geom)
        out.csv("reversal.csv", [COL["t"], ("p_left", "1"), ("p_right", "1")],
                np.column_stack([[s.t for s in rev], pr, 1 - pr]))
        write_snapshots(out, rev, prefix="reversed")
        log(f"t0 = {sup.t0:.6g}; p_left at split {pl[-1]:.3g}; reversal beat amplitude {np.ptp(pr):.3g}")
        if cfg["reverse_check"]:
            fdm = FdmConfig(cfg["J"], cfg["fdm_dt"], cfg["c_cap"])
            cn = cn_evolve(rev[0], Reversed(protocol, final.t), fdm, final.t,
                           record_times=[s.t for s in rev], geom=geom)
            dd = [density_distance(a, b) for a, b in zip(rev, cn)]
            dw = [wavefunction_distance(a, b) for a, b in zip(rev, cn)]
            out.csv("reversal_check.csv", [COL["t"], ("density_l2", "1/length"), ("psi_l2", "1")],
                    np.column_stack([[s.t for s in rev], dd, dw]))
            worst = max(dd) if cfg["compare_metric"] == "density" else max(dw)
            ok = worst <= cfg["tolerance"]
            log(f"oracle replay of the reversal: max {cfg['compare_metric']} L2 = {worst:.3g} "
                f"({'PASS' if ok else 'FAIL'} at {cfg['tolerance']:g})")
            status = EXIT_OK if ok else EXIT_TOLERANCE
    out.text("plot.gp", plot_script("postsplit", extra={"superpose": cfg["superpose"]}))
    return status


def cmd_compare(cfg, out: Output, log) -> int:
    geom = build_geometry(cfg)
    protocol = build_protocol(cfg, geom)
    horizon = build_horizon(cfg, protocol)
    require_on_grid(geom, cfg["J"])
    if cfg["compare_times"] < 1:
        raise ConfigurationError("compare_times must be >= 1")
    fdm = FdmConfig(cfg["J"], cfg["fdm_dt"], cfg["c_cap"])
    grid = build_time_grid(cfg, geom, horizon, cfg["compare_times"])
    c_peak = float(np.max(np.abs(protocol(np.linspace(0, horizon, 1001)))))
    if c_peak > fdm.c_cap:
        raise ConfigurationError(f"protocol reaches {c_peak:.4g} > c_cap = {fdm.c_cap:g}; set c_stop or horizon")
    times = np.linspace(0, horizon, cfg["compare_times"] + 1)[1:]
    xg = SpatialGrid(geom.L, cfg["J"])
    tr = run(geom, protocol, grid, N=cfg["N"], snapshot_times=times, x_grid=xg, theta_max=cfg["theta_max"])
    init = WavefunctionSnapshot(0.0, xg.points, eigenmode(geom, geom.n, xg.points).astype(complex), geom.L)
    cn = cn_evolve(init, protocol, fdm, horizon, record_times=tr.snapshot_times, geom=geom)
    rows = []
    for a, b in zip(tr.snapshots, cn):
        rows.append([a.t, density_distance(a, b), wavefunction_distance(a, b),
                     float(np.max(np.abs(a.density - b.density)))])
    rows = np.array(rows)
    out.csv("compare.csv", [COL["t"], ("density_l2", "1/length"), ("psi_l2", "1"), ("density_sup", "1/length")], rows)
    col = 1 if cfg["compare_metric"] == "density" else 2
    worst = float(rows[:, col].max())
    ok = worst <= cfg["tolerance"]
    log("Volterra vs Crank-Nicolson")
    log(f"{'t':>10} {'density L2':>12} {'psi L2':>12} {'density sup':>12}")
    for r in rows:
        log(f"{r[0]:10.5g} {r[1]:12.4e} {r[2]:12.4e} {r[3]:12.4e}")
    log(f"max {cfg['compare_metric']} L2 = {worst:.4e}: {'PASS' if ok else 'FAIL'} at {cfg['tolerance']:g}")

    if cfg["ladder"] and geom.x0 == 0 and geom.n == 1 and cfg["modes"]:
        rk_grid = TimeGrid(horizon, cfg["rk2_steps"])
        traces = {m: modes.integrate_truncated(m, protocol, geom, rk_grid) for m in cfg["modes"]}
        full_dens = np.abs(tr.boundary) ** 2
        lrows = []
        for m, trace in sorted(traces.items()):
            diff = np.abs(trace.psi0) ** 2 - np.interp(trace.t, tr.times, full_dens)
            lrows.append([m, float(np.max(np.abs(diff))), float(np.sqrt(np.trapezoid(diff**2, trace.t)))])
        out.csv("ladder.csv", [("m", "1"), ("sup_error", "1/length"), ("l2_error", "1/length")], lrows)
        sups = [r[1] for r in lrows]
        monotone = all(a > b for a, b in zip(sups, sups[1:]))
        log("few-mode ladder (|psi_m(0,t)|^2 vs full)")
        for r in lrows:
            log(f"  m = {r[0]:d}: sup {r[1]:.4e}, L2 {r[2]:.4e}")
        log(f"ladder monotone: {'PASS' if monotone else 'FAIL'}")
        ok = ok and monotone
    out.text("plot.gp", plot_script("compare"))
    return EXIT_OK if ok else EXIT_TOLERANCE


HANDLERS = {"simulate": cmd_simulate, "approx": cmd_approx, "design": cmd_design,
            "observables": cmd_observables, "postsplit": cmd_postsplit, "compare": cmd_compare}


# --------------------------------------------------------------------------- entry point


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deltabox", description="delta-barrier insertion in a 1-D box")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("config", nargs="?", help="key = value configuration file")
    p.add_argument("--recipe", help=f"figure recipe: {', '.join(RECIPES)}")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", default=[], help="override a key")
    p.add_argument("--output", help="output directory (overrides the output key)")
    p.add_argument("--list-keys", action="store_true", help="print the parameter table and exit")
    return p


def parameter_table() -> str:
    width = max(map(len, PARAMETERS))
    return "\n".join(f"{k:<{width}}  {p.default:<12} {p.help}" for k, p in PARAMETERS.items())


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.list_keys:
        print(parameter_table())
        return EXIT_OK
    log = lambda msg: print(msg, flush=True)  # noqa: E731
    try:
        overrides = list(args.set) + ([f"output = {args.output}"] if args.output else [])
        cfg, _ = load_config(args.command, args.config, args.recipe, overrides)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = Output(cfg["output"])
    try:
        status = HANDLERS[args.command](cfg, out, log)
        out.text("config_used.txt", config_dump(cfg, args.command))
    except (ConfigurationError, ValueError) as exc:
        out.discard()
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DeltaBoxError as exc:
        out.discard()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except BaseException:
        out.discard()
        raise
    out.publish()
    return status


if __name__ == "__main__":
    sys.exit(main())
