"""Scenario configuration, execution, and CSV export.

Configs are flat key-value text with sections (INI syntax); values that
matter for reproducibility (seed, occupancy range, time stepping) live
in the file so scenarios can be checked into the repo.  All outputs are
UTF-8 CSV with a header row, LF line endings, and floats serialized with
17 significant digits so a read-back reproduces them bitwise.
"""

from __future__ import annotations

import configparser
import time as _time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dynamics import (CircadianSchedule, HomeSet, ModelParams, Simulator,
                       Trajectory, build_homes, random_homes)
from .equilibrium import field_equilibria
from .errors import ConfigurationError
from .grid import Grid, KernelSpec, build_grid, gaussian_kernel, linear_index
from .operators import VelocityField

FLOAT_FMT = ".17g"


@dataclass(frozen=True, eq=False)
class RandomPlacement:
    count: int
    seed: int
    occupancy_min: float
    occupancy_max: float


@dataclass(eq=False)
class SimulationConfig:
    """Validated scenario description, ready to build and run."""

    bounds: tuple[float, float, float, float]
    n1: int
    n2: int
    params: ModelParams
    placement: RandomPlacement | list[tuple[float, float, float]]
    schedule: CircadianSchedule | None
    dt: float
    t_end: float
    output_every: float
    snapshot_times: tuple[float, ...]
    out_dir: str = "out"

    def build_grid(self) -> Grid:
        return build_grid(self.bounds, self.n1, self.n2)

    def build_homes(self, grid: Grid) -> HomeSet:
        kernel = KernelSpec(self.params.sigma)
        if isinstance(self.placement, RandomPlacement):
            p = self.placement
            return random_homes(p.count, p.seed, (p.occupancy_min, p.occupancy_max),
                                grid, kernel)
        locs = [(y1, y2) for y1, y2, _n in self.placement]
        occ = [n for _y1, _y2, n in self.placement]
        return build_homes(locs, occ, grid, kernel)


def _get(parser, section, key, conv, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigurationError(f"missing key '{key}' in section [{section}]")
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ConfigurationError:
        raise
    except Exception as exc:
        raise ConfigurationError(f"bad value for [{section}] {key} = {raw!r}: {exc}") from exc


def _floats(raw: str) -> list[float]:
    return [float(tok) for tok in raw.replace(",", " ").split()]


def _windows(raw: str) -> list[tuple[float, float, float]]:
    out = []
    for piece in raw.split(","):
        piece = piece.strip()
        if not piece:
            continue
        parts = piece.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected start:end:factor, got {piece!r}")
        out.append((float(parts[0]), float(parts[1]), float(parts[2])))
    return out


def _parse_velocity(parser) -> VelocityField | None:
    if not parser.has_section("velocity"):
        return None
    kind = _get(parser, "velocity", "kind", str, default="zero").strip().lower()
    if kind == "zero":
        return None
    if kind == "constant":
        c = _get(parser, "velocity", "value", _floats, required=True)
        if len(c) != 2:
            raise ConfigurationError("[velocity] value needs two components")
        return VelocityField.constant(c[0], c[1])
    if kind == "rotation":
        omega = _get(parser, "velocity", "omega", float, required=True)
        center = _get(parser, "velocity", "center", _floats, default=[0.0, 0.0])
        if len(center) != 2:
            raise ConfigurationError("[velocity] center needs two components")
        return VelocityField.rotation(omega, center)
    if kind == "linear":
        m = _get(parser, "velocity", "matrix", _floats, required=True)
        if len(m) != 4:
            raise ConfigurationError("[velocity] matrix needs four entries m11 m12 m21 m22")
        b = _get(parser, "velocity", "offset", _floats, default=[0.0, 0.0])
        return VelocityField.linear(np.array(m).reshape(2, 2), b)
    raise ConfigurationError(f"unknown velocity kind {kind!r}")


def _parse_schedule(parser, gamma: float, chi: float) -> CircadianSchedule | None:
    if not parser.has_section("schedule"):
        return None
    kind = _get(parser, "schedule", "kind", str, default="flat").strip().lower()
    if kind == "flat":
        return None
    if kind == "piecewise":
        gw = _get(parser, "schedule", "gamma_windows", _windows, default=[])
        cw = _get(parser, "schedule", "chi_windows", _windows, default=[])
        return CircadianSchedule.piecewise(gamma, chi, gw, cw)
    raise ConfigurationError(f"unknown schedule kind {kind!r}")


def _parse_homes(parser) -> RandomPlacement | list[tuple[float, float, float]]:
    if not parser.has_section("homes"):
        raise ConfigurationError("missing section [homes]")
    if parser.has_option("homes", "list"):
        rows = []
        for line in parser.get("homes", "list").strip().splitlines():
            vals = _floats(line)
            if len(vals) != 3:
                raise ConfigurationError(f"home line needs 'y1 y2 n', got {line!r}")
            rows.append((vals[0], vals[1], vals[2]))
        if not rows:
            raise ConfigurationError("[homes] list is empty")
        return rows
    count = _get(parser, "homes", "count", int, required=True)
    seed = _get(parser, "homes", "seed", int, default=0)
    occ_min = _get(parser, "homes", "occupancy_min", float, default=50.0)
    occ_max = _get(parser, "homes", "occupancy_max", float, default=200.0)
    return RandomPlacement(count, seed, occ_min, occ_max)


def load_config(path, overrides: dict | None = None) -> SimulationConfig:
    """Parse and validate a scenario file; ``overrides`` wins over keys.

    Recognized overrides: ``out``, ``seed``, ``dt``, ``t_end``.
    Validation (home positions, stability bounds) runs on the final
    values; a failed check reports the offending key or home index.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    text = Path(path).read_text(encoding="utf-8")
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigurationError(f"cannot parse {path}: {exc}") from exc

    for section in ("grid", "params", "time"):
        if not parser.has_section(section):
            raise ConfigurationError(f"missing section [{section}]")

    bounds = (
        _get(parser, "grid", "a1", float, default=0.0),
        _get(parser, "grid", "b1", float, default=1.0),
        _get(parser, "grid", "a2", float, default=0.0),
        _get(parser, "grid", "b2", float, default=1.0),
    )
    n1 = _get(parser, "grid", "n1", int, required=True)
    n2 = _get(parser, "grid", "n2", int, required=True)

    gamma = _get(parser, "params", "gamma", float, required=True)
    alpha = _get(parser, "params", "alpha", float, required=True)
    chi = _get(parser, "params", "chi", float, required=True)
    eps = _get(parser, "params", "eps", float, default=1.0)
    sigma = _get(parser, "params", "sigma", float, default=0.05)

    placement = _parse_homes(parser)
    velocity = _parse_velocity(parser)
    schedule = _parse_schedule(parser, gamma, chi)

    dt = _get(parser, "time", "dt", float, required=True)
    t_end = _get(parser, "time", "t_end", float, required=True)
    output_every = _get(parser, "time", "output_every", float, default=0.01)
    snaps = tuple(_get(parser, "time", "snapshots", _floats, default=[]))

    out_dir = "out"
    if parser.has_section("output"):
        out_dir = _get(parser, "output", "dir", str, default="out")

    overrides = dict(overrides or {})
    if "out" in overrides and overrides["out"] is not None:
        out_dir = str(overrides["out"])
    if "seed" in overrides and overrides["seed"] is not None:
        if not isinstance(placement, RandomPlacement):
            raise ConfigurationError("--seed override needs random home placement")
        placement = replace(placement, seed=int(overrides["seed"]))
    if "dt" in overrides and overrides["dt"] is not None:
        dt = float(overrides["dt"])
    if "t_end" in overrides and overrides["t_end"] is not None:
        t_end = float(overrides["t_end"])

    params = ModelParams(gamma, alpha, chi, eps=eps, sigma=sigma, velocity=velocity)
    config = SimulationConfig(bounds, n1, n2, params, placement, schedule,
                              dt, t_end, output_every, snaps, out_dir)
    validate_config(config)
    return config


def validate_config(config: SimulationConfig):
    """Run the load-time checks: geometry, stability bounds, snapshots."""
    grid = config.build_grid()
    if isinstance(config.placement, list):
        for idx, (y1, y2, n) in enumerate(config.placement):
            if not grid.contains((y1, y2), strict=True):
                raise ConfigurationError(f"home {idx} at ({y1}, {y2}) lies outside the domain")
            if not n > 0:
                raise ConfigurationError(f"home {idx} has nonpositive occupancy {n}")
    if config.t_end <= 0 or config.dt <= 0:
        raise ConfigurationError("dt and t_end must be positive")
    for ts in config.snapshot_times:
        if not 0 <= ts <= config.t_end + 1e-12:
            raise ConfigurationError(f"snapshot time {ts} outside [0, t_end]")
    if config.output_every <= 0:
        raise ConfigurationError("output_every must be positive")
    # Stability (rate bound, and transport bound when a velocity is set)
    # is enforced by the Simulator constructor against the real operators;
    # build a tiny throwaway home set to trigger it early.
    kernel = KernelSpec(config.params.sigma)
    center = ((config.bounds[0] + config.bounds[1]) / 2.0,
              (config.bounds[2] + config.bounds[3]) / 2.0)
    probe = build_homes([center], [1.0], grid, kernel)
    Simulator(grid, config.params, probe, config.dt, schedule=config.schedule)


def _fmt(x) -> str:
    return format(float(x), FLOAT_FMT)


def _write_rows(path, header: list[str], rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_timeseries(traj: Trajectory, path):
    """Aggregate series: columns t, U, V, W, total."""
    rows = (
        [_fmt(t), _fmt(u), _fmt(v), _fmt(w), _fmt(u + v + w)]
        for t, u, v, w in zip(traj.times, traj.total_at_home,
                              traj.total_traveling, traj.total_working)
    )
    _write_rows(path, ["t", "U", "V", "W", "total"], rows)


def write_snapshot(field_values: np.ndarray, grid: Grid, path):
    """One field on the grid, one row per cell ordered by the linear index.

    Columns m1, i, j, x1, x2, value carry the full grid geometry, so a
    reader needs no side channel to reconstruct the surface.
    """
    flat = np.asarray(field_values, dtype=float).ravel()
    if flat.size != grid.size:
        raise ConfigurationError(f"field has {flat.size} values for a {grid.size}-cell grid")

    def rows():
        for j in range(1, grid.n2 + 1):
            for i in range(1, grid.n1 + 1):
                m1 = linear_index(i, j, grid.n1)
                yield [str(m1), str(i), str(j), _fmt(grid.x1[i - 1]),
                       _fmt(grid.x2[j - 1]), _fmt(flat[m1 - 1])]

    _write_rows(path, ["m1", "i", "j", "x1", "x2", "value"], rows())


def read_snapshot(path) -> tuple[np.ndarray, int, int]:
    """Read a snapshot written by :func:`write_snapshot` (flat field, n1, n2)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        cols = {name: k for k, name in enumerate(header)}
        m1s, iis, jjs, vals = [], [], [], []
        for line in fh:
            parts = line.strip().split(",")
            m1s.append(int(parts[cols["m1"]]))
            iis.append(int(parts[cols["i"]]))
            jjs.append(int(parts[cols["j"]]))
            vals.append(float(parts[cols["value"]]))
    n1 = max(iis)
    n2 = max(jjs)
    flat = np.empty(n1 * n2)
    flat[np.array(m1s) - 1] = vals
    return flat, n1, n2


def write_homes_snapshot(traj: Trajectory, snap, path):
    """Per-home table at a snapshot time: location, occupancy, compartments."""
    k = int(np.argmin(np.abs(traj.times - snap.time)))
    rows = []
    for i in range(traj.occupancies.size):
        rows.append([
            str(i),
            _fmt(traj.locations[i, 0]),
            _fmt(traj.locations[i, 1]),
            _fmt(traj.occupancies[i]),
            _fmt(traj.at_home[k, i]),
            _fmt(traj.traveling[k, i]),
            _fmt(traj.working[k, i]),
        ])
    _write_rows(path, ["i", "y1", "y2", "n", "u", "int_v", "int_w"], rows)


@dataclass(eq=False)
class ScenarioReport:
    """What a scenario run produced, for callers and the CLI."""

    out_dir: Path
    files: list[Path]
    trajectory: Trajectory
    max_conservation_drift: float
    runtime_seconds: float


def _time_tag(t: float) -> str:
    return format(float(t), "g")


def run_scenario(config: SimulationConfig) -> ScenarioReport:
    """Execute a scenario and write the full CSV bundle.

    Emits the aggregate time series, a per-home table and both summed
    field snapshots at each snapshot time, the initial home-density
    field, and a per-home comparison against the steady state.
    """
    start = _time.perf_counter()
    grid = config.build_grid()
    kernel = KernelSpec(config.params.sigma)
    homes = config.build_homes(grid)

    sim = Simulator(grid, config.params, homes, config.dt, schedule=config.schedule)
    traj = sim.run(config.t_end, output_every=config.output_every,
                   snapshot_times=config.snapshot_times)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[Path] = []

    def emit(name, writer, *args):
        path = out / name
        writer(*args, path)
        files.append(path)

    emit("timeseries.csv", write_timeseries, traj)

    density = np.zeros(grid.size)
    centers = grid.cell_centers()
    for i in range(homes.count):
        density += homes.occupancies[i] * gaussian_kernel(centers, homes.locations[i], kernel)
    emit("initial_density.csv", write_snapshot, density, grid)

    for snap in traj.snapshots:
        tag = _time_tag(snap.time)
        emit(f"homes_t{tag}.csv", write_homes_snapshot, traj, snap)
        emit(f"field_v_t{tag}.csv", write_snapshot, snap.traveler_field(), grid)
        emit(f"field_w_t{tag}.csv", write_snapshot, snap.worker_field(), grid)

    if traj.snapshots and config.schedule is None:
        u_bar, v_bar, w_bar = field_equilibria(homes, config.params, grid,
                                               laplacian=sim.laplacian)
        rows = []
        for snap in traj.snapshots:
            err_u = np.abs(snap.u - u_bar)
            err_v = np.abs(snap.v - v_bar).max(axis=0)
            err_w = np.abs(snap.w - w_bar).max(axis=0)
            err_max = np.maximum(err_u, np.maximum(err_v, err_w)) / homes.occupancies
            for i in range(homes.count):
                rows.append([
                    _fmt(snap.time), str(i),
                    _fmt(err_u[i] / homes.occupancies[i]),
                    _fmt(err_v[i] / homes.occupancies[i]),
                    _fmt(err_w[i] / homes.occupancies[i]),
                    _fmt(err_max[i]),
                ])
        path = out / "equilibrium_comparison.csv"
        _write_rows(path, ["t", "i", "err_u", "err_v", "err_w", "err_max"], rows)
        files.append(path)

    totals = traj.total
    drift = float(np.max(np.abs(totals - totals[0])) / totals[0])
    return ScenarioReport(out, files, traj, drift, _time.perf_counter() - start)


def compute_equilibrium(config: SimulationConfig) -> ScenarioReport:
    """Solve for the steady state only and write its field and home tables."""
    start = _time.perf_counter()
    grid = config.build_grid()
    homes = config.build_homes(grid)
    u_bar, v_bar, w_bar = field_equilibria(homes, config.params, grid)

    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []

    path = out / "equilibrium_v.csv"
    write_snapshot(v_bar.sum(axis=1), grid, path)
    files.append(path)
    path = out / "equilibrium_w.csv"
    write_snapshot(w_bar.sum(axis=1), grid, path)
    files.append(path)

    area = grid.cell_area
    rows = []
    for i in range(homes.count):
        rows.append([
            str(i),
            _fmt(homes.locations[i, 0]),
            _fmt(homes.locations[i, 1]),
            _fmt(homes.occupancies[i]),
            _fmt(u_bar[i]),
            _fmt(area * v_bar[:, i].sum()),
            _fmt(area * w_bar[:, i].sum()),
        ])
    path = out / "equilibrium_homes.csv"
    _write_rows(path, ["i", "y1", "y2", "n", "u", "int_v", "int_w"], rows)
    files.append(path)

    empty = Trajectory(np.zeros(0), np.zeros((0, homes.count)), np.zeros((0, homes.count)),
                       np.zeros((0, homes.count)), homes.locations, homes.occupancies)
    return ScenarioReport(out, files, empty, 0.0, _time.perf_counter() - start)
