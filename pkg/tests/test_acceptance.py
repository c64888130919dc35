"""Acceptance suite: one test per headline criterion, at full desk scale.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion.  The three scenario runs are session fixtures shared by
the criteria that read them.
"""

import math
from pathlib import Path

import numpy as np
import pytest

from commutesim import (HeatKernelOracle, ImplicitDiffusionSolver, KernelSpec,
                        VelocityField, build_grid, build_laplacian,
                        characteristic_flow, field_equilibria, fit_decay_rate,
                        flow_jacobian_det, gaussian_kernel, load_config,
                        ode_matrix, pure_convection_oracle, run_scenario,
                        simpson_2d, simpson_lattice)

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def check(criterion: str, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    assert ok, f"{criterion}: {detail}"


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("default_scenario")
    config = load_config(SCENARIOS / "default.cfg", overrides={"out": out})
    return config, run_scenario(config)


@pytest.fixture(scope="session")
def settle_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("settle_scenario")
    config = load_config(SCENARIOS / "settle5day.cfg", overrides={"out": out})
    return config, run_scenario(config)


@pytest.fixture(scope="session")
def convective_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("convective_scenario")
    config = load_config(SCENARIOS / "convective.cfg", overrides={"out": out})
    return config, run_scenario(config)


def test_mass_conservation_default_scenario(default_run):
    _config, report = default_run
    traj = report.trajectory
    per_home = traj.at_home + traj.traveling + traj.working
    home_drift = float(np.max(np.abs(per_home - traj.occupancies) / traj.occupancies))
    totals = traj.total
    global_drift = float(np.max(np.abs(totals - totals[0])) / totals[0])
    ok = home_drift <= 1e-8 and global_drift <= 1e-8 and report.runtime_seconds < 120.0
    check("mass conservation (default scenario)", ok,
          f"per-home drift {home_drift:.2e}, global drift {global_drift:.2e}, "
          f"runtime {report.runtime_seconds:.0f}s")


def test_aggregate_equilibrium_fractions(default_run):
    _config, report = default_run
    traj = report.trajectory
    k = int(np.argmin(np.abs(traj.times - 2.0)))
    errs = (
        np.max(np.abs(traj.at_home[k] / traj.occupancies - 0.5)),
        np.max(np.abs(traj.traveling[k] / traj.occupancies - 1.0 / 12.0)),
        np.max(np.abs(traj.working[k] / traj.occupancies - 5.0 / 12.0)),
    )
    worst = float(max(errs))
    check("aggregate equilibrium fractions (1/2, 1/12, 5/12) at t=2", worst <= 1e-3,
          f"max abs deviation {worst:.2e}")


def test_one_day_settling(default_run):
    _config, report = default_run
    traj = report.trajectory
    window = (traj.times >= 1.0) & (traj.times <= 2.0)
    worst = 0.0
    for series in (traj.total_at_home, traj.total_traveling, traj.total_working):
        vals = series[window]
        worst = max(worst, float(np.max(np.abs(np.diff(vals)) / np.abs(vals[:-1]))))
    check("one-day settling of the aggregates", worst <= 1e-3,
          f"max relative change per output step over [1,2] days: {worst:.2e}")


def test_worker_traveler_ratio(settle_run):
    config, report = settle_run
    snap = report.trajectory.snapshot_at(5.0)
    ratio = config.params.alpha / config.params.chi
    v = snap.traveler_field()
    w = snap.worker_field()
    mask = v > 1e-8
    err = float(np.max(np.abs(w[mask] - ratio * v[mask]) / (ratio * v[mask])))
    check("worker/traveler steady ratio alpha/chi = 5", err <= 1e-6 and mask.any(),
          f"max nodewise relative deviation {err:.2e} over {int(mask.sum())} nodes")


def test_resolvent_vs_time_marching(settle_run):
    config, report = settle_run
    traj = report.trajectory
    grid = config.build_grid()
    homes = config.build_homes(grid)
    u_bar, v_bar, w_bar = field_equilibria(homes, config.params, grid)

    def distances(snap):
        du = np.abs(snap.u - u_bar)
        dv = np.abs(snap.v - v_bar).max(axis=0)
        dw = np.abs(snap.w - w_bar).max(axis=0)
        return np.maximum(du, np.maximum(dv, dw))

    d1 = distances(traj.snapshot_at(1.0))
    d2 = distances(traj.snapshot_at(2.0))
    d5 = distances(traj.snapshot_at(5.0))
    final = float(np.max(d5 / homes.occupancies))
    monotone = bool(np.all(d5 < d2) and np.all(d2 < d1))
    delta = fit_decay_rate(traj.times, traj.total_at_home, u_bar.sum(), 0.5, 2.0)
    ok = final <= 1e-4 and monotone and delta > 0
    check("resolvent equilibrium vs time-marched state", ok,
          f"max rel distance at t=5: {final:.2e}, per-home monotone {monotone}, "
          f"fitted decay rate {delta:.2f}/day")


def test_characteristic_flow_oracle_suite():
    def wavy(a=0.4, b=0.3):
        def ev(x):
            x = np.asarray(x, dtype=float)
            return np.stack([a * np.sin(x[..., 1]) + 0.2 * np.cos(x[..., 0]),
                             b * np.cos(x[..., 0]) + 0.1 * np.sin(x[..., 1])], axis=-1)

        def dv(x):
            x = np.asarray(x, dtype=float)
            return -0.2 * np.sin(x[..., 0]) + 0.1 * np.cos(x[..., 1])

        return VelocityField(ev, dv, kind="custom")

    fields = [wavy(), VelocityField.linear([[0.25, -0.1], [0.3, -0.15]], (0.05, -0.02)),
              VelocityField.rotation(1.2, (0.2, -0.3))]
    rng = np.random.default_rng(2024)
    h = 1e-5
    worst_jac = 0.0
    for k in range(100):
        vel = fields[k % len(fields)]
        z = rng.uniform(-1.0, 1.0, size=2)
        t = rng.uniform(-1.5, 1.5)
        J = np.empty((2, 2))
        for col, e in enumerate(np.eye(2)):
            J[:, col] = (characteristic_flow(z + h * e, t, vel)
                         - characteristic_flow(z - h * e, t, vel)) / (2 * h)
        det_fd = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        det = flow_jacobian_det(z, t, vel)
        worst_jac = max(worst_jac, abs(det - det_fd) / abs(det_fd))

    spec = KernelSpec(0.1)
    center = np.array([0.3, 0.0])

    def v0(p):
        return gaussian_kernel(p, center, spec)

    bounds = (-1.0, 1.0, -1.0, 1.0)
    z1, z2 = simpson_lattice(bounds, 101, 101)
    Z1, Z2 = np.meshgrid(z1, z2, indexing="xy")
    pts = np.stack([Z1, Z2], axis=-1)
    vals = pure_convection_oracle(v0, 1.0, VelocityField.rotation(1.0), pts)
    mass_err = abs(simpson_2d(vals, bounds) - 1.0)

    c = np.array([0.7, -0.2])
    vel = VelocityField.constant(*c)
    trans_err = 0.0
    for _ in range(5):
        z = rng.uniform(-1.0, 1.0, size=2)
        t = rng.uniform(-2.0, 2.0)
        trans_err = max(trans_err, float(np.max(np.abs(
            characteristic_flow(z, t, vel) - (z + t * c)))))

    ok = worst_jac <= 1e-4 and mass_err <= 1e-3 and trans_err <= 1e-10
    check("characteristic-flow oracle suite", ok,
          f"jacobian FD mismatch {worst_jac:.2e} (100 samples), transport mass error "
          f"{mass_err:.2e}, constant-field translation error {trans_err:.2e}")


def test_diffusion_oracle_second_order_convergence():
    eps, sigma0, t_end = 0.5, 0.05, 0.01
    oracle = HeatKernelOracle(eps)

    def interior_error(n):
        grid = build_grid((0.0, 1.0, 0.0, 1.0), n, n)
        dt = 0.25 * grid.dx1**2
        steps = int(round(t_end / dt))
        solver = ImplicitDiffusionSolver(build_laplacian(grid), dt, eps)
        centers = grid.cell_centers()
        v = gaussian_kernel(centers, np.array([0.5, 0.5]), KernelSpec(sigma0))
        for _ in range(steps):
            v = solver.solve(v)
        exact = oracle.gaussian_solution(t_end, centers, sigma0, center=(0.5, 0.5))
        inside = np.all((centers >= 0.1) & (centers <= 0.9), axis=1)
        return float(np.max(np.abs(v - exact)[inside]))

    e_coarse = interior_error(50)
    e_fine = interior_error(100)
    ratio = e_coarse / e_fine
    check("diffusion oracle: halving dx divides the error by ~4",
          2.8 <= ratio <= 5.2,
          f"interior errors {e_coarse:.3e} -> {e_fine:.3e}, ratio {ratio:.2f}")


def test_ode_generator_spectrum():
    rng = np.random.default_rng(7)
    worst_second = -math.inf
    worst_zero = 0.0
    for _ in range(50):
        g, a, c = np.exp(rng.uniform(np.log(0.1), np.log(20.0), size=3))
        L = ode_matrix(g, a, c)
        assert np.max(np.abs(np.ones(3) @ L)) == 0.0
        real = np.sort(np.linalg.eigvals(L).real)
        worst_zero = max(worst_zero, abs(real[-1]))
        worst_second = max(worst_second, real[-2])
    ok = worst_zero <= 1e-10 and worst_second < -1e-8
    check("aggregate generator: zero simple dominant eigenvalue, ones in left kernel",
          ok, f"|dominant| <= {worst_zero:.1e}, next real part <= {worst_second:.2e} "
              "(50 random rate triples)")


def test_stability_and_positivity(default_run, convective_run):
    lows = []
    for label, (_config, report) in (("default", default_run), ("convective", convective_run)):
        traj = report.trajectory
        lows.append((label, traj.min_value))
        assert np.all(traj.at_home >= 0) and np.all(traj.traveling >= 0)
    worst = min(v for _l, v in lows)
    check("no compartment below -1e-9 (default + convective scenarios)",
          worst >= -1e-9,
          ", ".join(f"{l}: min {v:.1e}" for l, v in lows))
