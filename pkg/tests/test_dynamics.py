import numpy as np
import pytest

from commutesim import (CircadianSchedule, ConfigurationError, EnsembleState,
                        ModelParams, NumericalError, Simulator, VelocityField,
                        build_grid, build_homes, circadian_rate, euler_sum,
                        mass_per_home, random_homes, run_simulation)


@pytest.fixture(scope="module")
def small_grid():
    return build_grid((0.0, 1.0, 0.0, 1.0), 16, 16)


@pytest.fixture(scope="module")
def two_homes(small_grid, table1_params):
    return build_homes([(0.3, 0.4), (0.6, 0.7)], [120.0, 80.0],
                       small_grid, table1_params.kernel)


class TestCircadianSchedule:
    def test_flat_is_constant(self):
        sched = CircadianSchedule.flat(2.0, 2.4)
        for t in (0.0, 0.37, 1.0, 5.81):
            assert circadian_rate(sched, t) == (2.0, 2.4)

    def test_flat_periodicity_is_exact(self):
        sched = CircadianSchedule.flat(2.0, 2.4)
        for t in np.linspace(0.0, 1.0, 23):
            assert circadian_rate(sched, t) == circadian_rate(sched, t + 1.0)

    def test_piecewise_window(self):
        sched = CircadianSchedule.piecewise(2.0, 2.4, gamma_windows=[(0.25, 0.5, 2.0)])
        assert sched.rates(0.3) == (4.0, 2.4)
        assert sched.rates(0.6) == (2.0, 2.4)
        assert sched.rates(1.3) == (4.0, 2.4)  # next day, same phase

    def test_piecewise_periodicity(self):
        sched = CircadianSchedule.piecewise(1.0, 1.0, chi_windows=[(0.6, 0.9, 3.0)])
        # away from window edges the phase wobble of float mod is harmless
        for t in (0.05, 0.3, 0.75, 0.95):
            assert circadian_rate(sched, t) == circadian_rate(sched, t + 1.0)

    def test_rejects_nonpositive_rates(self):
        with pytest.raises(ConfigurationError):
            CircadianSchedule.flat(0.0, 1.0)
        with pytest.raises(ConfigurationError):
            CircadianSchedule.piecewise(1.0, 1.0, gamma_windows=[(0.2, 0.1, 2.0)])


class TestModelParams:
    def test_rejects_negative_rate(self):
        with pytest.raises(ConfigurationError):
            ModelParams(gamma=-1.0, alpha=1.0, chi=1.0)

    def test_rejects_bad_sigma(self):
        with pytest.raises(ConfigurationError):
            ModelParams(gamma=1.0, alpha=1.0, chi=1.0, sigma=0.0)


class TestStepHome:
    def test_first_step_moves_mass_home_to_travelers(self, small_grid, table1_params, two_homes):
        # From (n, 0, 0): u drops by dt*gamma*n, the traveler field gains
        # exactly that mass, the worker field stays empty.
        dt = 1e-3
        sim = Simulator(small_grid, table1_params, two_homes, dt)
        state = sim.initial_state().home(0)
        n = state.u
        new = sim.step_home(state, 0)
        assert new.u == pytest.approx(n - dt * table1_params.gamma * n, rel=1e-14)
        assert euler_sum(new.v, small_grid) == pytest.approx(dt * table1_params.gamma * n, rel=1e-12)
        assert np.array_equal(new.w, np.zeros_like(new.w))

    def test_mass_conserved_each_step(self, small_grid, table1_params, two_homes):
        sim = Simulator(small_grid, table1_params, two_homes, 1e-3)
        state = sim.initial_state()
        for k in range(20):
            state = sim.step(state, k)
        masses = mass_per_home(state, small_grid)
        assert np.allclose(masses, two_homes.occupancies, rtol=1e-10)

    def test_zero_rates_decouple_compartments(self, small_grid, two_homes):
        params = ModelParams(gamma=0.0, alpha=0.0, chi=0.0, eps=1.0, sigma=0.05)
        sim = Simulator(small_grid, params, two_homes, 1e-3)
        rng = np.random.default_rng(0)
        v = rng.random((small_grid.size, 2))
        w = rng.random((small_grid.size, 2))
        state = EnsembleState(np.array([5.0, 7.0]), v.copy(), w.copy(), 0.0)
        new = sim.step(state)
        assert np.array_equal(new.u, state.u)
        assert np.array_equal(new.w, w)
        assert not np.array_equal(new.v, v)  # diffusion acts
        assert np.allclose(euler_sum(new.v, small_grid, axis=0),
                           euler_sum(v, small_grid, axis=0), rtol=1e-12)

    def test_step_home_matches_batched_step_bitwise(self, small_grid, table1_params, two_homes):
        sim = Simulator(small_grid, table1_params, two_homes, 1e-3)
        batch = sim.initial_state()
        singles = [batch.home(i) for i in range(two_homes.count)]
        for k in range(25):
            batch = sim.step(batch, k)
            singles = [sim.step_home(s, i, k) for i, s in enumerate(singles)]
        for i, s in enumerate(singles):
            assert s.u == batch.u[i]
            assert np.array_equal(s.v, batch.v[:, i])
            assert np.array_equal(s.w, batch.w[:, i])

    def test_decoupling_with_transport_and_schedule(self, small_grid, two_homes):
        params = ModelParams(2.0, 12.0, 2.4, eps=1.0, sigma=0.05,
                             velocity=VelocityField.rotation(1.0, (0.5, 0.5)))
        sched = CircadianSchedule.piecewise(2.0, 2.4, gamma_windows=[(0.0, 0.25, 2.0)])
        sim = Simulator(small_grid, params, two_homes, 1e-3, schedule=sched)
        batch = sim.initial_state()
        singles = [batch.home(i) for i in range(two_homes.count)]
        for k in range(10):
            batch = sim.step(batch, k)
            singles = [sim.step_home(s, i, k) for i, s in enumerate(singles)]
        for i, s in enumerate(singles):
            assert np.array_equal(s.v, batch.v[:, i])
            assert np.array_equal(s.w, batch.w[:, i])


class TestStability:
    def test_rejects_dt_above_rate_bound(self, small_grid, table1_params, two_homes):
        with pytest.raises(ConfigurationError):
            Simulator(small_grid, table1_params, two_homes, dt=0.05)  # alpha=12 caps at 1/24

    def test_rejects_dt_above_transport_bound(self, small_grid, two_homes):
        params = ModelParams(2.0, 12.0, 2.4, velocity=VelocityField.constant(50.0, 0.0))
        with pytest.raises(ConfigurationError):
            Simulator(small_grid, params, two_homes, dt=0.01)

    def test_clamp_policy(self, small_grid, two_homes):
        params = ModelParams(gamma=0.0, alpha=0.0, chi=0.0, eps=0.0, sigma=0.05)
        sim = Simulator(small_grid, params, two_homes, 1e-3)

        def state_with(value):
            v = np.full((small_grid.size, 2), 1.0)
            v[3, 0] = value
            return EnsembleState(np.array([1.0, 1.0]), v, np.ones_like(v), 0.0)

        new = sim.step(state_with(-5e-13))  # tiny undershoot: zeroed, tracked
        assert new.v[3, 0] == 0.0
        assert sim.clamped_mass > 0.0

        new = sim.step(state_with(-5e-10))  # small: tolerated as-is
        assert new.v[3, 0] == -5e-10
        assert sim.min_value == -5e-10

        with pytest.raises(NumericalError):
            sim.step(state_with(-5e-9))  # beyond the abort floor


class TestRunSimulation:
    def test_aggregates_match_explicit_euler_twin(self, small_grid, table1_params):
        homes = build_homes([(0.45, 0.55)], [100.0], small_grid, table1_params.kernel)
        dt = 1e-3
        traj = run_simulation(small_grid, table1_params, homes, dt, t_end=0.2,
                              output_every=0.01)
        g, a, c = table1_params.gamma, table1_params.alpha, table1_params.chi
        u, V, W = 100.0, 0.0, 0.0
        series = {0: (u, V, W)}
        for k in range(1, 201):
            u, V, W = (u + dt * (c * W - g * u),
                       V + dt * (-a * V + g * u),
                       W + dt * (a * V - c * W))
            series[k] = (u, V, W)
        for idx, t in enumerate(traj.times):
            k = int(round(t / dt))
            expect = series[k]
            got = (traj.at_home[idx, 0], traj.traveling[idx, 0], traj.working[idx, 0])
            assert np.allclose(got, expect, rtol=1e-6, atol=1e-9)

    def test_mirrored_homes_mirror_trajectories(self, table1_params):
        grid = build_grid((0.0, 1.0, 0.0, 1.0), 20, 20)
        homes = build_homes([(0.3, 0.4), (0.7, 0.4)], [100.0, 100.0],
                            grid, table1_params.kernel)
        traj = run_simulation(grid, table1_params, homes, 1e-3, t_end=0.1,
                              output_every=0.01, snapshot_times=(0.1,))
        assert np.allclose(traj.at_home[:, 0], traj.at_home[:, 1], rtol=1e-10)
        assert np.allclose(traj.traveling[:, 0], traj.traveling[:, 1], rtol=1e-10)
        snap = traj.snapshot_at(0.1)
        v0 = snap.v[:, 0].reshape(grid.n2, grid.n1)
        v1 = snap.v[:, 1].reshape(grid.n2, grid.n1)
        assert np.allclose(v0, v1[:, ::-1], atol=1e-10 * v0.max())

    def test_total_population_conserved(self, small_grid, table1_params):
        homes = random_homes(5, seed=3, occupancy_range=(50.0, 200.0),
                             grid=small_grid, kernel=table1_params.kernel)
        traj = run_simulation(small_grid, table1_params, homes, 1e-3, t_end=0.5)
        totals = traj.total
        assert np.max(np.abs(totals - totals[0])) <= 1e-8 * totals[0]
        per_home = np.stack([traj.at_home, traj.traveling, traj.working]).sum(axis=0)
        assert np.allclose(per_home, homes.occupancies, rtol=1e-8)

    def test_aggregates_settle_after_one_day(self, small_grid, table1_params):
        homes = build_homes([(0.5, 0.5)], [100.0], small_grid, table1_params.kernel)
        traj = run_simulation(small_grid, table1_params, homes, 1e-3, t_end=2.0,
                              output_every=0.01)
        in_window = (traj.times >= 1.0) & (traj.times <= 2.0)
        for series in (traj.total_at_home, traj.total_traveling, traj.total_working):
            vals = series[in_window]
            steps = np.abs(np.diff(vals)) / np.abs(vals[:-1])
            assert steps.max() <= 1e-3

    def test_conservation_with_schedule_and_transport(self, small_grid, two_homes):
        params = ModelParams(2.0, 12.0, 2.4, eps=1.0, sigma=0.05,
                             velocity=VelocityField.rotation(1.0, (0.5, 0.5)))
        sched = CircadianSchedule.piecewise(2.0, 2.4,
                                            gamma_windows=[(0.0, 0.25, 2.0)],
                                            chi_windows=[(0.5, 0.8, 1.5)])
        traj = run_simulation(small_grid, params, two_homes, 1e-3, t_end=0.5,
                              schedule=sched)
        per_home = traj.at_home + traj.traveling + traj.working
        assert np.allclose(per_home, two_homes.occupancies, rtol=1e-8)
        assert traj.min_value >= -1e-9

    def test_snapshot_bookkeeping(self, small_grid, table1_params, two_homes):
        traj = run_simulation(small_grid, table1_params, two_homes, 1e-3, t_end=0.1,
                              snapshot_times=(0.0, 0.05, 0.1))
        assert [s.time for s in traj.snapshots] == pytest.approx([0.0, 0.05, 0.1], abs=1e-9)
        snap = traj.snapshot_at(0.05)
        assert snap.v.shape == (small_grid.size, 2)
        assert snap.traveler_field().shape == (small_grid.size,)

    def test_same_seed_same_homes(self, small_grid, table1_params):
        a = random_homes(7, seed=11, occupancy_range=(50.0, 200.0),
                         grid=small_grid, kernel=table1_params.kernel)
        b = random_homes(7, seed=11, occupancy_range=(50.0, 200.0),
                         grid=small_grid, kernel=table1_params.kernel)
        assert np.array_equal(a.locations, b.locations)
        assert np.array_equal(a.occupancies, b.occupancies)
        assert np.array_equal(a.sources, b.sources)


class TestMassPerHome:
    def test_initial_state(self, small_grid, table1_params, two_homes):
        sim = Simulator(small_grid, table1_params, two_homes, 1e-3)
        masses = mass_per_home(sim.initial_state(), small_grid)
        assert np.array_equal(masses, two_homes.occupancies)

    def test_scales_linearly(self, small_grid, table1_params, two_homes):
        sim = Simulator(small_grid, table1_params, two_homes, 1e-3)
        state = sim.initial_state()
        for k in range(10):
            state = sim.step(state, k)
        doubled = EnsembleState(2 * state.u, 2 * state.v, 2 * state.w, state.t)
        assert np.allclose(mass_per_home(doubled, small_grid),
                           2 * mass_per_home(state, small_grid), rtol=1e-14)

    def test_single_home_state(self, small_grid, table1_params, two_homes):
        sim = Simulator(small_grid, table1_params, two_homes, 1e-3)
        home = sim.initial_state().home(1)
        assert mass_per_home(home, small_grid) == two_homes.occupancies[1]
