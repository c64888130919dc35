"""Time stepper for the per-home commuting subsystems.

Each home carries an independent triple: people at home (a scalar),
a traveler density field, and a worker density field.  One step applies,
in order, the explicit reaction/source terms evaluated at the start of
the step, the implicit diffusion solve for the traveler field, and (when
a velocity field is active) an explicit donor-cell transport substep.
The discrete source has unit Euler mass, so each step moves mass between
the three compartments of a home without creating or destroying any.

Homes never interact; the stepper advances all of them at once by
batching fields as ``(N, H)`` columns, which is arithmetic-identical to
stepping them one by one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, NumericalError
from .grid import Grid, KernelSpec, euler_sum, home_source_profile, kernel_normalization
from .linsolve import ImplicitDiffusionSolver
from .operators import VelocityField, build_convection_matrix, build_laplacian, cfl_max_dt

# Undershoot policy: values in [CLAMP_FLOOR, 0) are zeroed and tracked;
# anything below ABORT_FLOOR aborts the run.
CLAMP_FLOOR = -1e-12
ABORT_FLOOR = -1e-9

# Explicit treatment of the rate terms needs dt*max_rate <= 1/2.
RATE_STABILITY_FACTOR = 0.5


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Rates and coefficients of the commuting model.

    ``gamma`` is the home-leaving rate, ``alpha`` the arrival rate,
    ``chi`` the work-leaving rate (all 1/day); ``eps`` the diffusion
    coefficient, ``sigma`` the kernel width.  ``velocity`` is either one
    field shared by every home, a sequence with one field per home, or
    ``None`` for no transport.
    """

    gamma: float
    alpha: float
    chi: float
    eps: float = 1.0
    sigma: float = 0.05
    velocity: VelocityField | Sequence[VelocityField] | None = None

    def __post_init__(self):
        for name in ("gamma", "alpha", "chi"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"rate {name} must be >= 0, got {getattr(self, name)}")
        if self.eps < 0:
            raise ConfigurationError(f"diffusion coefficient must be >= 0, got {self.eps}")
        if self.sigma <= 0:
            raise ConfigurationError(f"kernel sigma must be positive, got {self.sigma}")

    @property
    def kernel(self) -> KernelSpec:
        return KernelSpec(self.sigma)

    def velocity_for_home(self, index: int, count: int) -> VelocityField | None:
        if self.velocity is None or isinstance(self.velocity, VelocityField):
            return self.velocity
        fields = list(self.velocity)
        if len(fields) != count:
            raise ConfigurationError(
                f"{len(fields)} velocity fields for {count} homes"
            )
        return fields[index]


@dataclass(frozen=True, eq=False)
class CircadianSchedule:
    """One-day-periodic home-leaving and work-leaving rates.

    ``gamma_fn`` and ``chi_fn`` take the phase ``t mod 1`` and must stay
    strictly positive.  The arrival rate is not modulated.
    """

    gamma_fn: Callable[[float], float]
    chi_fn: Callable[[float], float]

    def __post_init__(self):
        phases = np.linspace(0.0, 1.0, 97, endpoint=False)
        for name, fn in (("gamma", self.gamma_fn), ("chi", self.chi_fn)):
            vals = np.array([fn(p) for p in phases])
            if not np.all(vals > 0):
                raise ConfigurationError(f"schedule {name} must stay strictly positive")

    def rates(self, t: float) -> tuple[float, float]:
        phase = t - math.floor(t)
        return float(self.gamma_fn(phase)), float(self.chi_fn(phase))

    def max_rates(self) -> tuple[float, float]:
        phases = np.linspace(0.0, 1.0, 1001, endpoint=False)
        g = max(self.gamma_fn(p) for p in phases)
        c = max(self.chi_fn(p) for p in phases)
        return float(g), float(c)

    @staticmethod
    def flat(gamma: float, chi: float) -> "CircadianSchedule":
        return CircadianSchedule(lambda _t: gamma, lambda _t: chi)

    @staticmethod
    def piecewise(gamma: float, chi: float,
                  gamma_windows: Sequence[tuple[float, float, float]] = (),
                  chi_windows: Sequence[tuple[float, float, float]] = ()) -> "CircadianSchedule":
        """Base rates with multiplicative factors on phase windows.

        Each window is ``(start, end, factor)`` with
        ``0 <= start < end <= 1``; outside every window the base rate
        applies.
        """

        def validate(windows):
            for start, end, factor in windows:
                if not (0.0 <= start < end <= 1.0):
                    raise ConfigurationError(f"bad schedule window ({start}, {end})")
                if factor <= 0:
                    raise ConfigurationError(f"schedule factor must be positive, got {factor}")
            return tuple(windows)

        gw = validate(gamma_windows)
        cw = validate(chi_windows)

        def make(base, windows):
            def fn(phase):
                for start, end, factor in windows:
                    if start <= phase < end:
                        return base * factor
                return base

            return fn

        return CircadianSchedule(make(gamma, gw), make(chi, cw))


def circadian_rate(schedule: CircadianSchedule, t: float) -> tuple[float, float]:
    """Home-leaving and work-leaving rates at time ``t`` (period one day)."""
    return schedule.rates(t)


@dataclass(frozen=True, eq=False)
class HomeSet:
    """Home locations, occupancies, and their cached kernel data.

    ``sources`` holds one column per home: the domain-normalized kernel
    at the cell centers, rescaled to unit Euler mass.
    """

    locations: np.ndarray      # (H, 2)
    occupancies: np.ndarray    # (H,)
    normalizations: np.ndarray  # (H,) in-domain kernel masses
    sources: np.ndarray        # (N, H)

    @property
    def count(self) -> int:
        return self.locations.shape[0]


def build_homes(locations, occupancies, grid: Grid, kernel: KernelSpec) -> HomeSet:
    """Validate home data and precompute the per-home source columns."""
    locations = np.atleast_2d(np.asarray(locations, dtype=float))
    occupancies = np.atleast_1d(np.asarray(occupancies, dtype=float))
    if locations.shape != (occupancies.size, 2):
        raise ConfigurationError(
            f"{occupancies.size} occupancies for locations shaped {locations.shape}"
        )
    for idx, y in enumerate(locations):
        if not grid.contains(y, strict=True):
            raise ConfigurationError(f"home {idx} at {tuple(y)} lies outside the domain")
    if not np.all(occupancies > 0):
        bad = int(np.argmin(occupancies))
        raise ConfigurationError(f"home {bad} has nonpositive occupancy {occupancies[bad]}")
    norms = np.array([kernel_normalization(y, grid, kernel) for y in locations])
    sources = np.column_stack([home_source_profile(y, grid, kernel) for y in locations])
    return HomeSet(locations, occupancies, norms, sources)


def random_homes(count: int, seed: int, occupancy_range: tuple[float, float],
                 grid: Grid, kernel: KernelSpec) -> HomeSet:
    """Uniformly placed homes with occupancies drawn from a range, seeded."""
    if count < 1:
        raise ConfigurationError(f"need at least one home, got {count}")
    low, high = occupancy_range
    if not (0 < low <= high):
        raise ConfigurationError(f"bad occupancy range ({low}, {high})")
    rng = np.random.default_rng(seed)
    y1 = rng.uniform(grid.a1, grid.b1, size=count)
    y2 = rng.uniform(grid.a2, grid.b2, size=count)
    occ = rng.uniform(low, high, size=count)
    return build_homes(np.column_stack([y1, y2]), occ, grid, kernel)


@dataclass(eq=False)
class HomeState:
    """State of a single home: scalar at-home count plus two fields."""

    u: float
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0


@dataclass(eq=False)
class EnsembleState:
    """Batched state of all homes: ``u`` is ``(H,)``, fields are ``(N, H)``."""

    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    t: float = 0.0

    def home(self, index: int) -> HomeState:
        return HomeState(float(self.u[index]), self.v[:, index].copy(),
                         self.w[:, index].copy(), self.t)


def mass_per_home(state: HomeState | EnsembleState, grid: Grid):
    """Total people of a home: at home + traveling + working."""
    axis = 0 if isinstance(state, EnsembleState) else None
    return state.u + euler_sum(state.v, grid, axis=axis) + euler_sum(state.w, grid, axis=axis)


@dataclass(eq=False)
class FieldSnapshot:
    """Per-home fields captured at one instant of a run."""

    time: float
    u: np.ndarray  # (H,)
    v: np.ndarray  # (N, H)
    w: np.ndarray  # (N, H)

    def traveler_field(self) -> np.ndarray:
        return self.v.sum(axis=1)

    def worker_field(self) -> np.ndarray:
        return self.w.sum(axis=1)


@dataclass(eq=False)
class Trajectory:
    """Aggregate time series of a run plus optional field snapshots."""

    times: np.ndarray          # (T,)
    at_home: np.ndarray        # (T, H) people at home per home
    traveling: np.ndarray      # (T, H) Euler mass of each traveler field
    working: np.ndarray        # (T, H) Euler mass of each worker field
    locations: np.ndarray      # (H, 2)
    occupancies: np.ndarray    # (H,)
    snapshots: list[FieldSnapshot] = field(default_factory=list)
    min_value: float = 0.0     # most negative pre-clamp value seen
    clamped_mass: float = 0.0  # total mass added by zeroing undershoots

    @property
    def total_at_home(self) -> np.ndarray:
        return self.at_home.sum(axis=1)

    @property
    def total_traveling(self) -> np.ndarray:
        return self.traveling.sum(axis=1)

    @property
    def total_working(self) -> np.ndarray:
        return self.working.sum(axis=1)

    @property
    def total(self) -> np.ndarray:
        return self.total_at_home + self.total_traveling + self.total_working

    def snapshot_at(self, time: float) -> FieldSnapshot:
        for snap in self.snapshots:
            if abs(snap.time - time) <= 1e-9:
                return snap
        raise KeyError(f"no snapshot at t={time}")


class Simulator:
    """Fixed-step integrator for a set of homes on a shared grid.

    Builds the Laplacian and the implicit-diffusion factorization once;
    per-home transport matrices are assembled up front when a velocity
    field is configured.  Stability of the explicit pieces is validated
    here, before any stepping.
    """

    def __init__(self, grid: Grid, params: ModelParams, homes: HomeSet, dt: float,
                 schedule: CircadianSchedule | None = None):
        if dt <= 0:
            raise ConfigurationError(f"time step must be positive, got {dt}")
        self.grid = grid
        self.params = params
        self.homes = homes
        self.dt = float(dt)
        self.schedule = schedule

        gamma_max, chi_max = (params.gamma, params.chi)
        if schedule is not None:
            gamma_max, chi_max = schedule.max_rates()
        rate_max = max(gamma_max, params.alpha, chi_max)
        if rate_max > 0 and dt > RATE_STABILITY_FACTOR / rate_max:
            raise ConfigurationError(
                f"dt={dt} exceeds the explicit-rate bound {RATE_STABILITY_FACTOR / rate_max:.6g}"
            )

        self._conv = None
        fields = [params.velocity_for_home(i, homes.count) for i in range(homes.count)]
        if any(f is not None and not f.is_zero for f in fields):
            self._conv = []
            for i, f in enumerate(fields):
                if f is None or f.is_zero:
                    self._conv.append(None)
                    continue
                bound = cfl_max_dt(f, grid)
                if dt > bound:
                    raise ConfigurationError(
                        f"dt={dt} violates the transport bound {bound:.6g} for home {i}"
                    )
                self._conv.append(build_convection_matrix(f, grid))

        self.laplacian = build_laplacian(grid)
        self.diffusion = ImplicitDiffusionSolver(self.laplacian, dt, params.eps)
        self.min_value = 0.0
        self.clamped_mass = 0.0

    def rates_at(self, t: float) -> tuple[float, float]:
        if self.schedule is None:
            return self.params.gamma, self.params.chi
        return self.schedule.rates(t)

    def initial_state(self) -> EnsembleState:
        """Everyone at home: ``u = n_i``, empty traveler and worker fields."""
        N, H = self.grid.size, self.homes.count
        return EnsembleState(self.homes.occupancies.copy(), np.zeros((N, H)),
                             np.zeros((N, H)), 0.0)

    def _advance(self, u, v, w, t, sources, conv, step_index):
        dt = self.dt
        alpha = self.params.alpha
        gamma_t, chi_t = self.rates_at(t)
        mass_w = self.grid.cell_area * w.sum(axis=0)

        u_new = u + dt * (chi_t * mass_w - gamma_t * u)
        rhs = v + dt * (-alpha * v + gamma_t * (sources * u))
        v_new = self.diffusion.solve(rhs)
        if conv is not None:
            for h, Cm in enumerate(conv):
                if Cm is not None:
                    v_new[:, h] += dt * (Cm @ v_new[:, h])
        w_new = w + dt * (alpha * v - chi_t * w)

        self._police(u_new, "at-home count", step_index, per_cell=False)
        self._police(v_new, "traveler field", step_index, per_cell=True)
        self._police(w_new, "worker field", step_index, per_cell=True)
        return u_new, v_new, w_new

    def _police(self, arr, label, step_index, per_cell):
        low = float(arr.min())
        if low >= 0.0:
            return
        self.min_value = min(self.min_value, low)
        if low < ABORT_FLOOR:
            home = int(np.unravel_index(np.argmin(arr), arr.shape)[-1])
            raise NumericalError(
                f"{label} fell to {low:.3e} (home {home}, step {step_index})"
            )
        mask = arr < 0.0
        mask &= arr >= CLAMP_FLOOR
        if np.any(mask):
            lost = float(arr[mask].sum())
            self.clamped_mass += -lost * (self.grid.cell_area if per_cell else 1.0)
            arr[mask] = 0.0

    def step(self, state: EnsembleState, step_index: int = 0) -> EnsembleState:
        """Advance every home by one time step."""
        u, v, w = self._advance(state.u, state.v, state.w, state.t,
                                self.homes.sources, self._conv, step_index)
        return EnsembleState(u, v, w, state.t + self.dt)

    def step_home(self, state: HomeState, index: int, step_index: int = 0) -> HomeState:
        """Advance a single home; arithmetic matches the batched step."""
        source = self.homes.sources[:, index:index + 1]
        conv = None
        if self._conv is not None:
            conv = [self._conv[index]]
        u, v, w = self._advance(np.array([state.u]), state.v[:, None].copy(),
                                state.w[:, None].copy(), state.t, source, conv, step_index)
        return HomeState(float(u[0]), v[:, 0], w[:, 0], state.t + self.dt)

    def run(self, t_end: float, output_every: float = 0.01,
            snapshot_times: Sequence[float] = (), record_fields: bool = True) -> Trajectory:
        """March from t=0 and record aggregates and requested snapshots.

        Aggregates are recorded every ``output_every`` (rounded to whole
        steps) and at the final time; snapshots are taken at the nearest
        step to each requested time.
        """
        if t_end <= 0:
            raise ConfigurationError(f"end time must be positive, got {t_end}")
        nsteps = int(round(t_end / self.dt))
        if abs(nsteps * self.dt - t_end) > 1e-9 * max(1.0, t_end):
            nsteps = math.ceil(t_end / self.dt)
        every = max(1, int(round(output_every / self.dt)))
        snap_steps = {}
        for ts in snapshot_times:
            k = int(round(ts / self.dt))
            if not 0 <= k <= nsteps:
                raise ConfigurationError(f"snapshot time {ts} outside the run")
            snap_steps[k] = ts

        self.min_value = 0.0
        self.clamped_mass = 0.0
        state = self.initial_state()
        times = []
        rows_u, rows_v, rows_w = [], [], []
        snapshots = []
        area = self.grid.cell_area

        def record(st: EnsembleState):
            times.append(st.t)
            rows_u.append(st.u.copy())
            rows_v.append(area * st.v.sum(axis=0))
            rows_w.append(area * st.w.sum(axis=0))

        def snapshot(st: EnsembleState):
            snapshots.append(FieldSnapshot(st.t, st.u.copy(), st.v.copy(), st.w.copy()))

        record(state)
        if 0 in snap_steps and record_fields:
            snapshot(state)
        for k in range(1, nsteps + 1):
            state = self.step(state, step_index=k)
            if k % every == 0 or k == nsteps:
                record(state)
            if k in snap_steps and record_fields:
                snapshot(state)

        return Trajectory(np.array(times), np.array(rows_u), np.array(rows_v),
                          np.array(rows_w), self.homes.locations.copy(),
                          self.homes.occupancies.copy(), snapshots,
                          self.min_value, self.clamped_mass)


def run_simulation(grid: Grid, params: ModelParams, homes: HomeSet, dt: float,
                   t_end: float, output_every: float = 0.01,
                   snapshot_times: Sequence[float] = (),
                   schedule: CircadianSchedule | None = None,
                   record_fields: bool = True) -> Trajectory:
    """Convenience wrapper: build a :class:`Simulator` and run it."""
    sim = Simulator(grid, params, homes, dt, schedule=schedule)
    return sim.run(t_end, output_every=output_every, snapshot_times=snapshot_times,
                   record_fields=record_fields)
