"""Closed-form aggregate equilibria and the field-level steady state.

The aggregate totals (at home, traveling, working) of each home obey a
3x3 linear ODE whose generator has zero column sums; its kernel gives
the closed-form equilibrium split.  The spatial steady state follows by
a single resolvent solve for the traveler field, with the worker field a
fixed multiple of it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .dynamics import HomeSet, ModelParams
from .errors import ConfigurationError
from .grid import Grid, KernelSpec, home_source_profile
from .linsolve import solve_resolvent
from .operators import VelocityField, build_laplacian


def _check_rates(gamma: float, alpha: float, chi: float):
    for name, value in (("gamma", gamma), ("alpha", alpha), ("chi", chi)):
        if not value > 0:
            raise ConfigurationError(f"rate {name} must be positive, got {value}")


def ode_matrix(gamma: float, alpha: float, chi: float) -> np.ndarray:
    """Generator of the aggregate cycle, ordered (at home, traveling, working).

    Columns sum to zero: each rate moves people between compartments.
    """
    _check_rates(gamma, alpha, chi)
    return np.array([
        [-gamma, 0.0, chi],
        [gamma, -alpha, 0.0],
        [0.0, alpha, -chi],
    ])


@dataclass(frozen=True)
class AggregateState:
    """Compartment totals of one home."""

    at_home: float
    traveling: float
    working: float

    @property
    def total(self) -> float:
        return self.at_home + self.traveling + self.working

    def as_array(self) -> np.ndarray:
        return np.array([self.at_home, self.traveling, self.working])


def turnover_rate(gamma: float, alpha: float, chi: float) -> float:
    """Equilibrium flux through each compartment per person, the harmonic
    combination ``1 / (1/gamma + 1/alpha + 1/chi)``."""
    _check_rates(gamma, alpha, chi)
    return 1.0 / (1.0 / gamma + 1.0 / alpha + 1.0 / chi)


def aggregate_equilibrium(n: float, gamma: float, alpha: float, chi: float) -> AggregateState:
    """Closed-form equilibrium split of ``n`` people across the cycle."""
    _check_rates(gamma, alpha, chi)
    if not n > 0:
        raise ConfigurationError(f"occupancy must be positive, got {n}")
    at_home = n / (1.0 + gamma / alpha + gamma / chi)
    traveling = n / (alpha / gamma + 1.0 + alpha / chi)
    working = n / (chi / gamma + chi / alpha + 1.0)
    return AggregateState(at_home, traveling, working)


def run_aggregate_ode(init: AggregateState, gamma: float, alpha: float, chi: float,
                      t_end: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """RK4 trajectory of the aggregate cycle from ``init``.

    Returns ``(times, states)`` with states shaped ``(T, 3)``.  The
    generator has zero column sums, so every RK4 stage conserves the
    total to rounding.
    """
    L = ode_matrix(gamma, alpha, chi)
    if dt <= 0 or t_end <= 0:
        raise ConfigurationError("dt and t_end must be positive")
    if dt * max(gamma, alpha, chi) > 0.5:
        raise ConfigurationError(f"dt={dt} too large for rates up to {max(gamma, alpha, chi)}")
    nsteps = int(np.ceil(t_end / dt - 1e-12))
    x = init.as_array().astype(float)
    states = np.empty((nsteps + 1, 3))
    states[0] = x
    for k in range(nsteps):
        k1 = L @ x
        k2 = L @ (x + 0.5 * dt * k1)
        k3 = L @ (x + 0.5 * dt * k2)
        k4 = L @ (x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[k + 1] = x
    times = dt * np.arange(nsteps + 1)
    return times, states


_SHARED = object()


def field_equilibrium(location, occupancy: float, params: ModelParams, grid: Grid,
                      laplacian: sp.spmatrix | None = None,
                      velocity: VelocityField | None | object = _SHARED):
    """Steady state of one home: at-home count plus both density fields.

    The traveler field solves the steady balance with the cycle-flux
    source concentrated at the home kernel; the worker field is the
    ``alpha/chi`` multiple of it.  By default the velocity comes from
    ``params`` (which must then hold a single shared field or none).
    """
    _check_rates(params.gamma, params.alpha, params.chi)
    if velocity is _SHARED:
        if params.velocity is not None and not isinstance(params.velocity, VelocityField):
            raise ConfigurationError("per-home velocities: pass the velocity explicitly")
        velocity = params.velocity
    if laplacian is None:
        laplacian = build_laplacian(grid)
    kernel = KernelSpec(params.sigma)
    tau = turnover_rate(params.gamma, params.alpha, params.chi)
    u_bar = occupancy / (1.0 + params.gamma / params.alpha + params.gamma / params.chi)
    source = tau * occupancy * home_source_profile(location, grid, kernel)
    v_bar = solve_resolvent(params.alpha, laplacian, velocity, source, params.eps, grid)
    w_bar = (params.alpha / params.chi) * v_bar
    return u_bar, v_bar, w_bar


def field_equilibria(homes: HomeSet, params: ModelParams, grid: Grid,
                     laplacian: sp.spmatrix | None = None):
    """Steady states of every home, with the resolvent solved as one batch.

    Only valid when all homes share one velocity field (or none).
    Returns ``(u_bar (H,), v_bar (N, H), w_bar (N, H))``.
    """
    _check_rates(params.gamma, params.alpha, params.chi)
    if laplacian is None:
        laplacian = build_laplacian(grid)
    velocity = params.velocity
    if velocity is not None and not isinstance(velocity, VelocityField):
        fields = list(velocity)
        if any(f is not fields[0] for f in fields):
            raise ConfigurationError("batched equilibria need a shared velocity field")
        velocity = fields[0]
    tau = turnover_rate(params.gamma, params.alpha, params.chi)
    u_bar = homes.occupancies / (1.0 + params.gamma / params.alpha + params.gamma / params.chi)
    sources = tau * homes.occupancies * homes.sources
    v_bar = solve_resolvent(params.alpha, laplacian, velocity, sources, params.eps, grid)
    w_bar = (params.alpha / params.chi) * v_bar
    return u_bar, v_bar, w_bar


def fit_decay_rate(times: np.ndarray, values: np.ndarray, limit: float,
                   t_min: float = 0.5, t_max: float = 2.0) -> float:
    """Exponential decay rate of ``|values - limit|`` by least squares.

    Fits ``log|values - limit| ~ log M - delta*t`` on the window
    ``[t_min, t_max]``, skipping the initial transient and any samples
    already at rounding level.  Returns ``delta``.
    """
    times = np.asarray(times, dtype=float)
    resid = np.abs(np.asarray(values, dtype=float) - limit)
    keep = (times >= t_min) & (times <= t_max) & (resid > 1e-14)
    if keep.sum() < 2:
        raise ConfigurationError("too few samples in the fitting window")
    t = times[keep]
    y = np.log(resid[keep])
    slope, _ = np.polyfit(t, y, 1)
    return float(-slope)
