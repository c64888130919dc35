"""Numerical simulator for the return-to-home commuting model.

Per-home subsystems couple a scalar at-home compartment with traveler
and worker density fields on a rectangular no-flux domain; diffusion is
treated implicitly, reactions and transport explicitly, and per-home
totals are conserved by construction.
"""

from .dynamics import (CircadianSchedule, EnsembleState, HomeSet, HomeState,
                       ModelParams, Simulator, Trajectory, build_homes,
                       circadian_rate, mass_per_home, random_homes,
                       run_simulation)
from .equilibrium import (AggregateState, aggregate_equilibrium,
                          field_equilibria, field_equilibrium, fit_decay_rate,
                          ode_matrix, run_aggregate_ode, turnover_rate)
from .errors import (CommuteSimError, ConfigurationError, NumericalError,
                     ResourceLimitError, SingularNormalizationError)
from .grid import (Grid, KernelSpec, build_grid, euler_sum, gaussian_kernel,
                   home_source_profile, invert_index, kernel_normalization,
                   linear_index, normalized_kernel, simpson_2d, simpson_lattice)
from .linsolve import (ImplicitDiffusionSolver, solve_implicit_diffusion,
                       solve_resolvent)
from .operators import (HeatKernelOracle, VelocityField, apply_convection,
                        build_convection_matrix, build_laplacian, cfl_max_dt,
                        characteristic_flow, divergence_consistency_error,
                        face_velocities, flow_jacobian_det,
                        neumann_second_difference, pure_convection_oracle)
from .scenario import (ScenarioReport, SimulationConfig, load_config,
                       read_snapshot, run_scenario, validate_config,
                       write_snapshot, write_timeseries)

__version__ = "0.1.0"
