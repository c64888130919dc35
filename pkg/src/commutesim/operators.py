"""Spatial discretizations and the analytic solution formulas used as oracles.

The discrete side: a 5-point Neumann Laplacian built from the 1-D
second-difference factor with ghost-cell closure (every row sums to
zero), and a donor-cell upwind discretization of the divergence-form
transport term with zero flux through boundary faces.  Both operators
have exactly zero discrete mass: column sums vanish, so the Euler sum of
any application is zero and time stepping conserves people.

The analytic side: the characteristic flow of the velocity field, its
Jacobian determinant, the semi-explicit pure-transport solution built
from both, and the free-space heat kernel.  These are mesh-free and
serve as independent references for the discrete operators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError, ResourceLimitError
from .grid import Grid

# Fixed-step RK4 resolution for characteristic integration.
FLOW_MAX_STEP = 1e-3
FLOW_STEP_BUDGET = 10**8


def neumann_second_difference(n: int) -> sp.csr_matrix:
    """1-D second-difference factor with no-flux closure.

    Tridiagonal with ones off the diagonal and diagonal
    ``(-1, -2, ..., -2, -1)``; scaled by ``1/dx^2`` it is the 1-D
    Neumann Laplacian on a cell-centered grid (ghost-cell reflection).
    """
    if n < 2:
        raise ConfigurationError(f"need at least 2 cells, got {n}")
    diag = np.full(n, -2.0)
    diag[0] = -1.0
    diag[-1] = -1.0
    off = np.ones(n - 1)
    return sp.diags([off, diag, off], offsets=[-1, 0, 1], format="csr")


def build_laplacian(grid: Grid) -> sp.csr_matrix:
    """5-point Neumann Laplacian on the flat linear ordering.

    Block structure: the 1-D factor acts along x1 inside each row of
    cells and along x2 across rows.  Symmetric, row sums exactly zero.
    """
    B1 = neumann_second_difference(grid.n1) / grid.dx1**2
    B2 = neumann_second_difference(grid.n2) / grid.dx2**2
    A = sp.kron(sp.identity(grid.n2), B1) + sp.kron(B2, sp.identity(grid.n1))
    return A.tocsr()


@dataclass(frozen=True, eq=False)
class VelocityField:
    """Commuting speed field ``x -> C(x)`` with a matching divergence rule.

    ``evaluate`` maps ``(..., 2)`` points to ``(..., 2)`` velocities and
    ``divergence`` maps them to scalars; the two rules must agree with
    finite differencing of ``evaluate`` (bounded fields only).
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    divergence: Callable[[np.ndarray], np.ndarray]
    kind: str = "custom"

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(np.asarray(x, dtype=float))

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @staticmethod
    def zero() -> "VelocityField":
        def ev(x):
            return np.zeros_like(np.asarray(x, dtype=float))

        def dv(x):
            return np.zeros(np.asarray(x, dtype=float).shape[:-1])

        return VelocityField(ev, dv, kind="zero")

    @staticmethod
    def constant(c1: float, c2: float) -> "VelocityField":
        c = np.array([float(c1), float(c2)])

        def ev(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(c, x.shape).copy()

        def dv(x):
            return np.zeros(np.asarray(x, dtype=float).shape[:-1])

        return VelocityField(ev, dv, kind="constant")

    @staticmethod
    def linear(matrix, offset=(0.0, 0.0)) -> "VelocityField":
        """Affine field ``C(x) = M x + b`` with divergence ``tr M``."""
        M = np.asarray(matrix, dtype=float).reshape(2, 2)
        b = np.asarray(offset, dtype=float).reshape(2)
        tr = float(M[0, 0] + M[1, 1])

        def ev(x):
            x = np.asarray(x, dtype=float)
            return x @ M.T + b

        def dv(x):
            return np.full(np.asarray(x, dtype=float).shape[:-1], tr)

        return VelocityField(ev, dv, kind="linear")

    @staticmethod
    def rotation(omega: float, center=(0.0, 0.0)) -> "VelocityField":
        """Rigid rotation about ``center``; divergence-free."""
        w = float(omega)
        c = np.asarray(center, dtype=float)
        M = np.array([[0.0, -w], [w, 0.0]])
        return VelocityField.linear(M, offset=-M @ c)

    @staticmethod
    def from_samples(grid: Grid, c1: np.ndarray, c2: np.ndarray) -> "VelocityField":
        """Bilinear interpolation of component samples at the cell centers.

        The divergence rule interpolates centered differences of the
        samples, which is consistent with differencing the interpolant
        at interior sample nodes.
        """
        c1 = np.asarray(c1, dtype=float).reshape(grid.n2, grid.n1)
        c2 = np.asarray(c2, dtype=float).reshape(grid.n2, grid.n1)
        axes = (grid.x2, grid.x1)
        kw = dict(method="linear", bounds_error=False, fill_value=None)
        i1 = RegularGridInterpolator(axes, c1, **kw)
        i2 = RegularGridInterpolator(axes, c2, **kw)
        d1 = np.gradient(c1, grid.dx1, axis=1)
        d2 = np.gradient(c2, grid.dx2, axis=0)
        idiv = RegularGridInterpolator(axes, d1 + d2, **kw)

        def ev(x):
            x = np.asarray(x, dtype=float)
            pts = x[..., ::-1]  # interpolator axes are (x2, x1)
            return np.stack([i1(pts), i2(pts)], axis=-1)

        def dv(x):
            x = np.asarray(x, dtype=float)
            return idiv(x[..., ::-1])

        return VelocityField(ev, dv, kind="sampled")


def divergence_consistency_error(vel: VelocityField, points: np.ndarray, step: float = 1e-5) -> float:
    """Max relative gap between the divergence rule and centered differences."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    e1 = np.array([step, 0.0])
    e2 = np.array([0.0, step])
    fd = (vel(pts + e1)[..., 0] - vel(pts - e1)[..., 0]) / (2 * step)
    fd = fd + (vel(pts + e2)[..., 1] - vel(pts - e2)[..., 1]) / (2 * step)
    dv = vel.divergence(pts)
    scale = np.maximum(np.abs(dv), 1.0)
    return float(np.max(np.abs(fd - dv) / scale))


def face_velocities(vel: VelocityField, grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Normal velocities at cell faces, boundary faces zeroed (no flux).

    Returns ``(c1f, c2f)`` with shapes ``(n2, n1+1)`` and ``(n2+1, n1)``:
    ``c1f[j, k]`` is the x1-velocity on the face between cells ``k-1``
    and ``k`` of row ``j``.
    """
    x1f = grid.a1 + np.arange(grid.n1 + 1) * grid.dx1
    x2f = grid.a2 + np.arange(grid.n2 + 1) * grid.dx2

    P1 = np.stack(np.meshgrid(x1f, grid.x2, indexing="xy"), axis=-1)
    c1f = vel(P1)[..., 0]
    c1f[:, 0] = 0.0
    c1f[:, -1] = 0.0

    P2 = np.stack(np.meshgrid(grid.x1, x2f, indexing="xy"), axis=-1)
    c2f = vel(P2)[..., 1]
    c2f[0, :] = 0.0
    c2f[-1, :] = 0.0
    return c1f, c2f


def build_convection_matrix(vel: VelocityField, grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of ``f -> -div(f C)`` with donor-cell upwind fluxes.

    Each interior face donates from its upwind cell; boundary faces carry
    no flux.  Column sums are exactly zero (the flux leaving one cell
    enters its neighbor), so the operator has zero discrete mass.
    """
    n1, n2 = grid.n1, grid.n2
    N = grid.size
    c1f, c2f = face_velocities(vel, grid)

    rows, cols, vals = [], [], []

    def add_faces(c, left_cells, right_cells, width):
        up = np.where(c >= 0.0, left_cells, right_cells)
        rows.append(left_cells)
        cols.append(up)
        vals.append(-c / width)
        rows.append(right_cells)
        cols.append(up)
        vals.append(c / width)

    j_idx, k_idx = np.meshgrid(np.arange(n2), np.arange(1, n1), indexing="ij")
    c = c1f[j_idx, k_idx].ravel()
    left = (j_idx * n1 + (k_idx - 1)).ravel()
    right = (j_idx * n1 + k_idx).ravel()
    add_faces(c, left, right, grid.dx1)

    l_idx, i_idx = np.meshgrid(np.arange(1, n2), np.arange(n1), indexing="ij")
    c = c2f[l_idx, i_idx].ravel()
    below = ((l_idx - 1) * n1 + i_idx).ravel()
    above = (l_idx * n1 + i_idx).ravel()
    add_faces(c, below, above, grid.dx2)

    if not rows:
        return sp.csr_matrix((N, N))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    return sp.coo_matrix((vals, (rows, cols)), shape=(N, N)).tocsr()


def apply_convection(field: np.ndarray, vel: VelocityField, grid: Grid) -> np.ndarray:
    """Apply ``-div(field * C)`` to a flat field (or a batch of columns)."""
    return build_convection_matrix(vel, grid) @ np.asarray(field, dtype=float)


def cfl_max_dt(vel: VelocityField, grid: Grid) -> float:
    """Largest stable explicit-transport step for the donor-cell update.

    Uses the sum bound ``1 / (max|c1|/dx1 + max|c2|/dx2)`` over the face
    velocities, which guarantees positivity of one explicit substep.
    """
    c1f, c2f = face_velocities(vel, grid)
    rate = np.abs(c1f).max() / grid.dx1 + np.abs(c2f).max() / grid.dx2
    if rate == 0.0:
        return math.inf
    return 1.0 / rate


def _rk4_flow(z, duration: float, vel: VelocityField, sign: float, max_step: float):
    """Integrate ``dz/ds = sign*C(z)`` with the divergence accumulated along.

    Returns the endpoint and ``q = int_0^duration div C(z(s)) ds``.
    Classic fixed-step RK4 on the augmented state; the quadrature shares
    the stage points, so it is 4th-order as well.
    """
    z = np.array(z, dtype=float)
    q = np.zeros(z.shape[:-1])
    if duration == 0.0:
        return z, q
    nsteps = math.ceil(duration / max_step)
    if nsteps > FLOW_STEP_BUDGET:
        raise ResourceLimitError(
            f"characteristic integration needs {nsteps} steps (budget {FLOW_STEP_BUDGET})"
        )
    h = duration / nsteps
    for _ in range(nsteps):
        k1 = sign * vel(z)
        q1 = vel.divergence(z)
        z2 = z + 0.5 * h * k1
        k2 = sign * vel(z2)
        q2 = vel.divergence(z2)
        z3 = z + 0.5 * h * k2
        k3 = sign * vel(z3)
        q3 = vel.divergence(z3)
        z4 = z + h * k3
        k4 = sign * vel(z4)
        q4 = vel.divergence(z4)
        z = z + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        q = q + (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)
    return z, q


def _step_bound(t: float, max_step: float | None) -> float:
    if max_step is not None:
        return float(max_step)
    return FLOW_MAX_STEP * max(1.0, abs(t))


def characteristic_flow(z, t: float, vel: VelocityField, max_step: float | None = None):
    """Position after time ``t`` of the point ``z`` carried by the field.

    Negative ``t`` integrates the reversed field for ``|t|``.
    """
    sign = 1.0 if t >= 0 else -1.0
    out, _ = _rk4_flow(z, abs(t), vel, sign, _step_bound(t, max_step))
    return out


def flow_jacobian_det(z, t: float, vel: VelocityField, max_step: float | None = None):
    """Jacobian determinant of the flow map at ``z`` after time ``t``.

    Equals ``exp(int_0^t div C(flow(s)z) ds)``; for negative ``t`` the
    exponent flips sign and the divergence is sampled along the reversed
    trajectory.
    """
    sign = 1.0 if t >= 0 else -1.0
    _, q = _rk4_flow(z, abs(t), vel, sign, _step_bound(t, max_step))
    out = np.exp(sign * q)
    return float(out) if np.ndim(out) == 0 else out


def pure_convection_oracle(v0, t: float, vel: VelocityField, x, max_step: float | None = None):
    """Exact solution of the pure transport problem, evaluated at ``x``.

    Transports the initial profile along characteristics:
    ``exp(-int_0^t div C(flow(-s)x) ds) * v0(flow(-t)x)``.  ``v0`` must
    be evaluable at arbitrary ``(..., 2)`` points.
    """
    if t < 0:
        raise ConfigurationError("pure transport solution is defined for t >= 0")
    origin, q = _rk4_flow(x, t, vel, -1.0, _step_bound(t, max_step))
    out = np.exp(-q) * np.asarray(v0(origin), dtype=float)
    return float(out) if np.ndim(out) == 0 else out


@dataclass(frozen=True)
class HeatKernelOracle:
    """Free-space diffusion solution used as a reference for the grid scheme."""

    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ConfigurationError(f"diffusion coefficient must be >= 0, got {self.eps}")

    def kernel(self, t: float, x):
        """Fundamental solution ``exp(-|x|^2/(4 eps^2 t)) / (4 pi eps^2 t)``."""
        if t <= 0:
            raise ConfigurationError(f"heat kernel needs t > 0, got {t}")
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        denom = 4.0 * self.eps * self.eps * t
        out = np.exp(-r2 / denom) / (np.pi * denom)
        return float(out) if np.ndim(out) == 0 else out

    def convolve(self, v0, t: float, x, bounds, nodes: int = 201) -> float:
        """Quadrature convolution ``(K(t, .) * v0)(x)`` over a box.

        ``bounds`` must contain essentially all the mass of
        ``K(t, x - .) * v0``; composite Simpson with ``nodes`` per axis.
        """
        if t <= 0:
            raise ConfigurationError(f"heat kernel needs t > 0, got {t}")
        if nodes % 2 == 0:
            nodes += 1
        a1, b1, a2, b2 = bounds
        z1 = np.linspace(a1, b1, nodes)
        z2 = np.linspace(a2, b2, nodes)
        Z1, Z2 = np.meshgrid(z1, z2, indexing="xy")
        pts = np.stack([Z1, Z2], axis=-1)
        x = np.asarray(x, dtype=float)
        from .grid import simpson_2d

        vals = self.kernel(t, x - pts) * np.asarray(v0(pts), dtype=float)
        return simpson_2d(vals, bounds)

    def gaussian_solution(self, t: float, x, sigma0: float, center=(0.0, 0.0), mass: float = 1.0):
        """Closed form for a Gaussian start: the variance grows by ``2 eps^2 t``."""
        if t < 0:
            raise ConfigurationError(f"need t >= 0, got {t}")
        s2 = sigma0 * sigma0 + 2.0 * self.eps * self.eps * t
        x = np.asarray(x, dtype=float) - np.asarray(center, dtype=float)
        r2 = np.sum(x * x, axis=-1)
        out = mass * np.exp(-r2 / (2.0 * s2)) / (2.0 * np.pi * s2)
        return float(out) if np.ndim(out) == 0 else out
