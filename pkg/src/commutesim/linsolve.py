"""Linear solves for the implicit diffusion step and the steady state.

Both systems are built from the Neumann Laplacian (and, for the steady
state, the upwind transport matrix).  The matrices are constant across a
run, so they are factorized once and the factorization reused; every
returned solution is re-checked against a relative residual of 1e-10,
with an iterative fallback before giving up.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, NumericalError
from .grid import Grid
from .operators import VelocityField, build_convection_matrix

RESIDUAL_TOL = 1e-10


def _check_residual(matrix, x, rhs, label: str):
    r = matrix @ x - rhs
    scale = max(float(np.max(np.abs(rhs))), 1e-300)
    rel = float(np.max(np.abs(r))) / scale
    if rel > RESIDUAL_TOL:
        raise NumericalError(f"{label}: relative residual {rel:.3e} exceeds {RESIDUAL_TOL:.0e}")


def _iterative_fallback(matrix, rhs, symmetric: bool):
    cap = 10 * matrix.shape[0]
    method = spla.cg if symmetric else spla.bicgstab
    cols = rhs if rhs.ndim == 2 else rhs[:, None]
    out = np.empty_like(cols)
    for k in range(cols.shape[1]):
        x, info = method(matrix, cols[:, k], rtol=1e-12, atol=0.0, maxiter=cap)
        if info != 0:
            raise NumericalError(f"iterative solve failed (info={info}) after cap {cap}")
        out[:, k] = x
    return out if rhs.ndim == 2 else out[:, 0]


class ImplicitDiffusionSolver:
    """Factorization of ``I - dt*eps^2*A`` reused across time steps.

    ``solve`` accepts a flat field or an ``(N, H)`` batch of per-home
    columns; columns are solved independently, so batched and one-by-one
    solves agree bitwise.
    """

    def __init__(self, laplacian: sp.spmatrix, dt: float, eps: float):
        if dt <= 0:
            raise ConfigurationError(f"time step must be positive, got {dt}")
        if eps < 0:
            raise ConfigurationError(f"diffusion coefficient must be >= 0, got {eps}")
        self.dt = float(dt)
        self.eps = float(eps)
        coeff = self.dt * self.eps * self.eps
        n = laplacian.shape[0]
        if coeff == 0.0:
            self.matrix = None
            self._lu = None
        else:
            self.matrix = (sp.identity(n, format="csc") - coeff * laplacian).tocsc()
            self._lu = spla.splu(self.matrix)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=float)
        if not np.all(np.isfinite(rhs)):
            raise NumericalError("implicit diffusion right-hand side is not finite")
        if self._lu is None:
            return rhs.copy()
        x = self._lu.solve(rhs)
        try:
            _check_residual(self.matrix, x, rhs, "implicit diffusion")
        except NumericalError:
            x = _iterative_fallback(self.matrix, rhs, symmetric=True)
            _check_residual(self.matrix, x, rhs, "implicit diffusion (fallback)")
        return x


def solve_implicit_diffusion(laplacian: sp.spmatrix, dt: float, eps: float, rhs: np.ndarray) -> np.ndarray:
    """One-shot solve of ``(I - dt*eps^2*A) v = rhs``."""
    return ImplicitDiffusionSolver(laplacian, dt, eps).solve(rhs)


def resolvent_matrix(alpha: float, laplacian: sp.spmatrix, vel: VelocityField | None,
                     eps: float, grid: Grid) -> sp.csc_matrix:
    """System matrix ``alpha*I - eps^2*A + div( . C)`` with upwind transport."""
    if alpha <= 0:
        raise ConfigurationError(f"removal rate alpha must be positive, got {alpha}")
    n = laplacian.shape[0]
    M = sp.identity(n, format="csc") * alpha - (eps * eps) * laplacian
    if vel is not None and not vel.is_zero:
        M = M - build_convection_matrix(vel, grid)
    return M.tocsc()


def solve_resolvent(alpha: float, laplacian: sp.spmatrix, vel: VelocityField | None,
                    source: np.ndarray, eps: float, grid: Grid) -> np.ndarray:
    """Steady traveler field: solve ``(alpha*I - eps^2*A + div(. C)) v = source``.

    The transport term uses the same donor-cell stencil as the dynamics,
    so the time-marched steady state and this direct solve agree to
    solver tolerance.  Accepts a flat source or an ``(N, H)`` batch.
    """
    source = np.asarray(source, dtype=float)
    M = resolvent_matrix(alpha, laplacian, vel, eps, grid)
    symmetric = vel is None or vel.is_zero
    try:
        x = spla.splu(M).solve(source)
    except RuntimeError:
        x = _iterative_fallback(M, source, symmetric=symmetric)
    try:
        _check_residual(M, x, source, "resolvent")
    except NumericalError:
        x = _iterative_fallback(M, source, symmetric=symmetric)
        _check_residual(M, x, source, "resolvent (fallback)")
    return x
