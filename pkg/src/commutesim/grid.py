"""Cell-centered rectangular grids, Gaussian home kernels, and quadrature.

Two quadrature rules coexist on purpose.  The Euler rule ``dx1*dx2*sum``
is the mass functional used inside the dynamics: it is exact for
constants on the cell-centered grid, which is what makes the discrete
bookkeeping of people conservative.  The composite Simpson rule is used
only offline, for diagnostics and for the kernel normalization constant;
it must never be used inside the time loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, SingularNormalizationError

# Normalization constants below this are treated as a degenerate kernel.
SINGULAR_NORMALIZATION = 1e-12


@dataclass(frozen=True, eq=False)
class Grid:
    """Uniform cell-centered discretization of ``(a1,b1) x (a2,b2)``.

    Cell centers are ``x1[i] = a1 + (i + 1/2)*dx1`` (0-based ``i``), so
    every node lies strictly inside the domain.  Flat fields use the
    linear ordering ``m = j*n1 + i`` (0-based), i.e. x1 varies fastest,
    matching :func:`linear_index` in its 1-based form.
    """

    a1: float
    b1: float
    a2: float
    b2: float
    n1: int
    n2: int
    dx1: float
    dx2: float
    x1: np.ndarray
    x2: np.ndarray

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        return (self.a1, self.b1, self.a2, self.b2)

    @property
    def cell_area(self) -> float:
        return self.dx1 * self.dx2

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Center coordinates as ``(n2, n1)`` arrays (rows follow x2)."""
        return np.meshgrid(self.x1, self.x2, indexing="xy")

    def cell_centers(self) -> np.ndarray:
        """All cell centers as an ``(n1*n2, 2)`` array in linear order."""
        X1, X2 = self.meshgrid()
        return np.column_stack([X1.ravel(), X2.ravel()])

    def reshape(self, flat: np.ndarray) -> np.ndarray:
        """View a flat field as an ``(n2, n1)`` array."""
        return np.asarray(flat).reshape(self.n2, self.n1)

    def contains(self, point, strict: bool = False) -> bool:
        y1, y2 = float(point[0]), float(point[1])
        if strict:
            return self.a1 < y1 < self.b1 and self.a2 < y2 < self.b2
        return self.a1 <= y1 <= self.b1 and self.a2 <= y2 <= self.b2


def build_grid(bounds, n1: int, n2: int) -> Grid:
    """Build a cell-centered grid from ``(a1, b1, a2, b2)`` and cell counts."""
    a1, b1, a2, b2 = (float(v) for v in bounds)
    if not (b1 > a1 and b2 > a2):
        raise ConfigurationError(f"degenerate domain bounds {bounds!r}")
    n1, n2 = int(n1), int(n2)
    if n1 < 2 or n2 < 2:
        raise ConfigurationError(f"need at least 2 cells per axis, got {n1}x{n2}")
    dx1 = (b1 - a1) / n1
    dx2 = (b2 - a2) / n2
    x1 = a1 + (np.arange(n1) + 0.5) * dx1
    x2 = a2 + (np.arange(n2) + 0.5) * dx2
    return Grid(a1, b1, a2, b2, n1, n2, dx1, dx2, x1, x2)


def linear_index(i: int, j: int, n1: int) -> int:
    """1-based linear index ``m1 = (j - 1)*n1 + i`` of cell ``(i, j)``."""
    if not (1 <= i <= n1) or j < 1:
        raise ConfigurationError(f"cell index ({i}, {j}) out of range for n1={n1}")
    return (j - 1) * n1 + i


def invert_index(m1: int, n1: int) -> tuple[int, int]:
    """Invert :func:`linear_index`: recover 1-based ``(i, j)`` from ``m1``."""
    if m1 < 1:
        raise ConfigurationError(f"linear index {m1} out of range")
    i = m1 % n1
    if i == 0:
        i = n1
    j = (m1 - i) // n1 + 1
    return i, j


@dataclass(frozen=True)
class KernelSpec:
    """Isotropic Gaussian footprint of a home, with standard deviation sigma."""

    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigurationError(f"kernel sigma must be positive, got {self.sigma}")


def gaussian_kernel(x, y, spec: KernelSpec):
    """Evaluate the unit-mass Gaussian density at ``x`` centered at ``y``.

    ``x`` and ``y`` are points or arrays of points with trailing axis 2;
    standard broadcasting applies.  Returns ``exp(-|x-y|^2 / (2 sigma^2))
    / (2 pi sigma^2)``.
    """
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r2 = np.sum(d * d, axis=-1)
    s2 = spec.sigma * spec.sigma
    out = np.exp(-r2 / (2.0 * s2)) / (2.0 * np.pi * s2)
    return float(out) if np.ndim(out) == 0 else out


def _simpson_axis_weights(nodes: int, h: float) -> np.ndarray:
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def simpson_lattice(bounds, nodes1: int, nodes2: int) -> tuple[np.ndarray, np.ndarray]:
    """Endpoint-inclusive tensor lattice used by :func:`simpson_2d`."""
    a1, b1, a2, b2 = bounds
    return np.linspace(a1, b1, nodes1), np.linspace(a2, b2, nodes2)


def simpson_2d(values: np.ndarray, bounds) -> float:
    """Composite tensor-product Simpson integral over a rectangle.

    ``values`` has shape ``(nodes2, nodes1)`` with both node counts odd,
    sampled on the endpoint-inclusive lattice of :func:`simpson_lattice`.
    Diagnostics only: feeding this rule into the time loop destabilizes
    the mass bookkeeping, which is built on the Euler rule.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ConfigurationError("simpson_2d expects a 2-D array of node samples")
    nodes2, nodes1 = values.shape
    if nodes1 < 3 or nodes2 < 3 or nodes1 % 2 == 0 or nodes2 % 2 == 0:
        raise ConfigurationError(
            f"simpson_2d needs odd node counts >= 3 per axis, got {nodes1}x{nodes2}"
        )
    a1, b1, a2, b2 = bounds
    w1 = _simpson_axis_weights(nodes1, (b1 - a1) / (nodes1 - 1))
    w2 = _simpson_axis_weights(nodes2, (b2 - a2) / (nodes2 - 1))
    return float(w2 @ values @ w1)


def _normalization_nodes(extent: float, sigma: float) -> int:
    # h <= sigma/10 resolves the kernel to ~1e-7 relative; cap the cost.
    intervals = max(50, math.ceil(extent / (sigma / 10.0)))
    intervals = min(intervals, 2000)
    if intervals % 2:
        intervals += 1
    return intervals + 1


def kernel_normalization(y, grid: Grid, spec: KernelSpec) -> float:
    """Mass of the Gaussian centered at ``y`` restricted to the domain.

    Computed with the 2-D composite Simpson rule on a lattice fine enough
    to resolve the kernel (step <= sigma/10).  ``y`` must lie in the
    closed domain.
    """
    if not grid.contains(y):
        raise ConfigurationError(f"kernel center {tuple(y)!r} outside the domain")
    nodes1 = _normalization_nodes(grid.b1 - grid.a1, spec.sigma)
    nodes2 = _normalization_nodes(grid.b2 - grid.a2, spec.sigma)
    z1, z2 = simpson_lattice(grid.bounds, nodes1, nodes2)
    Z1, Z2 = np.meshgrid(z1, z2, indexing="xy")
    pts = np.stack([Z1, Z2], axis=-1)
    vals = gaussian_kernel(pts, np.asarray(y, dtype=float), spec)
    return simpson_2d(vals, grid.bounds)


def normalized_kernel(x, y, grid: Grid, spec: KernelSpec):
    """Gaussian kernel restricted to the domain, renormalized to unit mass.

    Division by the in-domain mass makes the restricted kernel integrate
    to one over the domain for every center ``y``.
    """
    G = kernel_normalization(y, grid, spec)
    if G < SINGULAR_NORMALIZATION:
        raise SingularNormalizationError(
            f"kernel normalization {G:.3e} at {tuple(y)!r} below {SINGULAR_NORMALIZATION:.0e}"
        )
    return gaussian_kernel(x, y, spec) / G


def home_source_profile(y, grid: Grid, spec: KernelSpec) -> np.ndarray:
    """Discrete source column for a home: normalized kernel at cell centers.

    The samples are rescaled so their Euler sum is exactly one; the
    source term then injects exactly the departing mass each step, which
    keeps the per-home totals constant to rounding.
    """
    vals = normalized_kernel(grid.cell_centers(), np.asarray(y, dtype=float), grid, spec)
    vals = np.asarray(vals, dtype=float)
    mass = euler_sum(vals, grid)
    if mass < SINGULAR_NORMALIZATION:
        raise SingularNormalizationError(f"discrete kernel mass {mass:.3e} at {tuple(y)!r}")
    return vals / mass


def euler_sum(field: np.ndarray, grid: Grid, axis=None) -> float | np.ndarray:
    """Euler quadrature ``dx1*dx2*sum(field)``, the in-loop mass functional.

    With ``axis`` given, sums only over the field axis (used for batched
    per-home fields).  Exact for constants by cell-centering.
    """
    s = np.sum(np.asarray(field, dtype=float), axis=axis)
    out = grid.cell_area * s
    return float(out) if np.ndim(out) == 0 else out
