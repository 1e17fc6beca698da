"""Spatial grids and the weighted inner product for bulk-plus-boundary fields.

Temperature states carry two coupled components: the bulk temperature on the
domain interior and the boundary temperature evolving under its own dynamic
equation.  Discretely both live in one vector of node values, and the natural
Hilbert structure is a weighted inner product

    <u, v> = sum_i w_i u_i v_i,

where the weight of a node splits into a bulk quadrature part (approximating
the integral over the domain) and a boundary measure part (the point masses
at the interval ends, or the arc length elements on the circle).

Two geometries are supported:

* ``Grid1D`` - the interval (0, ell) with nodes x_j = j*dx.  Bulk weights are
  dx at interior nodes; each endpoint carries boundary weight exactly 1.
  This pairing makes the assembled generator exactly self-adjoint in the
  discrete inner product, which the spectral and gradient machinery relies
  on.  (Assigning an extra dx/2 trapezoid term to the endpoints would break
  that exactness by an O(1) amount in the operator pairing.)
* ``PolarGrid`` - the unit disk in polar coordinates with a single unknown at
  r = 0, interior rings at r_j = j*dr, and the unit circle as boundary.
  Bulk weights realize the r dr dtheta area element (trapezoid in r, the
  periodic rectangle rule in theta); the origin gets the area pi*(dr/2)^2 of
  its half-cell; circle nodes carry the trace half-cell dtheta*dr/2 plus the
  arc element dtheta.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "Grid1D",
    "PolarGrid",
    "StateField",
    "InnerProductWeights",
    "build_grid_1d",
    "build_polar_grid",
    "field_from_function",
    "inner_product",
    "norm",
]


@dataclass(frozen=True)
class InnerProductWeights:
    """Per-node weights defining the discrete bulk x boundary inner product.

    ``total = bulk + boundary`` holds entrywise: ``bulk`` approximates the
    L2 integral over the domain interior and ``boundary`` the measure on the
    boundary (point masses in 1-D, arc elements on the circle).
    """

    bulk: np.ndarray
    boundary: np.ndarray
    total: np.ndarray = field(init=False)

    def __post_init__(self):
        total = self.bulk + self.boundary
        if np.any(total <= 0.0):
            raise ConfigurationError("inner product weights must be positive")
        for arr in (self.bulk, self.boundary, total):
            arr.setflags(write=False)
        object.__setattr__(self, "total", total)


class Grid1D:
    """Uniform grid on the interval (0, ell) with dynamic endpoints.

    Nodes are x_j = j*dx for j = 0..nx.  Nodes 0 and nx are the boundary
    (dynamic) degrees of freedom; nodes 1..nx-1 are bulk.
    """

    def __init__(self, ell: float, nx: int):
        if ell <= 0.0:
            raise ConfigurationError(f"interval length must be positive, got {ell}")
        if nx < 2:
            raise ConfigurationError(f"need at least 2 intervals, got nx={nx}")
        self.ell = float(ell)
        self.nx = int(nx)
        self.dx = self.ell / self.nx
        self.nodes = np.linspace(0.0, self.ell, self.nx + 1)
        self.nodes.setflags(write=False)
        self.n_dofs = self.nx + 1
        self.bulk_indices = np.arange(1, self.nx)
        self.boundary_indices = np.array([0, self.nx])
        self.bulk_indices.setflags(write=False)
        self.boundary_indices.setflags(write=False)

        bulk = np.full(self.n_dofs, self.dx)
        bulk[0] = 0.0
        bulk[-1] = 0.0
        boundary = np.zeros(self.n_dofs)
        boundary[0] = 1.0
        boundary[-1] = 1.0
        self.weights = InnerProductWeights(bulk=bulk, boundary=boundary)

    @property
    def n_bulk(self) -> int:
        return self.nx - 1

    @property
    def n_boundary(self) -> int:
        return 2

    def __repr__(self):
        return f"Grid1D(ell={self.ell}, nx={self.nx})"


class PolarGrid:
    """Uniform polar grid on the unit disk with a dynamic circle boundary.

    Degrees of freedom are ordered: origin, then rings j = 1..nr-1 (each with
    ntheta nodes, theta periodic), then the circle r = 1 (ntheta nodes).  The
    origin is a single unknown shared by all angles.
    """

    def __init__(self, nr: int, ntheta: int):
        if nr < 2:
            raise ConfigurationError(f"need at least 2 radial intervals, got nr={nr}")
        if ntheta < 3:
            raise ConfigurationError(f"need at least 3 angular nodes, got ntheta={ntheta}")
        self.nr = int(nr)
        self.ntheta = int(ntheta)
        self.dr = 1.0 / self.nr
        self.dtheta = 2.0 * np.pi / self.ntheta
        self.n_bulk = 1 + (self.nr - 1) * self.ntheta
        self.n_boundary = self.ntheta
        self.n_dofs = self.n_bulk + self.n_boundary

        radii = np.zeros(self.n_dofs)
        angles = np.zeros(self.n_dofs)
        for j in range(1, self.nr + 1):
            base = self.index(j, 0)
            radii[base:base + self.ntheta] = j * self.dr
            angles[base:base + self.ntheta] = np.arange(self.ntheta) * self.dtheta
        self.radii = radii
        self.angles = angles
        self.radii.setflags(write=False)
        self.angles.setflags(write=False)
        self.bulk_indices = np.arange(self.n_bulk)
        self.boundary_indices = np.arange(self.n_bulk, self.n_dofs)
        self.bulk_indices.setflags(write=False)
        self.boundary_indices.setflags(write=False)

        bulk = np.zeros(self.n_dofs)
        bulk[0] = np.pi * (self.dr / 2.0) ** 2
        for j in range(1, self.nr):
            base = self.index(j, 0)
            bulk[base:base + self.ntheta] = (j * self.dr) * self.dr * self.dtheta
        # trace half-cell of the r-trapezoid at r = 1
        bulk[self.n_bulk:] = self.dtheta * self.dr / 2.0
        boundary = np.zeros(self.n_dofs)
        boundary[self.n_bulk:] = self.dtheta
        self.weights = InnerProductWeights(bulk=bulk, boundary=boundary)

    def index(self, j: int, n: int) -> int:
        """Flat index of node (r_j, theta_n); theta wraps periodically."""
        if j == 0:
            return 0
        n = n % self.ntheta
        if j < self.nr:
            return 1 + (j - 1) * self.ntheta + n
        return self.n_bulk + n

    def __repr__(self):
        return f"PolarGrid(nr={self.nr}, ntheta={self.ntheta})"


def build_grid_1d(ell: float, nx: int) -> Grid1D:
    """Uniform interval grid with nx+1 nodes and dynamic endpoints."""
    return Grid1D(ell, nx)


def build_polar_grid(nr: int, ntheta: int) -> PolarGrid:
    """Uniform polar disk grid with one origin unknown and a dynamic circle."""
    return PolarGrid(nr, ntheta)


class StateField:
    """A bulk-plus-boundary temperature sampled on a grid.

    One value is stored per degree of freedom, so the trace constraint (the
    boundary component equals the field at boundary nodes) holds by
    construction: there is a single storage location per boundary node.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n_dofs,):
            raise ConfigurationError(
                f"field has {values.shape} values, grid has {grid.n_dofs} dofs"
            )
        self.grid = grid
        self.values = values

    @classmethod
    def zeros(cls, grid) -> "StateField":
        return cls(grid, np.zeros(grid.n_dofs))

    def copy(self) -> "StateField":
        return StateField(self.grid, self.values.copy())

    @property
    def bulk(self) -> np.ndarray:
        """Values at bulk nodes (a copy in 1-D where they are non-contiguous)."""
        return self.values[self.grid.bulk_indices]

    @property
    def boundary(self) -> np.ndarray:
        """Values at boundary nodes."""
        return self.values[self.grid.boundary_indices]

    def with_zero_boundary(self) -> "StateField":
        """Copy with boundary components set to zero, bulk unchanged."""
        out = self.values.copy()
        out[self.grid.boundary_indices] = 0.0
        return StateField(self.grid, out)

    def __add__(self, other):
        self._check_compatible(other)
        return StateField(self.grid, self.values + other.values)

    def __sub__(self, other):
        self._check_compatible(other)
        return StateField(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return StateField(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self):
        return StateField(self.grid, -self.values)

    def _check_compatible(self, other):
        if not isinstance(other, StateField) or other.grid.n_dofs != self.grid.n_dofs:
            raise ConfigurationError("fields live on incompatible grids")

    def __repr__(self):
        return f"StateField({self.grid!r}, n_dofs={self.grid.n_dofs})"


def field_from_function(grid, fn) -> StateField:
    """Sample a closed-form initial temperature at the grid nodes.

    For ``Grid1D`` the callable receives the node coordinates x; for
    ``PolarGrid`` it receives (r, theta) arrays.  Boundary values are the
    trace of the sampled function.
    """
    if isinstance(grid, Grid1D):
        values = np.asarray(fn(grid.nodes), dtype=float)
    elif isinstance(grid, PolarGrid):
        values = np.asarray(fn(grid.radii, grid.angles), dtype=float)
    else:
        raise ConfigurationError(f"unsupported grid type {type(grid).__name__}")
    return StateField(grid, values)


def _resolve_weights(u: StateField, weights) -> np.ndarray:
    if weights is None:
        return u.grid.weights.total
    if isinstance(weights, InnerProductWeights):
        return weights.total
    return np.asarray(weights, dtype=float)


def inner_product(u: StateField, v: StateField, weights=None) -> float:
    """Weighted inner product sum_i w_i u_i v_i of two fields on one grid.

    The pointwise product is formed before weighting, so the result is
    bitwise symmetric in (u, v).
    """
    if u.values.shape != v.values.shape:
        raise ConfigurationError("inner product of fields with mismatched sizes")
    w = _resolve_weights(u, weights)
    if w.shape != u.values.shape:
        raise ConfigurationError("weights do not match the field size")
    return float(np.sum(w * (u.values * v.values)))


def norm(u: StateField, weights=None) -> float:
    """Weighted norm sqrt(<u, u>); zero exactly when u is zero."""
    return float(np.sqrt(inner_product(u, u, weights)))
