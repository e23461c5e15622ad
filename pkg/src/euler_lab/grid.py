"""Uniform Cartesian grids, sampled fields, and finite-difference operators.

Conventions used throughout the package:

* node ``(i, j)`` sits at ``(x0 + i*h, y0 + j*h)``;
* field values are stored as ``(ny, nx)`` arrays indexed ``[j, i]`` so that
  flattening in C order matches the row-major layout of the field files;
* central differences everywhere; derived fields carry a ``valid`` mask that
  is False on the one-node boundary ring of the rectangle (the ring holds a
  zero placeholder, never a one-sided stencil value) and reductions must
  restrict to valid nodes.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage


@dataclass(frozen=True)
class Grid2:
    x0: float
    y0: float
    h: float
    nx: int
    ny: int

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def n_nodes(self):
        return self.nx * self.ny

    def x_coords(self):
        return self.x0 + self.h * np.arange(self.nx)

    def y_coords(self):
        return self.y0 + self.h * np.arange(self.ny)

    def meshgrid(self):
        """Node coordinates as two (ny, nx) arrays."""
        return np.meshgrid(self.x_coords(), self.y_coords(), indexing="xy")

    @property
    def x_max(self):
        return self.x0 + self.h * (self.nx - 1)

    @property
    def y_max(self):
        return self.y0 + self.h * (self.ny - 1)

    def contains(self, points):
        pts = np.asarray(points, dtype=float)
        x, y = pts[..., 0], pts[..., 1]
        return (
            (x >= self.x0) & (x <= self.x_max) & (y >= self.y0) & (y <= self.y_max)
        )

    def index_coords(self, points):
        """Map physical points to fractional (row, col) index coordinates."""
        pts = np.asarray(points, dtype=float)
        col = (pts[..., 0] - self.x0) / self.h
        row = (pts[..., 1] - self.y0) / self.h
        return row, col


def make_grid(x0, y0, h, nx, ny):
    """Build a grid, rejecting degenerate spacings and node counts."""
    if not np.isfinite([x0, y0, h]).all():
        raise ValueError("grid origin and spacing must be finite")
    if h <= 0:
        raise ValueError(f"grid spacing must be positive, got h={h}")
    if nx < 3 or ny < 3:
        raise ValueError(f"need at least 3 nodes per axis, got nx={nx}, ny={ny}")
    return Grid2(float(x0), float(y0), float(h), int(nx), int(ny))


def _as_values(grid, values, name):
    arr = np.asarray(values, dtype=float)
    if arr.shape != grid.shape:
        raise ValueError(f"{name} has shape {arr.shape}, expected {grid.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


@dataclass
class ScalarField:
    """Scalar samples on a grid; ``valid`` is None (all nodes) or a bool mask."""

    grid: Grid2
    values: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.values = _as_values(self.grid, self.values, "scalar field")

    def valid_mask(self):
        if self.valid is None:
            return np.ones(self.grid.shape, dtype=bool)
        return self.valid

    def sample(self, points):
        """Bilinear interpolation at physical points (array of shape (..., 2))."""
        row, col = self.grid.index_coords(points)
        return ndimage.map_coordinates(
            self.values, [np.ravel(row), np.ravel(col)], order=1, mode="nearest"
        ).reshape(np.shape(row))

    def oscillation(self, where=None):
        vals = self.values[where] if where is not None else self.values
        return float(vals.max() - vals.min()) if vals.size else 0.0


@dataclass
class VectorField2:
    grid: Grid2
    ux: np.ndarray
    uy: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        self.ux = _as_values(self.grid, self.ux, "x-component")
        self.uy = _as_values(self.grid, self.uy, "y-component")

    def magnitude(self):
        return ScalarField(self.grid, np.hypot(self.ux, self.uy), self.valid)

    def valid_mask(self):
        if self.valid is None:
            return np.ones(self.grid.shape, dtype=bool)
        return self.valid

    def sample(self, points):
        row, col = self.grid.index_coords(points)
        coords = [np.ravel(row), np.ravel(col)]
        sux = ndimage.map_coordinates(self.ux, coords, order=1, mode="nearest")
        suy = ndimage.map_coordinates(self.uy, coords, order=1, mode="nearest")
        out = np.stack([sux, suy], axis=-1)
        return out.reshape(np.shape(row) + (2,))

    def max_norm(self):
        return float(np.hypot(self.ux, self.uy).max())


def scalar_from_function(grid, fn):
    x, y = grid.meshgrid()
    return ScalarField(grid, fn(x, y))


def vector_from_function(grid, fn):
    x, y = grid.meshgrid()
    ux, uy = fn(x, y)
    return VectorField2(grid, np.broadcast_to(ux, grid.shape).copy(),
                        np.broadcast_to(uy, grid.shape).copy())


def _ring_mask(shape):
    valid = np.ones(shape, dtype=bool)
    valid[0, :] = valid[-1, :] = False
    valid[:, 0] = valid[:, -1] = False
    return valid


def _shrink_valid(prev, shape):
    valid = _ring_mask(shape)
    if prev is not None:
        # one extra ring: stencil arms must land on previously valid nodes
        eroded = prev.copy()
        eroded[1:-1, 1:-1] &= (
            prev[:-2, 1:-1] & prev[2:, 1:-1] & prev[1:-1, :-2] & prev[1:-1, 2:]
        )
        valid &= eroded
    return valid


def laplacian(f: ScalarField) -> ScalarField:
    """5-point Laplacian; the boundary ring holds 0 and is flagged invalid."""
    v = f.values
    h2 = f.grid.h ** 2
    out = np.zeros_like(v)
    out[1:-1, 1:-1] = (
        v[1:-1, 2:] + v[1:-1, :-2] + v[2:, 1:-1] + v[:-2, 1:-1] - 4.0 * v[1:-1, 1:-1]
    ) / h2
    return ScalarField(f.grid, out, _shrink_valid(f.valid, v.shape))


def gradient(f: ScalarField) -> VectorField2:
    """Central-difference gradient (d1 f, d2 f)."""
    v = f.values
    two_h = 2.0 * f.grid.h
    gx = np.zeros_like(v)
    gy = np.zeros_like(v)
    gx[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / two_h
    gy[1:-1, :] = (v[2:, :] - v[:-2, :]) / two_h
    return VectorField2(f.grid, gx, gy, _shrink_valid(f.valid, v.shape))


def perp_gradient(f: ScalarField) -> VectorField2:
    """Central differences of (-d2 f, d1 f), the velocity of a stream function."""
    g = gradient(f)
    return VectorField2(f.grid, -g.uy, g.ux, g.valid)


def divergence(u: VectorField2) -> ScalarField:
    two_h = 2.0 * u.grid.h
    out = np.zeros(u.grid.shape)
    out[1:-1, 1:-1] = (
        (u.ux[1:-1, 2:] - u.ux[1:-1, :-2]) + (u.uy[2:, 1:-1] - u.uy[:-2, 1:-1])
    ) / two_h
    return ScalarField(u.grid, out, _shrink_valid(u.valid, out.shape))


def curl(u: VectorField2) -> ScalarField:
    """Scalar curl d1 u2 - d2 u1 by central differences."""
    two_h = 2.0 * u.grid.h
    out = np.zeros(u.grid.shape)
    out[1:-1, 1:-1] = (
        (u.uy[1:-1, 2:] - u.uy[1:-1, :-2]) - (u.ux[2:, 1:-1] - u.ux[:-2, 1:-1])
    ) / two_h
    return ScalarField(u.grid, out, _shrink_valid(u.valid, out.shape))


def advect(u: VectorField2) -> VectorField2:
    """(u . grad) u by central differences, used for the momentum residual."""
    gx1 = gradient(ScalarField(u.grid, u.ux, u.valid))
    gx2 = gradient(ScalarField(u.grid, u.uy, u.valid))
    ax = u.ux * gx1.ux + u.uy * gx1.uy
    ay = u.ux * gx2.ux + u.uy * gx2.uy
    return VectorField2(u.grid, ax, ay, gx1.valid)
