"""Structured right-triangle meshes on the square [0, pi] x [0, pi].

Nodes are ordered row-major with y outer and x inner: node (ix, iy) has
flat index ``iy * nx + ix``.  Every grid cell is split into two right
triangles along its (+1, +1) diagonal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DOMAIN_SIDE = np.pi


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Structured P1 triangulation of [0, pi]^2."""

    nx: int
    ny: int
    xs: np.ndarray
    ys: np.ndarray
    coords: np.ndarray      # (nx*ny, 2) node coordinates
    triangles: np.ndarray   # (2*(nx-1)*(ny-1), 3) CCW node indices
    boundary: np.ndarray    # bool mask over nodes
    interior: np.ndarray    # indices of interior nodes

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def hx(self) -> float:
        return DOMAIN_SIDE / (self.nx - 1)

    @property
    def hy(self) -> float:
        return DOMAIN_SIDE / (self.ny - 1)

    @property
    def h(self) -> float:
        """Mesh spacing along x (equals hy on square grids)."""
        return self.hx

    def node_index(self, ix, iy):
        return iy * self.nx + ix


def build_grid(nx: int, ny: int) -> Grid2D:
    """Build the structured triangulation with nx*ny nodes.

    Parameters
    ----------
    nx, ny : int
        Node counts per axis; both must be >= 3 so at least one
        interior node exists.
    """
    if nx < 3 or ny < 3:
        raise ValueError(f"need nx, ny >= 3 for an interior node, got ({nx}, {ny})")
    xs = np.linspace(0.0, DOMAIN_SIDE, nx)
    ys = np.linspace(0.0, DOMAIN_SIDE, ny)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    coords = np.column_stack([X.ravel(), Y.ravel()])

    cix, ciy = np.meshgrid(np.arange(nx - 1), np.arange(ny - 1), indexing="xy")
    n00 = (ciy * nx + cix).ravel()
    n10 = n00 + 1
    n01 = n00 + nx
    n11 = n01 + 1
    # lower triangle (below the cell diagonal) then upper triangle, both CCW
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.vstack([lower, upper])

    ix = np.tile(np.arange(nx), ny)
    iy = np.repeat(np.arange(ny), nx)
    boundary = (ix == 0) | (ix == nx - 1) | (iy == 0) | (iy == ny - 1)
    interior = np.flatnonzero(~boundary)

    return Grid2D(nx=nx, ny=ny, xs=xs, ys=ys, coords=coords,
                  triangles=triangles, boundary=boundary, interior=interior)


def evaluate_at_points(grid: Grid2D, values: np.ndarray, points) -> np.ndarray:
    """P1-interpolate a nodal field at arbitrary points of the closed domain.

    Points that coincide with grid nodes return the nodal value exactly
    (bit for bit).  Points outside [0, pi]^2 are rejected.
    """
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ValueError("field length does not match node count")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array of coordinates")
    x, y = pts[:, 0], pts[:, 1]

    tol = 1e-12 * DOMAIN_SIDE
    if np.any(x < -tol) or np.any(x > DOMAIN_SIDE + tol) or \
            np.any(y < -tol) or np.any(y > DOMAIN_SIDE + tol):
        bad = pts[(x < -tol) | (x > DOMAIN_SIDE + tol) |
                  (y < -tol) | (y > DOMAIN_SIDE + tol)][0]
        raise ValueError(f"point {tuple(bad)} lies outside the closed domain")
    x = np.clip(x, 0.0, DOMAIN_SIDE)
    y = np.clip(y, 0.0, DOMAIN_SIDE)

    nx, hx, hy = grid.nx, grid.hx, grid.hy

    # nearest-node detection for the exact-reproduction contract
    jx = np.clip(np.rint(x / hx).astype(int), 0, grid.nx - 1)
    jy = np.clip(np.rint(y / hy).astype(int), 0, grid.ny - 1)
    on_node = (x == grid.xs[jx]) & (y == grid.ys[jy])

    cx = np.minimum((x / hx).astype(int), grid.nx - 2)
    cy = np.minimum((y / hy).astype(int), grid.ny - 2)
    xi = x / hx - cx
    eta = y / hy - cy

    base = cy * nx + cx
    u00 = values[base]
    u10 = values[base + 1]
    u01 = values[base + nx]
    u11 = values[base + nx + 1]

    # lower triangle covers xi >= eta, upper the complement; they agree on
    # the shared diagonal
    v_lower = u00 * (1.0 - xi) + u10 * (xi - eta) + u11 * eta
    v_upper = u00 * (1.0 - eta) + u01 * (eta - xi) + u11 * xi
    out = np.where(xi >= eta, v_lower, v_upper)
    out = np.where(on_node, values[jy * nx + jx], out)
    return out
