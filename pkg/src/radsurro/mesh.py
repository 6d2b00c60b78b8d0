"""2-D rectangular furnace geometry: Cartesian cells, counter-clockwise
boundary point enumeration and exact grid ray traversal (Amanatides-Woo).

Boundary points sit at wall-face cell centers.  Index 0 is the south-wall
point nearest x=0 and indices increase counter-clockwise: south (x up),
east (y up), north (x down), west (y down).  Cells are indexed
iy * nx + ix with cell (0, 0) at the origin corner.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

WALLS = ("south", "east", "north", "west")


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class FurnaceMesh:
    nx: int
    ny: int
    Lx: float
    Ly: float

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise GeometryError(f"cell counts must be >= 1, got {self.nx}x{self.ny}")
        if self.Lx <= 0 or self.Ly <= 0:
            raise GeometryError(f"side lengths must be positive, got {self.Lx}x{self.Ly}")

    @property
    def dx(self) -> float:
        return self.Lx / self.nx

    @property
    def dy(self) -> float:
        return self.Ly / self.ny

    @property
    def n_cells(self) -> int:
        return self.nx * self.ny

    @property
    def n_boundary(self) -> int:
        return 2 * (self.nx + self.ny)

    def cell_index(self, ix: int, iy: int) -> int:
        return iy * self.nx + ix


@dataclass(frozen=True)
class BoundaryPoint:
    index: int
    wall: str
    position: tuple[float, float]
    normal: tuple[float, float]


@dataclass(frozen=True)
class RayPath:
    origin_index: int
    direction: tuple[float, float]
    segments: tuple[tuple[int, float], ...]  # (cell index, length m)
    terminal_index: int

    @property
    def length(self) -> float:
        return sum(s for _, s in self.segments)


def wall_ranges(mesh: FurnaceMesh) -> dict[str, range]:
    """Boundary index range per wall, in counter-clockwise order."""
    nx, ny = mesh.nx, mesh.ny
    return {
        "south": range(0, nx),
        "east": range(nx, nx + ny),
        "north": range(nx + ny, 2 * nx + ny),
        "west": range(2 * nx + ny, 2 * (nx + ny)),
    }


def boundary_points(mesh: FurnaceMesh) -> list[BoundaryPoint]:
    nx, ny, dx, dy = mesh.nx, mesh.ny, mesh.dx, mesh.dy
    pts = []
    for j in range(nx):  # south, x increasing
        pts.append(BoundaryPoint(len(pts), "south", ((j + 0.5) * dx, 0.0), (0.0, 1.0)))
    for j in range(ny):  # east, y increasing
        pts.append(BoundaryPoint(len(pts), "east", (mesh.Lx, (j + 0.5) * dy), (-1.0, 0.0)))
    for j in range(nx):  # north, x decreasing
        pts.append(BoundaryPoint(len(pts), "north", (mesh.Lx - (j + 0.5) * dx, mesh.Ly), (0.0, -1.0)))
    for j in range(ny):  # west, y decreasing
        pts.append(BoundaryPoint(len(pts), "west", (0.0, mesh.Ly - (j + 0.5) * dy), (1.0, 0.0)))
    return pts


def boundary_arrays(mesh: FurnaceMesh) -> tuple[np.ndarray, np.ndarray]:
    """(positions, normals) of all boundary points as (2(nx+ny), 2) arrays."""
    pts = boundary_points(mesh)
    pos = np.array([p.position for p in pts])
    nrm = np.array([p.normal for p in pts])
    return pos, nrm


def exit_point_rounding(mesh: FurnaceMesh, location) -> int:
    """Boundary index whose wall-face interval contains `location`.

    Ties exactly at a face edge resolve toward the lower index.
    """
    x, y = float(location[0]), float(location[1])
    nx, ny, dx, dy = mesh.nx, mesh.ny, mesh.dx, mesh.dy
    tol = 1e-9

    def face_lo(coord, d, n):
        # tie at an interior face edge goes to the lower-coordinate face
        j = int(np.ceil(coord / d)) - 1
        return min(max(j, 0), n - 1)

    def face_hi(coord, d, n):
        # reversed walls count down, so ties go to the higher-coordinate face
        j = int(np.floor(coord / d))
        return min(max(j, 0), n - 1)

    if abs(y) <= tol:
        return face_lo(x, dx, nx)
    if abs(x - mesh.Lx) <= tol:
        return nx + face_lo(y, dy, ny)
    if abs(y - mesh.Ly) <= tol:
        return nx + ny + (nx - 1 - face_hi(x, dx, nx))
    if abs(x) <= tol:
        return 2 * nx + ny + (ny - 1 - face_hi(y, dy, ny))
    raise GeometryError(f"location {location} is not on the boundary")


def _march(mesh: FurnaceMesh, origin, direction):
    """Amanatides-Woo traversal; returns (segments, exit point) or None when
    the ray passes exactly through a cell corner (caller nudges and retries)."""
    x0, y0 = origin
    ux, uy = direction
    dx, dy = mesh.dx, mesh.dy
    nx, ny = mesh.nx, mesh.ny

    ix = min(max(int(x0 / dx - (1e-12 if ux < 0 else 0.0)), 0), nx - 1)
    iy = min(max(int(y0 / dy - (1e-12 if uy < 0 else 0.0)), 0), ny - 1)
    if x0 <= 0 and ux > 0:
        ix = 0
    if x0 >= mesh.Lx and ux < 0:
        ix = nx - 1
    if y0 <= 0 and uy > 0:
        iy = 0
    if y0 >= mesh.Ly and uy < 0:
        iy = ny - 1

    step_x = 1 if ux > 0 else -1
    step_y = 1 if uy > 0 else -1
    inf = float("inf")
    t_delta_x = dx / abs(ux) if ux != 0 else inf
    t_delta_y = dy / abs(uy) if uy != 0 else inf
    if ux > 0:
        t_max_x = ((ix + 1) * dx - x0) / ux
    elif ux < 0:
        t_max_x = (ix * dx - x0) / ux
    else:
        t_max_x = inf
    if uy > 0:
        t_max_y = ((iy + 1) * dy - y0) / uy
    elif uy < 0:
        t_max_y = (iy * dy - y0) / uy
    else:
        t_max_y = inf

    corner_tol = 1e-12 * min(t_delta_x, t_delta_y)
    segments = []
    t = 0.0
    while True:
        if abs(t_max_x - t_max_y) < corner_tol:
            return None  # corner hit, retry nudged
        if t_max_x < t_max_y:
            t_next = t_max_x
            segments.append((mesh.cell_index(ix, iy), t_next - t))
            ix += step_x
            t_max_x += t_delta_x
            out = ix < 0 or ix >= nx
        else:
            t_next = t_max_y
            segments.append((mesh.cell_index(ix, iy), t_next - t))
            iy += step_y
            t_max_y += t_delta_y
            out = iy < 0 or iy >= ny
        t = t_next
        if out:
            exit_pt = (x0 + t * ux, y0 + t * uy)
            return segments, exit_pt


def traverse_ray(mesh: FurnaceMesh, origin, direction, origin_index: int | None = None) -> RayPath:
    """Trace an inward ray from a wall location to the opposite wall.

    Returns the visited cells with exact segment lengths and the boundary
    point nearest the exit location.  Rays that pass exactly through a cell
    corner are nudged by 1e-12 of the cell size along the dominant axis.
    """
    ux, uy = float(direction[0]), float(direction[1])
    norm = np.hypot(ux, uy)
    if norm == 0:
        raise GeometryError("zero direction")
    ux, uy = ux / norm, uy / norm
    x0, y0 = float(origin[0]), float(origin[1])

    on_vertical = abs(x0) <= 1e-12 or abs(x0 - mesh.Lx) <= 1e-12
    on_horizontal = abs(y0) <= 1e-12 or abs(y0 - mesh.Ly) <= 1e-12
    if not (on_vertical or on_horizontal):
        raise GeometryError(f"origin {origin} is not on the boundary")
    if on_horizontal and abs(uy) < 1e-12:
        raise GeometryError("direction is tangent to the wall")
    if on_vertical and not on_horizontal and abs(ux) < 1e-12:
        raise GeometryError("direction is tangent to the wall")

    result = _march(mesh, (x0, y0), (ux, uy))
    if result is None:
        if abs(ux) >= abs(uy):
            nudge = (np.copysign(1e-12 * mesh.dx, ux), 0.0)
        else:
            nudge = (0.0, np.copysign(1e-12 * mesh.dy, uy))
        result = _march(mesh, (x0 + nudge[0], y0 + nudge[1]), (ux, uy))
        if result is None:
            raise GeometryError(f"degenerate ray from {origin} along {direction}")
    segments, exit_pt = result
    ex = min(max(exit_pt[0], 0.0), mesh.Lx)
    ey = min(max(exit_pt[1], 0.0), mesh.Ly)
    terminal = exit_point_rounding(mesh, (ex, ey))
    if origin_index is None:
        origin_index = exit_point_rounding(mesh, (min(max(x0, 0.0), mesh.Lx), min(max(y0, 0.0), mesh.Ly)))
    return RayPath(
        origin_index=origin_index,
        direction=(ux, uy),
        segments=tuple((c, s) for c, s in segments if s > 0.0),
        terminal_index=terminal,
    )


@lru_cache(maxsize=32)
def _cached_path_table(nx, ny, Lx, Ly, n_rays):
    from .dtrm import make_quadrature  # local import avoids a cycle

    mesh = FurnaceMesh(nx, ny, Lx, Ly)
    quad = make_quadrature(n_rays)
    pos, nrm = boundary_arrays(mesh)
    n_pts = mesh.n_boundary

    paths = []
    for w in range(n_pts):
        nx_, ny_ = nrm[w]
        # rotate the inward normal by theta: tangent chosen for a right-handed frame
        tx, ty = -ny_, nx_
        for i, theta in enumerate(quad.angles):
            ux = np.cos(theta) * nx_ + np.sin(theta) * tx
            uy = np.cos(theta) * ny_ + np.sin(theta) * ty
            path = traverse_ray(mesh, pos[w], (ux, uy), origin_index=w)
            paths.append((w, i, path))

    max_seg = max(len(p.segments) for _, _, p in paths)
    n_paths = len(paths)
    recv = np.empty(n_paths, dtype=np.int64)
    src = np.empty(n_paths, dtype=np.int64)
    weight = np.empty(n_paths)
    seg_cell = np.zeros((n_paths, max_seg), dtype=np.int64)
    seg_len = np.zeros((n_paths, max_seg))
    for k, (w, i, path) in enumerate(paths):
        recv[k] = w
        src[k] = path.terminal_index
        weight[k] = quad.weights[i]
        for s, (c, ln) in enumerate(path.segments):
            seg_cell[k, s] = c
            seg_len[k, s] = ln
    return PathTable(mesh, n_rays, recv, src, weight, seg_cell, seg_len)


@dataclass(frozen=True)
class PathTable:
    """All traced rays for one (mesh, quadrature) pair, padded to rectangular
    arrays: zero-length padding segments point at cell 0 and are harmless."""

    mesh: FurnaceMesh
    n_rays: int
    recv: np.ndarray      # (n_paths,) receiving boundary index
    src: np.ndarray       # (n_paths,) emitting (terminal) boundary index
    weight: np.ndarray    # (n_paths,) angular quadrature weight
    seg_cell: np.ndarray  # (n_paths, max_seg) cell ids, receiver-adjacent first
    seg_len: np.ndarray   # (n_paths, max_seg) lengths, 0 = padding


def path_table(mesh: FurnaceMesh, n_rays: int) -> PathTable:
    """Trace (and cache) every boundary-point ray for a mesh and ray count."""
    return _cached_path_table(mesh.nx, mesh.ny, mesh.Lx, mesh.Ly, n_rays)
