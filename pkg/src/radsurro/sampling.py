"""Latin hypercube sampling and the mapping from unit-cube rows to smooth
furnace cases, plus dataset generation by driving the solver.

Per-sample RNG streams are derived from the master seed with SeedSequence
keys, so regeneration is deterministic and independent of scheduling order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dtrm import FurnaceCase, solve
from .mesh import FurnaceMesh, wall_ranges
from .spectral import AbsorptionTable, BandGrid


@dataclass(frozen=True)
class CaseDistribution:
    """Ranges and control-point layout for random furnace cases."""

    eps_range: tuple[float, float] = (0.3, 1.0)
    T0_range: tuple[float, float] = (800.0, 1800.0)
    T_range: tuple[float, float] = (900.0, 2000.0)
    n_boundary_controls: int = 4       # per wall, shared by eps and T0
    domain_controls: tuple[int, int] = (6, 3)
    p: float = 1.0
    x_co2: float = 0.1
    x_h2o: float = 0.2
    x_co: float = 0.0

    def __post_init__(self):
        lo, hi = self.eps_range
        if not (0.0 <= lo < hi <= 1.0):
            raise ValueError(f"bad emissivity range {self.eps_range}")
        for name, (lo, hi) in (("T0", self.T0_range), ("T", self.T_range)):
            if not (0.0 < lo < hi):
                raise ValueError(f"bad {name} range {(lo, hi)}")
        if self.n_boundary_controls < 2:
            raise ValueError("need at least 2 boundary controls per wall")
        if min(self.domain_controls) < 2:
            raise ValueError("need at least a 2x2 domain control grid")

    @property
    def n_dims(self) -> int:
        cx, cy = self.domain_controls
        return 8 * self.n_boundary_controls + cx * cy


def lhs(n_samples: int, n_dims: int, seed: int) -> np.ndarray:
    """Latin hypercube design on [0, 1): per dimension, a seeded random
    permutation of strata with one uniform draw inside each stratum."""
    if n_samples < 1 or n_dims < 1:
        raise ValueError("n_samples and n_dims must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    out = np.empty((n_samples, n_dims))
    for d in range(n_dims):
        perm = rng.permutation(n_samples)
        out[:, d] = (perm + rng.random(n_samples)) / n_samples
    return out


def _interp_wall(controls: np.ndarray, n_points: int) -> np.ndarray:
    """Linear interpolation of control values (at equally spaced positions
    spanning the wall's first..last point) onto all wall points."""
    xc = np.linspace(0.0, 1.0, controls.size)
    xp = np.linspace(0.0, 1.0, n_points) if n_points > 1 else np.array([0.5])
    return np.interp(xp, xc, controls)


def _interp_domain(controls: np.ndarray, mesh: FurnaceMesh) -> np.ndarray:
    """Bilinear interpolation of a (cx, cy) control grid (nodes spanning the
    cell-center extremes) onto every cell, returned as a flat iy*nx+ix array."""
    cx, cy = controls.shape
    xs = np.linspace(0.0, 1.0, mesh.nx) if mesh.nx > 1 else np.array([0.5])
    ys = np.linspace(0.0, 1.0, mesh.ny) if mesh.ny > 1 else np.array([0.5])
    xc = np.linspace(0.0, 1.0, cx)
    yc = np.linspace(0.0, 1.0, cy)
    ix = np.clip(np.searchsorted(xc, xs) - 1, 0, cx - 2)
    iy = np.clip(np.searchsorted(yc, ys) - 1, 0, cy - 2)
    fx = (xs - xc[ix]) / (xc[ix + 1] - xc[ix])
    fy = (ys - yc[iy]) / (yc[iy + 1] - yc[iy])
    c00 = controls[np.ix_(ix, iy)]
    c10 = controls[np.ix_(ix + 1, iy)]
    c01 = controls[np.ix_(ix, iy + 1)]
    c11 = controls[np.ix_(ix + 1, iy + 1)]
    vals = (
        c00 * (1 - fx)[:, None] * (1 - fy)[None, :]
        + c10 * fx[:, None] * (1 - fy)[None, :]
        + c01 * (1 - fx)[:, None] * fy[None, :]
        + c11 * fx[:, None] * fy[None, :]
    )
    return vals.T.reshape(-1)  # (ny, nx) -> iy*nx+ix


def realize_case(
    sample_row: np.ndarray,
    dist: CaseDistribution,
    mesh: FurnaceMesh,
    grid: BandGrid,
    table: AbsorptionTable,
) -> FurnaceCase:
    """Map one unit-cube LHS row to a furnace case with smooth fields.

    Row layout: eps controls (4 walls x c_b, CCW wall order), then T0
    controls (same layout), then the cx*cy domain temperature grid
    (x-major).
    """
    row = np.asarray(sample_row, dtype=float)
    cb = dist.n_boundary_controls
    cx, cy = dist.domain_controls
    if row.shape != (dist.n_dims,):
        raise ValueError(f"sample row has {row.shape}, expected ({dist.n_dims},)")

    ranges = wall_ranges(mesh)

    def wall_field(block: np.ndarray, lo: float, hi: float) -> np.ndarray:
        out = np.empty(mesh.n_boundary)
        for w, wall in enumerate(("south", "east", "north", "west")):
            ctrl = lo + block[w * cb : (w + 1) * cb] * (hi - lo)
            rng_ = ranges[wall]
            out[rng_.start : rng_.stop] = _interp_wall(ctrl, len(rng_))
        return out

    eps = wall_field(row[: 4 * cb], *dist.eps_range)
    T0 = wall_field(row[4 * cb : 8 * cb], *dist.T0_range)
    t_lo, t_hi = dist.T_range
    ctrl = (t_lo + row[8 * cb :] * (t_hi - t_lo)).reshape(cx, cy)
    T = _interp_domain(ctrl, mesh)
    return FurnaceCase(
        mesh=mesh, eps=eps, T0=T0, T=T,
        p=dist.p, x_co2=dist.x_co2, x_h2o=dist.x_h2o, x_co=dist.x_co,
        grid=grid, table=table,
    )


@dataclass
class RawDataset:
    """Unnormalized solver inputs and outputs for one generated dataset."""

    mesh: FurnaceMesh
    eps: np.ndarray   # (n, 2(nx+ny))
    T0: np.ndarray    # (n, 2(nx+ny))
    T: np.ndarray     # (n, nx*ny)
    H: np.ndarray     # (n, 2(nx+ny))
    n_train: int
    n_test: int
    seed: int
    provenance: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.eps.shape[0]

    def split(self):
        """(train slice, test slice) views of the sample axis."""
        return slice(0, self.n_train), slice(self.n_train, self.n_train + self.n_test)


_WORKER_CTX = {}


def _init_worker(dist, mesh, grid, table, n_rays, tolerance, max_iters):
    _WORKER_CTX.update(
        dist=dist, mesh=mesh, grid=grid, table=table,
        n_rays=n_rays, tolerance=tolerance, max_iters=max_iters,
    )


def _solve_row(args):
    idx, row = args
    c = _WORKER_CTX
    case = realize_case(row, c["dist"], c["mesh"], c["grid"], c["table"])
    res = solve(case, n_rays=c["n_rays"], tolerance=c["tolerance"], max_iters=c["max_iters"])
    return idx, case.eps, case.T0, case.T, res.H


def generate_dataset(
    dist: CaseDistribution,
    mesh: FurnaceMesh,
    grid: BandGrid,
    table: AbsorptionTable,
    n_train: int,
    n_test: int,
    seed: int,
    n_rays: int = 32,
    tolerance: float = 1e-6,
    max_iters: int = 100,
    threads: int = 1,
) -> RawDataset:
    """Draw two independent LHS designs (seed, seed+1), solve every case and
    collect the raw fields.  Results are identical for any thread count."""
    if n_train < 1 or n_test < 1:
        raise ValueError("n_train and n_test must be >= 1")
    rows = np.vstack([lhs(n_train, dist.n_dims, seed), lhs(n_test, dist.n_dims, seed + 1)])
    n = rows.shape[0]
    nb, nc = mesh.n_boundary, mesh.n_cells
    eps = np.empty((n, nb))
    T0 = np.empty((n, nb))
    T = np.empty((n, nc))
    H = np.empty((n, nb))

    def store(idx, e, t0, t, h):
        eps[idx], T0[idx], T[idx], H[idx] = e, t0, t, h

    work = list(enumerate(rows))
    if threads > 1:
        with ProcessPoolExecutor(
            max_workers=threads,
            initializer=_init_worker,
            initargs=(dist, mesh, grid, table, n_rays, tolerance, max_iters),
        ) as pool:
            for idx, e, t0, t, h in pool.map(_solve_row, work, chunksize=8):
                store(idx, e, t0, t, h)
    else:
        _init_worker(dist, mesh, grid, table, n_rays, tolerance, max_iters)
        for item in work:
            try:
                idx, e, t0, t, h = _solve_row(item)
            except Exception as exc:
                raise RuntimeError(f"solver failed on sample {item[0]}: {exc}") from exc
            store(idx, e, t0, t, h)

    return RawDataset(
        mesh=mesh, eps=eps, T0=T0, T=T, H=H,
        n_train=n_train, n_test=n_test, seed=seed,
        provenance={
            "seed": seed,
            "n_train": n_train,
            "n_test": n_test,
            "n_rays": n_rays,
            "tolerance": tolerance,
            "distribution": {
                "eps_range": list(dist.eps_range),
                "T0_range": list(dist.T0_range),
                "T_range": list(dist.T_range),
                "n_boundary_controls": dist.n_boundary_controls,
                "domain_controls": list(dist.domain_controls),
                "p": dist.p, "x_co2": dist.x_co2, "x_h2o": dist.x_h2o, "x_co": dist.x_co,
            },
        },
    )
