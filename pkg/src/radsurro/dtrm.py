"""Per-band ray integration of the radiative transfer equation with a
diffuse-wall radiosity fixed point, producing the hemispherical irradiation
at every boundary point of the enclosure.

The angular measure is 2-D planar with cosine-weighted bin weights that sum
to pi, so an isotropic intensity I gives H = pi * I exactly and a uniform
enclosure at temperature T yields H = sigma * T^4.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .mesh import FurnaceMesh, PathTable, path_table
from .spectral import (
    AbsorptionTable,
    BandGrid,
    band_blackbody,
    blackbody_total_intensity,
    mixture_kappa,
)


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class AngularQuadrature:
    """In-plane ray directions per boundary point: polar angles from the
    inward normal and cosine-integrated weights summing to pi."""

    angles: np.ndarray
    weights: np.ndarray


def make_quadrature(n_rays: int) -> AngularQuadrature:
    if n_rays < 1:
        raise ValueError(f"n_rays must be >= 1, got {n_rays}")
    edges = -np.pi / 2 + np.pi * np.arange(n_rays + 1) / n_rays
    angles = 0.5 * (edges[:-1] + edges[1:])
    weights = (np.pi / 2) * np.diff(np.sin(edges))
    return AngularQuadrature(angles=angles, weights=weights)


@dataclass
class FurnaceCase:
    """One solver input: geometry, per-boundary-point wall properties,
    per-cell gas temperature and the (uniform) gas composition."""

    mesh: FurnaceMesh
    eps: np.ndarray        # (2(nx+ny),) wall emissivity, gray
    T0: np.ndarray         # (2(nx+ny),) wall temperature K
    T: np.ndarray          # (nx*ny,) gas temperature K, cell iy*nx+ix
    p: float               # total pressure, atm
    x_co2: float
    x_h2o: float
    x_co: float
    grid: BandGrid
    table: AbsorptionTable

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.T0 = np.asarray(self.T0, dtype=float)
        self.T = np.asarray(self.T, dtype=float)
        nb, nc = self.mesh.n_boundary, self.mesh.n_cells
        if self.eps.shape != (nb,) or self.T0.shape != (nb,):
            raise ValueError(f"eps/T0 must have shape ({nb},)")
        if self.T.shape != (nc,):
            raise ValueError(f"gas temperature must have shape ({nc},)")
        if np.any((self.eps < 0) | (self.eps > 1)):
            raise ValueError("emissivities must lie in [0, 1]")
        if np.any(self.T0 <= 0) or np.any(self.T <= 0):
            raise ValueError("temperatures must be positive")
        self.table.validate_grid(self.grid)

    @property
    def fractions(self) -> dict[str, float]:
        return {"CO2": self.x_co2, "H2O": self.x_h2o, "CO": self.x_co}


@dataclass
class WallIrradiation:
    """Hemispherical irradiation H (W m^-2) per boundary point, ordered as
    boundary_points; optional per-band breakdown (last column = out-of-band)."""

    H: np.ndarray
    band_H: np.ndarray | None = None
    iterations: int = 0
    residual: float = 0.0


def ray_arriving_intensity(path, band_kappa, cell_emission, source_intensity) -> float:
    """Intensity arriving along one path, marching from the source wall.

    `path` segments are ordered receiver-first (as produced by traverse_ray);
    band_kappa maps cell id -> kappa (m^-1), cell_emission maps cell id ->
    band blackbody intensity of that cell's gas.
    """
    intensity = float(source_intensity)
    for cell, ds in reversed(path.segments):
        trans = np.exp(-band_kappa[cell] * ds)
        intensity = intensity * trans + cell_emission[cell] * (1.0 - trans)
    return intensity


def _band_emission(case: FurnaceCase) -> tuple[np.ndarray, np.ndarray]:
    """Band-integrated blackbody intensity for every unique wall / gas
    temperature: (cell_emission (n_cells, nb+1), wall_emission (n_pts, nb+1)).
    The extra last band is the transparent out-of-band remainder."""
    nb = case.grid.n_bands

    def expand(temps):
        uniq, inv = np.unique(temps, return_inverse=True)
        out = np.empty((uniq.size, nb + 1))
        for i, t in enumerate(uniq):
            in_band, rem = band_blackbody(float(t), case.grid)
            out[i, :nb] = in_band
            out[i, nb] = rem
        return out[inv]

    return expand(case.T), expand(case.T0)


def _path_optics(case: FurnaceCase, table: PathTable):
    """Per-path, per-band total transmissivity and accumulated gas emission.

    These do not depend on the wall radiosities, so the fixed-point iteration
    reduces to a gather over source points.
    """
    nb = case.grid.n_bands
    kappa = mixture_kappa(case.table, case.T, case.p, case.fractions)  # (nb, n_cells)
    kappa = np.concatenate([kappa, np.zeros((1, case.mesh.n_cells))])  # out-of-band row
    cell_em, wall_em = _band_emission(case)

    n_paths, max_seg = table.seg_cell.shape
    tau_total = np.empty((n_paths, nb + 1))
    gas_term = np.empty((n_paths, nb + 1))
    # chunk over bands to bound the (n_paths, max_seg, chunk) scratch arrays
    chunk = max(1, int(4e7 // max(1, n_paths * max_seg)))
    lens = table.seg_len[:, :, None]
    for b0 in range(0, nb + 1, chunk):
        b1 = min(b0 + chunk, nb + 1)
        seg_kappa = kappa[b0:b1].T[table.seg_cell]          # (n_paths, max_seg, b1-b0)
        tau_seg = np.exp(-seg_kappa * lens)
        # prefix transmissivity from the receiver up to (excluding) each segment
        prefix = np.cumprod(tau_seg, axis=1)
        tau_total[:, b0:b1] = prefix[:, -1, :]
        prefix_excl = np.concatenate([np.ones_like(prefix[:, :1, :]), prefix[:, :-1, :]], axis=1)
        seg_em = cell_em[:, b0:b1][table.seg_cell]
        gas_term[:, b0:b1] = ((1.0 - tau_seg) * prefix_excl * seg_em).sum(axis=1)
    return tau_total, gas_term, wall_em


def solve(
    case: FurnaceCase,
    n_rays: int = 32,
    tolerance: float = 1e-6,
    max_iters: int = 100,
    want_band: bool = False,
) -> WallIrradiation:
    """Run the radiosity fixed point over all bands and assemble total H.

    Per band: J(w) = eps*Ib(T0) + (1-eps)*H_band(w)/pi, with H_band the
    angular quadrature of arriving intensities.  Converges when the largest
    relative change of H across points and bands drops below `tolerance`.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    table = path_table(case.mesh, n_rays)
    tau_total, gas_term, wall_em = _path_optics(case, table)
    n_pts = case.mesh.n_boundary

    eps = case.eps[:, None]
    J = eps * wall_em
    wts = table.weight[:, None]
    floor = 1e-300

    H_prev = None
    iterations = 0
    residual = np.inf
    for _ in range(max_iters):
        arriving = J[table.src] * tau_total + gas_term
        H_band = np.zeros_like(wall_em)
        np.add.at(H_band, table.recv, arriving * wts)
        if H_prev is not None:
            residual = float(np.max(np.abs(H_band - H_prev) / np.maximum(np.abs(H_prev), floor)))
            if residual < tolerance:
                H_prev = H_band
                break
        H_prev = H_band
        J = eps * wall_em + (1.0 - eps) * H_band / np.pi
        iterations += 1
    else:
        raise SolverError(
            f"radiosity iteration did not converge in {max_iters} iterations "
            f"(residual {residual:.3e})"
        )

    H = H_prev.sum(axis=1)
    return WallIrradiation(
        H=H,
        band_H=H_prev if want_band else None,
        iterations=iterations,
        residual=residual if np.isfinite(residual) else 0.0,
    )


def solver_timing(case: FurnaceCase, n_rays: int = 32, repetitions: int = 3) -> float:
    """Median wall-clock seconds per solve.  The ray-path cache is warmed
    first so the measurement reflects the per-case cost."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    path_table(case.mesh, n_rays)
    times = []
    for _ in range(repetitions):
        t0 = time.perf_counter()
        solve(case, n_rays=n_rays)
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def isothermal_reference(T: float) -> float:
    """sigma*T^4, the exact H of a uniform enclosure at temperature T."""
    return float(np.pi * blackbody_total_intensity(T))
