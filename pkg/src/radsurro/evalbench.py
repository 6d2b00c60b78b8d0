"""Error metrics (global and per-wall), solver-vs-surrogate timing and
speedup, the analytic physics validation suite, and CSV plot-data emission.

Relative errors are aggregated per boundary point first (mean over test
samples), then mean / population standard deviation across points.
"""

from __future__ import annotations

import csv
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from . import dtrm
from .mesh import FurnaceMesh, boundary_arrays, wall_ranges
from .spectral import (
    BandGrid,
    blackbody_total_intensity,
    default_absorption_table,
    planck_intensity,
)

WALL_ORDER = ("south", "east", "north", "west")


class EvalError(ValueError):
    pass


@dataclass
class ErrorReport:
    per_point: np.ndarray       # mean relative error over samples, per point (fraction)
    mean: float                 # mean over points (fraction)
    std: float                  # population std over points (fraction)
    per_wall: dict[str, dict[str, float]]
    dataset_id: str = ""
    model_id: str = ""
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "per_point_percent": (100.0 * self.per_point).tolist(),
            "mean_percent": 100.0 * self.mean,
            "std_percent": 100.0 * self.std,
            "per_wall_percent": {
                w: {k: 100.0 * v for k, v in d.items()} for w, d in self.per_wall.items()
            },
            "dataset_id": self.dataset_id,
            "model_id": self.model_id,
            "metadata": self.metadata,
        }


def wall_segments(mesh: FurnaceMesh) -> dict[str, range]:
    """Boundary index range per wall: south [0,nx), east [nx,nx+ny),
    north [nx+ny,2nx+ny), west [2nx+ny,2(nx+ny))."""
    return wall_ranges(mesh)


def relative_error(pred: np.ndarray, ref: np.ndarray, mesh: FurnaceMesh,
                   dataset_id: str = "", model_id: str = "") -> ErrorReport:
    """Per-point mean of |pred - ref| / ref over the sample axis, with
    global and per-wall mean/std aggregates."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    ref = np.atleast_2d(np.asarray(ref, dtype=float))
    if pred.shape != ref.shape:
        raise EvalError(f"prediction shape {pred.shape} != reference shape {ref.shape}")
    if np.any(ref <= 0):
        raise EvalError("reference irradiation must be strictly positive")
    per_point = np.mean(np.abs(pred - ref) / ref, axis=0)
    per_wall = {}
    for wall, rng in wall_segments(mesh).items():
        seg = per_point[rng.start : rng.stop]
        per_wall[wall] = {"mean": float(seg.mean()), "std": float(seg.std())}
    return ErrorReport(
        per_point=per_point,
        mean=float(per_point.mean()),
        std=float(per_point.std()),
        per_wall=per_wall,
        dataset_id=dataset_id,
        model_id=model_id,
        metadata={"std_axis": "across boundary points, population"},
    )


@dataclass
class TimingReport:
    training_seconds: float
    inference_seconds: float      # mean per-sample, one by one
    solver_seconds: float         # median per-sample
    speedup: float
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "training_seconds": self.training_seconds,
            "inference_seconds": self.inference_seconds,
            "solver_seconds": self.solver_seconds,
            "speedup": self.speedup,
            "metadata": self.metadata,
        }


def speedup_benchmark(model, cases, x_test, n_rays: int = 32,
                      repetitions: int = 3, training_seconds: float = 0.0) -> TimingReport:
    """Median solver wall-clock per case vs mean one-by-one surrogate
    inference.  A warm-up pass on each side is excluded from the timing."""
    from .nn import predict_timed

    dtrm.solve(cases[0], n_rays=n_rays)  # warm-up; also fills the path cache
    solver_times = []
    for case in cases:
        reps = []
        for _ in range(repetitions):
            t0 = time.perf_counter()
            dtrm.solve(case, n_rays=n_rays)
            reps.append(time.perf_counter() - t0)
        solver_times.append(np.median(reps))
    solver_seconds = float(np.median(solver_times))

    model.forward(np.asarray(x_test[:1], dtype=model.dtype))  # warm-up
    _, inference_seconds, inference_std = predict_timed(model, x_test)

    return TimingReport(
        training_seconds=training_seconds,
        inference_seconds=inference_seconds,
        solver_seconds=solver_seconds,
        speedup=solver_seconds / inference_seconds,
        metadata={
            "inference_std_seconds": inference_std,
            "cpu": platform.processor() or platform.machine(),
            "n_cases": len(cases),
            "repetitions": repetitions,
        },
    )


def view_factor_irradiation_mc(mesh: FurnaceMesh, wall_T0: np.ndarray, probe_index: int,
                               n_rays: int = 10_000_000, seed: int = 0) -> float:
    """Monte-Carlo oracle for the transparent-gas, black-wall irradiation at
    one boundary point: cosine-distributed directions, analytic wall hit."""
    pos, nrm = boundary_arrays(mesh)
    x0, y0 = pos[probe_index]
    nx_, ny_ = nrm[probe_index]
    tx, ty = -ny_, nx_
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed))
    # theta measured from the inward normal, density cos(theta)/2
    sin_t = rng.uniform(-1.0, 1.0, size=n_rays)
    cos_t = np.sqrt(1.0 - sin_t**2)
    ux = cos_t * nx_ + sin_t * tx
    uy = cos_t * ny_ + sin_t * ty

    with np.errstate(divide="ignore"):
        tx_lo = np.where(ux != 0, (0.0 - x0) / ux, np.inf)
        tx_hi = np.where(ux != 0, (mesh.Lx - x0) / ux, np.inf)
        ty_lo = np.where(uy != 0, (0.0 - y0) / uy, np.inf)
        ty_hi = np.where(uy != 0, (mesh.Ly - y0) / uy, np.inf)
    candidates = np.stack([tx_lo, tx_hi, ty_lo, ty_hi])
    candidates[candidates <= 1e-12] = np.inf
    t_hit = candidates.min(axis=0)
    which = candidates.argmin(axis=0)

    # map the hit wall to the blackbody intensity of the wall's temperature
    hit_x = x0 + t_hit * ux
    hit_y = y0 + t_hit * uy
    # average T0 per wall (the oracle targets per-wall uniform temperatures)
    ranges = wall_ranges(mesh)
    wall_T = {w: float(np.mean(wall_T0[r.start : r.stop])) for w, r in ranges.items()}
    temps = np.empty(n_rays)
    temps[which == 0] = wall_T["west"]
    temps[which == 1] = wall_T["east"]
    temps[which == 2] = wall_T["south"]
    temps[which == 3] = wall_T["north"]
    del hit_x, hit_y
    intensity = blackbody_total_intensity(temps)
    return float(np.pi * intensity.mean())


@dataclass
class PhysicsCheck:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.residual < self.tolerance


def validate_physics(nx: int = 30, ny: int = 10, n_rays: int = 16,
                     mc_rays: int = 2_000_000, seed: int = 0) -> list[PhysicsCheck]:
    """Analytic identity suite for the solver at desk scale."""
    from .spectral import path_transmissivity

    mesh = FurnaceMesh(nx, ny, 12.0, 2.0)
    grid = BandGrid(150.0, 9150.0, 225.0)
    table = default_absorption_table(grid)
    nb, nc = mesh.n_boundary, mesh.n_cells
    checks = []

    # isothermal enclosure: H = sigma T^4 everywhere
    T_iso = 1200.0
    case = dtrm.FurnaceCase(
        mesh=mesh, eps=np.full(nb, 0.6), T0=np.full(nb, T_iso), T=np.full(nc, T_iso),
        p=1.0, x_co2=0.1, x_h2o=0.2, x_co=0.0, grid=grid, table=table,
    )
    res = dtrm.solve(case, n_rays=n_rays)
    ref = dtrm.isothermal_reference(T_iso)
    checks.append(PhysicsCheck("isothermal_enclosure",
                               float(np.max(np.abs(res.H - ref) / ref)), 1e-3))

    # Beer-Lambert multiplicativity
    segs = [(0.7, 1.3), (0.2, 2.0), (1.5, 0.4)]
    tau_all = path_transmissivity(segs)
    tau_split = path_transmissivity(segs[:2]) * path_transmissivity(segs[2:])
    checks.append(PhysicsCheck("beer_lambert_multiplicativity",
                               float(abs(tau_all - tau_split) / tau_all), 1e-12))

    # gray gas, cold black walls: H from the direct angular-quadrature formula
    gray = _gray_gas_check(mesh, n_rays)
    checks.append(PhysicsCheck("gray_gas_direct_formula", gray, 1e-9))

    # transparent gas, one hot black wall vs the Monte-Carlo oracle
    vf = _view_factor_check(mesh, mc_rays=mc_rays, seed=seed)
    checks.append(PhysicsCheck("view_factor_monte_carlo", vf, 0.01))
    return checks


def _gray_gas_check(mesh: FurnaceMesh, n_rays: int) -> float:
    """Uniform hot gray gas between cold black walls: H(w) must equal
    sum_i Ib(Tg) (1 - exp(-kappa * chord_i)) w_i computed outside the solver."""
    from .mesh import path_table
    from .spectral import AbsorptionTable

    T_gas, T_wall = 1500.0, 1.0
    k_value = 0.35  # m^-1 at x=1, p=1
    grid = BandGrid(150.0, 9150.0, 9000.0)  # one band carrying almost all energy
    centers = grid.centers
    table = AbsorptionTable(
        band_centers=centers,
        ref_temperatures=np.array([300.0, 3000.0]),
        k={"CO2": np.full((1, 2), k_value), "H2O": np.zeros((1, 2)), "CO": np.zeros((1, 2))},
    )
    nb, nc = mesh.n_boundary, mesh.n_cells
    case = dtrm.FurnaceCase(
        mesh=mesh, eps=np.ones(nb), T0=np.full(nb, T_wall), T=np.full(nc, T_gas),
        p=1.0, x_co2=1.0, x_h2o=0.0, x_co=0.0, grid=grid, table=table,
    )
    res = dtrm.solve(case, n_rays=n_rays, want_band=True)

    paths = path_table(mesh, n_rays)
    from .spectral import band_blackbody

    in_band, _ = band_blackbody(T_gas, grid)
    ib = float(in_band[0])
    chord = paths.seg_len.sum(axis=1)
    expected = np.zeros(nb)
    np.add.at(expected, paths.recv, ib * (1.0 - np.exp(-k_value * chord)) * paths.weight)
    solver_band0 = res.band_H[:, 0]
    return float(np.max(np.abs(solver_band0 - expected) / np.maximum(expected, 1e-30)))


def _view_factor_check(mesh: FurnaceMesh, mc_rays: int, seed: int,
                       n_rays_solver: int = 2048, n_probes: int = 5) -> float:
    """Transparent gas, hot black north wall, near-cold other walls."""
    grid = BandGrid(150.0, 9150.0, 4500.0)
    table = default_absorption_table(grid)
    nb, nc = mesh.n_boundary, mesh.n_cells
    T0 = np.full(nb, 300.0)
    rngs = wall_ranges(mesh)
    T0[rngs["north"].start : rngs["north"].stop] = 1000.0
    case = dtrm.FurnaceCase(
        mesh=mesh, eps=np.ones(nb), T0=T0, T=np.full(nc, 300.0),
        p=1.0, x_co2=0.0, x_h2o=0.0, x_co=0.0, grid=grid, table=table,
    )
    res = dtrm.solve(case, n_rays=n_rays_solver)
    south = rngs["south"]
    probes = np.linspace(south.start + 2, south.stop - 3, n_probes).astype(int)
    worst = 0.0
    for k, probe in enumerate(probes):
        ref = view_factor_irradiation_mc(mesh, T0, int(probe), n_rays=mc_rays, seed=seed + k)
        worst = max(worst, abs(res.H[probe] - ref) / ref)
    return float(worst)


def emit_plot_data(report: ErrorReport, mesh: FurnaceMesh, curve_path, markers_path):
    """Write the per-point error curve and the wall-boundary marker file."""
    if report.per_point.size == 0:
        raise EvalError("empty report")
    ranges = wall_segments(mesh)
    walls = np.empty(mesh.n_boundary, dtype=object)
    for wall, rng in ranges.items():
        walls[rng.start : rng.stop] = wall
    with open(curve_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "wall", "mean_relative_error_percent"])
        for j, err in enumerate(report.per_point):
            writer.writerow([j, walls[j], f"{100.0 * np.float32(err):.6g}"])
    with open(markers_path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["boundary_index", "transition"])
        writer.writerow([ranges["east"].start, "south-east"])
        writer.writerow([ranges["north"].start, "east-north"])
        writer.writerow([ranges["west"].start, "north-west"])
