"""Spectral band grid, Planck blackbody intensity, tabulated gas absorption
and Beer-Lambert path transmissivity.

Wavenumbers are in cm^-1 throughout; intensities are W m^-2 sr^-1 per cm^-1
(spectral) or W m^-2 sr^-1 (band-integrated).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# CODATA 2018
PLANCK_H = 6.62607015e-34      # J s
LIGHT_C = 2.99792458e8         # m / s
BOLTZMANN_K = 1.380649e-23     # J / K
STEFAN_BOLTZMANN = 5.670374419e-8  # W m^-2 K^-4


class SpectralError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class BandGrid:
    """Uniform grid of half-open wavenumber bands [nu_min + i*dnu, nu_min + (i+1)*dnu)."""

    nu_min: float
    nu_max: float
    delta_nu: float

    def __post_init__(self):
        if not (self.nu_min < self.nu_max):
            raise SpectralError(f"nu_min must be < nu_max, got {self.nu_min}, {self.nu_max}")
        if self.delta_nu <= 0:
            raise SpectralError(f"delta_nu must be positive, got {self.delta_nu}")
        span = self.nu_max - self.nu_min
        n = span / self.delta_nu
        if abs(n - round(n)) > 1e-9 * max(1.0, n):
            raise SpectralError(
                f"band span {span} is not an integer multiple of delta_nu {self.delta_nu}"
            )

    @property
    def n_bands(self) -> int:
        return int(round((self.nu_max - self.nu_min) / self.delta_nu))

    @property
    def edges(self) -> np.ndarray:
        return self.nu_min + self.delta_nu * np.arange(self.n_bands + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.nu_min + self.delta_nu * (np.arange(self.n_bands) + 0.5)


@dataclass(frozen=True)
class GasState:
    """Local gas state: temperature (K), total pressure (atm), molar fractions."""

    T: float
    p: float = 1.0
    x_co2: float = 0.0
    x_h2o: float = 0.0
    x_co: float = 0.0

    def __post_init__(self):
        if self.T <= 0:
            raise SpectralError(f"temperature must be positive, got {self.T}")
        if self.p <= 0:
            raise SpectralError(f"pressure must be positive, got {self.p}")
        for name, x in (("x_co2", self.x_co2), ("x_h2o", self.x_h2o), ("x_co", self.x_co)):
            if x < 0:
                raise SpectralError(f"{name} must be non-negative, got {x}")
        if self.x_co2 + self.x_h2o + self.x_co > 1.0 + 1e-12:
            raise SpectralError("molar fractions sum above 1")

    @property
    def fractions(self) -> dict[str, float]:
        return {"CO2": self.x_co2, "H2O": self.x_h2o, "CO": self.x_co}


def planck_intensity(T, nu):
    """Spectral blackbody intensity at temperature T (K) and wavenumber nu (cm^-1).

    Returns W m^-2 sr^-1 / cm^-1.  Accepts scalars or arrays.
    """
    T = np.asarray(T, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(T <= 0):
        raise SpectralError("temperature must be positive")
    if np.any(nu <= 0):
        raise SpectralError("wavenumber must be positive")
    eta = 100.0 * nu  # m^-1
    x = PLANCK_H * LIGHT_C * eta / (BOLTZMANN_K * T)
    # extra factor 100 converts per-m^-1 spectral density to per-cm^-1
    with np.errstate(over="ignore"):
        val = 100.0 * 2.0 * PLANCK_H * LIGHT_C**2 * eta**3 / np.expm1(x)
    return val if val.ndim else float(val)


def blackbody_total_intensity(T) -> float:
    """sigma*T^4/pi, the full-spectrum blackbody intensity (W m^-2 sr^-1)."""
    return STEFAN_BOLTZMANN * np.asarray(T, dtype=float) ** 4 / np.pi


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


def band_blackbody(T: float, grid: BandGrid) -> tuple[np.ndarray, float]:
    """Integrate the Planck function over each band of `grid` at temperature T.

    Returns (per-band intensities, out-of-band remainder), both W m^-2 sr^-1.
    The remainder closes the spectrum: sum(bands) + remainder == sigma*T^4/pi.
    """
    edges = grid.edges
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * grid.delta_nu
    mid = 0.5 * (lo + hi)
    nodes = mid[:, None] + half * _GL_NODES[None, :]
    vals = planck_intensity(T, nodes)
    in_band = half * (vals * _GL_WEIGHTS[None, :]).sum(axis=1)
    total = blackbody_total_intensity(T)
    remainder = total - in_band.sum()
    if remainder < -1e-9 * total:
        raise SpectralError(f"band integration exceeded total blackbody intensity by {-remainder}")
    return in_band, max(remainder, 0.0)


@dataclass
class AbsorptionTable:
    """Per-species pressure absorption coefficients k(band, T) in m^-1 atm^-1
    per unit mole fraction, linearly interpolated in temperature.
    """

    band_centers: np.ndarray
    ref_temperatures: np.ndarray
    k: dict[str, np.ndarray] = field(default_factory=dict)  # species -> (n_bands, n_T)

    def __post_init__(self):
        self.band_centers = np.asarray(self.band_centers, dtype=float)
        self.ref_temperatures = np.asarray(self.ref_temperatures, dtype=float)
        if np.any(np.diff(self.band_centers) <= 0):
            raise ConfigurationError("band centers must be strictly increasing")
        if np.any(np.diff(self.ref_temperatures) <= 0):
            raise ConfigurationError("reference temperatures must be strictly increasing")
        for name in self.k:
            arr = np.asarray(self.k[name], dtype=float)
            if arr.shape != (self.band_centers.size, self.ref_temperatures.size):
                raise ConfigurationError(
                    f"species {name}: k shape {arr.shape} does not match "
                    f"({self.band_centers.size}, {self.ref_temperatures.size})"
                )
            if np.any(arr < 0):
                raise ConfigurationError(f"species {name}: negative absorption coefficient")
            self.k[name] = arr

    def validate_grid(self, grid: BandGrid):
        if self.band_centers.size != grid.n_bands or not np.allclose(
            self.band_centers, grid.centers, rtol=0, atol=1e-9
        ):
            raise ConfigurationError("absorption table band centers do not match the band grid")

    def species_k_at(self, name: str, T) -> np.ndarray:
        """k for one species at temperature(s) T, shape (n_bands,) + T.shape.

        Clamped to the end values outside the tabulated temperature range.
        """
        if name not in self.k:
            raise ConfigurationError(f"species {name} missing from absorption table")
        refs = self.ref_temperatures
        T = np.atleast_1d(np.asarray(T, dtype=float))
        idx = np.clip(np.searchsorted(refs, T) - 1, 0, refs.size - 2)
        t0, t1 = refs[idx], refs[idx + 1]
        frac = np.clip((T - t0) / (t1 - t0), 0.0, 1.0)
        table = self.k[name]
        return table[:, idx] * (1.0 - frac) + table[:, idx + 1] * frac

    def to_json(self) -> dict:
        return {
            "species": [
                {
                    "name": name,
                    "band_centers_cm1": self.band_centers.tolist(),
                    "ref_temperatures_K": self.ref_temperatures.tolist(),
                    "k_m1_atm1": arr.tolist(),
                }
                for name, arr in sorted(self.k.items())
            ]
        }

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f)

    @classmethod
    def load(cls, path, grid: BandGrid | None = None) -> "AbsorptionTable":
        with open(path, encoding="utf-8") as f:
            doc = json.load(f)
        species = doc.get("species")
        if not species:
            raise ConfigurationError(f"{path}: no species entries")
        centers = np.asarray(species[0]["band_centers_cm1"], dtype=float)
        refs = np.asarray(species[0]["ref_temperatures_K"], dtype=float)
        k = {}
        for entry in species:
            if not np.array_equal(np.asarray(entry["band_centers_cm1"], dtype=float), centers):
                raise ConfigurationError(f"{path}: inconsistent band centers between species")
            if not np.array_equal(np.asarray(entry["ref_temperatures_K"], dtype=float), refs):
                raise ConfigurationError(f"{path}: inconsistent reference temperatures")
            k[entry["name"]] = np.asarray(entry["k_m1_atm1"], dtype=float)
        table = cls(band_centers=centers, ref_temperatures=refs, k=k)
        if grid is not None:
            table.validate_grid(grid)
        return table


def absorption_coefficient(band_index: int, gas: GasState, table: AbsorptionTable) -> float:
    """Total absorption coefficient kappa (m^-1) for one band at a gas state."""
    if not 0 <= band_index < table.band_centers.size:
        raise SpectralError(f"band index {band_index} out of range")
    kappa = 0.0
    for name, x in gas.fractions.items():
        if x == 0.0:
            continue
        kappa += x * float(table.species_k_at(name, gas.T)[band_index, 0])
    return gas.p * kappa


def mixture_kappa(table: AbsorptionTable, T, p: float, fractions: dict[str, float]) -> np.ndarray:
    """kappa (m^-1) for all bands at temperatures T; shape (n_bands, len(T))."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    kappa = np.zeros((table.band_centers.size, T.size))
    for name, x in fractions.items():
        if x == 0.0:
            continue
        kappa += x * table.species_k_at(name, T)
    return p * kappa


def path_transmissivity(segments) -> float:
    """Beer-Lambert transmissivity along a path of (kappa m^-1, length m) segments."""
    depth = 0.0
    for kappa, ds in segments:
        if kappa < 0 or ds < 0:
            raise SpectralError(f"negative kappa or length in segment ({kappa}, {ds})")
        depth += kappa * ds
    return float(np.exp(-depth))


# Synthetic default absorption data: smooth bumps placed at the major CO2
# (15 um, 4.3 um, 2.7 um), H2O (rotational, 6.3 um, 2.7 um) and CO (4.7 um)
# absorption regions, with a mild decrease with temperature.
_DEFAULT_LINES = {
    "CO2": [(667.0, 60.0, 4.0), (2325.0, 70.0, 6.0), (3660.0, 70.0, 1.5)],
    "H2O": [(350.0, 250.0, 3.0), (1600.0, 90.0, 2.5), (3760.0, 130.0, 1.2)],
    "CO": [(2143.0, 55.0, 2.0)],
}
_DEFAULT_REF_TEMPERATURES = np.array([300.0, 700.0, 1100.0, 1500.0, 1900.0, 2300.0, 2700.0])


def default_absorption_table(grid: BandGrid) -> AbsorptionTable:
    """Build the bundled synthetic absorption table on an arbitrary band grid."""
    centers = grid.centers
    refs = _DEFAULT_REF_TEMPERATURES
    k = {}
    for name, lines in _DEFAULT_LINES.items():
        base = np.zeros(centers.size)
        for nu0, width, amp in lines:
            base += amp * np.exp(-(((centers - nu0) / width) ** 2))
        scale = (1000.0 / refs) ** 0.7
        k[name] = base[:, None] * scale[None, :]
    return AbsorptionTable(band_centers=centers, ref_temperatures=refs, k=k)
