"""Run configuration: a single JSON document with dotted-path overrides.

Defaults reproduce the full-scale furnace (120x20 cells over 12x2 m,
32 rays, bands of 25 cm^-1 over [150, 9300], CO2/H2O at 0.1/0.2, 1 atm).
"""

from __future__ import annotations

import copy
import hashlib
import json

from .mesh import FurnaceMesh
from .nn import NetworkSpec, TrainConfig
from .sampling import CaseDistribution
from .spectral import AbsorptionTable, BandGrid, default_absorption_table

DEFAULTS = {
    "mesh": {"nx": 120, "ny": 20, "Lx": 12.0, "Ly": 2.0},
    "n_rays": 32,
    "band_grid": {"nu_min": 150.0, "nu_max": 9300.0, "delta_nu": 25.0},
    "gas": {"p": 1.0, "x_co2": 0.1, "x_h2o": 0.2, "x_co": 0.0},
    "absorption_table": None,  # path to a JSON table; null = bundled synthetic data
    "sampling": {
        "eps_range": [0.3, 1.0],
        "T0_range": [800.0, 1800.0],
        "T_range": [900.0, 2000.0],
        "n_boundary_controls": 4,
        "domain_controls": [6, 3],
    },
    "dataset": {"n_train": 1000, "n_test": 300, "seed": 0},
    "solver": {"tolerance": 1e-6, "max_iters": 100},
    "network": {
        "kind": "cnn",
        "n_layers": 1,
        "nodes": 724,
        "n_conv_layers": 1,
        "filters": 9,
        "filter_size": [2, 3],
        "pool_size": [1, 1],
        "seed": 0,
    },
    "train": {
        "learning_rate": 0.001,
        "epochs": 20000,
        "batch_size": 32,
        "l2": 0.0011,
        "seed": 0,
    },
    "tune": {"n_trials": 50, "budget_epochs": 500},
    "target": "all",  # all | south | east | north | west
}


class ConfigError(ValueError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown configuration key: {here}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc: dict, overrides: list[str]) -> dict:
    """Apply repeatable --set key.path=value flags."""
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, raw = item.partition("=")
        node = doc
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown configuration key: {key}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown configuration key: {key}")
        node[parts[-1]] = _parse_value(raw)
    return doc


class RunConfig:
    """Resolved configuration with typed accessors; validation happens in
    the domain constructors."""

    def __init__(self, doc: dict):
        self.doc = doc

    @classmethod
    def load(cls, path=None, overrides: list[str] | None = None, seed: int | None = None) -> "RunConfig":
        doc = copy.deepcopy(DEFAULTS)
        if path is not None:
            with open(path, encoding="utf-8") as f:
                try:
                    user = json.load(f)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{path}: {exc}") from exc
            doc = _merge(doc, user)
        if overrides:
            doc = apply_overrides(doc, overrides)
        if seed is not None:
            doc["dataset"]["seed"] = seed
            doc["train"]["seed"] = seed
            doc["network"]["seed"] = seed
        cfg = cls(doc)
        cfg.validate()
        return cfg

    def validate(self):
        self.mesh()
        self.band_grid()
        self.distribution()
        self.network_spec()
        self.train_config()
        if self.doc["target"] not in ("all", "south", "east", "north", "west"):
            raise ConfigError(f"target: unknown wall {self.doc['target']!r}")
        gas = self.doc["gas"]
        for key in ("p", "x_co2", "x_h2o", "x_co"):
            if gas[key] < 0:
                raise ConfigError(f"gas.{key}: must be non-negative")

    def mesh(self) -> FurnaceMesh:
        m = self.doc["mesh"]
        try:
            return FurnaceMesh(m["nx"], m["ny"], m["Lx"], m["Ly"])
        except ValueError as exc:
            raise ConfigError(f"mesh: {exc}") from exc

    def band_grid(self) -> BandGrid:
        g = self.doc["band_grid"]
        try:
            return BandGrid(g["nu_min"], g["nu_max"], g["delta_nu"])
        except ValueError as exc:
            raise ConfigError(f"band_grid: {exc}") from exc

    def absorption_table(self) -> AbsorptionTable:
        grid = self.band_grid()
        path = self.doc["absorption_table"]
        if path is None:
            return default_absorption_table(grid)
        return AbsorptionTable.load(path, grid=grid)

    def distribution(self) -> CaseDistribution:
        s = self.doc["sampling"]
        gas = self.doc["gas"]
        try:
            return CaseDistribution(
                eps_range=tuple(s["eps_range"]),
                T0_range=tuple(s["T0_range"]),
                T_range=tuple(s["T_range"]),
                n_boundary_controls=s["n_boundary_controls"],
                domain_controls=tuple(s["domain_controls"]),
                p=gas["p"], x_co2=gas["x_co2"], x_h2o=gas["x_h2o"], x_co=gas["x_co"],
            )
        except ValueError as exc:
            raise ConfigError(f"sampling: {exc}") from exc

    def network_spec(self) -> NetworkSpec:
        try:
            return NetworkSpec.from_json(self.doc["network"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"network: {exc}") from exc

    def train_config(self) -> TrainConfig:
        t = self.doc["train"]
        try:
            return TrainConfig(
                learning_rate=t["learning_rate"], epochs=t["epochs"],
                batch_size=t["batch_size"], l2=t["l2"], seed=t["seed"],
            )
        except ValueError as exc:
            raise ConfigError(f"train: {exc}") from exc

    @property
    def target(self) -> str:
        return self.doc["target"]

    def config_hash(self) -> str:
        canon = json.dumps(self.doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]
