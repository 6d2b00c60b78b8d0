"""Persistent dataset format (manifest.json + .rten tensors), min-max
normalization per physical block and the flattened / image-encoded views
consumed by training.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np

from .mesh import FurnaceMesh, boundary_arrays, wall_ranges
from .sampling import RawDataset
from .tensorio import read_tensor, sha256_file, write_tensor

log = logging.getLogger(__name__)

BLOCKS = ("eps", "T0", "T", "H")


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class BlockScaler:
    """Affine min-max map x -> (x - lo) / (hi - lo), fit on training data."""

    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.hi <= self.lo

    def transform(self, x):
        if self.degenerate:
            return np.asarray(x) - self.lo
        return (np.asarray(x) - self.lo) / (self.hi - self.lo)

    def inverse(self, x):
        if self.degenerate:
            return np.asarray(x) + self.lo
        return np.asarray(x) * (self.hi - self.lo) + self.lo


def fit_scalers(raw: RawDataset) -> dict[str, BlockScaler]:
    train, _ = raw.split()
    scalers = {}
    for name in BLOCKS:
        block = getattr(raw, name)[train]
        lo, hi = float(block.min()), float(block.max())
        if hi <= lo:
            log.warning("block %s is constant (%.6g); scaler degenerates to a shift", name, lo)
        scalers[name] = BlockScaler(lo, hi)
    return scalers


def normalize(raw: RawDataset, scalers: dict[str, BlockScaler] | None = None):
    """Normalized copies of all four blocks with training-set statistics."""
    if raw.n_samples == 0:
        raise DatasetError("empty dataset")
    if scalers is None:
        scalers = fit_scalers(raw)
    out = {name: scalers[name].transform(getattr(raw, name)) for name in BLOCKS}
    return out, scalers


def mlp_view(eps: np.ndarray, T0: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Concatenate [eps, T0, T] along the feature axis (batched or single)."""
    return np.concatenate([eps, T0, T], axis=-1)


def mlp_view_split(vec: np.ndarray, mesh: FurnaceMesh):
    nb, nc = mesh.n_boundary, mesh.n_cells
    if vec.shape[-1] != 2 * nb + nc:
        raise DatasetError(f"vector length {vec.shape[-1]} != {2 * nb + nc}")
    return vec[..., :nb], vec[..., nb : 2 * nb], vec[..., 2 * nb :]


def _frame_pixels(mesh: FurnaceMesh) -> tuple[np.ndarray, np.ndarray]:
    """(row, col) image coordinates of every boundary point in index order.

    The image is (ny+2, nx+2) with row 0 the south wall; boundary points map
    to the 1-pixel frame at their geometric position, corners stay unused.
    """
    pos, _ = boundary_arrays(mesh)
    rows = np.empty(mesh.n_boundary, dtype=int)
    cols = np.empty(mesh.n_boundary, dtype=int)
    ranges = wall_ranges(mesh)
    for idx in ranges["south"]:
        rows[idx], cols[idx] = 0, 1 + int(pos[idx, 0] / mesh.dx)
    for idx in ranges["east"]:
        rows[idx], cols[idx] = 1 + int(pos[idx, 1] / mesh.dy), mesh.nx + 1
    for idx in ranges["north"]:
        rows[idx], cols[idx] = mesh.ny + 1, 1 + int(pos[idx, 0] / mesh.dx)
    for idx in ranges["west"]:
        rows[idx], cols[idx] = 1 + int(pos[idx, 1] / mesh.dy), 0
    return rows, cols


def cnn_view(eps: np.ndarray, T0: np.ndarray, T: np.ndarray, mesh: FurnaceMesh) -> np.ndarray:
    """Encode case fields as a (ny+2, nx+2, 3) image (batched if inputs are).

    Channel 0 carries eps on the boundary frame, channel 1 T0 on the frame,
    channel 2 the gas temperature on the interior; everything undefined
    (frame corners, interior of channels 0/1, frame of channel 2) is zero.
    """
    eps = np.asarray(eps)
    batched = eps.ndim == 2
    if not batched:
        eps, T0, T = eps[None], np.asarray(T0)[None], np.asarray(T)[None]
    n = eps.shape[0]
    if eps.shape[1] != mesh.n_boundary or T.shape[1] != mesh.n_cells:
        raise DatasetError("field lengths do not match the mesh")
    img = np.zeros((n, mesh.ny + 2, mesh.nx + 2, 3), dtype=eps.dtype)
    rows, cols = _frame_pixels(mesh)
    img[:, rows, cols, 0] = eps
    img[:, rows, cols, 1] = T0
    img[:, 1 : mesh.ny + 1, 1 : mesh.nx + 1, 2] = np.asarray(T).reshape(n, mesh.ny, mesh.nx)
    return img if batched else img[0]


def cnn_view_split(img: np.ndarray, mesh: FurnaceMesh):
    """Invert cnn_view back to (eps, T0, T) fields."""
    batched = img.ndim == 4
    if not batched:
        img = img[None]
    if img.shape[1:] != (mesh.ny + 2, mesh.nx + 2, 3):
        raise DatasetError(f"image shape {img.shape[1:]} does not match the mesh")
    rows, cols = _frame_pixels(mesh)
    eps = img[:, rows, cols, 0]
    T0 = img[:, rows, cols, 1]
    T = img[:, 1 : mesh.ny + 1, 1 : mesh.nx + 1, 2].reshape(img.shape[0], -1)
    if not batched:
        return eps[0], T0[0], T[0]
    return eps, T0, T


def save_dataset(raw: RawDataset, out_dir, config_hash: str = "", extra: dict | None = None):
    """Write manifest.json plus one .rten file per block; returns manifest."""
    os.makedirs(out_dir, exist_ok=True)
    scalers = fit_scalers(raw)
    tensors = {}
    for name in BLOCKS:
        fname = f"{name}.rten"
        write_tensor(os.path.join(out_dir, fname), getattr(raw, name))
        tensors[name] = {"file": fname, "sha256": sha256_file(os.path.join(out_dir, fname))}
    manifest = {
        "format": "radsurro-dataset-v1",
        "mesh": {"nx": raw.mesh.nx, "ny": raw.mesh.ny, "Lx": raw.mesh.Lx, "Ly": raw.mesh.Ly},
        "n_train": raw.n_train,
        "n_test": raw.n_test,
        "seed": raw.seed,
        "provenance": raw.provenance,
        "scalers": {name: {"lo": s.lo, "hi": s.hi} for name, s in scalers.items()},
        "tensors": tensors,
        "solver_config_hash": config_hash,
    }
    if extra:
        manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


def load_dataset(path) -> tuple[RawDataset, dict[str, BlockScaler]]:
    """Load a dataset directory (or manifest path); verifies checksums."""
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    base = os.path.dirname(path)
    with open(path, encoding="utf-8") as f:
        manifest = json.load(f)
    arrays = {}
    for name in BLOCKS:
        entry = manifest["tensors"][name]
        fpath = os.path.join(base, entry["file"])
        if sha256_file(fpath) != entry["sha256"]:
            raise DatasetError(f"checksum mismatch for {fpath}")
        arrays[name] = read_tensor(fpath).astype(np.float64)
    m = manifest["mesh"]
    raw = RawDataset(
        mesh=FurnaceMesh(m["nx"], m["ny"], m["Lx"], m["Ly"]),
        eps=arrays["eps"], T0=arrays["T0"], T=arrays["T"], H=arrays["H"],
        n_train=manifest["n_train"], n_test=manifest["n_test"],
        seed=manifest["seed"], provenance=manifest.get("provenance", {}),
    )
    scalers = {name: BlockScaler(v["lo"], v["hi"]) for name, v in manifest["scalers"].items()}
    return raw, scalers
