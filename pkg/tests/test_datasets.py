import numpy as np
import pytest

from radsurro.datasets import (
    BlockScaler,
    DatasetError,
    cnn_view,
    cnn_view_split,
    load_dataset,
    mlp_view,
    mlp_view_split,
    normalize,
    save_dataset,
)
from radsurro.mesh import FurnaceMesh
from radsurro.sampling import RawDataset
from radsurro.tensorio import (
    TensorFormatError,
    read_tensor,
    tensor_bytes,
    tensor_from_bytes,
    write_tensor,
)

from conftest import DESK_MESH, TABLE1_MESH


def random_raw(mesh, n_train=4, n_test=2, seed=0):
    rng = np.random.default_rng(seed)
    n = n_train + n_test
    nb, nc = mesh.n_boundary, mesh.n_cells
    return RawDataset(
        mesh=mesh,
        eps=rng.uniform(0.3, 1.0, (n, nb)),
        T0=rng.uniform(800.0, 1800.0, (n, nb)),
        T=rng.uniform(900.0, 2000.0, (n, nc)),
        H=rng.uniform(2e4, 4e5, (n, nb)),
        n_train=n_train, n_test=n_test, seed=seed,
    )


class TestTensorFile:
    def test_round_trip(self, tmp_path):
        arr = np.random.default_rng(1).random((3, 4, 5)).astype(np.float32)
        path = tmp_path / "a.rten"
        write_tensor(path, arr)
        back = read_tensor(path)
        assert back.dtype == np.float32
        assert np.array_equal(back, arr)

    def test_bytes_round_trip_bit_identical(self):
        arr = np.random.default_rng(2).random((7, 2)).astype(np.float32)
        assert tensor_bytes(tensor_from_bytes(tensor_bytes(arr))) == tensor_bytes(arr)

    def test_bad_magic(self):
        with pytest.raises(TensorFormatError):
            tensor_from_bytes(b"XXXX" + b"\0" * 16)

    def test_truncated_payload(self):
        arr = np.zeros((2, 2), dtype=np.float32)
        data = tensor_bytes(arr)[:-4]
        with pytest.raises(TensorFormatError):
            tensor_from_bytes(data)


class TestNormalize:
    def test_endpoints_map_to_unit(self):
        s = BlockScaler(800.0, 1800.0)
        assert np.allclose(s.transform(np.array([800.0, 1800.0])), [0.0, 1.0])

    def test_round_trip(self):
        raw = random_raw(DESK_MESH)
        norm, scalers = normalize(raw)
        for name in ("eps", "T0", "T", "H"):
            block = getattr(raw, name)
            back = scalers[name].inverse(norm[name])
            assert np.max(np.abs(back - block)) < 1e-6 * np.abs(block).max()

    def test_round_trip_through_f32(self):
        raw = random_raw(DESK_MESH)
        norm, scalers = normalize(raw)
        for name in ("eps", "T0", "T", "H"):
            block = getattr(raw, name)
            back = scalers[name].inverse(norm[name].astype(np.float32).astype(np.float64))
            # f32 storage bounds the error by the block range times the f32 ulp
            span = scalers[name].hi - scalers[name].lo
            assert np.max(np.abs(back - block)) < 4e-7 * span

    def test_test_set_uses_train_statistics(self):
        raw = random_raw(DESK_MESH)
        tr, _ = raw.split()
        _, scalers = normalize(raw)
        assert scalers["T0"].lo == raw.T0[tr].min()
        assert scalers["T0"].hi == raw.T0[tr].max()

    def test_out_of_range_values_preserved(self):
        s = BlockScaler(0.0, 1.0)
        assert s.transform(np.array([1.5]))[0] == pytest.approx(1.5)
        assert s.transform(np.array([-0.5]))[0] == pytest.approx(-0.5)

    def test_constant_block_degenerates(self):
        raw = random_raw(DESK_MESH)
        raw.eps[:] = 0.7
        norm, scalers = normalize(raw)
        assert scalers["eps"].degenerate
        assert np.allclose(norm["eps"], 0.0)
        assert np.allclose(scalers["eps"].inverse(norm["eps"]), 0.7)


class TestMlpView:
    def test_table1_length(self):
        raw = random_raw(TABLE1_MESH, 1, 1)
        vec = mlp_view(raw.eps, raw.T0, raw.T)
        assert vec.shape == (2, 2960)

    def test_desk_length(self):
        raw = random_raw(DESK_MESH, 1, 1)
        assert mlp_view(raw.eps, raw.T0, raw.T).shape == (2, 460)

    def test_layout_offsets(self):
        raw = random_raw(TABLE1_MESH, 1, 1)
        vec = mlp_view(raw.eps, raw.T0, raw.T)
        assert vec[0, 280] == raw.T0[0, 0]
        assert vec[0, 0] == raw.eps[0, 0]
        assert vec[0, 560] == raw.T[0, 0]

    def test_split_round_trip(self):
        raw = random_raw(DESK_MESH, 2, 1)
        vec = mlp_view(raw.eps, raw.T0, raw.T)
        eps, T0, T = mlp_view_split(vec, DESK_MESH)
        assert np.array_equal(eps, raw.eps)
        assert np.array_equal(T0, raw.T0)
        assert np.array_equal(T, raw.T)

    def test_length_mismatch(self):
        with pytest.raises(DatasetError):
            mlp_view_split(np.zeros((1, 10)), DESK_MESH)


class TestCnnView:
    def test_table1_image_shape(self):
        raw = random_raw(TABLE1_MESH, 1, 1)
        img = cnn_view(raw.eps, raw.T0, raw.T, TABLE1_MESH)
        assert img.shape == (2, 22, 122, 3)

    def test_zero_rules(self):
        raw = random_raw(DESK_MESH, 1, 1)
        img = cnn_view(raw.eps[0], raw.T0[0], raw.T[0], DESK_MESH)
        ny, nx = DESK_MESH.ny, DESK_MESH.nx
        # interior of the wall channels is zero
        assert np.all(img[1 : ny + 1, 1 : nx + 1, 0] == 0)
        assert np.all(img[1 : ny + 1, 1 : nx + 1, 1] == 0)
        # frame of the gas channel is zero
        frame = np.ones((ny + 2, nx + 2), dtype=bool)
        frame[1 : ny + 1, 1 : nx + 1] = False
        assert np.all(img[frame, 2] == 0)
        # corners are zero in all channels
        for r, c in ((0, 0), (0, nx + 1), (ny + 1, 0), (ny + 1, nx + 1)):
            assert np.all(img[r, c, :] == 0)

    def test_round_trip_lossless(self):
        raw = random_raw(DESK_MESH, 2, 1)
        img = cnn_view(raw.eps, raw.T0, raw.T, DESK_MESH)
        eps, T0, T = cnn_view_split(img, DESK_MESH)
        assert np.array_equal(eps, raw.eps)
        assert np.array_equal(T0, raw.T0)
        assert np.array_equal(T, raw.T)

    def test_geometric_placement(self):
        raw = random_raw(DESK_MESH, 1, 1)
        img = cnn_view(raw.eps[0], raw.T0[0], raw.T[0], DESK_MESH)
        # south wall index 0 is the leftmost frame pixel on row 0
        assert img[0, 1, 0] == raw.eps[0, 0]
        # north wall runs right-to-left: its first point sits at the right edge
        nx, ny = DESK_MESH.nx, DESK_MESH.ny
        first_north = nx + ny
        assert img[ny + 1, nx, 0] == raw.eps[0, first_north]

    def test_length_mismatch(self):
        with pytest.raises(DatasetError):
            cnn_view(np.zeros((1, 10)), np.zeros((1, 10)), np.zeros((1, 5)), DESK_MESH)


class TestSaveLoad:
    def test_round_trip(self, tmp_path):
        raw = random_raw(DESK_MESH)
        save_dataset(raw, tmp_path / "ds", config_hash="abc")
        back, scalers = load_dataset(tmp_path / "ds")
        assert back.n_train == raw.n_train
        assert np.allclose(back.H, raw.H, rtol=1e-6)
        assert scalers["H"].lo == pytest.approx(raw.H[: raw.n_train].min(), rel=1e-6)

    def test_checksum_detects_corruption(self, tmp_path):
        raw = random_raw(DESK_MESH)
        save_dataset(raw, tmp_path / "ds")
        target = tmp_path / "ds" / "H.rten"
        data = bytearray(target.read_bytes())
        data[-1] ^= 0xFF
        target.write_bytes(bytes(data))
        with pytest.raises(DatasetError):
            load_dataset(tmp_path / "ds")

    def test_byte_identical_rewrite(self, tmp_path):
        raw = random_raw(DESK_MESH)
        save_dataset(raw, tmp_path / "a")
        save_dataset(raw, tmp_path / "b")
        assert (tmp_path / "a" / "H.rten").read_bytes() == (tmp_path / "b" / "H.rten").read_bytes()
        assert (tmp_path / "a" / "manifest.json").read_text() == (
            tmp_path / "b" / "manifest.json").read_text()
