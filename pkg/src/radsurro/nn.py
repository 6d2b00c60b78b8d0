"""Self-contained numpy tensor/backprop engine with the two surrogate
architectures (MLP, CNN) and their fixed training recipe: Adam on MAE with
an L2 kernel regularizer, ELU activations, "same" conv padding and average
pooling.

Training runs in f32 by default; pass dtype=np.float64 for gradient checks.
"""

from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import dataclass, field

import numpy as np

from .tensorio import tensor_bytes, tensor_from_bytes

MODEL_MAGIC = b"RMDL"


class ShapeError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


class Layer:
    params: dict
    grads: dict
    weight_keys: tuple = ()

    def forward(self, x):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError


class Dense(Layer):
    def __init__(self, n_in, n_out, activation, rng, dtype):
        self.n_in, self.n_out = n_in, n_out
        self.activation = activation
        self.params = {
            "W": glorot_uniform(rng, (n_in, n_out), n_in, n_out, dtype),
            "b": np.zeros(n_out, dtype=dtype),
        }
        self.grads = {}
        self.weight_keys = ("W",)

    def forward(self, x):
        if x.shape[-1] != self.n_in:
            raise ShapeError(f"dense input has {x.shape[-1]} features, expected {self.n_in}")
        self._x = x
        z = x @ self.params["W"] + self.params["b"]
        if self.activation == "elu":
            self._z = z
            return elu(z)
        return z

    def backward(self, g):
        if self.activation == "elu":
            g = g * elu_grad(self._z)
        self.grads["W"] = self._x.T @ g
        self.grads["b"] = g.sum(axis=0)
        return g @ self.params["W"].T


class Conv2D(Layer):
    """Cross-correlation with zero "same" padding and stride 1; inputs are
    (N, H, W, C) and filters (kh, kw, C, F).  Even kernels pad more on the
    bottom/right."""

    def __init__(self, kh, kw, c_in, c_out, activation, rng, dtype):
        self.kh, self.kw = kh, kw
        self.c_in, self.c_out = c_in, c_out
        self.activation = activation
        fan_in = kh * kw * c_in
        fan_out = kh * kw * c_out
        self.params = {
            "K": glorot_uniform(rng, (kh, kw, c_in, c_out), fan_in, fan_out, dtype),
            "b": np.zeros(c_out, dtype=dtype),
        }
        self.grads = {}
        self.weight_keys = ("K",)

    def _pads(self):
        return (self.kh - 1) // 2, (self.kw - 1) // 2

    def forward(self, x):
        if x.ndim != 4 or x.shape[3] != self.c_in:
            raise ShapeError(f"conv input shape {x.shape} incompatible with {self.c_in} channels")
        n, h, w, _ = x.shape
        pt, pl = self._pads()
        xp = np.zeros((n, h + self.kh - 1, w + self.kw - 1, self.c_in), dtype=x.dtype)
        xp[:, pt : pt + h, pl : pl + w, :] = x
        self._xp = xp
        K = self.params["K"]
        z = np.zeros((n, h, w, self.c_out), dtype=x.dtype)
        flat = z.reshape(-1, self.c_out)
        for di in range(self.kh):
            for dj in range(self.kw):
                xs = xp[:, di : di + h, dj : dj + w, :].reshape(-1, self.c_in)
                flat += xs @ K[di, dj]
        z += self.params["b"]
        if self.activation == "elu":
            self._z = z
            return elu(z)
        return z

    def backward(self, g):
        if self.activation == "elu":
            g = g * elu_grad(self._z)
        n, h, w, _ = g.shape
        K = self.params["K"]
        gflat = g.reshape(-1, self.c_out)
        dK = np.zeros_like(K)
        dxp = np.zeros_like(self._xp)
        for di in range(self.kh):
            for dj in range(self.kw):
                xs = self._xp[:, di : di + h, dj : dj + w, :].reshape(-1, self.c_in)
                dK[di, dj] = xs.T @ gflat
                dxp[:, di : di + h, dj : dj + w, :] += (gflat @ K[di, dj].T).reshape(n, h, w, self.c_in)
        self.grads["K"] = dK
        self.grads["b"] = gflat.sum(axis=0)
        pt, pl = self._pads()
        hin = self._xp.shape[1] - self.kh + 1
        win = self._xp.shape[2] - self.kw + 1
        return dxp[:, pt : pt + hin, pl : pl + win, :]


class AvgPool2D(Layer):
    """Non-overlapping window means; trailing partial windows are averaged
    over their actual extent.  Pool (1, 1) is the identity."""

    def __init__(self, ph, pw):
        if ph < 1 or pw < 1:
            raise ShapeError("pool size must be >= (1, 1)")
        self.ph, self.pw = ph, pw
        self.params = {}
        self.grads = {}

    @staticmethod
    def _edges(size, p):
        starts = list(range(0, size, p))
        return [(s, min(s + p, size)) for s in starts]

    def forward(self, x):
        if self.ph == 1 and self.pw == 1:
            self._shape = x.shape
            return x
        self._shape = x.shape
        n, h, w, c = x.shape
        re = self._edges(h, self.ph)
        ce = self._edges(w, self.pw)
        out = np.empty((n, len(re), len(ce), c), dtype=x.dtype)
        for i, (r0, r1) in enumerate(re):
            for j, (c0, c1) in enumerate(ce):
                out[:, i, j, :] = x[:, r0:r1, c0:c1, :].mean(axis=(1, 2))
        return out

    def backward(self, g):
        if self.ph == 1 and self.pw == 1:
            return g
        n, h, w, c = self._shape
        dx = np.zeros(self._shape, dtype=g.dtype)
        re = self._edges(h, self.ph)
        ce = self._edges(w, self.pw)
        for i, (r0, r1) in enumerate(re):
            for j, (c0, c1) in enumerate(ce):
                dx[:, r0:r1, c0:c1, :] = g[:, i : i + 1, j : j + 1, :] / ((r1 - r0) * (c1 - c0))
        return dx


class Flatten(Layer):
    def __init__(self):
        self.params = {}
        self.grads = {}

    def forward(self, x):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, g):
        return g.reshape(self._shape)


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture hyperparameters for either surrogate kind."""

    kind: str  # "mlp" | "cnn"
    n_layers: int = 1          # hidden dense layers (mlp) / dense head layers (cnn)
    nodes: int = 100
    n_conv_layers: int = 1
    filters: int = 9
    filter_size: tuple[int, int] = (2, 3)
    pool_size: tuple[int, int] = (1, 1)
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mlp", "cnn"):
            raise ValueError(f"unknown network kind {self.kind!r}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "n_layers": self.n_layers, "nodes": self.nodes,
            "n_conv_layers": self.n_conv_layers, "filters": self.filters,
            "filter_size": list(self.filter_size), "pool_size": list(self.pool_size),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, d: dict) -> "NetworkSpec":
        d = dict(d)
        d["filter_size"] = tuple(d.get("filter_size", (2, 3)))
        d["pool_size"] = tuple(d.get("pool_size", (1, 1)))
        return cls(**d)


class Model:
    def __init__(self, layers, spec: NetworkSpec, input_shape):
        self.layers = layers
        self.spec = spec
        self.input_shape = tuple(input_shape)
        self.metadata = {}

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g

    def param_items(self):
        for li, layer in enumerate(self.layers):
            for key in layer.params:
                yield li, key, layer

    def n_parameters(self) -> int:
        return sum(p.size for _, k, layer in self.param_items() for p in [layer.params[k]])

    @property
    def dtype(self):
        for layer in self.layers:
            if layer.params:
                return next(iter(layer.params.values())).dtype
        return np.dtype(np.float32)


def build_mlp(spec: NetworkSpec, input_dim: int, output_dim: int, dtype=np.float32) -> Model:
    if spec.kind != "mlp":
        raise ValueError("spec.kind must be 'mlp'")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed))
    layers = []
    n_in = input_dim
    for _ in range(spec.n_layers):
        layers.append(Dense(n_in, spec.nodes, "elu", rng, dtype))
        n_in = spec.nodes
    layers.append(Dense(n_in, output_dim, None, rng, dtype))
    return Model(layers, spec, (input_dim,))


def build_cnn(spec: NetworkSpec, image_shape, output_dim: int, dtype=np.float32) -> Model:
    if spec.kind != "cnn":
        raise ValueError("spec.kind must be 'cnn'")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=spec.seed))
    h, w, c = image_shape
    layers = []
    for _ in range(spec.n_conv_layers):
        kh, kw = spec.filter_size
        layers.append(Conv2D(kh, kw, c, spec.filters, "elu", rng, dtype))
        pool = AvgPool2D(*spec.pool_size)
        layers.append(pool)
        h = len(AvgPool2D._edges(h, spec.pool_size[0]))
        w = len(AvgPool2D._edges(w, spec.pool_size[1]))
        c = spec.filters
    layers.append(Flatten())
    n_in = h * w * c
    for _ in range(spec.n_layers):
        layers.append(Dense(n_in, spec.nodes, "elu", rng, dtype))
        n_in = spec.nodes
    layers.append(Dense(n_in, output_dim, None, rng, dtype))
    return Model(layers, spec, tuple(image_shape))


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 20000
    batch_size: int = 32
    l2: float = 0.0011       # kernel regularizer, weights only
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError("invalid training configuration")


class Adam:
    def __init__(self, model: Model, config: TrainConfig):
        self.cfg = config
        self.t = 0
        self.m = {}
        self.v = {}
        for li, key, layer in model.param_items():
            self.m[(li, key)] = np.zeros_like(layer.params[key])
            self.v[(li, key)] = np.zeros_like(layer.params[key])

    def step(self, model: Model):
        c = self.cfg
        self.t += 1
        bc1 = 1.0 - c.beta1**self.t
        bc2 = 1.0 - c.beta2**self.t
        for li, key, layer in model.param_items():
            g = layer.grads[key]
            m = self.m[(li, key)]
            v = self.v[(li, key)]
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            layer.params[key] -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.adam_eps)


def mae_loss(pred, target):
    """(loss, gradient wrt pred) for mean absolute error over all elements."""
    diff = pred - target
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad.astype(pred.dtype)


def l2_penalty(model: Model, lam: float) -> float:
    if lam == 0.0:
        return 0.0
    total = 0.0
    for _, key, layer in model.param_items():
        if key in layer.weight_keys:
            total += float(np.sum(layer.params[key].astype(np.float64) ** 2))
    return lam * total


def _add_l2_grads(model: Model, lam: float):
    if lam == 0.0:
        return
    for _, key, layer in model.param_items():
        if key in layer.weight_keys:
            layer.grads[key] += 2.0 * lam * layer.params[key]


@dataclass
class TrainResult:
    model: Model
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    epochs_run: int = 0
    wall_clock: float = 0.0


def train(
    model: Model,
    x_train,
    y_train,
    config: TrainConfig,
    x_val=None,
    y_val=None,
    val_every: int = 0,
    callback=None,
) -> TrainResult:
    """Mini-batch Adam on MAE + L2.  `callback(epoch, result)` runs after
    each validation evaluation and may return False to stop early (used by
    the tuner's pruning)."""
    dtype = model.dtype
    x_train = np.asarray(x_train, dtype=dtype)
    y_train = np.asarray(y_train, dtype=dtype)
    n = x_train.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=config.seed))
    opt = Adam(model, config)
    result = TrainResult(model=model)
    t_start = time.perf_counter()

    for epoch in range(config.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_batches = 0
        for b0 in range(0, n, config.batch_size):
            idx = order[b0 : b0 + config.batch_size]
            pred = model.forward(x_train[idx])
            loss, grad = mae_loss(pred, y_train[idx])
            loss += l2_penalty(model, config.l2)
            if not np.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}; "
                    f"layer norms: {[float(np.abs(l.params[k]).max()) for _, k, l in model.param_items()]}"
                )
            model.backward(grad)
            _add_l2_grads(model, config.l2)
            opt.step(model)
            epoch_loss += loss
            n_batches += 1
        result.train_loss.append(epoch_loss / max(n_batches, 1))
        result.epochs_run = epoch + 1

        if x_val is not None and (val_every and (epoch + 1) % val_every == 0 or epoch + 1 == config.epochs):
            pred = model.forward(np.asarray(x_val, dtype=dtype))
            vloss, _ = mae_loss(pred, np.asarray(y_val, dtype=dtype))
            result.val_loss.append((epoch + 1, vloss))
            if callback is not None and callback(epoch + 1, result) is False:
                break

    result.wall_clock = time.perf_counter() - t_start
    model.metadata.update(
        epochs_run=result.epochs_run,
        final_train_loss=result.train_loss[-1] if result.train_loss else None,
        final_val_loss=result.val_loss[-1][1] if result.val_loss else None,
        train_wall_clock=result.wall_clock,
    )
    return result


def predict(model: Model, x) -> np.ndarray:
    return model.forward(np.asarray(x, dtype=model.dtype))


def predict_timed(model: Model, x_test) -> tuple[np.ndarray, float, float]:
    """Forward each sample one by one; returns (outputs, mean, std of
    per-sample wall-clock seconds)."""
    x_test = np.asarray(x_test, dtype=model.dtype)
    outs = []
    times = []
    for i in range(x_test.shape[0]):
        t0 = time.perf_counter()
        outs.append(model.forward(x_test[i : i + 1]))
        times.append(time.perf_counter() - t0)
    return np.concatenate(outs, axis=0), float(np.mean(times)), float(np.std(times))


def save_model(model: Model, path):
    """JSON header + one RTEN section per parameter tensor with checksums."""
    sections = []
    payloads = []
    for li, key, layer in model.param_items():
        payload = tensor_bytes(layer.params[key])
        sections.append(
            {
                "layer": li, "param": key, "bytes": len(payload),
                "sha256": hashlib.sha256(payload).hexdigest(),
            }
        )
        payloads.append(payload)
    header = json.dumps(
        {
            "spec": model.spec.to_json(),
            "input_shape": list(model.input_shape),
            "metadata": model.metadata,
            "sections": sections,
        },
        sort_keys=True,
    ).encode()
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC + struct.pack("<I", len(header)) + header)
        for payload in payloads:
            f.write(payload)


def load_model(path, output_dim: int, dtype=np.float32) -> Model:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MODEL_MAGIC:
        raise ValueError(f"{path}: not a model file")
    (hlen,) = struct.unpack_from("<I", data, 4)
    header = json.loads(data[8 : 8 + hlen])
    spec = NetworkSpec.from_json(header["spec"])
    input_shape = tuple(header["input_shape"])
    if spec.kind == "mlp":
        model = build_mlp(spec, input_shape[0], output_dim, dtype=dtype)
    else:
        model = build_cnn(spec, input_shape, output_dim, dtype=dtype)
    model.metadata = header.get("metadata", {})
    offset = 8 + hlen
    for section in header["sections"]:
        payload = data[offset : offset + section["bytes"]]
        if hashlib.sha256(payload).hexdigest() != section["sha256"]:
            raise ValueError(f"{path}: checksum mismatch in section {section}")
        arr = tensor_from_bytes(payload).astype(dtype)
        layer = model.layers[section["layer"]]
        if layer.params[section["param"]].shape != arr.shape:
            raise ShapeError(f"{path}: stored shape {arr.shape} does not match architecture")
        layer.params[section["param"]] = arr
        offset += section["bytes"]
    return model
