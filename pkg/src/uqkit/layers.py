"""Layers, the sequential Model container, and the checkpoint format.

Models are plain ordered layer lists. Parameter names are derived from
layer positions (``3.weight``, ``2.inner.0.bias``) and are unique by
construction. Checkpoints are text files carrying the layer-spec list as
JSON plus every parameter and buffer as hex-encoded float64 values, which
round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from uqkit import tensor as T
from uqkit.tensor import ShapeError, Tensor

CHECKPOINT_MAGIC = "uqkit-model v1"

_ACTIVATIONS = {
    "relu": lambda x, a: T.relu(x),
    "leaky_relu": lambda x, a: T.leaky_relu(x, a),
    "elu": lambda x, a: T.elu(x, a),
    "sigmoid": lambda x, a: T.sigmoid(x),
}


def kaiming_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class Context:
    """Per-forward state threaded through the layers."""

    training: bool
    force_dropout: bool
    rng: np.random.Generator


class Layer:
    kind = "base"

    def forward(self, x: Tensor, ctx: Context) -> Tensor:
        raise NotImplementedError

    def parameters(self) -> dict[str, Tensor]:
        return {}

    def buffers(self) -> dict[str, np.ndarray]:
        return {}

    def spec(self) -> dict:
        raise NotImplementedError


class Linear(Layer):
    kind = "linear"

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator | None = None):
        self.in_dim = in_dim
        self.out_dim = out_dim
        if rng is None:
            w = np.zeros((in_dim, out_dim))
        else:
            w = kaiming_uniform((in_dim, out_dim), in_dim, rng)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def forward(self, x, ctx):
        return x @ self.weight + self.bias

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def spec(self):
        return {"kind": "linear", "in": self.in_dim, "out": self.out_dim}


class Activation(Layer):
    kind = "activation"

    def __init__(self, name: str, alpha: float = 1.0):
        if name not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {name!r}; valid: {sorted(_ACTIVATIONS)}")
        self.name = name
        self.alpha = alpha

    def forward(self, x, ctx):
        return _ACTIVATIONS[self.name](x, self.alpha)

    def spec(self):
        return {"kind": "activation", "name": self.name, "alpha": self.alpha}


class Dropout(Layer):
    """Inverted dropout: scales by 1/(1-rate) at train time, identity in eval."""

    kind = "dropout"

    def __init__(self, rate: float):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def forward(self, x, ctx):
        if self.rate == 0.0 or not (ctx.training or ctx.force_dropout):
            return x
        keep = 1.0 - self.rate
        mask = (ctx.rng.random(x.shape) < keep) / keep
        return x * Tensor(mask)

    def spec(self):
        return {"kind": "dropout", "rate": self.rate}


class BatchNorm1d(Layer):
    kind = "batchnorm1d"

    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5):
        self.dim = dim
        self.momentum = momentum
        self.eps = eps
        self.gamma = Tensor(np.ones(dim), requires_grad=True)
        self.beta = Tensor(np.zeros(dim), requires_grad=True)
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)

    def forward(self, x, ctx):
        if ctx.training:
            out = T.batchnorm(x, self.gamma, self.beta, eps=self.eps, training=True)
            mu, var = out.batch_stats
            m = self.momentum
            self.running_mean = (1.0 - m) * self.running_mean + m * mu
            self.running_var = (1.0 - m) * self.running_var + m * var
            return out
        return T.batchnorm(
            x, self.gamma, self.beta,
            running_mean=self.running_mean, running_var=self.running_var,
            eps=self.eps, training=False,
        )

    def parameters(self):
        return {"gamma": self.gamma, "beta": self.beta}

    def buffers(self):
        return {"running_mean": self.running_mean, "running_var": self.running_var}

    def set_buffer(self, name: str, value: np.ndarray) -> None:
        setattr(self, name, value)

    def spec(self):
        return {"kind": "batchnorm1d", "dim": self.dim,
                "momentum": self.momentum, "eps": self.eps}


class SkipBlock(Layer):
    """Residual wrapper: returns inner(x) + x."""

    kind = "skip"

    def __init__(self, inner: list[Layer]):
        self.inner = inner

    def forward(self, x, ctx):
        out = x
        for layer in self.inner:
            out = layer.forward(out, ctx)
        return out + x

    def parameters(self):
        params = {}
        for j, layer in enumerate(self.inner):
            for name, p in layer.parameters().items():
                params[f"inner.{j}.{name}"] = p
        return params

    def buffers(self):
        bufs = {}
        for j, layer in enumerate(self.inner):
            for name, b in layer.buffers().items():
                bufs[f"inner.{j}.{name}"] = b
        return bufs

    def spec(self):
        return {"kind": "skip", "inner": [l.spec() for l in self.inner]}


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, padding: int = 0,
                 rng: np.random.Generator | None = None):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        shape = (out_channels, in_channels, kernel_size, kernel_size)
        fan_in = in_channels * kernel_size * kernel_size
        w = np.zeros(shape) if rng is None else kaiming_uniform(shape, fan_in, rng)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels), requires_grad=True)

    def forward(self, x, ctx):
        return T.conv2d(x, self.weight, self.bias, self.stride, self.padding)

    def parameters(self):
        return {"weight": self.weight, "bias": self.bias}

    def spec(self):
        return {"kind": "conv2d", "in": self.in_channels, "out": self.out_channels,
                "kernel": self.kernel_size, "stride": self.stride,
                "padding": self.padding}


class MaxPool2d(Layer):
    kind = "maxpool2d"

    def __init__(self, window: int = 2):
        self.window = window

    def forward(self, x, ctx):
        return T.maxpool2d(x, self.window)

    def spec(self):
        return {"kind": "maxpool2d", "window": self.window}


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, ctx):
        return T.flatten(x)

    def spec(self):
        return {"kind": "flatten"}


def layer_from_spec(spec: dict, rng: np.random.Generator | None = None) -> Layer:
    kind = spec["kind"]
    if kind == "linear":
        return Linear(spec["in"], spec["out"], rng)
    if kind == "activation":
        return Activation(spec["name"], spec.get("alpha", 1.0))
    if kind == "dropout":
        return Dropout(spec["rate"])
    if kind == "batchnorm1d":
        return BatchNorm1d(spec["dim"], spec.get("momentum", 0.1), spec.get("eps", 1e-5))
    if kind == "skip":
        return SkipBlock([layer_from_spec(s, rng) for s in spec["inner"]])
    if kind == "conv2d":
        return Conv2d(spec["in"], spec["out"], spec["kernel"],
                      spec.get("stride", 1), spec.get("padding", 0), rng)
    if kind == "maxpool2d":
        return MaxPool2d(spec.get("window", 2))
    if kind == "flatten":
        return Flatten()
    raise ValueError(f"unknown layer kind {kind!r}")


class Model:
    """Ordered layer composition with train/eval modes and a seeded rng.

    The rng drives dropout masks only; seeding the model makes stochastic
    training runs reproducible. ``sample_passes`` counts how many samples
    have flowed through ``forward`` since the last reset, which is what the
    cost accounting reports.
    """

    def __init__(self, layers: list[Layer], seed: int = 0):
        self.layers = layers
        self.mode = "train"
        self.rng = np.random.default_rng(seed)
        self.sample_passes = 0

    def train(self) -> "Model":
        self.mode = "train"
        return self

    def eval(self) -> "Model":
        self.mode = "eval"
        return self

    def reseed(self, seed: int) -> None:
        self.rng = np.random.default_rng(seed)

    def forward(self, x, force_dropout: bool = False) -> Tensor:
        out = x if isinstance(x, Tensor) else Tensor(x)
        self.sample_passes += out.shape[0] if out.ndim > 0 else 1
        ctx = Context(self.mode == "train", force_dropout, self.rng)
        for i, layer in enumerate(self.layers):
            try:
                out = layer.forward(out, ctx)
            except ShapeError as err:
                raise ShapeError(f"layer {i} ({layer.kind}): {err}") from err
        return out

    def __call__(self, x, **kwargs) -> Tensor:
        return self.forward(x, **kwargs)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            for name, p in layer.parameters().items():
                key = f"{i}.{name}"
                if key in params:
                    raise ValueError(f"duplicate parameter name {key}")
                params[key] = p
        return params

    def buffers(self) -> dict[str, np.ndarray]:
        bufs: dict[str, np.ndarray] = {}
        for i, layer in enumerate(self.layers):
            for name, b in layer.buffers().items():
                bufs[f"{i}.{name}"] = b
        return bufs

    def n_parameters(self) -> int:
        return sum(p.size for p in self.parameters().values())

    def spec(self) -> list[dict]:
        return [layer.spec() for layer in self.layers]

    @classmethod
    def from_spec(cls, spec: list[dict], seed: int = 0,
                  init_rng: np.random.Generator | None = None) -> "Model":
        return cls([layer_from_spec(s, init_rng) for s in spec], seed=seed)


# -- checkpoint io -------------------------------------------------------------

def _encode_array(arr: np.ndarray) -> str:
    return " ".join(v.hex() for v in arr.reshape(-1).tolist())

def _decode_array(text: str, shape: tuple[int, ...]) -> np.ndarray:
    values = [float.fromhex(tok) for tok in text.split()]
    return np.array(values, dtype=np.float64).reshape(shape)


def save_model(model: Model, path, header: dict | None = None) -> None:
    """Write a bit-exact text checkpoint (layer specs + parameters + buffers)."""
    lines = [CHECKPOINT_MAGIC]
    lines.append("spec " + json.dumps(model.spec(), separators=(",", ":")))
    lines.append("header " + json.dumps(header or {}, sort_keys=True,
                                        separators=(",", ":")))
    for section, items in (("param", model.parameters().items()),
                           ("buffer", model.buffers().items())):
        for name, value in items:
            arr = value.data if isinstance(value, Tensor) else value
            dims = "x".join(str(d) for d in arr.shape) or "scalar"
            lines.append(f"{section} {name} {dims}")
            lines.append(_encode_array(arr))
    lines.append("end")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path, seed: int = 0) -> tuple[Model, dict]:
    """Rebuild a Model from a checkpoint; returns (model, header)."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a model checkpoint (bad magic line)")
    if not lines[1].startswith("spec "):
        raise ValueError(f"{path}: missing spec line")
    model = Model.from_spec(json.loads(lines[1][5:]), seed=seed)
    header = json.loads(lines[2][7:]) if lines[2].startswith("header ") else {}

    params = model.parameters()
    buffers = model.buffers()
    i = 3 if lines[2].startswith("header ") else 2
    layer_index = {}
    for idx, layer in enumerate(model.layers):
        layer_index[str(idx)] = layer
    while i < len(lines) and lines[i] != "end":
        section, name, dims = lines[i].split(" ", 2)
        shape = () if dims == "scalar" else tuple(int(d) for d in dims.split("x"))
        arr = _decode_array(lines[i + 1], shape)
        if section == "param":
            if name not in params:
                raise ValueError(f"{path}: unknown parameter {name}")
            params[name].data = arr
        elif section == "buffer":
            if name not in buffers:
                raise ValueError(f"{path}: unknown buffer {name}")
            _assign_buffer(model, name, arr)
        else:
            raise ValueError(f"{path}: unexpected section {section!r}")
        i += 2
    return model, header


def _assign_buffer(model: Model, dotted: str, value: np.ndarray) -> None:
    parts = dotted.split(".")
    layer: Layer = model.layers[int(parts[0])]
    rest = parts[1:]
    while rest and rest[0] == "inner":
        layer = layer.inner[int(rest[1])]
        rest = rest[2:]
    layer.set_buffer(rest[0], value)
