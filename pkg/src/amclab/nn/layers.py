"""Layer graph: declarative specs plus runnable layer objects.

A network is a flat sequence of :class:`LayerSpec` entries.  Learnable kinds
are ``dense``, ``conv2d``, ``lstm``; compute kinds are ``relu``, ``softmax``,
``dropout``, ``flatten``; layout adapters ``iq_to_image`` (length x 2 matrix
-> one-channel 2 x length image) and ``maps_to_sequence`` (feature maps ->
timestep sequence) wire convolutional and recurrent stages together.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from amclab.nn import tensor as T
from amclab.nn.tensor import Tensor

LEARNABLE_KINDS = ("dense", "conv2d", "lstm")
KINDS = LEARNABLE_KINDS + (
    "relu", "softmax", "dropout", "flatten", "iq_to_image", "maps_to_sequence")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    hyper: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind: {self.kind!r}")
        if self.kind == "dropout" and not 0.0 <= self.hyper.get("rate", 0.0) < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")

    def to_json(self) -> dict:
        return {"kind": self.kind, **self.hyper}

    @classmethod
    def from_json(cls, obj: dict) -> "LayerSpec":
        obj = dict(obj)
        kind = obj.pop("kind")
        return cls(kind, obj)


def dense(units: int) -> LayerSpec:
    return LayerSpec("dense", {"units": int(units)})


def conv(filters: int, kh: int, kw: int) -> LayerSpec:
    return LayerSpec("conv2d", {"filters": int(filters), "kh": int(kh), "kw": int(kw)})


def lstm_layer(units: int, pool: str = "last") -> LayerSpec:
    return LayerSpec("lstm", {"units": int(units), "pool": pool})


def drop(rate: float = 0.2) -> LayerSpec:
    return LayerSpec("dropout", {"rate": float(rate)})


def infer_shapes(specs: list[LayerSpec], input_shape: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Per-sample output shape after every layer; raises if shapes don't compose."""
    shape = tuple(input_shape)
    shapes = []
    for spec in specs:
        k, h = spec.kind, spec.hyper
        if k == "iq_to_image":
            if len(shape) != 2 or shape[1] != 2:
                raise ValueError(f"iq_to_image expects (length, 2), got {shape}")
            shape = (1, 2, shape[0])
        elif k == "conv2d":
            c, hh, ww = shape
            kh, kw = h["kh"], h["kw"]
            if kh > hh or kw > ww:
                raise ValueError(f"kernel {kh}x{kw} larger than input {hh}x{ww}")
            shape = (h["filters"], hh - kh + 1, ww - kw + 1)
        elif k == "maps_to_sequence":
            f, hh, ww = shape
            shape = (hh * ww, f)
        elif k == "lstm":
            if len(shape) != 2:
                raise ValueError(f"lstm expects (steps, width), got {shape}")
            shape = (h["units"],)
        elif k == "flatten":
            shape = (int(np.prod(shape)),)
        elif k == "dense":
            if len(shape) != 1:
                raise ValueError(f"dense expects a flat input, got {shape}")
            shape = (h["units"],)
        else:  # relu / softmax / dropout keep shape
            pass
        shapes.append(shape)
    return shapes


class _Layer:
    spec: LayerSpec

    def params(self) -> list[Tensor]:
        return []

    def forward(self, x: Tensor, train: bool, rng) -> Tensor:
        raise NotImplementedError


class _Dense(_Layer):
    def __init__(self, spec, in_dim, rng, dtype):
        self.spec = spec
        units = spec.hyper["units"]
        bound = np.sqrt(1.0 / in_dim)
        self.w = Tensor(rng.uniform(-bound, bound, (in_dim, units)).astype(dtype),
                        requires_grad=True)
        self.b = Tensor(np.zeros(units, dtype=dtype), requires_grad=True)

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train, rng):
        return T.add_bias(T.matmul(x, self.w), self.b)


class _Conv2D(_Layer):
    def __init__(self, spec, in_shape, rng, dtype):
        self.spec = spec
        c = in_shape[0]
        f, kh, kw = spec.hyper["filters"], spec.hyper["kh"], spec.hyper["kw"]
        fan_in = c * kh * kw
        bound = np.sqrt(1.0 / fan_in)
        self.w = Tensor(rng.uniform(-bound, bound, (f, c, kh, kw)).astype(dtype),
                        requires_grad=True)
        self.b = Tensor(np.zeros(f, dtype=dtype), requires_grad=True)

    def params(self):
        return [self.w, self.b]

    def forward(self, x, train, rng):
        return T.conv2d(x, self.w, self.b)


class _LSTM(_Layer):
    def __init__(self, spec, in_shape, rng, dtype):
        self.spec = spec
        d = in_shape[1]
        hid = spec.hyper["units"]
        bx = np.sqrt(1.0 / d)
        bh = np.sqrt(1.0 / hid)
        self.wx = Tensor(rng.uniform(-bx, bx, (d, 4 * hid)).astype(dtype),
                         requires_grad=True)
        self.wh = Tensor(rng.uniform(-bh, bh, (hid, 4 * hid)).astype(dtype),
                         requires_grad=True)
        self.b = Tensor(np.zeros(4 * hid, dtype=dtype), requires_grad=True)

    def params(self):
        return [self.wx, self.wh, self.b]

    def forward(self, x, train, rng):
        return T.lstm(x, self.wx, self.wh, self.b,
                      pool=self.spec.hyper.get("pool", "last"))


class _ReLU(_Layer):
    def __init__(self, spec):
        self.spec = spec

    def forward(self, x, train, rng):
        return T.relu(x)


class _Softmax(_Layer):
    def __init__(self, spec):
        self.spec = spec

    def forward(self, x, train, rng):
        return T.softmax(x)


class _Dropout(_Layer):
    def __init__(self, spec):
        self.spec = spec
        self.rate = spec.hyper["rate"]

    def forward(self, x, train, rng):
        if not train or self.rate == 0.0:
            return x
        return T.dropout(x, self.rate, rng)


class _Flatten(_Layer):
    def __init__(self, spec):
        self.spec = spec

    def forward(self, x, train, rng):
        return T.reshape(x, (x.shape[0], -1))


class _IQToImage(_Layer):
    def __init__(self, spec):
        self.spec = spec

    def forward(self, x, train, rng):
        # (B, length, 2) -> (B, 1, 2, length)
        b, n, _ = x.shape
        swapped = _transpose(x, (0, 2, 1))
        return T.reshape(swapped, (b, 1, 2, n))


class _MapsToSequence(_Layer):
    def __init__(self, spec):
        self.spec = spec

    def forward(self, x, train, rng):
        # (B, F, H, W) -> (B, H*W, F)
        b, f, h, w = x.shape
        flat = T.reshape(x, (b, f, h * w))
        return _transpose(flat, (0, 2, 1))


def _transpose(x: Tensor, axes) -> Tensor:
    out_data = np.ascontiguousarray(x.data.transpose(axes))
    inv = np.argsort(axes)

    def backward(g):
        x._accumulate(g.transpose(inv))

    out = Tensor(out_data)
    if x.requires_grad or x._parents:
        out.requires_grad = True
        out._parents = (x,)
        out._backward = backward
    return out


_BUILDERS = {
    "relu": _ReLU,
    "softmax": _Softmax,
    "dropout": _Dropout,
    "flatten": _Flatten,
    "iq_to_image": _IQToImage,
    "maps_to_sequence": _MapsToSequence,
}


class Network:
    """Runnable layer stack built from specs."""

    def __init__(self, layers: list[_Layer], specs: list[LayerSpec],
                 input_shape: tuple[int, ...], dtype):
        self.layers = layers
        self.specs = specs
        self.input_shape = input_shape
        self.dtype = dtype

    def forward(self, x, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        if not isinstance(x, Tensor):
            x = Tensor(np.asarray(x, dtype=self.dtype))
        out = x
        for layer in self.layers:
            out = layer.forward(out, train, rng)
        return out

    def parameters(self) -> list[Tensor]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def num_params(self) -> int:
        return sum(p.data.size for p in self.parameters())

    def get_flat_params(self) -> np.ndarray:
        parts = [p.data.ravel() for p in self.parameters()]
        return np.concatenate(parts) if parts else np.empty(0, dtype=self.dtype)

    def set_flat_params(self, flat: np.ndarray):
        i = 0
        for p in self.parameters():
            n = p.data.size
            p.data = flat[i:i + n].reshape(p.data.shape).astype(self.dtype)
            i += n
        if i != flat.size:
            raise ValueError("flat parameter vector size mismatch")


def build_network(specs: list[LayerSpec], input_shape: tuple[int, ...],
                  seed: int = 0, dtype=np.float32) -> Network:
    """Instantiate layers with fan-in-scaled uniform init, seeded per layer."""
    shapes = infer_shapes(specs, input_shape)
    layers: list[_Layer] = []
    prev = tuple(input_shape)
    for li, (spec, out_shape) in enumerate(zip(specs, shapes)):
        rng = np.random.default_rng([seed, li])
        if spec.kind == "dense":
            layers.append(_Dense(spec, prev[0], rng, dtype))
        elif spec.kind == "conv2d":
            layers.append(_Conv2D(spec, prev, rng, dtype))
        elif spec.kind == "lstm":
            layers.append(_LSTM(spec, prev, rng, dtype))
        else:
            layers.append(_BUILDERS[spec.kind](spec))
        prev = out_shape
    return Network(layers, list(specs), tuple(input_shape), dtype)
