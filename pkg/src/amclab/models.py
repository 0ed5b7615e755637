"""Trained classifier bundle: layer stack, parameters, input domain, and the
stored feature standardization, plus the AMCM checkpoint format."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from amclab.nn import Tensor, build_network, fit, TrainConfig
from amclab.nn.layers import LayerSpec, Network
from amclab.nn.tensor import cross_entropy, scale_shift
from amclab.signals import Domain

_CKPT_MAGIC = b"AMCM"
_CKPT_VERSION = 1

# frequency-domain inputs span orders of magnitude; training-set statistics
# are stored with the model and applied inside the forward pass
_STD_FLOOR = 1e-8


@dataclass
class TrainedModel:
    arch_id: str
    network: Network
    input_domain: Domain
    class_names: list[str]
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def specs(self) -> list[LayerSpec]:
        return self.network.specs

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def _forward(self, x: Tensor, train: bool = False, rng=None) -> Tensor:
        if self.norm_mean is not None:
            scale = (1.0 / self.norm_std).astype(self.network.dtype)
            shift = (-self.norm_mean / self.norm_std).astype(self.network.dtype)
            x = scale_shift(x, scale, shift)
        return self.network.forward(x, train=train, rng=rng)

    def predict_proba(self, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
        """Class probabilities for (N, length, 2) matrices (dropout off)."""
        x = np.asarray(x, dtype=self.network.dtype)
        single = x.ndim == 2
        if single:
            x = x[None]
        outs = []
        for i in range(0, x.shape[0], batch_size):
            xb = Tensor(x[i:i + batch_size])
            outs.append(self._forward(xb).data)
        probs = np.concatenate(outs, axis=0)
        return probs[0] if single else probs

    def predict(self, x: np.ndarray) -> np.ndarray:
        probs = self.predict_proba(x)
        return np.argmax(probs, axis=-1)

    def input_gradient(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient of the per-sample cross entropy w.r.t. the raw input matrix.

        Accepts a single (length, 2) matrix or a batch; per-sample losses are
        summed so each row of the result is that sample's own gradient.
        Dropout is disabled.
        """
        x = np.asarray(x, dtype=self.network.dtype)
        y = np.asarray(y, dtype=self.network.dtype)
        single = x.ndim == 2
        if single:
            x = x[None]
            y = y[None]
        xt = Tensor(x.copy(), requires_grad=True)
        probs = self._forward(xt)
        loss = cross_entropy(probs, y, reduction="sum")
        loss.backward()
        grad = xt.grad.astype(np.float64)
        return grad[0] if single else grad

    def get_flat_params(self) -> np.ndarray:
        return self.network.get_flat_params()

    def set_flat_params(self, flat: np.ndarray):
        self.network.set_flat_params(flat)

    def params_hash(self) -> str:
        return hashlib.sha256(
            self.network.get_flat_params().astype("<f4").tobytes()).hexdigest()

    def save(self, path: str | Path) -> tuple[Path, Path]:
        path = Path(path)
        json_path = path.with_suffix(".json")
        bin_path = path.with_suffix(".bin")
        params = self.network.get_flat_params().astype("<f4")
        with open(bin_path, "wb") as f:
            f.write(_CKPT_MAGIC)
            f.write(struct.pack("<B", _CKPT_VERSION))
            f.write(params.tobytes())
        manifest = {
            "schema_version": _CKPT_VERSION,
            "arch_id": self.arch_id,
            "layers": [s.to_json() for s in self.network.specs],
            "input_shape": list(self.network.input_shape),
            "input_domain": self.input_domain.value,
            "class_names": self.class_names,
            "norm_mean": None if self.norm_mean is None else self.norm_mean.ravel().tolist(),
            "norm_std": None if self.norm_std is None else self.norm_std.ravel().tolist(),
            "num_params": int(params.size),
            "meta": _jsonable(self.meta),
            "blob": bin_path.name,
        }
        with open(json_path, "w") as f:
            json.dump(manifest, f, indent=1, sort_keys=True)
            f.write("\n")
        return json_path, bin_path

    @classmethod
    def load(cls, path: str | Path) -> "TrainedModel":
        path = Path(path)
        json_path = path.with_suffix(".json")
        with open(json_path) as f:
            manifest = json.load(f)
        if manifest["schema_version"] != _CKPT_VERSION:
            raise ValueError("unsupported checkpoint schema")
        specs = [LayerSpec.from_json(s) for s in manifest["layers"]]
        input_shape = tuple(manifest["input_shape"])
        net = build_network(specs, input_shape, seed=0)
        bin_path = json_path.parent / manifest["blob"]
        with open(bin_path, "rb") as f:
            magic = f.read(4)
            if magic != _CKPT_MAGIC:
                raise ValueError(f"bad checkpoint magic: {magic!r}")
            (version,) = struct.unpack("<B", f.read(1))
            if version != _CKPT_VERSION:
                raise ValueError(f"unsupported checkpoint version: {version}")
            flat = np.frombuffer(f.read(), dtype="<f4")
        if flat.size != manifest["num_params"]:
            raise ValueError("checkpoint parameter blob size mismatch")
        net.set_flat_params(flat)
        shape2 = (input_shape[0], 2)
        mean = manifest["norm_mean"]
        std = manifest["norm_std"]
        return cls(
            arch_id=manifest["arch_id"],
            network=net,
            input_domain=Domain(manifest["input_domain"]),
            class_names=list(manifest["class_names"]),
            norm_mean=None if mean is None else np.asarray(mean).reshape(shape2),
            norm_std=None if std is None else np.asarray(std).reshape(shape2),
            meta=manifest.get("meta", {}),
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def standardization_stats(x_train: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-feature mean/std over the training set (std floored at 1e-8)."""
    mean = x_train.mean(axis=0)
    std = np.maximum(x_train.std(axis=0), _STD_FLOOR)
    return mean.astype(np.float64), std.astype(np.float64)


def train_model(arch_id: str, specs: list[LayerSpec],
                x_train: np.ndarray, y_train: np.ndarray,
                x_val: np.ndarray, y_val: np.ndarray,
                domain: Domain, class_names: list[str],
                cfg: TrainConfig = TrainConfig(),
                standardize: bool | None = None,
                dtype=np.float32, restarts: int = 1) -> TrainedModel:
    """Train a stack on (N, length, 2) matrices.

    Inputs are standardized per feature by default (training-set statistics,
    stored with the model): frequency-domain magnitudes span orders of
    magnitude, and unit-energy waveforms sit at amplitudes too small for
    healthy LSTM gate dynamics.

    ``restarts`` repeats training from seeds cfg.seed .. cfg.seed+restarts-1
    and keeps the run with the highest validation accuracy, breaking ties by
    validation loss (deterministic model selection for optimization-fragile
    stacks; accuracy is the selection metric because low cross entropy on a
    small validation split can coexist with a worse decision boundary).
    """
    if standardize is None:
        standardize = True
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    length = x_train.shape[1]

    mean = std = None
    if standardize:
        mean, std = standardization_stats(x_train)
    xt, xv = x_train, x_val
    if standardize:
        xt = (x_train - mean) / std
        xv = (x_val - mean) / std
        # the affine stats are baked into fit inputs, so train the bare
        # network and keep the stats only in the model wrapper

    best = None
    best_key = None
    for j in range(restarts):
        seed = cfg.seed + j
        run_cfg = cfg if seed == cfg.seed else \
            TrainConfig(**{**cfg.__dict__, "seed": seed})
        net = build_network(specs, (length, 2), seed=seed, dtype=dtype)
        result = fit(net, xt, y_train, xv, y_val, run_cfg)
        if cfg.loss == "cross_entropy" and restarts > 1:
            pred = np.argmax(net.forward(xv.astype(dtype)).data, axis=-1)
            val_acc = float(np.mean(pred == np.argmax(y_val, axis=-1)))
        else:
            val_acc = 0.0
        key = (-val_acc, result.best_val_loss)
        if best is None or key < best_key:
            best = (net, result, seed, val_acc)
            best_key = key
    net, result, seed, val_acc = best

    model = TrainedModel(
        arch_id=arch_id,
        network=net,
        input_domain=domain,
        class_names=list(class_names),
        norm_mean=mean,
        norm_std=std,
        meta={"seed": seed},
    )
    model.meta.update({
        "epochs": result.epochs,
        "best_epoch": result.best_epoch,
        "best_val_loss": result.best_val_loss,
        "curve": result.curve,
        "batch_size": cfg.batch_size,
        "patience": cfg.patience,
        "restarts": restarts,
        "val_accuracy": val_acc,
    })
    return model
