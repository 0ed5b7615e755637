"""Mini-batch training loop: Adam, reduce-on-plateau LR, early stopping with
best-parameter restore."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from amclab.nn import tensor as T
from amclab.nn.layers import Network
from amclab.nn.optim import Adam


class TrainingDiverged(RuntimeError):
    """Loss became non-finite."""


@dataclass
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 500
    patience: int = 50          # early stopping on validation loss
    lr: float = 1e-3
    lr_patience: int = 5        # halve LR after this many non-improving epochs
    lr_factor: float = 0.5
    lr_floor: float = 1e-5
    seed: int = 0
    loss: str = "cross_entropy"  # or "mse"
    verbose: bool = False


@dataclass
class TrainResult:
    epochs: int
    best_epoch: int
    best_val_loss: float
    curve: list[dict] = field(default_factory=list)


def _loss_fn(kind: str):
    if kind == "cross_entropy":
        return T.cross_entropy
    if kind == "mse":
        return T.mse
    raise ValueError(f"unknown loss: {kind!r}")


def evaluate_loss(net: Network, x: np.ndarray, y: np.ndarray,
                  loss_kind: str = "cross_entropy",
                  batch_size: int = 256) -> float:
    loss = _loss_fn(loss_kind)
    total = 0.0
    for i in range(0, x.shape[0], batch_size):
        xb = x[i:i + batch_size]
        yb = y[i:i + batch_size]
        out = net.forward(xb, train=False)
        total += float(loss(out, yb.astype(out.dtype)).data) * xb.shape[0]
    return total / x.shape[0]


def fit(net: Network, x_train: np.ndarray, y_train: np.ndarray,
        x_val: np.ndarray, y_val: np.ndarray,
        cfg: TrainConfig = TrainConfig(),
        params: list | None = None) -> TrainResult:
    """Minimize the batch-mean loss; returns with best-validation parameters
    restored.  ``patience == 0`` stops after the first non-improving epoch.
    ``params`` restricts optimization to a subset (frozen-encoder training)."""
    loss_fn = _loss_fn(cfg.loss)
    params = net.parameters() if params is None else params
    opt = Adam(params, lr=cfg.lr)
    shuffle_rng = np.random.default_rng([cfg.seed, 0x5A])
    drop_rng = np.random.default_rng([cfg.seed, 0xD0])

    x_train = np.ascontiguousarray(x_train, dtype=net.dtype)
    y_train = np.ascontiguousarray(y_train, dtype=net.dtype)
    x_val = np.ascontiguousarray(x_val, dtype=net.dtype)
    y_val = np.ascontiguousarray(y_val, dtype=net.dtype)

    best_val = np.inf
    best_epoch = -1
    best_params = net.get_flat_params().copy()
    bad_epochs = 0
    lr_bad_epochs = 0
    curve = []

    n = x_train.shape[0]
    epoch = 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        train_loss = 0.0
        for i in range(0, n, cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]
            out = net.forward(xb, train=True, rng=drop_rng)
            loss = loss_fn(out, yb)
            lval = float(loss.data)
            if not np.isfinite(lval):
                raise TrainingDiverged(
                    f"training loss became {lval} at epoch {epoch}")
            train_loss += lval * xb.shape[0]
            opt.zero_grad()
            loss.backward()
            opt.step()
        train_loss /= n

        val_loss = evaluate_loss(net, x_val, y_val, cfg.loss)
        if not np.isfinite(val_loss):
            raise TrainingDiverged(
                f"validation loss became {val_loss} at epoch {epoch}")
        curve.append({"epoch": epoch, "train_loss": train_loss,
                      "val_loss": val_loss, "lr": opt.lr})
        if cfg.verbose:
            print(f"epoch {epoch:4d}  train {train_loss:.4f}  "
                  f"val {val_loss:.4f}  lr {opt.lr:.2e}")

        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_epoch = epoch
            best_params = net.get_flat_params().copy()
            bad_epochs = 0
            lr_bad_epochs = 0
        else:
            bad_epochs += 1
            lr_bad_epochs += 1
            if lr_bad_epochs >= cfg.lr_patience and opt.lr > cfg.lr_floor:
                opt.lr = max(opt.lr * cfg.lr_factor, cfg.lr_floor)
                lr_bad_epochs = 0
            if bad_epochs > cfg.patience:
                break

    net.set_flat_params(best_params)
    return TrainResult(epochs=epoch, best_epoch=best_epoch,
                       best_val_loss=float(best_val), curve=curve)
