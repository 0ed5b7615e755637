"""scikit-learn style estimator fronts so the classifiers compose with
pipelines and model selection tooling.

X is always an (N, length, 2) float array of real matrix views; y is an
integer class vector.  The heavy lifting stays in :mod:`amclab.models` and
:mod:`amclab.defenses`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from amclab import architectures
from amclab.defenses import ade_construct, ade_predict_proba
from amclab.models import train_model
from amclab.nn import TrainConfig
from amclab.signals import Domain, LabeledDataset


def check_matrix_input(X) -> np.ndarray:
    """Validate an (N, length, 2) real matrix batch."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 3 or X.shape[2] != 2:
        raise ValueError(f"expected X of shape (N, length, 2), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains non-finite entries")
    return X


def _check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim == 2:
        y = np.argmax(y, axis=1)
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    return y.astype(np.int64)


def _onehot(y: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((y.shape[0], c), dtype=np.float32)
    out[np.arange(y.shape[0]), y] = 1.0
    return out


def _holdout_split(n: int, frac: float, seed: int):
    rng = np.random.default_rng([seed, 0x7E])
    order = rng.permutation(n)
    n_val = max(1, int(frac * n))
    return order[n_val:], order[:n_val]


class AMCClassifier(BaseEstimator, ClassifierMixin):
    """One deep modulation classifier behind the fit/predict interface.

    Parameters mirror the training knobs: architecture id, input domain
    (controls the stored feature standardization), width scale, and the
    optimizer/early-stopping settings.
    """

    def __init__(self, arch: str = "CNN", domain: str = "time",
                 width_scale: float = 1.0, batch_size: int = 64,
                 max_epochs: int = 500, patience: int = 50,
                 lr: float = 1e-3, seed: int = 0,
                 val_fraction: float = 0.15):
        self.arch = arch
        self.domain = domain
        self.width_scale = width_scale
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.lr = lr
        self.seed = seed
        self.val_fraction = val_fraction

    def _train_cfg(self) -> TrainConfig:
        return TrainConfig(batch_size=self.batch_size,
                           max_epochs=self.max_epochs,
                           patience=self.patience, lr=self.lr,
                           seed=self.seed)

    def fit(self, X, y, X_val=None, y_val=None):
        X = check_matrix_input(X)
        y = _check_labels(y, X.shape[0])
        self.classes_ = np.unique(y)
        c = int(self.classes_.size)
        if c < 2:
            raise ValueError("need at least 2 classes")
        onehot = _onehot(np.searchsorted(self.classes_, y), c)

        if X_val is None:
            tr, va = _holdout_split(X.shape[0], self.val_fraction, self.seed)
            xt, yt = X[tr], onehot[tr]
            xv, yv = X[va], onehot[va]
        else:
            X_val = check_matrix_input(X_val)
            y_val = _check_labels(y_val, X_val.shape[0])
            xt, yt = X, onehot
            xv = X_val
            yv = _onehot(np.searchsorted(self.classes_, y_val), c)

        domain = Domain(self.domain)
        specs = architectures.build(self.arch, X.shape[1], c, self.width_scale)
        self.model_ = train_model(
            self.arch, specs, xt, yt, xv, yv, domain,
            [str(cl) for cl in self.classes_], self._train_cfg())
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "model_")
        return self.model_.predict_proba(check_matrix_input(X))

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=-1)]


class ADEClassifier(BaseEstimator, ClassifierMixin):
    """Ensemble defense behind fit/predict.

    ``fit`` consumes time-domain matrices, derives the frequency-domain twin
    set internally, and trains 2M noise-augmented members; ``predict``
    averages all member distributions.
    """

    def __init__(self, members: tuple = ("CNN", "CRNN", "CNN", "CRNN"),
                 k: int = 30, sigma_iq: float = 0.001,
                 sigma_dft: float = 0.005, width_scale: float = 1.0,
                 batch_size: int = 64, max_epochs: int = 500,
                 patience: int = 50, lr: float = 1e-3, seed: int = 0,
                 val_fraction: float = 0.15, include_clean: bool = False):
        self.members = members
        self.k = k
        self.sigma_iq = sigma_iq
        self.sigma_dft = sigma_dft
        self.width_scale = width_scale
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.lr = lr
        self.seed = seed
        self.val_fraction = val_fraction
        self.include_clean = include_clean

    def fit(self, X, y):
        from amclab.spectral import dft_matrix

        X = check_matrix_input(X)
        y = _check_labels(y, X.shape[0])
        self.classes_ = np.unique(y)
        c = int(self.classes_.size)
        codes = np.searchsorted(self.classes_, y)
        onehot = _onehot(codes, c)

        tr, va = _holdout_split(X.shape[0], self.val_fraction, self.seed)
        split = np.empty(X.shape[0], dtype="U8")
        split[tr] = "train"
        split[va] = "val"
        names = [str(cl) for cl in self.classes_]
        samples = X[:, :, 0] + 1j * X[:, :, 1]
        ds_time = LabeledDataset(samples=samples, labels=onehot,
                                 class_names=names, split=split,
                                 domain=Domain.TIME, seed=self.seed)
        xf = dft_matrix(X)
        ds_freq = LabeledDataset(samples=xf[:, :, 0] + 1j * xf[:, :, 1],
                                 labels=onehot, class_names=names,
                                 split=split, domain=Domain.FREQUENCY,
                                 seed=self.seed)
        cfg = TrainConfig(batch_size=self.batch_size,
                          max_epochs=self.max_epochs,
                          patience=self.patience, lr=self.lr, seed=self.seed)
        self.ensemble_ = ade_construct(
            ds_time, ds_freq, list(self.members), self.k,
            self.sigma_iq, self.sigma_dft, self.width_scale, cfg,
            master_seed=self.seed, include_clean=self.include_clean)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "ensemble_")
        return ade_predict_proba(self.ensemble_, check_matrix_input(X))

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=-1)]
