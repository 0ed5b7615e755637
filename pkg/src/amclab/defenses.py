"""Assorted deep ensemble defense and the two baselines.

The ensemble holds M time-domain and M frequency-domain members trained on
Gaussian-noise-augmented copies of the training set; deployment averages the
2M probability vectors and takes the argmax (lowest class index on ties).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from amclab import architectures
from amclab.models import TrainedModel, train_model
from amclab.nn import TrainConfig, build_network, fit
from amclab.signals import Domain, LabeledDataset, Split
from amclab.spectral import dft_matrix


@dataclass
class Ensemble:
    f_models: list[TrainedModel]       # time domain
    g_models: list[TrainedModel]       # frequency domain
    k: int
    sigma_iq: float
    sigma_dft: float
    arch_ids: list[str]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.f_models) != len(self.g_models) or not self.f_models:
            raise ValueError("need equal, nonzero counts of time and "
                             "frequency members")
        for m in self.f_models:
            if m.input_domain is not Domain.TIME:
                raise ValueError("f members must be time-domain")
        for m in self.g_models:
            if m.input_domain is not Domain.FREQUENCY:
                raise ValueError("g members must be frequency-domain")

    @property
    def num_members(self) -> int:
        return len(self.f_models)

    @property
    def class_names(self) -> list[str]:
        return self.f_models[0].class_names


def augment_gaussian(x: np.ndarray, y: np.ndarray, k: int, sigma: float,
                     rng: np.random.Generator,
                     include_clean: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """k noisy copies of every sample (noise i.i.d. per matrix entry).

    The clean originals are not re-added unless ``include_clean`` is set.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    copies_x = []
    copies_y = []
    if include_clean:
        copies_x.append(np.asarray(x, dtype=np.float64))
        copies_y.append(y)
    for _ in range(k):
        noise = rng.normal(0.0, sigma, size=x.shape) if sigma > 0 else 0.0
        copies_x.append(x + noise)
        copies_y.append(y)
    return np.concatenate(copies_x, axis=0), np.concatenate(copies_y, axis=0)


def _train_val(ds: LabeledDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    tr = ds.subset(Split.TRAIN)
    va = ds.subset(Split.VAL)
    return tr.matrices().astype(np.float64), tr.labels, \
        va.matrices().astype(np.float64), va.labels


def ade_construct(train_iq: LabeledDataset, train_dft: LabeledDataset,
                  arch_ids: list[str], k: int,
                  sigma_iq: float, sigma_dft: float,
                  width_scale: float = 1.0,
                  train_cfg: TrainConfig = TrainConfig(),
                  master_seed: int = 0,
                  include_clean: bool = False,
                  restarts: int = 1) -> Ensemble:
    """Train the 2M ensemble members on noise-augmented training sets.

    Member seeds derive from ``master_seed`` plus the member index, giving
    reproducible diversity; ``restarts`` fans each member out over that many
    consecutive seeds and keeps the best validation run, exactly as for
    single models.  Validation splits stay clean.
    """
    if train_iq.domain is not Domain.TIME or train_dft.domain is not Domain.FREQUENCY:
        raise ValueError("expected a time-domain and a frequency-domain dataset")
    xt, yt, xv, yv = _train_val(train_iq)
    xft, yft, xfv, yfv = _train_val(train_dft)
    length = train_iq.length
    c = train_iq.num_classes

    f_models, g_models = [], []
    for i, arch_id in enumerate(arch_ids):
        specs = architectures.build(arch_id, length, c, width_scale)
        noise_rng = np.random.default_rng([master_seed, i, 0xAE])
        xa, ya = augment_gaussian(xt, yt, k, sigma_iq, noise_rng,
                                  include_clean)
        xfa, yfa = augment_gaussian(xft, yft, k, sigma_dft, noise_rng,
                                    include_clean)
        cfg_f = TrainConfig(**{**train_cfg.__dict__,
                               "seed": master_seed * 1000 + 2 * i})
        cfg_g = TrainConfig(**{**train_cfg.__dict__,
                               "seed": master_seed * 1000 + 2 * i + 1})
        try:
            f = train_model(arch_id, specs, xa, ya, xv, yv, Domain.TIME,
                            train_iq.class_names, cfg_f, restarts=restarts)
            g = train_model(arch_id, specs, xfa, yfa, xfv, yfv,
                            Domain.FREQUENCY, train_dft.class_names, cfg_g,
                            restarts=restarts)
        except Exception as exc:
            raise RuntimeError(
                f"ensemble member {i} ({arch_id}) failed to train") from exc
        f.meta.update({"member": i, "k": k, "sigma": sigma_iq})
        g.meta.update({"member": i, "k": k, "sigma": sigma_dft})
        f_models.append(f)
        g_models.append(g)

    return Ensemble(f_models, g_models, k=k, sigma_iq=sigma_iq,
                    sigma_dft=sigma_dft, arch_ids=list(arch_ids),
                    meta={"master_seed": master_seed,
                          "width_scale": width_scale,
                          "include_clean": include_clean})


def ade_predict_proba(ensemble: Ensemble, x_time: np.ndarray) -> np.ndarray:
    """Averaged 2M-member distribution for (N, length, 2) time matrices.

    Members stack in fixed order (time members 1..M, then frequency members)
    and the frequency members consume the DFT of the input.
    """
    x_time = np.asarray(x_time, dtype=np.float64)
    single = x_time.ndim == 2
    if single:
        x_time = x_time[None]
    x_freq = dft_matrix(x_time)
    rows = [m.predict_proba(x_time) for m in ensemble.f_models]
    rows += [m.predict_proba(x_freq) for m in ensemble.g_models]
    stacked = np.stack(rows, axis=0)          # (2M, N, C)
    avg = stacked.mean(axis=0)
    return avg[0] if single else avg


def ade_predict(ensemble: Ensemble, x_time: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray]:
    """(argmax class, averaged distribution); ties break to the lowest index."""
    avg = ade_predict_proba(ensemble, x_time)
    return np.argmax(avg, axis=-1), avg


def average_member_rows(rows: np.ndarray) -> tuple[int, np.ndarray]:
    """Deployment arithmetic on a pre-built (2M, C) prediction stack."""
    rows = np.asarray(rows, dtype=np.float64)
    avg = rows.mean(axis=0)
    return int(np.argmax(avg)), avg


def save_ensemble(ensemble: Ensemble, out_dir) -> "Path":
    """Manifest JSON plus one checkpoint per member."""
    from pathlib import Path
    import json

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    members = []
    for tag, models in (("f", ensemble.f_models), ("g", ensemble.g_models)):
        for i, model in enumerate(models):
            stem = f"member_{tag}{i}_{model.arch_id.lower()}"
            model.save(out_dir / stem)
            members.append({"tag": tag, "index": i, "arch": model.arch_id,
                            "checkpoint": stem})
    manifest = {
        "k": ensemble.k,
        "sigma_iq": ensemble.sigma_iq,
        "sigma_dft": ensemble.sigma_dft,
        "arch_ids": ensemble.arch_ids,
        "members": members,
        "meta": ensemble.meta,
    }
    path = out_dir / "ensemble.json"
    with open(path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return path


def load_ensemble(manifest_path) -> Ensemble:
    from pathlib import Path
    import json

    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    f_models, g_models = [], []
    for member in manifest["members"]:
        model = TrainedModel.load(manifest_path.parent / member["checkpoint"])
        (f_models if member["tag"] == "f" else g_models).append(model)
    return Ensemble(
        f_models=f_models,
        g_models=g_models,
        k=manifest["k"],
        sigma_iq=manifest["sigma_iq"],
        sigma_dft=manifest["sigma_dft"],
        arch_ids=list(manifest["arch_ids"]),
        meta=manifest.get("meta", {}),
    )


def gaussian_smoothing_train(arch_id: str, train_set: LabeledDataset,
                             k: int, sigma: float,
                             width_scale: float = 1.0,
                             train_cfg: TrainConfig = TrainConfig(),
                             master_seed: int = 0) -> TrainedModel:
    """Baseline: one classifier retrained on the noise-augmented set."""
    xt, yt, xv, yv = _train_val(train_set)
    rng = np.random.default_rng([master_seed, 0x65])
    xa, ya = augment_gaussian(xt, yt, k, sigma, rng)
    specs = architectures.build(arch_id, train_set.length,
                                train_set.num_classes, width_scale)
    cfg = TrainConfig(**{**train_cfg.__dict__, "seed": train_cfg.seed})
    model = train_model(arch_id, specs, xa, ya, xv, yv, train_set.domain,
                        train_set.class_names, cfg)
    model.meta.update({"defense": "gaussian_smoothing", "k": k, "sigma": sigma})
    return model


def autoencoder_pretrain(train_set: LabeledDataset,
                         width_scale: float = 1.0,
                         ae_cfg: TrainConfig | None = None,
                         clf_cfg: TrainConfig | None = None,
                         master_seed: int = 0) -> TrainedModel:
    """Baseline: train the autoencoder on reconstruction MSE, freeze the
    encoder, then train a classifier head on the latent space.

    The returned model runs encoder + head as one stack and exposes the
    standard classifier interface.
    """
    ae_cfg = ae_cfg or TrainConfig(loss="mse", seed=master_seed,
                                   patience=10, max_epochs=200)
    clf_cfg = clf_cfg or TrainConfig(seed=master_seed + 1)
    xt, yt, xv, yv = _train_val(train_set)
    length = train_set.length
    c = train_set.num_classes

    ae_specs = architectures.build("Autoencoder", length, c, width_scale)
    ae_net = build_network(ae_specs, (length, 2), seed=ae_cfg.seed)
    recon_cfg = TrainConfig(**{**ae_cfg.__dict__, "loss": "mse"})
    fit(ae_net, xt, xt.reshape(len(xt), -1), xv, xv.reshape(len(xv), -1),
        recon_cfg)

    n_enc, latent = architectures.autoencoder_split(length, width_scale)
    head_specs = architectures.latent_classifier_specs(
        latent, c, width_scale)
    full_specs = ae_specs[:n_enc] + head_specs
    net = build_network(full_specs, (length, 2), seed=clf_cfg.seed)

    # copy trained encoder weights, then train the head only
    for trained, fresh in zip(ae_net.layers[:n_enc], net.layers[:n_enc]):
        for pt, pf in zip(trained.params(), fresh.params()):
            pf.data = pt.data.copy()
    head_params = [p for layer in net.layers[n_enc:] for p in layer.params()]
    fit(net, xt, yt, xv, yv, clf_cfg, params=head_params)

    model = TrainedModel(
        arch_id="AutoencoderClassifier",
        network=net,
        input_domain=train_set.domain,
        class_names=list(train_set.class_names),
        meta={"defense": "autoencoder_pretrain", "latent": latent,
              "encoder_layers": n_enc, "seed": master_seed},
    )
    return model
