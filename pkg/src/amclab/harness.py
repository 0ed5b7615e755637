"""Experiment orchestration: clean evaluation, architecture-uncertainty and
domain-uncertainty transfer grids, and the black-box defense comparison.

Grid cells are independent; they run on a bounded thread pool (AMCLAB_WORKERS,
default 1) and are collected in deterministic grid order.  A perturbation's
PNR is invariant under the unnormalized DFT (signal and perturbation power
both scale by the window length), so a grid PNR set in the crafting domain is
the same number in the victim's domain.
"""

from __future__ import annotations

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from amclab.attacks import AttackConfig, budget_for_pnr, craft_batch
from amclab.defenses import Ensemble, ade_predict
from amclab.models import TrainedModel
from amclab.signals import Domain, LabeledDataset
from amclab.spectral import dft_matrix, idft_matrix

DEFAULT_PNR_GRID = tuple(float(p) for p in range(-20, 12, 2))


@dataclass
class ExperimentReport:
    kind: str
    pnr_grid: list[float]
    cells: list[dict]
    provenance: dict = field(default_factory=dict)

    def accuracy(self, **key) -> float:
        for cell in self.cells:
            if all(cell.get(k) == v for k, v in key.items()):
                return cell["accuracy"]
        raise KeyError(f"no cell matching {key}")


def predict_classes(predictor, x: np.ndarray) -> np.ndarray:
    """Class indices from a single model or an ensemble."""
    if isinstance(predictor, Ensemble):
        return ade_predict(predictor, x)[0]
    return predictor.predict(x)


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray,
                     num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


def eval_accuracy(predictor, dataset_or_x, labels: np.ndarray | None = None
                  ) -> tuple[float, np.ndarray]:
    """Accuracy and C x C confusion counts on a dataset or (x, onehot) pair."""
    if isinstance(dataset_or_x, LabeledDataset):
        x = dataset_or_x.matrices().astype(np.float64)
        y = dataset_or_x.class_indices()
        c = dataset_or_x.num_classes
    else:
        x = np.asarray(dataset_or_x, dtype=np.float64)
        if labels is None:
            raise ValueError("labels required with raw matrices")
        y = np.argmax(labels, axis=1) if labels.ndim == 2 else labels
        c = (labels.shape[1] if labels.ndim == 2
             else int(y.max()) + 1)
    if len(x) == 0:
        raise ValueError("empty evaluation split")
    pred = predict_classes(predictor, x)
    cm = confusion_matrix(y, pred, c)
    return float(np.trace(cm) / cm.sum()), cm


def _pmap(fn, items):
    workers = int(os.environ.get("AMCLAB_WORKERS", "1") or "1")
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _attack_cfg(kind: str, p_t: float, domain: Domain, arch: str,
                bim_iterations: int = 10) -> AttackConfig:
    return AttackConfig(kind=kind, p_t=p_t, iterations=bim_iterations,
                        source_domain=domain, source_arch=arch)


def dataset_hash(ds: LabeledDataset) -> str:
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.samples).tobytes())
    h.update(np.ascontiguousarray(ds.labels).tobytes())
    return h.hexdigest()


def _measured_pnr(deltas: np.ndarray, x_victim: np.ndarray,
                  snr_db: float) -> float:
    dp = float(np.mean(np.sum(deltas ** 2, axis=(1, 2))))
    rp = float(np.mean(np.sum(x_victim ** 2, axis=(1, 2))))
    if dp <= 0:
        return float("-inf")
    return 10.0 * np.log10(dp / rp) + snr_db


def arch_transfer_experiment(models: list[TrainedModel], attack_kind: str,
                             pnr_grid, test_ds: LabeledDataset,
                             bim_iterations: int = 10) -> ExperimentReport:
    """Craft per-sample attacks on each source model and score every victim:
    a sources x victims x PNR accuracy grid (diagonal = white box)."""
    domain = models[0].input_domain
    if any(m.input_domain is not domain for m in models):
        raise ValueError("all models must share one input domain")
    x = test_ds.matrices().astype(np.float64)
    y = test_ds.labels
    y_idx = test_ds.class_indices()
    c = test_ds.num_classes
    snr = test_ds.snr_db

    jobs = [(src, float(pnr)) for src in models for pnr in pnr_grid]

    def run(job):
        src, pnr = job
        p_t = budget_for_pnr(pnr, test_ds, snr)
        cfg = _attack_cfg(attack_kind, p_t, domain, src.arch_id,
                          bim_iterations)
        deltas, degenerate = craft_batch(src, x, y, cfg)
        x_adv = x + deltas
        out = []
        for victim in models:
            pred = victim.predict(x_adv)
            cm = confusion_matrix(y_idx, pred, c)
            out.append({
                "source": src.arch_id,
                "victim": victim.arch_id,
                "pnr_db": pnr,
                "accuracy": float(np.trace(cm) / cm.sum()),
                "confusion": cm.tolist(),
                "degenerate_count": int(degenerate.sum()),
                "measured_pnr_db": _measured_pnr(deltas, x_adv, snr),
            })
        return out

    cells = [cell for group in _pmap(run, jobs) for cell in group]
    clean = {m.arch_id: eval_accuracy(m, test_ds)[0] for m in models}
    return ExperimentReport(
        kind=f"arch_transfer_{attack_kind.lower()}",
        pnr_grid=[float(p) for p in pnr_grid],
        cells=cells,
        provenance={
            "attack_kind": attack_kind,
            "domain": domain.value,
            "snr_db": snr,
            "dataset_hash": dataset_hash(test_ds),
            "model_hashes": {m.arch_id: m.params_hash() for m in models},
            "model_seeds": {m.arch_id: m.meta.get("seed") for m in models},
            "clean_accuracy": clean,
            "bim_iterations": bim_iterations,
            "wall_clock": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    )


def domain_transfer_experiment(pairs: list[tuple[TrainedModel, TrainedModel]],
                               attack_kind: str, pnr_grid,
                               test_time: LabeledDataset,
                               test_freq: LabeledDataset,
                               bim_iterations: int = 10,
                               highlight_pnr: float | None = None
                               ) -> ExperimentReport:
    """Per architecture: craft on the time model and score its frequency twin
    on the DFT of the perturbed waveform, and vice versa through the inverse
    transform.  The same-domain (white box) score is reported alongside."""
    xt = test_time.matrices().astype(np.float64)
    xf = test_freq.matrices().astype(np.float64)
    y = test_time.labels
    y_idx = test_time.class_indices()
    c = test_time.num_classes
    snr = test_time.snr_db
    if highlight_pnr is None:
        highlight_pnr = float(pnr_grid[len(pnr_grid) // 2])

    jobs = [(f, g, direction, float(pnr))
            for f, g in pairs
            for direction in ("time_to_freq", "freq_to_time")
            for pnr in pnr_grid]

    def run(job):
        f, g, direction, pnr = job
        if direction == "time_to_freq":
            source, victim = f, g
            src_ds, src_x = test_time, xt
        else:
            source, victim = g, f
            src_ds, src_x = test_freq, xf
        p_t = budget_for_pnr(pnr, src_ds, snr)
        cfg = _attack_cfg(attack_kind, p_t, source.input_domain,
                          source.arch_id, bim_iterations)
        deltas, degenerate = craft_batch(source, src_x, y, cfg)
        adv_src = src_x + deltas
        adv_victim = (dft_matrix(adv_src) if direction == "time_to_freq"
                      else idft_matrix(adv_src))
        victim_clean = (dft_matrix(src_x) if direction == "time_to_freq"
                        else idft_matrix(src_x))
        out = []
        for role, model, adv, clean in (
                ("source", source, adv_src, src_x),
                ("cross", victim, adv_victim, victim_clean)):
            pred = model.predict(adv)
            cm = confusion_matrix(y_idx, pred, c)
            cell = {
                "arch": f.arch_id,
                "direction": direction,
                "role": role,
                "pnr_db": pnr,
                "accuracy": float(np.trace(cm) / cm.sum()),
                "degenerate_count": int(degenerate.sum()),
                "measured_pnr_db": _measured_pnr(adv - clean, adv, snr),
            }
            if pnr == highlight_pnr:
                cell["confusion"] = cm.tolist()
            out.append(cell)
        return out

    cells = [cell for group in _pmap(run, jobs) for cell in group]
    return ExperimentReport(
        kind=f"domain_transfer_{attack_kind.lower()}",
        pnr_grid=[float(p) for p in pnr_grid],
        cells=cells,
        provenance={
            "attack_kind": attack_kind,
            "snr_db": snr,
            "highlight_pnr_db": highlight_pnr,
            "dataset_hash_time": dataset_hash(test_time),
            "dataset_hash_freq": dataset_hash(test_freq),
            "model_hashes": {
                f"{f.arch_id}_time": f.params_hash() for f, _ in pairs
            } | {
                f"{g.arch_id}_freq": g.params_hash() for _, g in pairs
            },
            "bim_iterations": bim_iterations,
            "wall_clock": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    )


def blackbox_experiment(surrogates: dict[str, TrainedModel],
                        defenses: dict[str, object],
                        attack_kinds, domains, pnr_grid,
                        test_time: LabeledDataset,
                        test_freq: LabeledDataset,
                        bim_iterations: int = 10) -> ExperimentReport:
    """Craft on the surrogate in each domain and score every defense on the
    resulting time-domain waveform (frequency attacks come back through the
    inverse transform).  All defenses expose a time-domain interface."""
    xt = test_time.matrices().astype(np.float64)
    xf = test_freq.matrices().astype(np.float64)
    y = test_time.labels
    y_idx = test_time.class_indices()
    c = test_time.num_classes
    snr = test_time.snr_db

    jobs = [(kind, dom, float(pnr))
            for kind in attack_kinds for dom in domains for pnr in pnr_grid]

    def run(job):
        kind, dom, pnr = job
        if dom == Domain.TIME or dom == Domain.TIME.value:
            surrogate = surrogates["time"]
            src_ds, src_x = test_time, xt
        else:
            surrogate = surrogates["frequency"]
            src_ds, src_x = test_freq, xf
        p_t = budget_for_pnr(pnr, src_ds, snr)
        cfg = _attack_cfg(kind, p_t, surrogate.input_domain,
                          surrogate.arch_id, bim_iterations)
        deltas, degenerate = craft_batch(surrogate, src_x, y, cfg)
        adv = src_x + deltas
        adv_time = adv if surrogate.input_domain is Domain.TIME else idft_matrix(adv)
        out = []
        for name, defense in defenses.items():
            pred = predict_classes(defense, adv_time)
            cm = confusion_matrix(y_idx, pred, c)
            out.append({
                "attack": kind,
                "attack_domain": Domain(dom).value if not isinstance(dom, Domain) else dom.value,
                "defense": name,
                "pnr_db": pnr,
                "accuracy": float(np.trace(cm) / cm.sum()),
                "confusion": cm.tolist(),
                "degenerate_count": int(degenerate.sum()),
            })
        return out

    cells = [cell for group in _pmap(run, jobs) for cell in group]

    def _hash(defense):
        if isinstance(defense, Ensemble):
            return [m.params_hash() for m in defense.f_models + defense.g_models]
        return defense.params_hash()

    return ExperimentReport(
        kind="blackbox_defense",
        pnr_grid=[float(p) for p in pnr_grid],
        cells=cells,
        provenance={
            "attack_kinds": list(attack_kinds),
            "domains": [Domain(d).value if not isinstance(d, Domain) else d.value
                        for d in domains],
            "snr_db": snr,
            "dataset_hash_time": dataset_hash(test_time),
            "dataset_hash_freq": dataset_hash(test_freq),
            "surrogate_hashes": {k: v.params_hash() for k, v in surrogates.items()},
            "defense_hashes": {k: _hash(v) for k, v in defenses.items()},
            "bim_iterations": bim_iterations,
            "wall_clock": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        },
    )
