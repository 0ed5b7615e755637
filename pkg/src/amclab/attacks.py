"""l2-budgeted FGSM and BIM interference crafting, perturbation application,
and the perturbation-to-noise ratio metric.

Attacks are untargeted (the true label only), crafted in the source model's
own input domain with the adversary-to-receiver channel fixed to identity, so
the crafted matrix adds elementwise to the received one.  Zero-gradient inputs
yield a zero perturbation flagged degenerate rather than an error.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from amclab.models import TrainedModel
from amclab.signals import Domain, LabeledDataset

_NORM_TOL = 1e-12


@dataclass(frozen=True)
class AttackConfig:
    kind: str                      # "FGSM" or "BIM"
    p_t: float                     # perturbation power budget, linear
    alpha: float | None = None     # per-iteration power (BIM); default p_t/10
    iterations: int = 10           # BIM only
    source_domain: Domain = Domain.TIME
    source_arch: str = ""

    def __post_init__(self):
        if self.kind not in ("FGSM", "BIM"):
            raise ValueError(f"unknown attack kind: {self.kind!r}")
        if self.p_t <= 0:
            raise ValueError("power budget must be positive")
        if self.kind == "BIM":
            alpha = self.p_t / 10.0 if self.alpha is None else self.alpha
            if not 0 < alpha <= self.p_t:
                raise ValueError("BIM alpha must satisfy 0 < alpha <= p_t")
            if self.iterations < 1:
                raise ValueError("BIM needs at least one iteration")
            object.__setattr__(self, "alpha", alpha)


@dataclass
class Perturbation:
    delta: np.ndarray              # (length, 2)
    domain: Domain
    achieved_norm: float
    degenerate: bool = False
    meta: dict = field(default_factory=dict)


def _row_norms(g: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(g.astype(np.float64) ** 2, axis=(1, 2)))


def fgsm_batch(model: TrainedModel, x: np.ndarray, y: np.ndarray,
               p_t: float) -> tuple[np.ndarray, np.ndarray]:
    """Single-step l2 attack spending the whole budget.

    Returns (deltas, degenerate mask); each non-degenerate row satisfies
    ||delta||_2 = sqrt(p_t).
    """
    if p_t <= 0:
        raise ValueError("power budget must be positive")
    g = model.input_gradient(x, y)
    norms = _row_norms(g)
    degenerate = norms <= _NORM_TOL
    safe = np.where(degenerate, 1.0, norms)
    deltas = np.sqrt(p_t) * g / safe[:, None, None]
    deltas[degenerate] = 0.0
    return deltas, degenerate


def bim_batch(model: TrainedModel, x: np.ndarray, y: np.ndarray,
              p_t: float, alpha: float | None = None,
              iterations: int = 10) -> tuple[np.ndarray, np.ndarray]:
    """Iterative attack: each step adds a sqrt(alpha)-norm gradient step at
    the current iterate, then the accumulated direction is rescaled to the
    full budget.  Rows whose gradient vanishes freeze at their current total.
    """
    cfg = AttackConfig("BIM", p_t, alpha, iterations)
    x = np.asarray(x, dtype=np.float64)
    total = np.zeros_like(x)
    active = np.ones(x.shape[0], dtype=bool)
    for _ in range(cfg.iterations):
        if not active.any():
            break
        g = model.input_gradient(x[active] + total[active], y[active])
        norms = _row_norms(g)
        alive = norms > _NORM_TOL
        step = np.zeros_like(g)
        step[alive] = (np.sqrt(cfg.alpha) * g[alive]
                       / norms[alive][:, None, None])
        idx = np.flatnonzero(active)
        total[idx[alive]] += step[alive]
        newly_dead = idx[~alive]
        active[newly_dead] = False
    norms = _row_norms(total)
    degenerate = norms <= _NORM_TOL
    safe = np.where(degenerate, 1.0, norms)
    deltas = np.sqrt(p_t) * total / safe[:, None, None]
    deltas[degenerate] = 0.0
    return deltas, degenerate


def craft_batch(model: TrainedModel, x: np.ndarray, y: np.ndarray,
                cfg: AttackConfig) -> tuple[np.ndarray, np.ndarray]:
    if cfg.kind == "FGSM":
        return fgsm_batch(model, x, y, cfg.p_t)
    return bim_batch(model, x, y, cfg.p_t, cfg.alpha, cfg.iterations)


def _single(model: TrainedModel, x: np.ndarray, y: np.ndarray,
            deltas: np.ndarray, degenerate: np.ndarray,
            kind: str, p_t: float) -> Perturbation:
    return Perturbation(
        delta=deltas[0],
        domain=model.input_domain,
        achieved_norm=float(np.linalg.norm(deltas[0])),
        degenerate=bool(degenerate[0]),
        meta={"kind": kind, "p_t": p_t, "source_arch": model.arch_id,
              "source_hash": model.params_hash()},
    )


def fgsm(model: TrainedModel, x: np.ndarray, y: np.ndarray,
         p_t: float) -> Perturbation:
    deltas, degenerate = fgsm_batch(model, x[None], y[None], p_t)
    return _single(model, x, y, deltas, degenerate, "FGSM", p_t)


def bim(model: TrainedModel, x: np.ndarray, y: np.ndarray, p_t: float,
        alpha: float | None = None, iterations: int = 10) -> Perturbation:
    deltas, degenerate = bim_batch(model, x[None], y[None], p_t,
                                   alpha, iterations)
    return _single(model, x, y, deltas, degenerate, "BIM", p_t)


def apply(x: np.ndarray, p: Perturbation, domain: Domain) -> np.ndarray:
    """Elementwise r_a = r_t + delta; domains must match (route cross-domain
    transfers through the spectral transforms explicitly)."""
    if domain is not p.domain:
        raise ValueError(
            f"domain mismatch: input {domain.value}, perturbation {p.domain.value}")
    return np.asarray(x, dtype=np.float64) + p.delta


def mean_received_power(dataset: LabeledDataset) -> float:
    """Mean per-signal energy sum(|r[k]|^2), in the dataset's own domain units."""
    if len(dataset) == 0:
        raise ValueError("empty dataset")
    power = float(np.mean(np.sum(np.abs(dataset.samples) ** 2, axis=1)))
    if power <= 0:
        raise ValueError("zero received power")
    return power


def pnr_db(p_t: float, dataset: LabeledDataset, snr_db: float) -> float:
    """PNR[dB] = 10 log10(E||delta||^2 / E||r||^2) + SNR[dB] with
    E||delta||^2 = p_t."""
    if p_t <= 0:
        raise ValueError("power budget must be positive")
    return 10.0 * np.log10(p_t / mean_received_power(dataset)) + snr_db


def budget_for_pnr(pnr: float, dataset: LabeledDataset, snr_db: float) -> float:
    """Inverse of :func:`pnr_db` for the same dataset."""
    return mean_received_power(dataset) * 10.0 ** ((pnr - snr_db) / 10.0)
