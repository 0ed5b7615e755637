"""Shared test oracles: naive transforms, reference demodulators, and
finite-difference gradient checks.  Everything here is deliberately slow and
independent of the library's fast paths."""

from __future__ import annotations

import numpy as np

from amclab.signals import (
    BITS_PER_SYMBOL,
    FM_DEVIATION,
    FM_MESSAGE_BITS,
    FM_TONE_BINS,
    Signal,
    _gray_levels,
)


def naive_dft(x: np.ndarray) -> np.ndarray:
    """Direct double-loop evaluation of R[p] = sum_k r[k] e^{-j2pi pk/n}."""
    n = x.shape[0]
    out = np.zeros(n, dtype=np.complex128)
    for p in range(n):
        for k in range(n):
            out[p] += x[k] * np.exp(-2j * np.pi * p * k / n)
    return out


def demodulate(sig: Signal, scheme: str, sps: int = 8) -> np.ndarray:
    """Reference demodulator for noiseless, impairment-free waveforms."""
    x = sig.samples
    n = x.shape[0]
    if scheme == "FM":
        phase = np.unwrap(np.angle(x))
        msg = np.diff(phase) / (2 * np.pi * FM_DEVIATION)
        msg_full = np.concatenate([[phase[0] / (2 * np.pi * FM_DEVIATION)], msg])
        bits = []
        k = np.arange(n)
        for b in FM_TONE_BINS:
            z = np.sum(msg_full * np.exp(-2j * np.pi * b * k / n))
            q = int(np.round(np.angle(z) / (np.pi / 2))) % 4
            bits += [q >> 1, q & 1]
        return np.asarray(bits)
    ns = n // sps
    mids = np.arange(ns) * sps + sps // 2
    if scheme == "BPSK":
        return (x[mids].real > 0).astype(int)
    if scheme == "OOK":
        return (np.abs(x[mids]) > 0.7).astype(int)
    if scheme == "QPSK":
        b0 = (x[mids].real < 0).astype(int)
        b1 = (x[mids].imag < 0).astype(int)
        return np.stack([b0, b1], axis=1).ravel()
    if scheme in ("PAM4", "8ASK"):
        bps = BITS_PER_SYMBOL[scheme]
        codes, levels = _gray_levels(bps)
        idx = np.argmin(np.abs(x[mids].real[:, None] - levels[None, :]), axis=1)
        vals = codes[idx]
        return ((vals[:, None] >> np.arange(bps - 1, -1, -1)) & 1).ravel()
    if scheme in ("CPFSK", "GFSK"):
        dphi = np.angle(x[1:] * np.conj(x[:-1]))
        persym = np.add.reduceat(dphi, np.arange(0, n - 1, sps))
        return (persym[:ns] > 0).astype(int)
    raise ValueError(scheme)


def bits_for(scheme: str, length: int = 128, sps: int = 8,
             rng: np.random.Generator | None = None) -> np.ndarray:
    rng = rng or np.random.default_rng(0)
    if scheme == "FM":
        n = FM_MESSAGE_BITS
    else:
        n = (length // sps) * BITS_PER_SYMBOL[scheme]
    return rng.integers(0, 2, size=n)


def fd_gradient(f, x: np.ndarray, coords, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar f at selected flat coordinates."""
    flat = x.reshape(-1)
    out = np.empty(len(coords))
    for i, c in enumerate(coords):
        orig = flat[c]
        flat[c] = orig + h
        fp = f(x)
        flat[c] = orig - h
        fm = f(x)
        flat[c] = orig
        out[i] = (fp - fm) / (2 * h)
    return out


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom))


def onehot(y: np.ndarray, c: int) -> np.ndarray:
    out = np.zeros((len(y), c), dtype=np.float32)
    out[np.arange(len(y)), y] = 1.0
    return out
