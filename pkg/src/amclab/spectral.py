"""Time <-> frequency feature transforms and the length x 2 real-matrix view.

The forward transform is the unnormalized DFT
``R[p] = sum_k r[k] * exp(-j*2*pi*p*k / length)``; the 1/length factor lives in
:func:`idft`, so an l2 budget on a frequency-domain matrix maps to time-domain
power scaled by exactly 1/length (Parseval).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from amclab.signals import Domain, Signal


@dataclass(frozen=True)
class FeatureMatrix:
    """Real length x 2 classifier input with its domain tag."""

    values: np.ndarray
    domain: Domain

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape[1] != 2:
            raise ValueError(f"expected shape (length, 2), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("feature matrix contains non-finite entries")


def dft(s: Signal) -> Signal:
    """Unnormalized DFT of a time-domain signal (fast path via FFT)."""
    if s.domain is not Domain.TIME:
        raise ValueError("dft expects a time-domain signal")
    return Signal(np.fft.fft(s.samples), Domain.FREQUENCY, snr_db=s.snr_db)


def idft(s: Signal) -> Signal:
    """Inverse of :func:`dft`; carries the 1/length normalization."""
    if s.domain is not Domain.FREQUENCY:
        raise ValueError("idft expects a frequency-domain signal")
    return Signal(np.fft.ifft(s.samples), Domain.TIME, snr_db=s.snr_db)


def dft_matrix(m: np.ndarray) -> np.ndarray:
    """DFT applied to a real (..., length, 2) matrix view, returning the same view."""
    m = np.asarray(m)
    z = np.fft.fft(m[..., 0] + 1j * m[..., 1], axis=-1)
    return np.stack([z.real, z.imag], axis=-1)


def idft_matrix(m: np.ndarray) -> np.ndarray:
    """Inverse of :func:`dft_matrix`."""
    m = np.asarray(m)
    z = np.fft.ifft(m[..., 0] + 1j * m[..., 1], axis=-1)
    return np.stack([z.real, z.imag], axis=-1)


def to_matrix(s: Signal) -> FeatureMatrix:
    """Complex samples -> real matrix: column 0 real parts, column 1 imaginary."""
    values = np.stack([s.samples.real, s.samples.imag], axis=1)
    return FeatureMatrix(values, s.domain)


def from_matrix(m: FeatureMatrix) -> Signal:
    return Signal(m.values[:, 0] + 1j * m.values[:, 1], m.domain)
