"""Synthetic modulated baseband signals, channel application, and dataset assembly.

All waveforms are complex baseband amplitudes over a fixed observation window of
``length`` samples (128 by default).  Classifier inputs use the length x 2 real
matrix view (column 0 real, column 1 imaginary) provided by :mod:`amclab.spectral`.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

DEFAULT_LENGTH = 128
DEFAULT_SPS = 8

SCHEMES = ("CPFSK", "GFSK", "PAM4", "QPSK", "OOK", "8ASK", "BPSK", "FM")

# bits consumed per symbol; FM consumes a fixed 6 bits per window (2 bits of
# phase for each of its 3 sinusoids)
BITS_PER_SYMBOL = {
    "BPSK": 1,
    "QPSK": 2,
    "PAM4": 2,
    "8ASK": 3,
    "OOK": 1,
    "CPFSK": 1,
    "GFSK": 1,
}

FM_MESSAGE_BITS = 6
FM_DEVIATION = 0.1  # peak instantaneous frequency, cycles/sample
FM_TONE_BINS = (2, 3, 5)  # DFT bins of the 3 message sinusoids

CPFSK_MOD_INDEX = 0.5
GFSK_MOD_INDEX = 0.5
GFSK_BT = 0.35

_DATASET_MAGIC = b"AMCD"
_DATASET_VERSION = 1
_SCHEMA_VERSION = 1


class Domain(str, Enum):
    TIME = "time"
    FREQUENCY = "frequency"


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


class ModulationError(ValueError):
    """Unknown scheme or insufficient bits."""


@dataclass(frozen=True)
class Signal:
    """Complex waveform with a domain tag.

    ``samples`` is a 1-D complex array; ``snr_db`` records the SNR at which the
    channel was applied (NaN for pre-channel signals).
    """

    samples: np.ndarray
    domain: Domain = Domain.TIME
    snr_db: float = float("nan")

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 1:
            raise ValueError("samples must be 1-D")

    def __len__(self) -> int:
        return self.samples.shape[0]

    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class ChannelParams:
    """Per-sample channel gains plus optional radio impairments.

    ``taps`` multiplies the transmitted signal elementwise (a diagonal channel
    matrix).  CFO is a multiplicative phasor ``exp(j*2*pi*cfo*k)``; SRO is
    fractional resampling by ``1 + sro_ppm * 1e-6``.
    """

    taps: np.ndarray
    cfo_cycles_per_sample: float = 0.0
    sro_ppm: float = 0.0
    noise_seed: int = 0
    noise_enabled: bool = True

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.complex128)
        object.__setattr__(self, "taps", taps)
        if not np.all(np.isfinite(taps.view(np.float64))):
            raise ValueError("channel taps must be finite")

    @classmethod
    def flat(cls, length: int = DEFAULT_LENGTH, noise_seed: int = 0,
             noise_enabled: bool = True) -> "ChannelParams":
        return cls(taps=np.ones(length, dtype=np.complex128),
                   noise_seed=noise_seed, noise_enabled=noise_enabled)


def _gray_levels(n_bits: int) -> tuple[np.ndarray, np.ndarray]:
    """Gray-coded ASK levels: returns (codes, levels) with unit mean energy."""
    m = 1 << n_bits
    codes = np.array([i ^ (i >> 1) for i in range(m)])
    levels = np.arange(-(m - 1), m, 2, dtype=np.float64)
    scale = np.sqrt(np.mean(levels ** 2))
    return codes, levels / scale


def _bits_to_ints(bits: np.ndarray, width: int) -> np.ndarray:
    groups = bits.reshape(-1, width)
    weights = 1 << np.arange(width - 1, -1, -1)
    return groups @ weights


def _nrz(bits: np.ndarray) -> np.ndarray:
    return 2.0 * bits - 1.0


def _gaussian_pulse(bt: float, sps: int) -> np.ndarray:
    """Unit-DC-gain Gaussian filter for GFSK pulse shaping (span 4 symbols)."""
    b = bt  # bandwidth normalized to symbol rate
    t = np.arange(-2 * sps, 2 * sps + 1) / sps
    alpha = np.sqrt(2.0 * np.pi ** 2 / np.log(2.0)) * b
    h = alpha / np.sqrt(np.pi) * np.exp(-(alpha * t) ** 2)
    return h / np.sum(h)


def _fm_message(bits: np.ndarray, length: int) -> np.ndarray:
    """Sum of 3 random-phase sinusoids; phases carry 2 bits each."""
    phases = _bits_to_ints(bits[:FM_MESSAGE_BITS], 2) * (np.pi / 2.0)
    k = np.arange(length)
    msg = np.zeros(length)
    for bin_idx, phi in zip(FM_TONE_BINS, phases):
        msg += np.cos(2.0 * np.pi * bin_idx * k / length + phi)
    return msg / len(FM_TONE_BINS)


def modulate(bits, scheme: str, sps: int = DEFAULT_SPS,
             length: int | None = None) -> Signal:
    """Map a bit sequence onto a unit-average-power baseband waveform.

    Linear schemes use rectangular (sample-and-hold) pulses; CPFSK/GFSK
    integrate frequency pulses into a continuous phase; FM carries a
    band-limited 3-tone message whose phases encode the bits.  If ``length``
    is omitted it is inferred from the number of bits supplied.
    """
    scheme = scheme.upper()
    if scheme not in SCHEMES:
        raise ModulationError(f"unknown modulation scheme: {scheme!r}")
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if np.any((bits != 0) & (bits != 1)):
        raise ModulationError("bits must be 0/1")

    if scheme == "FM":
        if length is None:
            length = DEFAULT_LENGTH
        if bits.size < FM_MESSAGE_BITS:
            raise ModulationError(
                f"FM needs {FM_MESSAGE_BITS} bits, got {bits.size}")
        msg = _fm_message(bits, length)
        phase = 2.0 * np.pi * FM_DEVIATION * np.cumsum(msg)
        return Signal(np.exp(1j * phase), Domain.TIME)

    bps = BITS_PER_SYMBOL[scheme]
    if length is None:
        n_sym = bits.size // bps
        if n_sym < 1:
            raise ModulationError("insufficient bits for a single symbol")
        length = n_sym * sps
    else:
        if length % sps != 0:
            raise ModulationError("length must be a multiple of sps")
        n_sym = length // sps
        if bits.size < n_sym * bps:
            raise ModulationError(
                f"{scheme} needs {n_sym * bps} bits for {n_sym} symbols, "
                f"got {bits.size}")
    bits = bits[: n_sym * bps]

    if scheme in ("CPFSK", "GFSK"):
        nrz = _nrz(bits.astype(np.float64))
        freq = np.repeat(nrz, sps)
        if scheme == "GFSK":
            pad = 2 * sps
            padded = np.concatenate([
                np.full(pad, nrz[0]).repeat(1),
                freq,
                np.full(pad, nrz[-1]),
            ])
            freq = np.convolve(padded, _gaussian_pulse(GFSK_BT, sps),
                               mode="same")[pad:pad + length]
            h = GFSK_MOD_INDEX
        else:
            h = CPFSK_MOD_INDEX
        phase = np.pi * h * np.cumsum(freq) / sps
        return Signal(np.exp(1j * phase), Domain.TIME)

    if scheme == "BPSK":
        symbols = _nrz(bits.astype(np.float64)).astype(np.complex128)
    elif scheme == "OOK":
        symbols = (bits * np.sqrt(2.0)).astype(np.complex128)
    elif scheme == "QPSK":
        pairs = bits.reshape(-1, 2)
        i = 1.0 - 2.0 * pairs[:, 0]
        q = 1.0 - 2.0 * pairs[:, 1]
        symbols = (i + 1j * q) / np.sqrt(2.0)
    elif scheme in ("PAM4", "8ASK"):
        bps = BITS_PER_SYMBOL[scheme]
        codes, levels = _gray_levels(bps)
        # bit pattern codes[i] sits at the i-th amplitude level (Gray coding)
        lut = np.empty(len(codes))
        lut[codes] = levels
        symbols = lut[_bits_to_ints(bits, bps)].astype(np.complex128)
    else:  # pragma: no cover
        raise ModulationError(scheme)

    return Signal(np.repeat(symbols, sps), Domain.TIME)


def apply_channel(s: Signal, ch: ChannelParams, snr_db: float) -> Signal:
    """Received waveform: sqrt(rho) * diag(taps) * s + n, n ~ CN(0, 1).

    ``rho = 10**(snr_db/10)``.  CFO rotates sample k by exp(j*2*pi*cfo*k);
    SRO linearly resamples at rate 1 + ppm*1e-6.  Noise is skipped when
    ``ch.noise_enabled`` is false.
    """
    if s.domain is not Domain.TIME:
        raise ValueError("apply_channel requires a time-domain signal")
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    x = s.samples
    n = x.shape[0]
    if ch.taps.shape[0] != n:
        raise ValueError("channel taps length mismatch")

    rho = 10.0 ** (snr_db / 10.0)
    y = np.sqrt(rho) * ch.taps * x

    if ch.sro_ppm != 0.0:
        k = np.arange(n)
        src = k * (1.0 + ch.sro_ppm * 1e-6)
        src = np.clip(src, 0, n - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n - 1)
        frac = src - lo
        y = y[lo] * (1 - frac) + y[hi] * frac

    if ch.cfo_cycles_per_sample != 0.0:
        k = np.arange(n)
        y = y * np.exp(2j * np.pi * ch.cfo_cycles_per_sample * k)

    if ch.noise_enabled:
        rng = np.random.default_rng(ch.noise_seed)
        noise = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2.0)
        y = y + noise

    return Signal(y, Domain.TIME, snr_db=snr_db)


def normalize_energy(s: Signal) -> Signal:
    """Scale so the total energy sum(|x[k]|^2) is exactly 1."""
    e = s.energy()
    if e <= 0.0:
        raise ValueError("cannot normalize an all-zero signal")
    return Signal(s.samples / np.sqrt(e), s.domain, snr_db=s.snr_db)


@dataclass(frozen=True)
class GenerationConfig:
    """Knobs for synthetic dataset generation.  Impairments default off."""

    schemes: tuple[str, ...] = ("CPFSK", "GFSK", "PAM4", "QPSK")
    per_class: int = 1000
    seed: int = 0
    snr_db: float = 18.0
    length: int = DEFAULT_LENGTH
    sps: int = DEFAULT_SPS
    fading: bool = False          # per-signal Rician flat fading, K = 10 dB
    cfo: bool = False             # uniform in +-1e-3 cycles/sample
    sro: bool = False             # uniform in +-50 ppm

    def __post_init__(self):
        object.__setattr__(self, "schemes", tuple(s.upper() for s in self.schemes))


@dataclass
class LabeledDataset:
    """Balanced, shuffled, split collection of channel-impaired signals.

    ``samples`` has shape (N, length) complex; ``labels`` is one-hot (N, C);
    ``split`` holds a :class:`Split` value per record.
    """

    samples: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    split: np.ndarray
    domain: Domain = Domain.TIME
    snr_db: float = 18.0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def length(self) -> int:
        return self.samples.shape[1]

    @property
    def num_classes(self) -> int:
        return self.labels.shape[1]

    def matrices(self) -> np.ndarray:
        """Length x 2 real views of every signal, shape (N, length, 2)."""
        out = np.empty((len(self), self.length, 2), dtype=np.float32)
        out[:, :, 0] = self.samples.real
        out[:, :, 1] = self.samples.imag
        return out

    def class_indices(self) -> np.ndarray:
        return np.argmax(self.labels, axis=1)

    def subset(self, split: Split) -> "LabeledDataset":
        mask = self.split == split.value
        return LabeledDataset(
            samples=self.samples[mask],
            labels=self.labels[mask],
            class_names=list(self.class_names),
            split=self.split[mask],
            domain=self.domain,
            snr_db=self.snr_db,
            seed=self.seed,
            meta=dict(self.meta),
        )

    def signal(self, i: int) -> Signal:
        return Signal(self.samples[i], self.domain, snr_db=self.snr_db)


def _bits_needed(scheme: str, length: int, sps: int) -> int:
    if scheme == "FM":
        return FM_MESSAGE_BITS
    return (length // sps) * BITS_PER_SYMBOL[scheme]


def _signal_channel(cfg: GenerationConfig, rng: np.random.Generator) -> ChannelParams:
    taps = np.ones(cfg.length, dtype=np.complex128)
    if cfg.fading:
        k_lin = 10.0 ** (10.0 / 10.0)  # Rician K = 10 dB
        los = np.sqrt(k_lin / (k_lin + 1.0))
        scatter = np.sqrt(1.0 / (k_lin + 1.0))
        g = los + scatter * (rng.standard_normal() + 1j * rng.standard_normal()) / np.sqrt(2.0)
        taps = taps * g
    cfo = float(rng.uniform(-1e-3, 1e-3)) if cfg.cfo else 0.0
    sro = float(rng.uniform(-50.0, 50.0)) if cfg.sro else 0.0
    return ChannelParams(
        taps=taps,
        cfo_cycles_per_sample=cfo,
        sro_ppm=sro,
        noise_seed=int(rng.integers(0, 2 ** 63 - 1)),
    )


def generate_dataset(cfg: GenerationConfig) -> LabeledDataset:
    """Balanced synthetic dataset: modulate -> channel -> unit energy.

    Deterministic for a given config; per-signal randomness derives from
    ``(cfg.seed, class index, signal counter)``.  Records are split 70/15/15
    per class, then globally shuffled.
    """
    if len(cfg.schemes) < 2:
        raise ValueError("need at least 2 modulation schemes")
    for sch in cfg.schemes:
        if sch not in SCHEMES:
            raise ModulationError(f"unsupported scheme: {sch!r}")
    if cfg.per_class < 10:
        raise ValueError("per-class count too small to split 70/15/15")

    n_classes = len(cfg.schemes)
    n_total = n_classes * cfg.per_class
    samples = np.empty((n_total, cfg.length), dtype=np.complex128)
    labels = np.zeros((n_total, n_classes), dtype=np.float32)
    split = np.empty(n_total, dtype=object)

    n_train = int(0.70 * cfg.per_class)
    n_val = int(0.15 * cfg.per_class)
    per_class_split = ([Split.TRAIN.value] * n_train
                       + [Split.VAL.value] * n_val
                       + [Split.TEST.value] * (cfg.per_class - n_train - n_val))

    idx = 0
    for c, scheme in enumerate(cfg.schemes):
        nbits = _bits_needed(scheme, cfg.length, cfg.sps)
        for i in range(cfg.per_class):
            rng = np.random.default_rng([cfg.seed, c, i])
            bits = rng.integers(0, 2, size=nbits)
            s = modulate(bits, scheme, sps=cfg.sps, length=cfg.length)
            ch = _signal_channel(cfg, rng)
            r = apply_channel(s, ch, cfg.snr_db)
            r = normalize_energy(r)
            samples[idx] = r.samples
            labels[idx, c] = 1.0
            split[idx] = per_class_split[i]
            idx += 1

    order = np.random.default_rng([cfg.seed, 0xD5]).permutation(n_total)
    return LabeledDataset(
        samples=samples[order],
        labels=labels[order],
        class_names=list(cfg.schemes),
        split=split[order].astype("U8"),
        domain=Domain.TIME,
        snr_db=cfg.snr_db,
        seed=cfg.seed,
        meta={"per_class": cfg.per_class, "sps": cfg.sps,
              "fading": cfg.fading, "cfo": cfg.cfo, "sro": cfg.sro},
    )


def save_dataset(ds: LabeledDataset, path: str | Path) -> tuple[Path, Path]:
    """Write a JSON manifest plus a binary blob (AMCD v1).

    Blob layout: magic "AMCD", version byte, float32 LE [N, length, 2]
    matrices, then N uint8 class indices.
    """
    path = Path(path)
    json_path = path.with_suffix(".json")
    bin_path = path.with_suffix(".bin")

    mats = ds.matrices().astype("<f4")
    cls = ds.class_indices().astype(np.uint8)
    with open(bin_path, "wb") as f:
        f.write(_DATASET_MAGIC)
        f.write(struct.pack("<B", _DATASET_VERSION))
        f.write(mats.tobytes())
        f.write(cls.tobytes())

    manifest = {
        "schema_version": _SCHEMA_VERSION,
        "count": len(ds),
        "length": ds.length,
        "num_classes": ds.num_classes,
        "class_names": ds.class_names,
        "domain": ds.domain.value,
        "snr_db": ds.snr_db,
        "seed": ds.seed,
        "meta": ds.meta,
        "split": {
            sp.value: [int(i) for i in np.flatnonzero(ds.split == sp.value)]
            for sp in Split
        },
        "blob": bin_path.name,
    }
    with open(json_path, "w") as f:
        json.dump(manifest, f, indent=1, sort_keys=True)
        f.write("\n")
    return json_path, bin_path


def load_dataset(path: str | Path) -> LabeledDataset:
    path = Path(path)
    json_path = path.with_suffix(".json")
    with open(json_path) as f:
        manifest = json.load(f)
    bin_path = json_path.parent / manifest["blob"]

    n = manifest["count"]
    length = manifest["length"]
    c = manifest["num_classes"]
    with open(bin_path, "rb") as f:
        magic = f.read(4)
        if magic != _DATASET_MAGIC:
            raise ValueError(f"bad dataset magic: {magic!r}")
        (version,) = struct.unpack("<B", f.read(1))
        if version != _DATASET_VERSION:
            raise ValueError(f"unsupported dataset version: {version}")
        mats = np.frombuffer(f.read(n * length * 2 * 4), dtype="<f4")
        mats = mats.reshape(n, length, 2).astype(np.float64)
        cls = np.frombuffer(f.read(n), dtype=np.uint8)

    samples = mats[:, :, 0] + 1j * mats[:, :, 1]
    labels = np.zeros((n, c), dtype=np.float32)
    labels[np.arange(n), cls] = 1.0
    split = np.empty(n, dtype="U8")
    for name, idxs in manifest["split"].items():
        split[idxs] = name

    return LabeledDataset(
        samples=samples,
        labels=labels,
        class_names=list(manifest["class_names"]),
        split=split,
        domain=Domain(manifest["domain"]),
        snr_db=manifest["snr_db"],
        seed=manifest["seed"],
        meta=manifest.get("meta", {}),
    )
