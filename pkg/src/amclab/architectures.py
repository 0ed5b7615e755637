"""Concrete layer stacks: the four receiver classifiers, the black-box
surrogate (VT-CNN2), and the autoencoder baseline.

The length x 2 input is treated as a one-channel 2 x length image for
convolutions (the 2 x 5 kernels span the IQ rows), flattened for the FCNN,
and read as a length-step sequence of 2-vectors by the LSTM.  Convolutions
are valid cross-correlation with stride 1 and no pooling.
"""

from __future__ import annotations

import math

from amclab.nn.layers import LayerSpec, conv, dense, drop, lstm_layer

ARCH_IDS = ("FCNN", "CNN", "RNN", "CRNN", "SurrogateCNN", "Autoencoder")

DROPOUT_RATE = 0.2


def _scaled(units: int, width_scale: float) -> int:
    return max(1, math.ceil(units * width_scale))


def build(arch_id: str, length: int = 128, num_classes: int = 4,
          width_scale: float = 1.0, lstm_pool: str = "last") -> list[LayerSpec]:
    """Layer stack for one architecture at the given width scale.

    Hidden widths and filter counts multiply by ``width_scale`` (ceil);
    the output layer always has ``num_classes`` units.  ``lstm_pool``
    selects the recurrent readout ("last" hidden state or "mean" over
    time steps) for the RNN and CRNN stacks.
    """
    if length < 8:
        raise ValueError("length must be >= 8")
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    if not 0.0 < width_scale <= 1.0:
        raise ValueError("width_scale must be in (0, 1]")
    if lstm_pool not in ("last", "mean"):
        raise ValueError("lstm_pool must be 'last' or 'mean'")
    s = width_scale
    c = num_classes

    if arch_id == "FCNN":
        return [
            LayerSpec("flatten"),
            dense(_scaled(256, s)), LayerSpec("relu"), drop(DROPOUT_RATE),
            dense(_scaled(128, s)), LayerSpec("relu"), drop(DROPOUT_RATE),
            dense(_scaled(128, s)), LayerSpec("relu"), drop(DROPOUT_RATE),
            dense(c), LayerSpec("softmax"),
        ]
    if arch_id == "CNN":
        return [
            LayerSpec("iq_to_image"),
            conv(_scaled(256, s), 2, 5), LayerSpec("relu"), drop(DROPOUT_RATE),
            conv(_scaled(64, s), 1, 3), LayerSpec("relu"), drop(DROPOUT_RATE),
            LayerSpec("flatten"),
            dense(_scaled(128, s)), LayerSpec("relu"),
            dense(c), LayerSpec("softmax"),
        ]
    if arch_id == "RNN":
        return [
            lstm_layer(_scaled(75, s), pool=lstm_pool),
            dense(_scaled(128, s)), LayerSpec("relu"),
            dense(c), LayerSpec("softmax"),
        ]
    if arch_id == "CRNN":
        return [
            LayerSpec("iq_to_image"),
            conv(_scaled(256, s), 2, 5), LayerSpec("relu"), drop(DROPOUT_RATE),
            conv(_scaled(128, s), 1, 4), LayerSpec("relu"), drop(DROPOUT_RATE),
            LayerSpec("maps_to_sequence"),
            lstm_layer(_scaled(128, s), pool=lstm_pool),
            dense(_scaled(64, s)), LayerSpec("relu"),
            dense(c), LayerSpec("softmax"),
        ]
    if arch_id == "SurrogateCNN":
        # VT-CNN2-style stack used by the black-box adversary
        return [
            LayerSpec("iq_to_image"),
            conv(_scaled(256, s), 1, 3), LayerSpec("relu"), drop(DROPOUT_RATE),
            conv(_scaled(80, s), 2, 3), LayerSpec("relu"), drop(DROPOUT_RATE),
            LayerSpec("flatten"),
            dense(_scaled(256, s)), LayerSpec("relu"),
            dense(c), LayerSpec("softmax"),
        ]
    if arch_id == "Autoencoder":
        # reconstruction stack; see autoencoder_encoder_specs for the split
        latent = _scaled(64, s)
        return [
            LayerSpec("flatten"),
            dense(_scaled(256, s)), LayerSpec("relu"),
            dense(latent), LayerSpec("relu"),
            dense(_scaled(256, s)), LayerSpec("relu"),
            dense(2 * length),
        ]
    raise ValueError(f"unknown architecture id: {arch_id!r}")


def autoencoder_split(length: int = 128, width_scale: float = 1.0
                      ) -> tuple[int, int]:
    """(number of encoder layers, latent width) for the Autoencoder stack."""
    specs = build("Autoencoder", length=length, num_classes=2,
                  width_scale=width_scale)
    # encoder = flatten, dense 256, relu, dense latent, relu
    return 5, specs[3].hyper["units"]


def latent_classifier_specs(latent: int, num_classes: int,
                            width_scale: float = 1.0) -> list[LayerSpec]:
    """Classifier head trained on the frozen autoencoder latent space."""
    return [
        dense(_scaled(128, width_scale)), LayerSpec("relu"),
        dense(num_classes), LayerSpec("softmax"),
    ]
