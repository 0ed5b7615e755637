"""Desk-scale AMC laboratory: synthetic modulated signals, time/frequency deep
classifiers, l2-budgeted gradient attacks, transferability experiments, and an
assorted deep ensemble defense."""

from amclab.signals import (
    Domain,
    Signal,
    ChannelParams,
    LabeledDataset,
    GenerationConfig,
    modulate,
    apply_channel,
    normalize_energy,
    generate_dataset,
)
from amclab.spectral import dft, idft, to_matrix, from_matrix, FeatureMatrix

__all__ = [
    "Domain",
    "Signal",
    "ChannelParams",
    "LabeledDataset",
    "GenerationConfig",
    "modulate",
    "apply_channel",
    "normalize_energy",
    "generate_dataset",
    "dft",
    "idft",
    "to_matrix",
    "from_matrix",
    "FeatureMatrix",
]

__version__ = "0.1.0"
