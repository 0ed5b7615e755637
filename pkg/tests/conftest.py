import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from amclab.signals import Domain, GenerationConfig, LabeledDataset, generate_dataset


@pytest.fixture(scope="session")
def tiny_dataset() -> LabeledDataset:
    """4 classes x 20 signals; enough to exercise splits and training plumbing."""
    return generate_dataset(GenerationConfig(per_class=20, seed=3))


@pytest.fixture(scope="session")
def tiny_freq_dataset(tiny_dataset) -> LabeledDataset:
    ds = tiny_dataset
    return LabeledDataset(
        samples=np.fft.fft(ds.samples, axis=1),
        labels=ds.labels,
        class_names=ds.class_names,
        split=ds.split,
        domain=Domain.FREQUENCY,
        snr_db=ds.snr_db,
        seed=ds.seed,
        meta=dict(ds.meta),
    )


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(42)
