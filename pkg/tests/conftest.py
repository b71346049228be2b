import numpy as np
import pytest
import torch

from pressure_id.augment import AugmentConfig
from pressure_id.data import SyntheticConfig, generate_synthetic
from pressure_id.losses import LossWeights
from pressure_id.models import EncoderConfig
from pressure_id.training import TrainConfig

# Bit-reproducibility of training runs is only claimed single-threaded.
torch.set_num_threads(1)


@pytest.fixture(scope="session")
def small_chr():
    """Chair-analog dataset small enough for fast training tests."""
    return generate_synthetic(
        SyntheticConfig(posture_count=12, samples_per_subject_posture=12, seed=7)
    )


@pytest.fixture(scope="session")
def small_bed():
    return generate_synthetic(
        SyntheticConfig(posture_count=6, samples_per_subject_posture=12, seed=7)
    )


@pytest.fixture(scope="session")
def tiny_train_config():
    """Tiny encoder, few epochs: exercises the full loop in seconds."""
    return TrainConfig(
        weights=LossWeights(),
        epochs=2,
        batch_size=16,
        encoder=EncoderConfig(variant="tiny", embedding_dim=32),
        augment=AugmentConfig(max_rotate_deg=10.0, max_translate_px=2),
        seed=0,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
