import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pressure_id.augment import AugmentConfig, augment_batch, augment_frame, translate_frame
from pressure_id.data import FRAME_COLS, FRAME_ROWS


def _random_frame(seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 40, size=(FRAME_ROWS, FRAME_COLS)).astype(np.float32)


def _interior_frame():
    """Support at least 4 px away from every border."""
    frame = np.zeros((FRAME_ROWS, FRAME_COLS), dtype=np.float32)
    frame[10:40, 8:30] = np.random.default_rng(0).uniform(1, 5, size=(30, 22))
    return frame


IDENTITY = AugmentConfig(p_flip=0.0, p_rotate=0.0, p_translate=0.0)
FLIP_ONLY = AugmentConfig(p_flip=1.0, p_rotate=0.0, p_translate=0.0)


class TestAugmentFrame:
    def test_zero_probability_identity(self, rng):
        frame = _random_frame(0)
        out = augment_frame(frame, IDENTITY, rng)
        assert np.array_equal(out, frame)
        assert out is not frame

    def test_flip_involution(self, rng):
        frame = _random_frame(1)
        once = augment_frame(frame, FLIP_ONLY, rng)
        twice = augment_frame(once, FLIP_ONLY, rng)
        assert not np.array_equal(once, frame)
        assert np.array_equal(twice, frame)

    def test_translate_frame_exact(self):
        frame = _interior_frame()
        out = translate_frame(frame, 2, 0)
        # fsum is the correctly-rounded total, insensitive to cell order
        assert math.fsum(out.ravel()) == math.fsum(frame.ravel())
        assert np.array_equal(out[12:42, 8:30], frame[10:40, 8:30])
        assert np.all(out[:12] == 0)

    def test_random_translation_preserves_total_on_interior_support(self, rng):
        frame = _interior_frame()
        config = AugmentConfig(
            p_flip=0.0, p_rotate=0.0, p_translate=1.0, max_translate_px=4
        )
        total = math.fsum(frame.ravel())
        for _ in range(20):
            out = augment_frame(frame, config, rng)
            assert math.fsum(out.ravel()) == total

    def test_zero_angle_rotation_is_identity(self, rng):
        frame = _random_frame(2)
        config = AugmentConfig(p_flip=0.0, p_rotate=1.0, p_translate=0.0,
                               max_rotate_deg=0.0)
        out = augment_frame(frame, config, rng)
        np.testing.assert_allclose(out, frame, atol=1e-6)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**31), aug_seed=st.integers(0, 2**31))
    def test_non_negativity_and_shape(self, seed, aug_seed):
        frame = _random_frame(seed)
        config = AugmentConfig()
        out = augment_frame(frame, config, np.random.default_rng(aug_seed))
        assert out.shape == frame.shape
        assert np.all(out >= 0)

    def test_determinism(self):
        frame = _random_frame(3)
        config = AugmentConfig()
        a = augment_frame(frame, config, np.random.default_rng(99))
        b = augment_frame(frame, config, np.random.default_rng(99))
        assert np.array_equal(a, b)


class TestAugmentBatch:
    def test_batch_doubles(self, rng):
        frames = np.stack([_random_frame(i) for i in range(32)])
        labels = np.arange(32) % 8
        out_frames, out_labels = augment_batch(frames, labels, AugmentConfig(), rng)
        assert out_frames.shape == (64, FRAME_ROWS, FRAME_COLS)
        assert np.array_equal(out_labels, np.concatenate([labels, labels]))
        assert np.array_equal(out_frames[:32], frames)

    def test_empty_batch(self, rng):
        frames = np.zeros((0, FRAME_ROWS, FRAME_COLS), dtype=np.float32)
        out_frames, out_labels = augment_batch(
            frames, np.zeros(0, dtype=np.int64), AugmentConfig(), rng
        )
        assert len(out_frames) == 0 and len(out_labels) == 0

    def test_length_mismatch(self, rng):
        frames = np.stack([_random_frame(0)])
        with pytest.raises(ValueError, match="labels"):
            augment_batch(frames, np.array([0, 1]), AugmentConfig(), rng)

    def test_seeded_batches_identical(self):
        frames = np.stack([_random_frame(i) for i in range(8)])
        labels = np.arange(8)
        a, _ = augment_batch(frames, labels, AugmentConfig(), np.random.default_rng(5))
        b, _ = augment_batch(frames, labels, AugmentConfig(), np.random.default_rng(5))
        assert np.array_equal(a, b)


class TestConfig:
    def test_probability_bounds(self):
        with pytest.raises(ValueError, match="p_flip"):
            AugmentConfig(p_flip=1.5)
        with pytest.raises(ValueError, match="p_rotate"):
            AugmentConfig(p_rotate=-0.1)

    def test_translate_bound(self):
        with pytest.raises(ValueError, match="max_translate_px"):
            AugmentConfig(max_translate_px=40)
