"""Probabilistic frame augmentation: flip, rotate, translate.

Each input frame yields one enhanced view; batches come back doubled as
{originals, augmented} with labels repeated. Operations apply independently
in a fixed flip -> rotate -> translate order, all with zero fill (zero is
the physical no-pressure value), so non-negativity survives any composite.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .data import FRAME_COLS, FRAME_ROWS


@dataclass(frozen=True)
class AugmentConfig:
    p_flip: float = 0.5
    p_rotate: float = 0.5
    p_translate: float = 0.5
    max_rotate_deg: float = 15.0
    max_translate_px: int = 4

    def __post_init__(self) -> None:
        for name in ("p_flip", "p_rotate", "p_translate"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1], got {p}")
        if self.max_rotate_deg < 0:
            raise ValueError("max_rotate_deg must be >= 0")
        if not (0 <= self.max_translate_px < min(FRAME_ROWS, FRAME_COLS)):
            raise ValueError(
                f"max_translate_px must be in [0, {min(FRAME_ROWS, FRAME_COLS)})"
            )


def translate_frame(frame: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Integer translation by (dr, dc) with zero fill; exact, no resampling."""
    out = np.zeros_like(frame)
    src_r = slice(max(0, -dr), frame.shape[0] - max(0, dr))
    dst_r = slice(max(0, dr), frame.shape[0] - max(0, -dr))
    src_c = slice(max(0, -dc), frame.shape[1] - max(0, dc))
    dst_c = slice(max(0, dc), frame.shape[1] - max(0, -dc))
    out[dst_r, dst_c] = frame[src_r, src_c]
    return out


def augment_frame(
    frame: np.ndarray, config: AugmentConfig, rng: np.random.Generator
) -> np.ndarray:
    """One enhanced view of a frame.

    Horizontal flip with prob p_flip, then rotation by a uniform angle in
    +-max_rotate_deg (bilinear, zero fill) with prob p_rotate, then integer
    translation uniform in +-max_translate_px per axis with prob p_translate.
    The gate draw for each operation is consumed whether or not it fires.
    """
    out = frame
    if rng.random() < config.p_flip:
        out = out[:, ::-1]
    if rng.random() < config.p_rotate:
        angle = rng.uniform(-config.max_rotate_deg, config.max_rotate_deg)
        out = ndimage.rotate(
            out, angle, reshape=False, order=1, mode="constant", cval=0.0
        )
        out = np.maximum(out, 0.0)
    if rng.random() < config.p_translate:
        dr, dc = rng.integers(
            -config.max_translate_px, config.max_translate_px + 1, size=2
        )
        out = translate_frame(out, int(dr), int(dc))
    if out is frame:
        out = frame.copy()
    return np.ascontiguousarray(out, dtype=frame.dtype)


def augment_batch(
    frames: np.ndarray,
    labels: np.ndarray,
    config: AugmentConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Double a batch to {X, Aug(X)} with labels repeated to {Y, Y}.

    The first N output entries are the originals unchanged; entry N+i is
    the enhanced view of frames[i].
    """
    frames = np.asarray(frames)
    labels = np.asarray(labels)
    if len(frames) != len(labels):
        raise ValueError(
            f"{len(frames)} frames but {len(labels)} labels"
        )
    if len(frames) == 0:
        return frames.copy(), labels.copy()
    augmented = np.stack([augment_frame(f, config, rng) for f in frames])
    return (
        np.concatenate([frames, augmented], axis=0),
        np.concatenate([labels, labels], axis=0),
    )
