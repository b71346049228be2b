"""Pressure-map dataset container, binary storage head, and the synthetic generator.

A sample is one 56x40 non-negative pressure frame tagged with a subject id,
a posture id, and the device it came from. Datasets are stored in a small
binary container (magic ``PRSD``) with a JSON manifest sidecar, and round-trip
bit-exactly.

The synthetic generator stands in for the two private collection campaigns:
a chair-analog family (12 posture templates on a pieced-together sensing
array with dead gutter bands) and a bed-analog family (6 posture templates
on a full array). Subject body parameters depend only on ``(seed,
subject_id)``, so a chair-analog and a bed-analog dataset generated with the
same seed describe the same group of people. Everything is a pure function
of the config: identical configs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np
from scipy import ndimage

FRAME_ROWS = 56
FRAME_COLS = 40
FRAME_CELLS = FRAME_ROWS * FRAME_COLS

MAGIC = b"PRSD"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIIII")  # magic, version, record_count, rows, cols
_RECORD_HEAD = struct.Struct("<HHB3x")  # subject, posture, device, padding

# Body mass lands around this total per frame (arbitrary sensor units);
# per-subject loads spread around it.
_BASE_LOAD = 4000.0

# Subjects never hit exactly the scripted pose: each sample carries a small
# orientation wobble on top of the integer placement jitter.
_POSE_WOBBLE_DEG = 6.0


class Device(IntEnum):
    TARGET = 0
    AUXILIARY = 1


class DatasetFormatError(ValueError):
    """File is not a valid PRSD container (magic, version, manifest)."""


class DatasetCorruptionError(ValueError):
    """Container is structurally valid but the payload is truncated or padded."""


@dataclass
class SampleRecord:
    """One pressure frame with its identity, posture, and device labels."""

    frame: np.ndarray
    subject_id: int
    posture_id: int
    device: Device = Device.TARGET

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleRecord):
            return NotImplemented
        return (
            self.subject_id == other.subject_id
            and self.posture_id == other.posture_id
            and self.device == other.device
            and np.array_equal(self.frame, other.frame)
        )


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    subject_count: int
    posture_count: int
    samples_per_subject_posture: int
    frame_rows: int = FRAME_ROWS
    frame_cols: int = FRAME_COLS
    generator_seed: int | None = None
    format_version: int = FORMAT_VERSION

    @property
    def record_count(self) -> int:
        return (
            self.subject_count
            * self.posture_count
            * self.samples_per_subject_posture
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class SyntheticConfig:
    """Knobs of the synthetic generator.

    ``separability`` in (0, 1] scales how far apart the per-subject body
    parameters (load, torso scale, asymmetry) are drawn; ``noise_scale``
    controls both the per-frame multiplicative amplitude noise and the
    additive sensor noise (additive sigma is ``5 * noise_scale`` in raw
    units); ``jitter_px`` bounds the integer placement jitter per axis.
    """

    subject_count: int = 8
    posture_count: int = 12
    samples_per_subject_posture: int = 100
    seed: int = 0
    noise_scale: float = 0.02
    jitter_px: int = 2
    separability: float = 1.0

    def __post_init__(self) -> None:
        if self.subject_count < 0 or self.posture_count < 0:
            raise ValueError("subject_count and posture_count must be >= 0")
        if self.samples_per_subject_posture < 0:
            raise ValueError("samples_per_subject_posture must be >= 0")
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be >= 0, got {self.noise_scale}")
        if self.jitter_px < 0:
            raise ValueError(f"jitter_px must be >= 0, got {self.jitter_px}")
        if not (0.0 < self.separability <= 1.0):
            raise ValueError(
                f"separability must be in (0, 1], got {self.separability}"
            )


def validate_frame(frame: np.ndarray) -> None:
    """Raise ValueError unless ``frame`` is a valid 56x40 pressure map."""
    if not isinstance(frame, np.ndarray):
        raise ValueError(f"frame must be an ndarray, got {type(frame).__name__}")
    if frame.shape != (FRAME_ROWS, FRAME_COLS):
        raise ValueError(
            f"frame must be {FRAME_ROWS}x{FRAME_COLS}, got shape {frame.shape}"
        )
    if not np.all(np.isfinite(frame)):
        raise ValueError("frame contains non-finite values")
    if np.any(frame < 0):
        raise ValueError("frame contains negative pressure values")


def _validate_records(records: list[SampleRecord], manifest: DatasetManifest) -> None:
    if manifest.frame_rows != FRAME_ROWS or manifest.frame_cols != FRAME_COLS:
        raise ValueError(
            f"manifest frame shape must be {FRAME_ROWS}x{FRAME_COLS}"
        )
    if len(records) != manifest.record_count:
        raise ValueError(
            f"manifest declares {manifest.record_count} records, "
            f"{len(records)} supplied"
        )
    for i, rec in enumerate(records):
        validate_frame(rec.frame)
        if not (0 <= rec.subject_id < manifest.subject_count):
            raise ValueError(
                f"record {i}: subject_id {rec.subject_id} out of range "
                f"[0, {manifest.subject_count})"
            )
        if not (0 <= rec.posture_id < manifest.posture_count):
            raise ValueError(
                f"record {i}: posture_id {rec.posture_id} out of range "
                f"[0, {manifest.posture_count})"
            )


def manifest_path(path: str | Path) -> Path:
    return Path(str(path) + ".manifest.json")


def save_dataset(
    records: list[SampleRecord], manifest: DatasetManifest, path: str | Path
) -> None:
    """Write the binary container and its JSON manifest sidecar.

    Records are stored in the given order; loading returns them unchanged.
    """
    _validate_records(records, manifest)
    path = Path(path)
    chunks = [_HEADER.pack(MAGIC, manifest.format_version, len(records),
                           FRAME_ROWS, FRAME_COLS)]
    for rec in records:
        chunks.append(
            _RECORD_HEAD.pack(rec.subject_id, rec.posture_id, int(rec.device))
        )
        chunks.append(np.ascontiguousarray(rec.frame, dtype="<f4").tobytes())
    path.write_bytes(b"".join(chunks))
    manifest_path(path).write_text(manifest.to_json())


def load_dataset(path: str | Path) -> tuple[list[SampleRecord], DatasetManifest]:
    """Read a PRSD container; returns the stored records in stored order."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DatasetFormatError(f"{path}: too short for a PRSD header")
    magic, version, count, rows, cols = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise DatasetFormatError(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported format version {version}"
        )
    if rows != FRAME_ROWS or cols != FRAME_COLS:
        raise DatasetFormatError(
            f"{path}: unexpected frame shape {rows}x{cols}"
        )
    record_size = _RECORD_HEAD.size + FRAME_CELLS * 4
    expected = _HEADER.size + count * record_size
    if len(blob) != expected:
        raise DatasetCorruptionError(
            f"{path}: expected {expected} bytes for {count} records, "
            f"found {len(blob)}"
        )

    records: list[SampleRecord] = []
    offset = _HEADER.size
    for _ in range(count):
        subject, posture, device = _RECORD_HEAD.unpack_from(blob, offset)
        offset += _RECORD_HEAD.size
        frame = np.frombuffer(
            blob, dtype="<f4", count=FRAME_CELLS, offset=offset
        ).reshape(FRAME_ROWS, FRAME_COLS).copy()
        offset += FRAME_CELLS * 4
        records.append(
            SampleRecord(frame, int(subject), int(posture), Device(device))
        )

    mpath = manifest_path(path)
    if not mpath.exists():
        raise DatasetFormatError(f"{path}: manifest sidecar {mpath} missing")
    manifest = DatasetManifest.from_json(mpath.read_text())
    if manifest.record_count != count:
        raise DatasetFormatError(
            f"{path}: manifest declares {manifest.record_count} records, "
            f"container holds {count}"
        )
    return records, manifest


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

# Blob = (row, col, sigma_row, sigma_col, angle_deg, weight). Coordinates are
# template positions on the 56x40 grid before per-subject scaling.

# Bed-analog: body lies along the row axis on a full sensing array.
_BED_TEMPLATES: list[list[tuple[float, float, float, float, float, float]]] = [
    # 0: supine
    [(8, 20, 4.0, 5.5, 0, 1.0), (22, 20, 7.0, 8.5, 0, 2.6),
     (35, 20, 5.5, 7.0, 0, 2.0), (47, 16, 5.0, 2.8, 0, 0.7),
     (47, 24, 5.0, 2.8, 0, 0.7)],
    # 1: supine, legs crossed at the ankles
    [(8, 20, 4.0, 5.5, 0, 1.0), (22, 20, 7.0, 8.5, 0, 2.6),
     (35, 20, 5.5, 7.0, 0, 2.0), (48, 20, 5.5, 3.2, 8, 1.3)],
    # 2: left lateral
    [(9, 14, 3.5, 4.0, 0, 1.0), (23, 15, 7.5, 5.5, -8, 2.4),
     (36, 16, 5.0, 4.5, -6, 2.1), (48, 19, 4.5, 3.0, -12, 0.9)],
    # 3: right lateral
    [(9, 26, 3.5, 4.0, 0, 1.0), (23, 25, 7.5, 5.5, 8, 2.4),
     (36, 24, 5.0, 4.5, 6, 2.1), (48, 21, 4.5, 3.0, 12, 0.9)],
    # 4: prone
    [(7, 20, 3.5, 5.0, 0, 0.9), (20, 20, 8.0, 9.0, 0, 2.8),
     (33, 20, 5.0, 7.0, 0, 1.6), (45, 15, 5.5, 2.6, 0, 0.6),
     (45, 25, 5.5, 2.6, 0, 0.6)],
    # 5: fetal curl
    [(12, 13, 4.0, 4.5, -20, 1.1), (24, 17, 6.5, 6.0, -15, 2.4),
     (33, 22, 5.0, 4.5, -25, 2.0), (40, 15, 4.0, 4.0, -30, 1.0)],
]

# Chair-analog: the 56x40 map is pieced together from four sensing panels.
# Rows 0..23 backrest, rows 28..55 cushion, cols 0..2 / 37..39 armrests in
# the cushion band; the bands between panels never sense pressure.
_CHAIR_GUTTER_ROWS = (24, 25, 26, 27)
_CHAIR_GUTTER_COLS = (3, 4, 35, 36)

_CHAIR_TEMPLATES: list[list[tuple[float, float, float, float, float, float]]] = [
    # 0: upright, back resting
    [(12, 20, 6.0, 7.0, 0, 1.4), (38, 15, 5.5, 4.5, 0, 2.4),
     (38, 25, 5.5, 4.5, 0, 2.4), (50, 20, 4.0, 6.5, 0, 0.9)],
    # 1: lean forward (back off the rest)
    [(36, 15, 5.0, 4.2, 0, 2.6), (36, 25, 5.0, 4.2, 0, 2.6),
     (48, 14, 5.0, 3.0, 0, 1.3), (48, 26, 5.0, 3.0, 0, 1.3)],
    # 2: lean back heavily
    [(10, 20, 7.5, 8.5, 0, 2.3), (40, 15, 5.0, 4.2, 0, 2.0),
     (40, 25, 5.0, 4.2, 0, 2.0)],
    # 3: lean left
    [(12, 14, 6.5, 5.5, -8, 1.7), (38, 12, 5.5, 4.5, 0, 2.8),
     (38, 23, 5.0, 4.0, 0, 1.7), (40, 1, 8.0, 1.2, 0, 0.8)],
    # 4: lean right
    [(12, 26, 6.5, 5.5, 8, 1.7), (38, 28, 5.5, 4.5, 0, 2.8),
     (38, 17, 5.0, 4.0, 0, 1.7), (40, 38, 8.0, 1.2, 0, 0.8)],
    # 5: left leg crossed over right
    [(12, 20, 6.0, 7.0, 0, 1.4), (38, 16, 5.5, 4.8, 0, 2.9),
     (39, 26, 4.5, 3.6, 0, 1.2), (46, 24, 3.5, 4.5, 20, 0.8)],
    # 6: right leg crossed over left
    [(12, 20, 6.0, 7.0, 0, 1.4), (38, 24, 5.5, 4.8, 0, 2.9),
     (39, 14, 4.5, 3.6, 0, 1.2), (46, 16, 3.5, 4.5, -20, 0.8)],
    # 7: slouch (hips forward, upper back on the rest)
    [(7, 20, 5.0, 7.5, 0, 1.9), (44, 15, 5.5, 4.5, 0, 2.3),
     (44, 25, 5.5, 4.5, 0, 2.3), (53, 20, 2.5, 6.0, 0, 0.6)],
    # 8: perched on the seat edge
    [(51, 15, 4.0, 4.0, 0, 2.7), (51, 25, 4.0, 4.0, 0, 2.7),
     (44, 20, 3.0, 5.0, 0, 0.8)],
    # 9: arms on both armrests
    [(12, 20, 6.0, 7.0, 0, 1.5), (38, 15, 5.5, 4.5, 0, 2.3),
     (38, 25, 5.5, 4.5, 0, 2.3), (38, 1, 7.0, 1.2, 0, 1.0),
     (38, 38, 7.0, 1.2, 0, 1.0)],
    # 10: twist to the left, right arm braced
    [(13, 16, 6.0, 6.0, -18, 1.6), (38, 14, 5.5, 4.5, -8, 2.6),
     (39, 24, 4.8, 4.0, -8, 1.9), (36, 38, 6.0, 1.2, 0, 0.9)],
    # 11: feet tucked under, weight far back
    [(14, 20, 6.0, 7.5, 0, 1.6), (34, 15, 5.0, 4.2, 0, 2.5),
     (34, 25, 5.0, 4.2, 0, 2.5), (43, 20, 3.5, 5.5, 0, 1.0)],
]


def _subject_latents(seed: int, subject_id: int, separability: float) -> dict:
    """Body parameters for one subject; a function of (seed, subject_id) only.

    Asymmetry is kept small: bodies are near-symmetric, and identity must
    survive a horizontal flip of the frame.
    """
    rng = np.random.default_rng([seed, 101, subject_id])
    t = rng.uniform(-1.0, 1.0, size=4)
    return {
        "load": _BASE_LOAD * (1.0 + 0.18 * separability * t[0]),
        "width": 1.0 + 0.16 * separability * t[1],
        "length": 1.0 + 0.12 * separability * t[2],
        "asym": 0.08 * separability * t[3],
    }


def _render_template(
    blobs: list[tuple[float, float, float, float, float, float]],
    latents: dict,
) -> np.ndarray:
    """Render a posture template modulated by one subject's body parameters."""
    rows = np.arange(FRAME_ROWS, dtype=np.float64)[:, None]
    cols = np.arange(FRAME_COLS, dtype=np.float64)[None, :]
    centroid_r = sum(b[0] for b in blobs) / len(blobs)
    centroid_c = sum(b[1] for b in blobs) / len(blobs)
    frame = np.zeros((FRAME_ROWS, FRAME_COLS), dtype=np.float64)
    for r0, c0, sr, sc, angle, weight in blobs:
        r0 = centroid_r + (r0 - centroid_r) * latents["length"]
        c0 = centroid_c + (c0 - centroid_c) * latents["width"]
        sr = sr * latents["length"]
        sc = sc * latents["width"]
        theta = math.radians(angle)
        dr = rows - r0
        dc = cols - c0
        u = dr * math.cos(theta) + dc * math.sin(theta)
        v = -dr * math.sin(theta) + dc * math.cos(theta)
        frame += weight * np.exp(-0.5 * ((u / sr) ** 2 + (v / sc) ** 2))
    # Left-right load bias, smooth across columns.
    frame *= 1.0 + latents["asym"] * (cols - (FRAME_COLS - 1) / 2.0) / (
        (FRAME_COLS - 1) / 2.0
    )
    return np.maximum(frame, 0.0)


def _shift_frame(frame: np.ndarray, dr: int, dc: int) -> np.ndarray:
    """Integer translation with zero fill."""
    out = np.zeros_like(frame)
    src_r = slice(max(0, -dr), frame.shape[0] - max(0, dr))
    dst_r = slice(max(0, dr), frame.shape[0] - max(0, -dr))
    src_c = slice(max(0, -dc), frame.shape[1] - max(0, dc))
    dst_c = slice(max(0, dc), frame.shape[1] - max(0, -dc))
    out[dst_r, dst_c] = frame[src_r, src_c]
    return out


def posture_templates(posture_count: int) -> tuple[list[list[tuple]], bool]:
    """Template table for a posture count; returns (templates, is_chair).

    Six or fewer postures use the bed-analog family, more use the
    chair-analog family; counts beyond a family's size reuse templates with
    a deterministic placement offset.
    """
    family = _BED_TEMPLATES if posture_count <= len(_BED_TEMPLATES) else _CHAIR_TEMPLATES
    templates = []
    for p in range(posture_count):
        base = family[p % len(family)]
        cycle = p // len(family)
        if cycle:
            base = [(r + 2 * cycle, c, sr, sc, a, w) for r, c, sr, sc, a, w in base]
        templates.append(base)
    return templates, family is _CHAIR_TEMPLATES


def chair_gutter_mask() -> np.ndarray:
    mask = np.ones((FRAME_ROWS, FRAME_COLS), dtype=np.float64)
    mask[list(_CHAIR_GUTTER_ROWS), :] = 0.0
    mask[:, list(_CHAIR_GUTTER_COLS)] = 0.0
    return mask


def generate_synthetic(
    config: SyntheticConfig,
) -> tuple[list[SampleRecord], DatasetManifest]:
    """Generate a subject/posture-conditioned dataset from the config seed.

    Per sample: the subject-modulated posture template is rendered with a
    small orientation wobble and an integer placement jitter, masked by the
    device's dead zones (chair-analog only), normalised so the frame total
    equals the subject's load, then perturbed by multiplicative amplitude
    noise (truncated at three sigma) and additive sensor noise clipped at
    zero. Records come out sorted by (subject, posture, sample index).
    """
    templates, is_chair = posture_templates(config.posture_count)
    mask = chair_gutter_mask() if is_chair else None
    add_sigma = 5.0 * config.noise_scale

    records: list[SampleRecord] = []
    for s in range(config.subject_count):
        latents = _subject_latents(config.seed, s, config.separability)
        for p in range(config.posture_count):
            base = _render_template(templates[p], latents)
            rng = np.random.default_rng([config.seed, 202, s, p])
            for _ in range(config.samples_per_subject_posture):
                angle = rng.uniform(-_POSE_WOBBLE_DEG, _POSE_WOBBLE_DEG)
                frame = ndimage.rotate(
                    base, angle, reshape=False, order=1,
                    mode="constant", cval=0.0,
                )
                np.maximum(frame, 0.0, out=frame)
                if config.jitter_px > 0:
                    dr, dc = rng.integers(
                        -config.jitter_px, config.jitter_px + 1, size=2
                    )
                    frame = _shift_frame(frame, int(dr), int(dc))
                if mask is not None:
                    frame *= mask
                total = frame.sum()
                if total <= 0:
                    raise RuntimeError(
                        f"degenerate template: subject {s} posture {p} "
                        "has no on-grid pressure"
                    )
                frame *= latents["load"] / total
                if config.noise_scale > 0:
                    gain = 1.0 + config.noise_scale * float(
                        np.clip(rng.standard_normal(), -3.0, 3.0)
                    )
                    frame = frame * gain + add_sigma * rng.standard_normal(
                        frame.shape
                    )
                    frame = np.maximum(frame, 0.0)
                    if mask is not None:
                        # dead panel gaps have no sensors, not even noise
                        frame *= mask
                records.append(
                    SampleRecord(frame.astype(np.float32), s, p, Device.TARGET)
                )

    manifest = DatasetManifest(
        name=f"synthetic-{'chr' if is_chair else 'bed'}-{config.posture_count}p",
        subject_count=config.subject_count,
        posture_count=config.posture_count,
        samples_per_subject_posture=config.samples_per_subject_posture,
        generator_seed=config.seed,
    )
    return records, manifest


def frames_array(records: list[SampleRecord]) -> np.ndarray:
    """Stack record frames into a (N, 56, 40) float32 array."""
    if not records:
        return np.zeros((0, FRAME_ROWS, FRAME_COLS), dtype=np.float32)
    return np.stack([r.frame for r in records]).astype(np.float32)


def subject_labels(records: list[SampleRecord]) -> np.ndarray:
    return np.array([r.subject_id for r in records], dtype=np.int64)


def posture_labels(records: list[SampleRecord]) -> np.ndarray:
    return np.array([r.posture_id for r in records], dtype=np.int64)
