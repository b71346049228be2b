"""The mPnS limited-data protocol.

Training data is restricted to m postures and n samples per chosen posture
per subject; everything else forms a held-out pool that is partitioned into
validation and test, stratified by (subject, posture). The test set always
covers every posture of every subject, so models trained on the m chosen
postures are scored on postures they never saw.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import DatasetManifest, SampleRecord


@dataclass(frozen=True)
class MPnSSpec:
    """m postures, n samples per posture per subject, plus the split seed."""

    m: int
    n: int
    split_seed: int = 0
    val_fraction: float = 0.2

    def __post_init__(self) -> None:
        if self.m < 1:
            raise ValueError(f"m must be >= 1, got {self.m}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if not (0.0 < self.val_fraction < 1.0):
            raise ValueError(
                f"val_fraction must be in (0, 1), got {self.val_fraction}"
            )

    @property
    def tag(self) -> str:
        return f"{self.m}P{self.n}S"


@dataclass(frozen=True)
class SplitResult:
    train: tuple[int, ...]
    val: tuple[int, ...]
    test: tuple[int, ...]
    spec: MPnSSpec
    chosen_postures: tuple[int, ...]

    def to_json(self) -> str:
        payload = {
            "spec": asdict(self.spec),
            "chosen_postures": list(self.chosen_postures),
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
        }
        return json.dumps(payload, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SplitResult":
        payload = json.loads(text)
        return cls(
            train=tuple(payload["train"]),
            val=tuple(payload["val"]),
            test=tuple(payload["test"]),
            spec=MPnSSpec(**payload["spec"]),
            chosen_postures=tuple(payload["chosen_postures"]),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "SplitResult":
        return cls.from_json(Path(path).read_text())


def split_mpns(
    records: list[SampleRecord], manifest: DatasetManifest, spec: MPnSSpec
) -> SplitResult:
    """Draw an mPnS split over record indices.

    A seeded RNG picks the same m postures for every subject, then n
    training samples per (subject, chosen posture). All remaining samples
    form the held-out pool, partitioned per (subject, posture) cell into
    validation and test; each cell keeps at least one test sample so the
    test set spans every posture of every subject.
    """
    if spec.m > manifest.posture_count:
        raise ValueError(
            f"m={spec.m} exceeds posture count {manifest.posture_count}"
        )
    if spec.n > manifest.samples_per_subject_posture:
        raise ValueError(
            f"n={spec.n} exceeds samples per (subject, posture) "
            f"{manifest.samples_per_subject_posture}"
        )

    cells: dict[tuple[int, int], list[int]] = {}
    postures: set[int] = set()
    for idx, rec in enumerate(records):
        cells.setdefault((rec.subject_id, rec.posture_id), []).append(idx)
        postures.add(rec.posture_id)

    rng = np.random.default_rng(spec.split_seed)
    posture_ids = sorted(postures)
    chosen = sorted(
        int(p) for p in rng.choice(posture_ids, size=spec.m, replace=False)
    )

    train: list[int] = []
    pool_cells: dict[tuple[int, int], list[int]] = {}
    for key in sorted(cells):
        cell = cells[key]
        if key[1] in chosen:
            if spec.n > len(cell):
                raise ValueError(
                    f"cell {key} holds {len(cell)} samples, n={spec.n} requested"
                )
            picked = rng.choice(len(cell), size=spec.n, replace=False)
            picked_set = set(int(i) for i in picked)
            train.extend(cell[i] for i in sorted(picked_set))
            rest = [cell[i] for i in range(len(cell)) if i not in picked_set]
        else:
            rest = list(cell)
        if not rest:
            raise ValueError(
                f"no held-out samples left for subject {key[0]} posture "
                f"{key[1]}; the test set could not cover every posture"
            )
        pool_cells[key] = rest

    val: list[int] = []
    test: list[int] = []
    for key in sorted(pool_cells):
        rest = pool_cells[key]
        order = rng.permutation(len(rest))
        n_val = min(int(math.floor(spec.val_fraction * len(rest))), len(rest) - 1)
        val.extend(rest[i] for i in order[:n_val])
        test.extend(rest[i] for i in order[n_val:])

    if not val:
        raise ValueError("held-out pool too small to populate a validation set")

    return SplitResult(
        train=tuple(sorted(train)),
        val=tuple(sorted(val)),
        test=tuple(sorted(test)),
        spec=spec,
        chosen_postures=tuple(chosen),
    )


def take(records: list[SampleRecord], indices) -> list[SampleRecord]:
    """Materialise a list of records from split indices."""
    return [records[i] for i in indices]
