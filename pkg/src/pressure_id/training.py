"""Dual-branch training loop.

Each step pairs a target mini-batch (drawn with replacement from the limited
target split) with an auxiliary mini-batch (one shuffled pass per epoch over
the abundant auxiliary data, which anchors the epoch length). Both batches
are doubled by augmentation, encoded by their branch, scored by per-branch
cross-entropy, and pooled into the supervised contrastive term over the
concatenated embeddings of both devices. The weighted sum is backpropagated
into both branches and the decoder(s).

Runs are bit-reproducible given the config seed and single-threaded
execution: model initialisation is seeded through torch, and sampling /
augmentation draw from named numpy streams spawned from the same seed.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .augment import AugmentConfig, augment_batch
from .data import SampleRecord, frames_array, subject_labels
from .losses import ContrastiveBatch, LossWeights, cross_entropy, supcon_loss, total_loss
from .models import (
    BranchModel,
    EncoderConfig,
    NUM_SUBJECTS,
    init_model,
    project_for_contrast,
)

# Spawn positions of the per-purpose RNG streams. Baselines reuse the
# target-side streams so a single-branch run consumes exactly the draws the
# dual run's target branch would.
STREAM_TARGET_SAMPLING = 0
STREAM_TARGET_AUGMENT = 1
STREAM_AUX_SAMPLING = 2
STREAM_AUX_AUGMENT = 3
STREAM_PRETRAIN = 4
_NUM_STREAMS = 5


@dataclass(frozen=True)
class TrainConfig:
    temperature: float = 0.10
    weights: LossWeights = field(default_factory=LossWeights)
    learning_rate: float = 5e-4
    epochs: int = 150
    batch_size: int = 32
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    decoder_sharing: str = "independent"
    augment: AugmentConfig | None = field(default_factory=AugmentConfig)
    stop_gradient_auxiliary: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")

    def with_overrides(self, **kwargs) -> "TrainConfig":
        return replace(self, **kwargs)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    ce_target: float
    ce_auxiliary: float
    contrastive: float
    total: float
    val_accuracy: float


@dataclass
class TrainHistory:
    records: list[EpochRecord]
    best_epoch: int = 0

    _COLUMNS = ("epoch", "lce1", "lce2", "lcon", "total", "val_acc")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self._COLUMNS)
            for r in self.records:
                writer.writerow(
                    [
                        r.epoch,
                        repr(r.ce_target),
                        repr(r.ce_auxiliary),
                        repr(r.contrastive),
                        repr(r.total),
                        repr(r.val_accuracy),
                    ]
                )

    @classmethod
    def from_csv(cls, path: str | Path) -> "TrainHistory":
        records = []
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                records.append(
                    EpochRecord(
                        epoch=int(row["epoch"]),
                        ce_target=float(row["lce1"]),
                        ce_auxiliary=float(row["lce2"]),
                        contrastive=float(row["lcon"]),
                        total=float(row["total"]),
                        val_accuracy=float(row["val_acc"]),
                    )
                )
        best = max(range(len(records)), key=lambda i: records[i].val_accuracy)
        return cls(records, best_epoch=records[best].epoch)

    @property
    def best_val_accuracy(self) -> float:
        return max(r.val_accuracy for r in self.records)


@dataclass
class TrainResult:
    target: BranchModel
    auxiliary: BranchModel | None
    history: TrainHistory


def rng_streams(seed: int) -> list[np.random.Generator]:
    children = np.random.SeedSequence(seed).spawn(_NUM_STREAMS)
    return [np.random.default_rng(c) for c in children]


def _arrays(records: list[SampleRecord], what: str) -> tuple[np.ndarray, np.ndarray]:
    if not records:
        raise ValueError(f"{what} split is empty")
    labels = subject_labels(records)
    if labels.min() < 0 or labels.max() >= NUM_SUBJECTS:
        raise ValueError(
            f"{what} labels must lie in [0, {NUM_SUBJECTS - 1}], "
            f"found range [{labels.min()}, {labels.max()}]"
        )
    return frames_array(records), labels


def _batch_tensors(
    frames: np.ndarray,
    labels: np.ndarray,
    augment: AugmentConfig | None,
    rng: np.random.Generator,
) -> tuple[torch.Tensor, torch.Tensor]:
    if augment is not None:
        frames, labels = augment_batch(frames, labels, augment, rng)
    x = torch.from_numpy(np.ascontiguousarray(frames[:, None], dtype=np.float32))
    y = torch.from_numpy(np.ascontiguousarray(labels, dtype=np.int64))
    return x, y


def predict(model: BranchModel, frames) -> np.ndarray:
    """Argmax subject ids; ties resolve to the lowest class index."""
    x = torch.from_numpy(
        np.ascontiguousarray(np.asarray(frames, dtype=np.float32)[:, None])
    )
    model.eval()
    preds = []
    with torch.no_grad():
        for i in range(0, len(x), 512):
            logits = model.decoder(model(x[i : i + 512])).numpy()
            preds.append(np.argmax(logits, axis=1))
    return (
        np.concatenate(preds) if preds else np.zeros(0, dtype=np.int64)
    ).astype(np.int64)


def evaluate_accuracy(model: BranchModel, frames: np.ndarray, labels: np.ndarray) -> float:
    return float(np.mean(predict(model, frames) == labels))


def train(
    target_train: list[SampleRecord],
    target_val: list[SampleRecord],
    auxiliary: list[SampleRecord],
    config: TrainConfig,
) -> TrainResult:
    """Train both branches and return the highest-validation-accuracy checkpoint.

    The epoch is anchored to the auxiliary dataset: ceil(|auxiliary| / N)
    steps per epoch, auxiliary batches from a fresh shuffled pass, target
    batches of matching size drawn with replacement. Terms with a zero
    weight are skipped entirely (their branch sees no forward pass from
    that term) and recorded as 0.0 in the history.
    """
    tgt_frames, tgt_labels = _arrays(target_train, "target training")
    val_frames, val_labels = _arrays(target_val, "target validation")
    aux_frames, aux_labels = _arrays(auxiliary, "auxiliary")

    torch.manual_seed(config.seed)
    target, auxiliary_model = init_model(
        config.encoder, config.decoder_sharing, seed=config.seed
    )
    streams = rng_streams(config.seed)
    t_samp = streams[STREAM_TARGET_SAMPLING]
    t_aug = streams[STREAM_TARGET_AUGMENT]
    a_samp = streams[STREAM_AUX_SAMPLING]
    a_aug = streams[STREAM_AUX_AUGMENT]

    w = config.weights
    need_target = w.ce_target > 0 or w.contrastive > 0
    need_aux = w.ce_auxiliary > 0 or w.contrastive > 0

    params = {
        id(p): p
        for model in (target, auxiliary_model)
        for p in model.parameters()
    }
    optimizer = torch.optim.Adam(list(params.values()), lr=config.learning_rate)

    steps_per_epoch = math.ceil(len(aux_frames) / config.batch_size)
    records: list[EpochRecord] = []
    best_acc = -1.0
    best_epoch = -1
    best_states: tuple[dict, dict] | None = None

    for epoch in range(config.epochs):
        target.train()
        auxiliary_model.train()
        sums = {"ce1": 0.0, "ce2": 0.0, "con": 0.0, "total": 0.0}
        aux_order = a_samp.permutation(len(aux_frames))
        for step in range(steps_per_epoch):
            aux_idx = aux_order[
                step * config.batch_size : (step + 1) * config.batch_size
            ]
            tgt_idx = t_samp.integers(0, len(tgt_frames), size=len(aux_idx))

            ce1 = torch.zeros(())
            ce2 = torch.zeros(())
            con = torch.zeros(())
            z_t = y_t = z_a = y_a = None
            if need_target:
                x_t, y_t = _batch_tensors(
                    tgt_frames[tgt_idx], tgt_labels[tgt_idx], config.augment, t_aug
                )
                z_t = target(x_t)
                if w.ce_target > 0:
                    ce1 = cross_entropy(target.decoder(z_t), y_t)
            if need_aux:
                x_a, y_a = _batch_tensors(
                    aux_frames[aux_idx], aux_labels[aux_idx], config.augment, a_aug
                )
                z_a = auxiliary_model(x_a)
                if w.ce_auxiliary > 0:
                    ce2 = cross_entropy(auxiliary_model.decoder(z_a), y_a)
            if w.contrastive > 0:
                z_a_con = z_a.detach() if config.stop_gradient_auxiliary else z_a
                pooled = torch.cat(
                    [
                        target.contrast_embedding(z_t),
                        auxiliary_model.contrast_embedding(z_a_con),
                    ]
                )
                normed, _ = project_for_contrast(pooled)
                con = supcon_loss(
                    ContrastiveBatch(
                        normed, torch.cat([y_t, y_a]), config.temperature
                    )
                )

            loss = total_loss(ce1, ce2, con, w)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"ce_target={float(ce1.detach())}, "
                    f"ce_auxiliary={float(ce2.detach())}, "
                    f"contrastive={float(con.detach())}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()

            sums["ce1"] += float(ce1.detach())
            sums["ce2"] += float(ce2.detach())
            sums["con"] += float(con.detach())
            sums["total"] += float(loss.detach())

        val_acc = evaluate_accuracy(target, val_frames, val_labels)
        records.append(
            EpochRecord(
                epoch=epoch,
                ce_target=sums["ce1"] / steps_per_epoch,
                ce_auxiliary=sums["ce2"] / steps_per_epoch,
                contrastive=sums["con"] / steps_per_epoch,
                total=sums["total"] / steps_per_epoch,
                val_accuracy=val_acc,
            )
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_states = (
                copy.deepcopy(target.state_dict()),
                copy.deepcopy(auxiliary_model.state_dict()),
            )

    target.load_state_dict(best_states[0])
    auxiliary_model.load_state_dict(best_states[1])
    return TrainResult(
        target=target,
        auxiliary=auxiliary_model,
        history=TrainHistory(records, best_epoch=best_epoch),
    )
