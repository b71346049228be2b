"""Comparison models: KNN, Nil, Aug, Recon, Trans.

Nil and Aug train one branch on the limited target split only (Aug with the
batch-doubling augmentation, Nil without). Recon first pretrains the encoder
inside a mirror autoencoder on target frames; Trans first trains
encoder+classifier on the abundant auxiliary data. Both then fine-tune on
the target split with a fresh classifier head. All learned baselines share
the dual trainer's batch schedule, seeding, and checkpoint selection, so a
zero-epoch pretraining stage reduces to Nil run-for-run.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .data import SampleRecord, frames_array, subject_labels
from .losses import cross_entropy
from .models import BranchModel, NUM_SUBJECTS, build_decoder, init_single_branch
from .training import (
    STREAM_AUX_SAMPLING,
    STREAM_PRETRAIN,
    STREAM_TARGET_AUGMENT,
    STREAM_TARGET_SAMPLING,
    EpochRecord,
    TrainConfig,
    TrainHistory,
    _arrays,
    _batch_tensors,
    evaluate_accuracy,
    rng_streams,
)

BASELINE_KINDS = ("knn", "nil", "aug", "recon", "trans")


@dataclass(frozen=True)
class BaselineSpec:
    kind: str
    k: int = 5
    pretrain_epochs: int = 50
    finetune_epochs: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"kind must be one of {BASELINE_KINDS}, got {self.kind!r}")
        if self.k < 1 or self.k % 2 == 0:
            raise ValueError(f"k must be odd and >= 1, got {self.k}")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")


@dataclass
class BaselineResult:
    model: BranchModel | None
    accuracy: float
    history: TrainHistory | None


# ---------------------------------------------------------------------------
# KNN
# ---------------------------------------------------------------------------

def knn_predict(
    train_x: np.ndarray,
    train_y: np.ndarray,
    query_x: np.ndarray,
    k: int,
    num_classes: int = NUM_SUBJECTS,
) -> np.ndarray:
    """Majority vote among the k nearest training rows by Euclidean distance.

    Vote ties break by the smaller mean distance of the tied class within
    the k neighbours, then by the lower class id. Distance ties at the k-th
    rank resolve by training-set order.
    """
    if not (1 <= k <= len(train_x)):
        raise ValueError(f"k={k} out of range [1, {len(train_x)}]")
    train_x = train_x.reshape(len(train_x), -1).astype(np.float64)
    query_x = query_x.reshape(len(query_x), -1).astype(np.float64)
    d2 = (
        np.sum(query_x**2, axis=1, keepdims=True)
        + np.sum(train_x**2, axis=1)[None, :]
        - 2.0 * query_x @ train_x.T
    )
    dists = np.sqrt(np.maximum(d2, 0.0))
    preds = np.empty(len(query_x), dtype=np.int64)
    for i in range(len(query_x)):
        order = np.argsort(dists[i], kind="stable")[:k]
        nbr_labels = train_y[order]
        nbr_dists = dists[i][order]
        votes = np.bincount(nbr_labels, minlength=num_classes)
        top = votes.max()
        cands = np.flatnonzero(votes == top)
        if len(cands) == 1:
            preds[i] = cands[0]
        else:
            means = np.array(
                [nbr_dists[nbr_labels == c].mean() for c in cands]
            )
            preds[i] = cands[np.argmin(means)]
    return preds


def run_knn(
    train_records: list[SampleRecord],
    test_records: list[SampleRecord],
    k: int = 5,
) -> float:
    """Accuracy of the flattened-pixel KNN classifier on the test split."""
    if not train_records or not test_records:
        raise ValueError("KNN needs non-empty train and test splits")
    train_x = frames_array(train_records)
    train_y = subject_labels(train_records)
    test_x = frames_array(test_records)
    test_y = subject_labels(test_records)
    preds = knn_predict(train_x, train_y, test_x, k)
    return float(np.mean(preds == test_y))


# ---------------------------------------------------------------------------
# Single-branch training (Nil / Aug / fine-tuning stages)
# ---------------------------------------------------------------------------

def _single_branch_loop(
    model: BranchModel,
    train_records: list[SampleRecord],
    val_records: list[SampleRecord],
    config: TrainConfig,
    augment,
    epochs: int,
) -> TrainHistory:
    """Mirror of the dual loop's target side: same schedule, same rng streams.

    Epochs run ceil(|train| / N) steps with batches drawn with replacement;
    the chunk-size pattern matches the dual trainer anchored to a dataset of
    the same length, so single-branch runs reproduce the dual trainer's
    target branch when the losses decouple.
    """
    frames, labels = _arrays(train_records, "target training")
    val_frames, val_labels = _arrays(val_records, "target validation")
    streams = rng_streams(config.seed)
    samp = streams[STREAM_TARGET_SAMPLING]
    aug_rng = streams[STREAM_TARGET_AUGMENT]
    weight = config.weights.ce_target

    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    steps_per_epoch = math.ceil(len(frames) / config.batch_size)
    records: list[EpochRecord] = []
    best_acc = -1.0
    best_epoch = -1
    best_state = None

    for epoch in range(epochs):
        model.train()
        ce_sum = 0.0
        for step in range(steps_per_epoch):
            size = min(
                config.batch_size, len(frames) - step * config.batch_size
            )
            idx = samp.integers(0, len(frames), size=size)
            x, y = _batch_tensors(frames[idx], labels[idx], augment, aug_rng)
            ce = cross_entropy(model.decoder(model(x)), y)
            loss = weight * ce
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"non-finite loss at epoch {epoch} step {step}: "
                    f"ce={float(ce.detach())}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            ce_sum += float(ce.detach())

        val_acc = evaluate_accuracy(model, val_frames, val_labels)
        mean_ce = ce_sum / steps_per_epoch
        records.append(
            EpochRecord(
                epoch=epoch,
                ce_target=mean_ce,
                ce_auxiliary=0.0,
                contrastive=0.0,
                total=weight * mean_ce,
                val_accuracy=val_acc,
            )
        )
        if val_acc > best_acc:
            best_acc = val_acc
            best_epoch = epoch
            best_state = copy.deepcopy(model.state_dict())

    if best_state is not None:
        model.load_state_dict(best_state)
    return TrainHistory(records, best_epoch=best_epoch)


def run_nil(
    train_records: list[SampleRecord],
    val_records: list[SampleRecord],
    test_records: list[SampleRecord],
    config: TrainConfig,
) -> BaselineResult:
    """Plain single-branch classifier on the target split, no augmentation."""
    model = init_single_branch(config.encoder, seed=config.seed)
    history = _single_branch_loop(
        model, train_records, val_records, config, augment=None,
        epochs=config.epochs,
    )
    test_frames, test_labels = _arrays(test_records, "test")
    return BaselineResult(
        model, evaluate_accuracy(model, test_frames, test_labels), history
    )


def run_aug(
    train_records: list[SampleRecord],
    val_records: list[SampleRecord],
    test_records: list[SampleRecord],
    config: TrainConfig,
) -> BaselineResult:
    """Single-branch classifier with the batch-doubling augmentation."""
    from .augment import AugmentConfig

    augment = config.augment if config.augment is not None else AugmentConfig()
    model = init_single_branch(config.encoder, seed=config.seed)
    history = _single_branch_loop(
        model, train_records, val_records, config, augment=augment,
        epochs=config.epochs,
    )
    test_frames, test_labels = _arrays(test_records, "test")
    return BaselineResult(
        model, evaluate_accuracy(model, test_frames, test_labels), history
    )


# ---------------------------------------------------------------------------
# Recon: autoencoder pretraining on the target frames
# ---------------------------------------------------------------------------

class ReconstructionDecoder(nn.Module):
    """Mirror decoder mapping an embedding back to a 56x40 frame.

    Bias-free throughout: the stack is positively homogeneous, so an empty
    embedding decodes to the empty frame, matching the physical vacuum of a
    pressure map instead of a learned mean image.
    """

    def __init__(self, embedding_dim: int):
        super().__init__()
        self.fc = nn.Linear(embedding_dim, 64 * 7 * 5, bias=False)
        self.deconv = nn.Sequential(
            nn.ConvTranspose2d(64, 32, 4, stride=2, padding=1, bias=False),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(32, 16, 4, stride=2, padding=1, bias=False),
            nn.ReLU(inplace=True),
            nn.ConvTranspose2d(16, 1, 4, stride=2, padding=1, bias=False),
            nn.ReLU(inplace=True),
        )

    def forward(self, z):
        out = self.fc(z).reshape(-1, 64, 7, 5)
        return self.deconv(out)


def pretrain_reconstruction(
    model: BranchModel,
    train_records: list[SampleRecord],
    config: TrainConfig,
    epochs: int,
) -> tuple[ReconstructionDecoder, list[float], float]:
    """Train encoder + mirror decoder with mean-squared reconstruction.

    The encoder consumes raw frames, exactly as the later fine-tuning stage
    will; only the reconstruction target is scaled by the training maximum
    so the MSE is O(1). Returns the decoder, per-epoch losses, and the
    target scale.
    """
    frames, _ = _arrays(train_records, "pretraining")
    scale = float(frames.max())
    if scale <= 0:
        scale = 1.0
    decoder = ReconstructionDecoder(model.config.embedding_dim)
    rng = rng_streams(config.seed)[STREAM_PRETRAIN]
    params = list(model.encoder.parameters()) + list(decoder.parameters())
    optimizer = torch.optim.Adam(params, lr=config.learning_rate)
    steps_per_epoch = math.ceil(len(frames) / config.batch_size)
    losses: list[float] = []
    model.train()
    for _ in range(epochs):
        epoch_sum = 0.0
        for step in range(steps_per_epoch):
            size = min(config.batch_size, len(frames) - step * config.batch_size)
            idx = rng.integers(0, len(frames), size=size)
            x = torch.from_numpy(
                np.ascontiguousarray(frames[idx][:, None], dtype=np.float32)
            )
            recon = decoder(model(x))
            loss = torch.mean((recon - x / scale) ** 2)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            epoch_sum += float(loss.detach())
        losses.append(epoch_sum / steps_per_epoch)
    return decoder, losses, scale


def run_recon(
    train_records: list[SampleRecord],
    val_records: list[SampleRecord],
    test_records: list[SampleRecord],
    config: TrainConfig,
    pretrain_epochs: int = 50,
) -> BaselineResult:
    """Autoencoder-pretrained encoder, then a Nil-style fine-tune.

    With pretrain_epochs=0 this is Nil run-for-run: the classifier head
    created at init is never touched by pretraining, and the fine-tune
    stage consumes the same rng streams.
    """
    model = init_single_branch(config.encoder, seed=config.seed)
    if pretrain_epochs > 0:
        pretrain_reconstruction(model, train_records, config, pretrain_epochs)
    history = _single_branch_loop(
        model, train_records, val_records, config, augment=None,
        epochs=config.epochs,
    )
    test_frames, test_labels = _arrays(test_records, "test")
    return BaselineResult(
        model, evaluate_accuracy(model, test_frames, test_labels), history
    )


# ---------------------------------------------------------------------------
# Trans: supervised pretraining on the auxiliary dataset
# ---------------------------------------------------------------------------

def pretrain_on_auxiliary(
    model: BranchModel,
    auxiliary_records: list[SampleRecord],
    config: TrainConfig,
    epochs: int,
) -> float:
    """Supervised pretraining on auxiliary subject labels; returns train accuracy."""
    frames, labels = _arrays(auxiliary_records, "auxiliary")
    rng = rng_streams(config.seed)[STREAM_AUX_SAMPLING]
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    steps_per_epoch = math.ceil(len(frames) / config.batch_size)
    model.train()
    for _ in range(epochs):
        order = rng.permutation(len(frames))
        for step in range(steps_per_epoch):
            idx = order[step * config.batch_size : (step + 1) * config.batch_size]
            x, y = _batch_tensors(frames[idx], labels[idx], None, rng)
            loss = cross_entropy(model.decoder(model(x)), y)
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    return evaluate_accuracy(model, frames, labels)


def run_trans(
    train_records: list[SampleRecord],
    val_records: list[SampleRecord],
    test_records: list[SampleRecord],
    auxiliary_records: list[SampleRecord],
    config: TrainConfig,
    pretrain_epochs: int = 50,
    finetune_epochs: int | None = None,
) -> BaselineResult:
    """Pretrain on auxiliary data, swap in a fresh head, fine-tune on target."""
    model = init_single_branch(config.encoder, seed=config.seed)
    if pretrain_epochs > 0:
        pretrain_on_auxiliary(model, auxiliary_records, config, pretrain_epochs)
    model.decoder = build_decoder(model.config.embedding_dim)
    epochs = config.epochs if finetune_epochs is None else finetune_epochs
    if epochs > 0:
        history = _single_branch_loop(
            model, train_records, val_records, config, augment=None,
            epochs=epochs,
        )
    else:
        history = TrainHistory([], best_epoch=-1)
    test_frames, test_labels = _arrays(test_records, "test")
    return BaselineResult(
        model, evaluate_accuracy(model, test_frames, test_labels), history
    )
