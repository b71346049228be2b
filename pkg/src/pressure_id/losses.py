"""The three training-loss terms and their weighted sum.

Two per-branch cross-entropy terms score subject classification on each
device; the supervised contrastive term operates on the pooled embeddings
of both devices, where the positives of a row are all other rows carrying
the same subject id regardless of device or augmentation. The contrastive
term keeps the mean over positives inside the logarithm:

    L_con = (1/|I|) * sum_i -log[ (1/|P(i)|) * sum_{p in P(i)}
            exp(z_i . z_p / tau) / sum_{a != i} exp(z_i . z_a / tau) ]

Rows with no positives are excluded from I. All reductions run in row-major
order and the shifted-exponential trick keeps the term finite for any
bounded embeddings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights of the two cross-entropy terms and the contrastive term."""

    ce_target: float = 0.15
    ce_auxiliary: float = 0.15
    contrastive: float = 0.7

    def __post_init__(self) -> None:
        for name in ("ce_target", "ce_auxiliary", "contrastive"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.ce_target == 0 and self.ce_auxiliary == 0 and self.contrastive == 0:
            raise ValueError("at least one loss weight must be positive")


@dataclass
class ContrastiveBatch:
    """Pooled embeddings with device-agnostic subject labels and a temperature."""

    embeddings: torch.Tensor
    labels: torch.Tensor
    temperature: float


def cross_entropy(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log softmax probability of the true class."""
    if logits.ndim != 2:
        raise ValueError(f"logits must be 2-D, got shape {tuple(logits.shape)}")
    if logits.shape[0] == 0:
        raise ValueError("cross_entropy over an empty batch is undefined")
    if logits.shape[0] != labels.shape[0]:
        raise ValueError(
            f"{logits.shape[0]} logit rows but {labels.shape[0]} labels"
        )
    return F.cross_entropy(logits, labels)


def supcon_loss(batch: ContrastiveBatch) -> torch.Tensor:
    """Supervised contrastive loss, mean-over-positives inside the log.

    Rows whose label appears nowhere else in the batch contribute nothing
    and are dropped from the average; if no row has a positive the loss is
    undefined and a ValueError is raised.
    """
    z = batch.embeddings
    y = batch.labels
    if batch.temperature <= 0:
        raise ValueError(f"temperature must be > 0, got {batch.temperature}")
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("contrastive loss needs at least 2 embedding rows")
    if z.shape[0] != y.shape[0]:
        raise ValueError(f"{z.shape[0]} embeddings but {y.shape[0]} labels")

    n = z.shape[0]
    sim = (z @ z.T) / batch.temperature
    eye = torch.eye(n, dtype=torch.bool, device=z.device)
    pos_mask = (y.unsqueeze(0) == y.unsqueeze(1)) & ~eye
    pos_counts = pos_mask.sum(dim=1)
    valid = pos_counts > 0
    if not bool(valid.any()):
        raise ValueError("every row lacks a positive; the loss is undefined")

    # Shift by the per-row max over A(i); the shift cancels between the
    # numerator and denominator, so this is exact, not an approximation.
    sim = sim.masked_fill(eye, float("-inf"))
    shift = sim.max(dim=1, keepdim=True).values.detach()
    exps = torch.exp(sim - shift)
    denom = exps.sum(dim=1)
    pos_mean = (exps * pos_mask).sum(dim=1) / pos_counts.clamp_min(1)
    terms = torch.log(denom) - torch.log(pos_mean)
    return terms[valid].mean()


def _check_finite(name: str, value) -> None:
    scalar = float(value.detach()) if isinstance(value, torch.Tensor) else float(value)
    if not math.isfinite(scalar):
        raise ValueError(f"{name} is not finite: {scalar}")


def total_loss(ce_target, ce_auxiliary, contrastive, weights: LossWeights):
    """Weighted sum of the three terms, fixed evaluation order.

    Accepts floats or scalar tensors; tensors keep their autograd graph.
    """
    _check_finite("ce_target", ce_target)
    _check_finite("ce_auxiliary", ce_auxiliary)
    _check_finite("contrastive", contrastive)
    return weights.ce_target * ce_target + (
        weights.ce_auxiliary * ce_auxiliary + weights.contrastive * contrastive
    )
