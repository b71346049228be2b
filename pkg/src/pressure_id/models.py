"""Encoder and decoder branches.

Each branch is an encoder mapping a 1x56x40 pressure frame to an embedding
plus a decoder mapping the embedding to per-subject logits. Encoders come in
three residual depth tiers (small/medium/large) adapted to the single-channel
low-resolution input with a 3x3 stem and no initial pooling, plus a two-conv
"tiny" tier that keeps end-to-end tests and gradient checks fast. Decoders
can be independent per branch or one shared module referenced by both.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import FRAME_COLS, FRAME_ROWS

NUM_SUBJECTS = 8

ENCODER_VARIANTS = ("tiny", "small", "medium", "large")
DECODER_SHARING = ("independent", "shared")


@dataclass(frozen=True)
class EncoderConfig:
    variant: str = "small"
    embedding_dim: int = 128
    contrast_head: bool = False  # optional hidden-layer head before the contrastive term

    def __post_init__(self) -> None:
        if self.variant not in ENCODER_VARIANTS:
            raise ValueError(
                f"variant must be one of {ENCODER_VARIANTS}, got {self.variant!r}"
            )
        if self.embedding_dim < 8:
            raise ValueError(
                f"embedding_dim must be >= 8, got {self.embedding_dim}"
            )


class BasicBlock(nn.Module):
    expansion = 1

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_ch != out_ch:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch),
            )

    def forward(self, x):
        out = torch.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return torch.relu(out + self.shortcut(x))


class Bottleneck(nn.Module):
    expansion = 4

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_ch, out_ch, 1, bias=False)
        self.bn1 = nn.BatchNorm2d(out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, stride=stride, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(out_ch)
        self.conv3 = nn.Conv2d(out_ch, out_ch * self.expansion, 1, bias=False)
        self.bn3 = nn.BatchNorm2d(out_ch * self.expansion)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_ch != out_ch * self.expansion:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_ch, out_ch * self.expansion, 1, stride=stride, bias=False),
                nn.BatchNorm2d(out_ch * self.expansion),
            )

    def forward(self, x):
        out = torch.relu(self.bn1(self.conv1(x)))
        out = torch.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        return torch.relu(out + self.shortcut(x))


class ResidualEncoder(nn.Module):
    """Residual trunk with a 3x3 single-channel stem and an embedding head."""

    def __init__(self, block, layers: list[int], embedding_dim: int):
        super().__init__()
        self.in_ch = 64
        self.stem = nn.Sequential(
            nn.Conv2d(1, 64, 3, stride=1, padding=1, bias=False),
            nn.BatchNorm2d(64),
            nn.ReLU(inplace=True),
        )
        self.stage1 = self._stage(block, 64, layers[0], stride=1)
        self.stage2 = self._stage(block, 128, layers[1], stride=2)
        self.stage3 = self._stage(block, 256, layers[2], stride=2)
        self.stage4 = self._stage(block, 512, layers[3], stride=2)
        self.pool = nn.AdaptiveAvgPool2d(1)
        self.head = nn.Linear(512 * block.expansion, embedding_dim)

    def _stage(self, block, out_ch, blocks, stride):
        strides = [stride] + [1] * (blocks - 1)
        layers = []
        for s in strides:
            layers.append(block(self.in_ch, out_ch, s))
            self.in_ch = out_ch * block.expansion
        return nn.Sequential(*layers)

    def forward(self, x):
        out = self.stem(x)
        out = self.stage4(self.stage3(self.stage2(self.stage1(out))))
        out = torch.flatten(self.pool(out), 1)
        return self.head(out)


class TinyEncoder(nn.Module):
    """Two strided convolutions; test-tier encoder honouring the same contracts.

    Two pathways feed one linear head. A bias-free conv stack with
    affine-less group normalisation supplies position-aware shape features
    (the normalisation is per-sample, so these are intensity-invariant),
    and a coarse average pooling of the raw frame supplies the absolute
    pressure magnitudes the normalisation removes; pressure is a calibrated
    quantity, and total load is an identity cue. Both pathways vanish on an
    empty frame, so the physical vacuum maps to the zero embedding exactly,
    and the forward pass has no batch coupling or running state.
    """

    def __init__(self, embedding_dim: int):
        super().__init__()
        self.features = nn.Sequential(
            nn.Conv2d(1, 8, 3, stride=2, padding=1, bias=False),
            nn.GroupNorm(4, 8, affine=False),
            nn.ReLU(inplace=True),
            nn.Conv2d(8, 16, 3, stride=2, padding=1, bias=False),
            nn.GroupNorm(4, 16, affine=False),
            nn.ReLU(inplace=True),
        )
        self.coarse = nn.AvgPool2d(kernel_size=8, stride=8)  # 56x40 -> 7x5
        self.head = nn.Linear(16 * 14 * 10 + 7 * 5, embedding_dim, bias=False)

    def forward(self, x):
        shape_features = torch.flatten(self.features(x), 1)
        intensity = torch.flatten(self.coarse(x), 1) / 8.0
        return self.head(torch.cat([shape_features, intensity], dim=1))


def build_encoder(config: EncoderConfig) -> nn.Module:
    if config.variant == "tiny":
        return TinyEncoder(config.embedding_dim)
    if config.variant == "small":
        return ResidualEncoder(BasicBlock, [2, 2, 2, 2], config.embedding_dim)
    if config.variant == "medium":
        return ResidualEncoder(BasicBlock, [3, 4, 6, 3], config.embedding_dim)
    return ResidualEncoder(Bottleneck, [3, 4, 6, 3], config.embedding_dim)


def build_decoder(embedding_dim: int, num_classes: int = NUM_SUBJECTS) -> nn.Module:
    return nn.Linear(embedding_dim, num_classes)


def build_contrast_head(embedding_dim: int) -> nn.Module:
    return nn.Sequential(
        nn.Linear(embedding_dim, embedding_dim),
        nn.ReLU(inplace=True),
        nn.Linear(embedding_dim, embedding_dim),
    )


class BranchModel(nn.Module):
    """One device branch: encoder F plus classifying decoder G.

    When decoders are shared, both branches hold a reference to the same
    decoder module, so an update through either branch is visible to both.
    """

    def __init__(
        self,
        encoder: nn.Module,
        decoder: nn.Module,
        config: EncoderConfig,
        contrast_head: nn.Module | None = None,
    ):
        super().__init__()
        self.encoder = encoder
        self.decoder = decoder
        self.contrast_head = contrast_head
        self.config = config

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.encoder(x)

    def contrast_embedding(self, z: torch.Tensor) -> torch.Tensor:
        if self.contrast_head is not None:
            return self.contrast_head(z)
        return z


def init_model(
    encoder_config: EncoderConfig,
    decoder_sharing: str = "independent",
    seed: int = 0,
    num_classes: int = NUM_SUBJECTS,
) -> tuple[BranchModel, BranchModel]:
    """Build the target and auxiliary branches, deterministically from the seed.

    Encoder weights of the two branches are drawn independently. The target
    branch is constructed first, so a single-branch model built under the
    same seed starts from identical target weights.
    """
    if decoder_sharing not in DECODER_SHARING:
        raise ValueError(
            f"decoder_sharing must be one of {DECODER_SHARING}, got {decoder_sharing!r}"
        )
    torch.manual_seed(seed)
    tgt_encoder = build_encoder(encoder_config)
    tgt_decoder = build_decoder(encoder_config.embedding_dim, num_classes)
    tgt_head = (
        build_contrast_head(encoder_config.embedding_dim)
        if encoder_config.contrast_head
        else None
    )
    aux_encoder = build_encoder(encoder_config)
    if decoder_sharing == "shared":
        aux_decoder = tgt_decoder
    else:
        aux_decoder = build_decoder(encoder_config.embedding_dim, num_classes)
    aux_head = (
        build_contrast_head(encoder_config.embedding_dim)
        if encoder_config.contrast_head
        else None
    )
    target = BranchModel(tgt_encoder, tgt_decoder, encoder_config, tgt_head)
    auxiliary = BranchModel(aux_encoder, aux_decoder, encoder_config, aux_head)
    return target, auxiliary


def init_single_branch(
    encoder_config: EncoderConfig,
    seed: int = 0,
    num_classes: int = NUM_SUBJECTS,
) -> BranchModel:
    """One branch, seeded exactly like the target branch of init_model."""
    torch.manual_seed(seed)
    encoder = build_encoder(encoder_config)
    decoder = build_decoder(encoder_config.embedding_dim, num_classes)
    head = (
        build_contrast_head(encoder_config.embedding_dim)
        if encoder_config.contrast_head
        else None
    )
    return BranchModel(encoder, decoder, encoder_config, head)


def _to_input_tensor(frames) -> torch.Tensor:
    arr = np.asarray(frames, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim == 3:
        arr = arr[:, None]
    if arr.ndim != 4 or arr.shape[1] != 1 or arr.shape[2:] != (FRAME_ROWS, FRAME_COLS):
        raise ValueError(
            f"expected frames of shape (N, {FRAME_ROWS}, {FRAME_COLS}), got {np.asarray(frames).shape}"
        )
    return torch.from_numpy(arr)


def encode(model: BranchModel, frames, batch_size: int = 256) -> np.ndarray:
    """Inference-mode embeddings, shape (N, embedding_dim)."""
    x = _to_input_tensor(frames)
    model.eval()
    outs = []
    with torch.no_grad():
        for i in range(0, len(x), batch_size):
            outs.append(model(x[i : i + batch_size]))
    z = torch.cat(outs) if outs else torch.zeros((0, model.config.embedding_dim))
    return z.numpy()


def decode(model: BranchModel, embeddings) -> np.ndarray:
    """Inference-mode class logits, shape (N, num_classes)."""
    z = torch.as_tensor(np.asarray(embeddings, dtype=np.float32))
    if z.ndim != 2 or z.shape[1] != model.config.embedding_dim:
        raise ValueError(
            f"expected embeddings of width {model.config.embedding_dim}, "
            f"got shape {tuple(z.shape)}"
        )
    model.eval()
    with torch.no_grad():
        return model.decoder(z).numpy()


def project_for_contrast(embeddings: torch.Tensor) -> tuple[torch.Tensor, int]:
    """Scale each row to unit Euclidean norm.

    Zero rows stay zero; the count of such rows comes back as a warning
    counter. Differentiable, usable inside the training graph.
    """
    norms = embeddings.norm(dim=1, keepdim=True)
    zero_rows = int((norms.squeeze(1) == 0).sum().item())
    return embeddings / norms.clamp_min(1e-12), zero_rows


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def save_checkpoint(
    path: str | Path,
    target: BranchModel,
    auxiliary: BranchModel | None,
    decoder_sharing: str,
    extra: dict | None = None,
) -> None:
    """One opaque checkpoint file plus a JSON config sidecar."""
    path = Path(path)
    payload = {
        "version": 1,
        "encoder_config": asdict(target.config),
        "decoder_sharing": decoder_sharing,
        "num_classes": target.decoder.out_features,
        "target_state": target.state_dict(),
        "auxiliary_state": auxiliary.state_dict() if auxiliary is not None else None,
    }
    torch.save(payload, path)
    sidecar = {
        "version": 1,
        "encoder_config": asdict(target.config),
        "decoder_sharing": decoder_sharing,
        "num_classes": target.decoder.out_features,
    }
    if extra:
        sidecar.update(extra)
    Path(str(path) + ".config.json").write_text(json.dumps(sidecar, indent=2))


def load_checkpoint(
    path: str | Path,
) -> tuple[BranchModel, BranchModel | None, dict]:
    payload = torch.load(Path(path), weights_only=False)
    if payload.get("version") != 1:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    config = EncoderConfig(**payload["encoder_config"])
    target, auxiliary = init_model(
        config, payload["decoder_sharing"], seed=0, num_classes=payload["num_classes"]
    )
    target.load_state_dict(payload["target_state"])
    if payload["auxiliary_state"] is None:
        return target, None, payload
    auxiliary.load_state_dict(payload["auxiliary_state"])
    return target, auxiliary, payload
