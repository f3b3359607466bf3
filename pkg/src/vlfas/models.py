"""Dual-encoder model stack: vision transformer, text transformer, shared
embedding space, the vision-only classification head, and the nonlinear
projector used by the view-contrastive objective."""

from __future__ import annotations

import math

import numpy as np
import torch
import torch.nn as nn

from .config import ModelConfig

LOGIT_SCALE_INIT = math.log(100.0)  # published checkpoints saturate at exp(scale) = 100


class QuickGELU(nn.Module):
    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return x * torch.sigmoid(1.702 * x)


class TransformerBlock(nn.Module):
    """Pre-norm residual block: attention then a 4x-wide MLP."""

    def __init__(self, width: int, heads: int):
        super().__init__()
        self.ln_attn = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.ln_mlp = nn.LayerNorm(width)
        self.mlp = nn.Sequential()
        self.mlp.add_module("fc_in", nn.Linear(width, width * 4))
        self.mlp.add_module("gelu", QuickGELU())
        self.mlp.add_module("fc_out", nn.Linear(width * 4, width))

    def forward(self, x: torch.Tensor, attn_mask: torch.Tensor | None = None) -> torch.Tensor:
        y = self.ln_attn(x)
        x = x + self.attn(y, y, y, need_weights=False, attn_mask=attn_mask)[0]
        x = x + self.mlp(self.ln_mlp(x))
        return x


class VisionTransformer(nn.Module):
    """Patch projector + class token + transformer trunk + linear map into the
    shared space. ``forward`` returns the final class-token state and its
    projection."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        width = cfg.vision_width
        self.patch_embed = nn.Conv2d(
            3, width, kernel_size=cfg.patch_size, stride=cfg.patch_size, bias=False
        )
        scale = width ** -0.5
        self.class_token = nn.Parameter(scale * torch.randn(width))
        self.pos_embed = nn.Parameter(scale * torch.randn(cfg.num_patches + 1, width))
        self.ln_pre = nn.LayerNorm(width)
        self.blocks = nn.ModuleList(
            TransformerBlock(width, cfg.vision_heads) for _ in range(cfg.vision_layers)
        )
        self.ln_post = nn.LayerNorm(width)
        self.proj = nn.Parameter(scale * torch.randn(width, cfg.embed_dim))

    def forward(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        if images.ndim != 4 or images.shape[1] != 3:
            raise ValueError(f"expected images of shape [B, 3, H, W], got {tuple(images.shape)}")
        if images.shape[2] != self.cfg.image_size or images.shape[3] != self.cfg.image_size:
            raise ValueError(
                f"image size {tuple(images.shape[2:])} does not match the "
                f"{self.cfg.image_size}x{self.cfg.image_size} patch grid "
                f"(patch size {self.cfg.patch_size})"
            )
        x = self.patch_embed(images)            # [B, width, grid, grid]
        x = x.flatten(2).transpose(1, 2)         # [B, patches, width]
        cls = self.class_token.to(x.dtype).expand(x.shape[0], 1, -1)
        x = torch.cat([cls, x], dim=1) + self.pos_embed
        x = self.ln_pre(x)
        for block in self.blocks:
            x = block(x)
        class_state = self.ln_post(x[:, 0, :])
        return class_state, class_state @ self.proj


class TextTransformer(nn.Module):
    """Token embedding + causal transformer trunk; the shared-space embedding
    is read off at each sequence's end-sentinel position."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        width = cfg.text_width
        self.token_embed = nn.Embedding(cfg.vocab_size, width)
        self.pos_embed = nn.Parameter(0.01 * torch.randn(cfg.context_length, width))
        self.blocks = nn.ModuleList(
            TransformerBlock(width, cfg.text_heads) for _ in range(cfg.text_layers)
        )
        self.ln_final = nn.LayerNorm(width)
        self.proj = nn.Parameter(width ** -0.5 * torch.randn(width, cfg.embed_dim))

    def _causal_mask(self, length: int, dtype: torch.dtype) -> torch.Tensor:
        mask = torch.full((length, length), float("-inf"), dtype=dtype)
        return torch.triu(mask, diagonal=1)

    def forward(self, tokens: torch.Tensor, eot_positions: torch.Tensor) -> torch.Tensor:
        if tokens.ndim != 2:
            raise ValueError(f"expected tokens of shape [B, L], got {tuple(tokens.shape)}")
        if tokens.shape[1] > self.cfg.context_length:
            raise ValueError(
                f"sequence length {tokens.shape[1]} exceeds context {self.cfg.context_length}"
            )
        x = self.token_embed(tokens) + self.pos_embed[: tokens.shape[1]]
        mask = self._causal_mask(tokens.shape[1], x.dtype)
        for block in self.blocks:
            x = block(x, attn_mask=mask)
        x = self.ln_final(x)
        x = x[torch.arange(x.shape[0]), eot_positions]
        return x @ self.proj


class DualEncoder(nn.Module):
    """Both towers plus the learnable log temperature of the similarity softmax."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.visual = VisionTransformer(cfg)
        self.text = TextTransformer(cfg)
        self.logit_scale = nn.Parameter(torch.tensor(LOGIT_SCALE_INIT))
        self.to(cfg.torch_dtype)

    @property
    def temperature(self) -> torch.Tensor:
        """tau > 0; similarity logits are divided by this before softmax."""
        return 1.0 / self.logit_scale.exp()

    def encode_images(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        return self.visual(images)

    def encode_tokens(self, tokens: torch.Tensor, eot_positions: torch.Tensor) -> torch.Tensor:
        # causal attention makes positions past the last end-sentinel inert,
        # so the shared padded tail can be dropped before the forward pass
        length = int(eot_positions.max()) + 1
        return self.text(tokens[:, :length], eot_positions)


def _init_head_linear(layer: nn.Linear) -> None:
    nn.init.kaiming_uniform_(layer.weight, mode="fan_in", nonlinearity="relu")
    nn.init.zeros_(layer.bias)


class MlpHead(nn.Module):
    """Two-layer classification head on the class token: hidden 512, output 2."""

    def __init__(self, in_dim: int, hidden: int = 512):
        super().__init__()
        self.fc1 = nn.Linear(in_dim, hidden)
        self.relu = nn.ReLU()
        self.fc2 = nn.Linear(hidden, 2)
        _init_head_linear(self.fc1)
        _init_head_linear(self.fc2)

    def forward(self, class_state: torch.Tensor) -> torch.Tensor:
        if class_state.shape[-1] != self.fc1.in_features:
            raise ValueError(
                f"class token width {class_state.shape[-1]} does not match head "
                f"input {self.fc1.in_features}"
            )
        return self.fc2(self.relu(self.fc1(class_state)))


class ProjectorH(nn.Module):
    """Three linear layers (default widths 512, 4096, 256); the first two are
    followed by batch normalization and rectification. Train-mode batches of
    size 1 are rejected: batch statistics are degenerate there and the
    per-domain batch sizes make that a configuration mistake."""

    def __init__(self, in_dim: int, dims: tuple[int, int, int] = (512, 4096, 256)):
        super().__init__()
        d1, d2, d3 = dims
        self.fc1 = nn.Linear(in_dim, d1)
        self.bn1 = nn.BatchNorm1d(d1)
        self.fc2 = nn.Linear(d1, d2)
        self.bn2 = nn.BatchNorm1d(d2)
        self.fc3 = nn.Linear(d2, d3)
        self.relu = nn.ReLU()
        for layer in (self.fc1, self.fc2, self.fc3):
            _init_head_linear(layer)

    @property
    def out_dim(self) -> int:
        return self.fc3.out_features

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.ndim != 2:
            raise ValueError(f"expected a batch of embeddings [B, D], got {tuple(x.shape)}")
        if self.training and x.shape[0] < 2:
            raise ValueError(
                "projector batch normalization needs at least 2 samples in train mode; "
                "got a batch of 1"
            )
        x = self.relu(self.bn1(self.fc1(x)))
        x = self.relu(self.bn2(self.fc2(x)))
        return self.fc3(x)


# --- single-sample convenience wrappers -------------------------------------

def encode_image(image: np.ndarray | torch.Tensor, model: DualEncoder) -> tuple[torch.Tensor, torch.Tensor]:
    """Encode one normalized H x W x 3 face image in eval mode.

    Returns ``(class_token, embedding)``. The image must match the model's
    patch grid; anything else is rejected with a shape error.
    """
    if isinstance(image, np.ndarray):
        image = torch.from_numpy(np.ascontiguousarray(image))
    if image.ndim != 3 or image.shape[-1] != 3:
        raise ValueError(f"expected one H x W x 3 image, got shape {tuple(image.shape)}")
    if not torch.isfinite(image).all():
        raise ValueError("image contains non-finite pixel values")
    batch = image.permute(2, 0, 1).unsqueeze(0).to(model.cfg.torch_dtype)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            class_state, embedding = model.encode_images(batch)
    finally:
        model.train(was_training)
    return class_state[0], embedding[0]


def encode_text(prompt: str, model: DualEncoder, tokenizer) -> torch.Tensor:
    """Encode one prompt into the shared space in eval mode."""
    if not prompt or not prompt.strip():
        raise ValueError("prompt must be a nonempty string")
    tokens, eot = tokenizer.tokenize(prompt)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            embedding = model.encode_tokens(tokens, eot)
    finally:
        model.train(was_training)
    return embedding[0]


def mlp_forward(class_state: torch.Tensor, head: MlpHead) -> torch.Tensor:
    """Class-token state -> 2 class logits."""
    if not torch.isfinite(class_state).all():
        raise ValueError("class token contains non-finite values")
    return head(class_state)


def project_h(embedding: torch.Tensor, projector: ProjectorH) -> torch.Tensor:
    """Shared-space embedding batch -> contrastive projection."""
    if not torch.isfinite(embedding).all():
        raise ValueError("embedding contains non-finite values")
    return projector(embedding)
