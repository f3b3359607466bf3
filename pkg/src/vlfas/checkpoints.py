"""Checkpoint IO.

Two formats are handled:

* the published dual-encoder state-dict layout (ViT-B/16 naming scheme:
  ``visual.*`` / ``transformer.*`` / ``token_embedding`` / ...), read by
  :func:`load_pretrained` with an exhaustive name/shape audit;
* this package's own finetuned-checkpoint archive: named parameter tensors
  plus a manifest (strategy, iteration, seed, config hash, code version) and
  optional optimizer/sampler/RNG state for deterministic resume.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field
from typing import Any

import torch

from . import __version__
from .config import ModelConfig
from .models import DualEncoder, MlpHead, ProjectorH

CHECKPOINT_FORMAT = "vlfas-checkpoint-v1"

# Scalar metadata tensors present in some conversions of the published file.
PRETRAINED_META_KEYS = frozenset({"input_resolution", "context_length", "vocab_size"})


class CheckpointError(RuntimeError):
    pass


def _block_key_map(published_prefix: str, ours_prefix: str, layers: int) -> dict[str, str]:
    mapping = {}
    pairs = [
        ("ln_1.weight", "ln_attn.weight"),
        ("ln_1.bias", "ln_attn.bias"),
        ("attn.in_proj_weight", "attn.in_proj_weight"),
        ("attn.in_proj_bias", "attn.in_proj_bias"),
        ("attn.out_proj.weight", "attn.out_proj.weight"),
        ("attn.out_proj.bias", "attn.out_proj.bias"),
        ("ln_2.weight", "ln_mlp.weight"),
        ("ln_2.bias", "ln_mlp.bias"),
        ("mlp.c_fc.weight", "mlp.fc_in.weight"),
        ("mlp.c_fc.bias", "mlp.fc_in.bias"),
        ("mlp.c_proj.weight", "mlp.fc_out.weight"),
        ("mlp.c_proj.bias", "mlp.fc_out.bias"),
    ]
    for i in range(layers):
        for theirs, ours in pairs:
            mapping[f"{published_prefix}.resblocks.{i}.{theirs}"] = f"{ours_prefix}.{i}.{ours}"
    return mapping


def pretrained_key_map(cfg: ModelConfig) -> dict[str, str]:
    """Published tensor name -> this package's parameter name, exhaustively."""
    mapping = {
        "visual.conv1.weight": "visual.patch_embed.weight",
        "visual.class_embedding": "visual.class_token",
        "visual.positional_embedding": "visual.pos_embed",
        "visual.ln_pre.weight": "visual.ln_pre.weight",
        "visual.ln_pre.bias": "visual.ln_pre.bias",
        "visual.ln_post.weight": "visual.ln_post.weight",
        "visual.ln_post.bias": "visual.ln_post.bias",
        "visual.proj": "visual.proj",
        "token_embedding.weight": "text.token_embed.weight",
        "positional_embedding": "text.pos_embed",
        "ln_final.weight": "text.ln_final.weight",
        "ln_final.bias": "text.ln_final.bias",
        "text_projection": "text.proj",
        "logit_scale": "logit_scale",
    }
    mapping.update(_block_key_map("visual.transformer", "visual.blocks", cfg.vision_layers))
    mapping.update(_block_key_map("transformer", "text.blocks", cfg.text_layers))
    return mapping


def expected_pretrained_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    """Published tensor name -> expected shape for the given architecture."""
    model_shapes = {name: tuple(t.shape) for name, t in DualEncoder(cfg).state_dict().items()}
    return {theirs: model_shapes[ours] for theirs, ours in pretrained_key_map(cfg).items()}


def _read_state_dict(path: str) -> dict[str, torch.Tensor]:
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint file not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"failed to read checkpoint file {path!r}: {exc}") from exc
    if isinstance(payload, dict) and "state_dict" in payload and all(
        isinstance(v, torch.Tensor) for v in payload["state_dict"].values()
    ):
        payload = payload["state_dict"]
    if not isinstance(payload, dict) or not all(
        isinstance(v, torch.Tensor) for v in payload.values()
    ):
        raise CheckpointError(f"{path!r} does not hold a flat mapping of named tensors")
    return payload


def load_pretrained(path: str, cfg: ModelConfig | None = None) -> DualEncoder:
    """Build a dual encoder from a checkpoint in the published layout.

    Every parameter tensor of both towers must be present with the right
    shape; missing or unrecognized names and any shape mismatch are hard
    failures listing the offenders. Only the classification head and the
    contrastive projector are ever left to random initialization (they are
    not part of this file format).
    """
    cfg = cfg or ModelConfig.vit_b16()
    state = _read_state_dict(path)
    key_map = pretrained_key_map(cfg)

    present = set(state) - PRETRAINED_META_KEYS
    expected = set(key_map)
    missing = sorted(expected - present)
    extra = sorted(present - expected)
    if missing or extra:
        raise CheckpointError(
            f"checkpoint {path!r} does not match the expected dual-encoder layout; "
            f"missing tensors: {missing or 'none'}; unrecognized tensors: {extra or 'none'}"
        )

    model = DualEncoder(cfg)
    model_shapes = {name: tuple(t.shape) for name, t in model.state_dict().items()}
    mismatched = [
        f"{theirs}: file {tuple(state[theirs].shape)} vs model {model_shapes[key_map[theirs]]}"
        for theirs in sorted(expected)
        if tuple(state[theirs].shape) != model_shapes[key_map[theirs]]
    ]
    if mismatched:
        raise CheckpointError(
            f"checkpoint {path!r} has shape mismatches: " + "; ".join(mismatched)
        )

    translated = {key_map[theirs]: state[theirs].to(cfg.torch_dtype) for theirs in expected}
    model.load_state_dict(translated, strict=True)
    return model


# --- finetuned checkpoints ---------------------------------------------------

@dataclass
class Checkpoint:
    """A finetuned state: parameters, training progress, and resume state."""

    manifest: dict[str, Any]
    model_state: dict[str, torch.Tensor]
    head_state: dict[str, torch.Tensor] | None = None
    projector_state: dict[str, torch.Tensor] | None = None
    optimizer_state: dict | None = None
    sampler_state: dict | None = None
    rng_state: dict | None = None

    @property
    def strategy(self) -> str:
        return self.manifest["strategy"]

    @property
    def iteration(self) -> int:
        return self.manifest["iteration"]

    @property
    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.manifest["model_config"])

    def build_model(self) -> DualEncoder:
        model = DualEncoder(self.model_config)
        model.load_state_dict(self.model_state, strict=True)
        return model

    def build_head(self) -> MlpHead | None:
        if self.head_state is None:
            return None
        cfg = self.model_config
        head = MlpHead(cfg.vision_width, cfg.head_hidden).to(cfg.torch_dtype)
        head.load_state_dict(self.head_state, strict=True)
        return head

    def build_projector(self) -> ProjectorH | None:
        if self.projector_state is None:
            return None
        cfg = self.model_config
        projector = ProjectorH(cfg.embed_dim, cfg.projector_dims).to(cfg.torch_dtype)
        projector.load_state_dict(self.projector_state, strict=True)
        return projector


def make_manifest(
    *,
    strategy: str,
    iteration: int,
    seed: int,
    config_hash: str,
    model_config: ModelConfig,
    extra: dict | None = None,
) -> dict[str, Any]:
    manifest = {
        "strategy": strategy,
        "iteration": iteration,
        "seed": seed,
        "config_hash": config_hash,
        "model_config": model_config.to_dict(),
        "version": __version__,
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    if extra:
        manifest.update(extra)
    return manifest


def save_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    """Atomically write a checkpoint archive; failures propagate."""
    for key in ("strategy", "iteration", "seed", "config_hash", "model_config"):
        if key not in checkpoint.manifest:
            raise CheckpointError(f"checkpoint manifest is missing required field {key!r}")
    payload = {
        "format": CHECKPOINT_FORMAT,
        "manifest": checkpoint.manifest,
        "model": checkpoint.model_state,
        "head": checkpoint.head_state,
        "projector": checkpoint.projector_state,
        "optimizer": checkpoint.optimizer_state,
        "sampler": checkpoint.sampler_state,
        "rng": checkpoint.rng_state,
    }
    tmp = f"{path}.tmp"
    torch.save(payload, tmp)
    os.replace(tmp, path)


def load_checkpoint(path: str) -> Checkpoint:
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint file not found: {path}")
    try:
        # The archive holds optimizer and RNG state beyond bare tensors; it is
        # a local artifact of this package, so full unpickling is intended.
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointError(f"failed to read checkpoint file {path!r}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(
            f"{path!r} is not a {CHECKPOINT_FORMAT} archive; "
            "use load_pretrained for published dual-encoder files"
        )
    return Checkpoint(
        manifest=payload["manifest"],
        model_state=payload["model"],
        head_state=payload["head"],
        projector_state=payload["projector"],
        optimizer_state=payload["optimizer"],
        sampler_state=payload["sampler"],
        rng_state=payload["rng"],
    )
