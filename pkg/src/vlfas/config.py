"""Model architecture configuration and run-config helpers."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import torch

_DTYPES = {"float32": torch.float32, "float64": torch.float64}


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions of the dual encoder, classification head, and contrastive projector.

    The default matches the published ViT-B/16 dual-encoder variant; ``toy()``
    gives a miniature randomly initialized stack for desk-scale tests.
    """

    image_size: int = 224
    patch_size: int = 16
    vision_width: int = 768
    vision_layers: int = 12
    vision_heads: int = 12
    embed_dim: int = 512
    text_width: int = 512
    text_layers: int = 12
    text_heads: int = 8
    vocab_size: int = 49408
    context_length: int = 77
    head_hidden: int = 512
    projector_dims: tuple[int, int, int] = (512, 4096, 256)
    dtype: str = "float32"

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError(
                f"image_size {self.image_size} is not divisible by patch_size {self.patch_size}"
            )
        if self.vision_width % self.vision_heads != 0:
            raise ValueError("vision_width must be divisible by vision_heads")
        if self.text_width % self.text_heads != 0:
            raise ValueError("text_width must be divisible by text_heads")
        if self.dtype not in _DTYPES:
            raise ValueError(f"dtype must be one of {sorted(_DTYPES)}, got {self.dtype!r}")
        if len(self.projector_dims) != 3:
            raise ValueError("projector_dims must have exactly three layer widths")

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def num_patches(self) -> int:
        return self.grid_size ** 2

    @property
    def torch_dtype(self) -> torch.dtype:
        return _DTYPES[self.dtype]

    @classmethod
    def vit_b16(cls, **overrides) -> "ModelConfig":
        return cls(**overrides)

    @classmethod
    def toy(cls, **overrides) -> "ModelConfig":
        """Miniature stack: 2 blocks, 32-wide towers, 32x32 inputs, 16-dim shared space."""
        defaults = dict(
            image_size=32,
            patch_size=8,
            vision_width=32,
            vision_layers=2,
            vision_heads=4,
            embed_dim=16,
            text_width=32,
            text_layers=2,
            text_heads=4,
            vocab_size=514,
            context_length=77,
            head_hidden=512,
            projector_dims=(32, 64, 16),
        )
        defaults.update(overrides)
        return cls(**defaults)

    def to_dict(self) -> dict:
        return {
            "image_size": self.image_size,
            "patch_size": self.patch_size,
            "vision_width": self.vision_width,
            "vision_layers": self.vision_layers,
            "vision_heads": self.vision_heads,
            "embed_dim": self.embed_dim,
            "text_width": self.text_width,
            "text_layers": self.text_layers,
            "text_heads": self.text_heads,
            "vocab_size": self.vocab_size,
            "context_length": self.context_length,
            "head_hidden": self.head_hidden,
            "projector_dims": list(self.projector_dims),
            "dtype": self.dtype,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if "projector_dims" in d:
            d["projector_dims"] = tuple(d["projector_dims"])
        return cls(**d)


def config_hash(payload: dict) -> str:
    """Short stable hash of a JSON-serializable config mapping."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
