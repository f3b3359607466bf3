"""Class-description catalog, prompt-ensemble embeddings, and random prompt
views for the multimodal contrastive objective."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np
import torch
import yaml

from .labels import REAL, SPOOF
from .models import DualEncoder


@dataclass(frozen=True)
class PromptSet:
    """Ordered per-class prompt catalogs. Immutable after construction."""

    real_prompts: tuple[str, ...]
    spoof_prompts: tuple[str, ...]

    def __post_init__(self):
        for name, prompts in (("real", self.real_prompts), ("spoof", self.spoof_prompts)):
            if not prompts:
                raise ValueError(f"{name} prompt list must be nonempty")
            if any(not p or not p.strip() for p in prompts):
                raise ValueError(f"{name} prompt list contains an empty prompt")

    def for_label(self, label: str) -> tuple[str, ...]:
        if label == REAL:
            return self.real_prompts
        if label == SPOOF:
            return self.spoof_prompts
        raise ValueError(f"unknown class label {label!r}")

    @classmethod
    def default(cls) -> "PromptSet":
        with resources.files("vlfas.assets").joinpath("prompts.yaml").open("r") as fh:
            return cls._from_mapping(yaml.safe_load(fh), source="built-in catalog")

    @classmethod
    def from_file(cls, path: str) -> "PromptSet":
        with open(path, "r", encoding="utf-8") as fh:
            return cls._from_mapping(yaml.safe_load(fh), source=path)

    @classmethod
    def _from_mapping(cls, data, source: str) -> "PromptSet":
        if not isinstance(data, dict) or set(data) != {REAL, SPOOF}:
            raise ValueError(
                f"prompt catalog {source} must map exactly the keys 'real' and 'spoof' "
                "to lists of prompt strings"
            )
        return cls(tuple(data[REAL]), tuple(data[SPOOF]))

    def to_file(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(
                {REAL: list(self.real_prompts), SPOOF: list(self.spoof_prompts)},
                fh,
                sort_keys=False,
            )


@dataclass
class ClassEmbeddings:
    """Per-prompt embeddings and their per-class ensemble means.

    ``z_real``/``z_spoof`` are the arithmetic means over each class's prompt
    embeddings; a rebuilt instance replaces the old one wholesale, so readers
    always see a consistent snapshot.
    """

    z_real: torch.Tensor
    z_spoof: torch.Tensor
    per_prompt_real: torch.Tensor
    per_prompt_spoof: torch.Tensor

    def stacked(self) -> torch.Tensor:
        """[2, d] matrix with the real ensemble in row 0 and spoof in row 1."""
        return torch.stack([self.z_real, self.z_spoof], dim=0)


def embed_prompt_set(prompt_set: PromptSet, model: DualEncoder, tokenizer) -> ClassEmbeddings:
    """Embed every prompt of both classes and average into class ensembles.

    Gradients flow into the text tower, so this can be recomputed inside a
    training step; wrap in ``torch.no_grad()`` to build an inference cache.
    """
    tokens_r, eot_r = tokenizer.tokenize(list(prompt_set.real_prompts))
    tokens_s, eot_s = tokenizer.tokenize(list(prompt_set.spoof_prompts))
    per_real = model.encode_tokens(tokens_r, eot_r)
    per_spoof = model.encode_tokens(tokens_s, eot_s)
    return ClassEmbeddings(
        z_real=per_real.mean(dim=0),
        z_spoof=per_spoof.mean(dim=0),
        per_prompt_real=per_real,
        per_prompt_spoof=per_spoof,
    )


def sample_prompt_views(
    prompt_set: PromptSet, label: str, rng: np.random.Generator
) -> tuple[str, str]:
    """Two distinct prompts of the labeled class, drawn uniformly without
    replacement."""
    prompts = prompt_set.for_label(label)
    if len(prompts) < 2:
        raise ValueError(
            f"class {label!r} has {len(prompts)} prompt(s); sampling two distinct "
            "prompts needs at least 2"
        )
    i, j = rng.choice(len(prompts), size=2, replace=False)
    return prompts[int(i)], prompts[int(j)]
