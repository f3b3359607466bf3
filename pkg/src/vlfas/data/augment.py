"""Two-view stochastic augmentation for the multimodal contrastive objective.

Recipe: random resized crop (area scale 0.5-1.0), horizontal flip (p 0.5),
color jitter (p 0.8, strength 0.4), random grayscale (p 0.2). All randomness
comes from the caller's generator, so view pairs are reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from ..prompts import PromptSet, sample_prompt_views


@dataclass(frozen=True)
class AugmentConfig:
    crop_scale: tuple[float, float] = (0.5, 1.0)
    crop_ratio: tuple[float, float] = (3 / 4, 4 / 3)
    hflip_prob: float = 0.5
    jitter_prob: float = 0.8
    jitter_strength: float = 0.4
    grayscale_prob: float = 0.2

    @classmethod
    def identity(cls) -> "AugmentConfig":
        """No-op configuration: views equal the input exactly."""
        return cls(
            crop_scale=(1.0, 1.0), crop_ratio=(1.0, 1.0),
            hflip_prob=0.0, jitter_prob=0.0, jitter_strength=0.0, grayscale_prob=0.0,
        )

    @property
    def is_identity(self) -> bool:
        return (
            self.crop_scale == (1.0, 1.0) and self.crop_ratio == (1.0, 1.0)
            and self.hflip_prob == 0.0 and self.jitter_prob == 0.0
            and self.grayscale_prob == 0.0
        )


@dataclass
class AugmentedPair:
    """Two views of one image plus two distinct prompts of its class."""

    view1: np.ndarray
    view2: np.ndarray
    label: str
    prompt_view1: str
    prompt_view2: str


def _resize(img01: np.ndarray, h: int, w: int) -> np.ndarray:
    t = torch.from_numpy(np.ascontiguousarray(img01)).permute(2, 0, 1).unsqueeze(0)
    t = F.interpolate(t, size=(h, w), mode="bilinear", align_corners=False, antialias=True)
    return t.squeeze(0).permute(1, 2, 0).clamp(0.0, 1.0).numpy()


def _random_resized_crop(img: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    height, width = img.shape[:2]
    area = height * width
    for _ in range(10):
        target_area = area * rng.uniform(*cfg.crop_scale)
        aspect = math.exp(rng.uniform(math.log(cfg.crop_ratio[0]), math.log(cfg.crop_ratio[1])))
        w = int(round(math.sqrt(target_area * aspect)))
        h = int(round(math.sqrt(target_area / aspect)))
        if 0 < w <= width and 0 < h <= height:
            top = int(rng.integers(0, height - h + 1))
            left = int(rng.integers(0, width - w + 1))
            crop = img[top : top + h, left : left + w]
            if (h, w) == (height, width):
                return crop.copy()
            return _resize(crop, height, width)
    return img.copy()  # fallback when no aspect/scale draw fits


def _rgb_to_hsv(img: np.ndarray) -> np.ndarray:
    r, g, b = img[..., 0], img[..., 1], img[..., 2]
    maxc = img.max(axis=-1)
    minc = img.min(axis=-1)
    c = maxc - minc
    safe_c = np.where(c == 0, 1.0, c)
    h = np.zeros_like(maxc)
    h = np.where(maxc == r, ((g - b) / safe_c) % 6.0, h)
    h = np.where((maxc == g) & (maxc != r), (b - r) / safe_c + 2.0, h)
    h = np.where((maxc == b) & (maxc != r) & (maxc != g), (r - g) / safe_c + 4.0, h)
    h = np.where(c == 0, 0.0, h) / 6.0
    s = np.where(maxc == 0, 0.0, c / np.where(maxc == 0, 1.0, maxc))
    return np.stack([h, s, maxc], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    i = i.astype(int) % 6
    choices = [
        np.stack([v, t, p], -1), np.stack([q, v, p], -1), np.stack([p, v, t], -1),
        np.stack([p, q, v], -1), np.stack([t, p, v], -1), np.stack([v, p, q], -1),
    ]
    out = np.zeros_like(hsv)
    for k, rgb in enumerate(choices):
        out = np.where((i == k)[..., None], rgb, out)
    return out


def _color_jitter(img: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    ops = list(rng.permutation(4))
    lo, hi = max(0.0, 1.0 - strength), 1.0 + strength
    for op in ops:
        if op == 0:  # brightness
            img = img * rng.uniform(lo, hi)
        elif op == 1:  # contrast
            mean = img.mean()
            img = (img - mean) * rng.uniform(lo, hi) + mean
        elif op == 2:  # saturation
            gray = _luminance(img)[..., None]
            img = gray + (img - gray) * rng.uniform(lo, hi)
        else:  # hue
            shift = rng.uniform(-strength / 4.0, strength / 4.0)
            hsv = _rgb_to_hsv(np.clip(img, 0.0, 1.0))
            hsv[..., 0] = (hsv[..., 0] + shift) % 1.0
            img = _hsv_to_rgb(hsv)
        img = np.clip(img, 0.0, 1.0)
    return img


def _luminance(img: np.ndarray) -> np.ndarray:
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114


def augment_image(img01: np.ndarray, cfg: AugmentConfig, rng: np.random.Generator) -> np.ndarray:
    """One stochastic view of an H x W x 3 [0, 1] image, same output size."""
    if cfg.is_identity:
        return img01.copy()
    img = _random_resized_crop(img01.astype(np.float32), cfg, rng)
    if rng.uniform() < cfg.hflip_prob:
        img = img[:, ::-1, :].copy()
    if rng.uniform() < cfg.jitter_prob:
        img = _color_jitter(img, cfg.jitter_strength, rng)
    if rng.uniform() < cfg.grayscale_prob:
        img = np.repeat(_luminance(img)[..., None], 3, axis=-1)
    return np.ascontiguousarray(img, dtype=np.float32)


def make_views(
    img01: np.ndarray,
    label: str,
    prompt_set: PromptSet,
    rng: np.random.Generator,
    cfg: AugmentConfig | None = None,
) -> AugmentedPair:
    """Two augmented views of one image plus two distinct class prompts."""
    cfg = cfg or AugmentConfig()
    view1 = augment_image(img01, cfg, rng)
    view2 = augment_image(img01, cfg, rng)
    prompt1, prompt2 = sample_prompt_views(prompt_set, label, rng)
    return AugmentedPair(view1, view2, label, prompt1, prompt2)
