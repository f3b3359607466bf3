"""Image loading and the pretrained model's input normalization."""

from __future__ import annotations

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

# Per-channel statistics of the pretrained dual encoder's preprocessing.
IMAGE_MEAN = (0.48145466, 0.4578275, 0.40821073)
IMAGE_STD = (0.26862954, 0.26130258, 0.27577711)

_MEAN = np.asarray(IMAGE_MEAN, dtype=np.float32)
_STD = np.asarray(IMAGE_STD, dtype=np.float32)


def load_image01(path: str, size: int | None = None) -> np.ndarray:
    """Read an image file as an H x W x 3 float32 array in [0, 1]."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        arr = np.asarray(img, dtype=np.float32) / 255.0
    if size is not None and arr.shape[:2] != (size, size):
        arr = resize01(arr, size)
    return arr


def resize01(img01: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of an H x W x 3 [0, 1] array to size x size."""
    t = torch.from_numpy(np.ascontiguousarray(img01)).permute(2, 0, 1).unsqueeze(0)
    t = F.interpolate(t, size=(size, size), mode="bilinear", align_corners=False, antialias=True)
    return t.squeeze(0).permute(1, 2, 0).clamp(0.0, 1.0).numpy()


def normalize_image01(img01: np.ndarray) -> np.ndarray:
    """[0, 1] H x W x 3 array -> per-channel standardized array."""
    if img01.ndim != 3 or img01.shape[-1] != 3:
        raise ValueError(f"expected an H x W x 3 image, got shape {img01.shape}")
    return (img01.astype(np.float32) - _MEAN) / _STD


def normalize_batch(images01: list[np.ndarray] | np.ndarray,
                    dtype: torch.dtype = torch.float32) -> torch.Tensor:
    """Stack [0, 1] H x W x 3 arrays into a normalized [B, 3, H, W] tensor."""
    arr = np.stack([normalize_image01(img) for img in images01])
    return torch.from_numpy(arr).permute(0, 3, 1, 2).to(dtype)
