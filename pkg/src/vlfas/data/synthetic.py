"""Procedurally textured synthetic face-crop domains for desk-scale runs.

Real samples are smooth blob fields with a bright central ellipse; spoof
samples overlay strong periodic artifacts (grid for ``print``, stripes for
``replay``), so a small model can separate the classes quickly while an
untrained one scores at chance. Domains differ in tint, background gradient,
and noise level. Images and a manifest are written to disk, exercising the
same ingestion path as real data.
"""

from __future__ import annotations

import os
import zlib

import numpy as np
from PIL import Image

from ..labels import REAL, SPOOF
from .datasets import DomainDataset, Sample, write_manifest


def _domain_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, zlib.crc32(name.encode())]))


def _smooth_field(rng: np.random.Generator, size: int, cells: int = 4) -> np.ndarray:
    coarse = rng.uniform(0.25, 0.75, size=(cells, cells, 3)).astype(np.float32)
    idx = np.linspace(0, cells - 1, size)
    x0 = np.floor(idx).astype(int)
    x1 = np.minimum(x0 + 1, cells - 1)
    frac = (idx - x0).astype(np.float32)
    rows = (
        coarse[x0] * (1 - frac)[:, None, None] + coarse[x1] * frac[:, None, None]
    )
    cols = (
        rows[:, x0] * (1 - frac)[None, :, None] + rows[:, x1] * frac[None, :, None]
    )
    return cols


def _base_image(rng: np.random.Generator, size: int, style: dict) -> np.ndarray:
    img = _smooth_field(rng, size)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float32) / (size - 1)
    gradient = (xx * np.cos(style["gradient_angle"]) + yy * np.sin(style["gradient_angle"]))
    img += 0.15 * gradient[..., None]
    img += style["tint"][None, None, :]
    # bright centered ellipse standing in for the face region
    cy, cx = 0.5 + rng.uniform(-0.05, 0.05), 0.5 + rng.uniform(-0.05, 0.05)
    dist = ((yy - cy) / 0.38) ** 2 + ((xx - cx) / 0.30) ** 2
    img += 0.22 * np.exp(-dist * 2.0)[..., None]
    img += rng.normal(0.0, style["noise"], size=img.shape).astype(np.float32)
    return img


def _spoof_overlay(img: np.ndarray, attack: str, rng: np.random.Generator) -> np.ndarray:
    size = img.shape[0]
    coords = np.arange(size, dtype=np.float32) / size
    freq = rng.uniform(6.0, 11.0)
    phase = rng.uniform(0.0, 2 * np.pi)
    amplitude = rng.uniform(0.30, 0.45)
    if attack == "print":
        wave = np.sin(2 * np.pi * freq * coords + phase)[:, None] * np.sin(
            2 * np.pi * freq * coords + phase
        )[None, :]
    else:  # replay-style moire stripes
        stripes = np.sin(2 * np.pi * freq * coords + phase)
        wave = stripes[:, None] if rng.uniform() < 0.5 else stripes[None, :]
        wave = np.broadcast_to(wave, (size, size))
    out = img * (1.0 - 0.2 * amplitude) + amplitude * wave[..., None]
    return out


def make_synthetic_domain(
    root: str,
    name: str,
    *,
    n_per_class: int = 60,
    image_size: int = 32,
    seed: int = 0,
    spoof_attacks: tuple[str, ...] = ("print", "replay"),
    separable: bool = True,
) -> DomainDataset:
    """Write one synthetic domain (images + manifest) and return it.

    ``separable=False`` drops the spoof overlay entirely: both classes come
    from the same distribution, which makes the labels pure noise (the right
    ground for chance-level sanity checks).
    """
    rng = _domain_rng(seed, name)
    style = {
        "tint": rng.uniform(-0.08, 0.08, size=3).astype(np.float32),
        "gradient_angle": rng.uniform(0.0, 2 * np.pi),
        "noise": rng.uniform(0.01, 0.03),
    }
    domain_dir = os.path.join(root, name)
    image_dir = os.path.join(domain_dir, "images")
    os.makedirs(image_dir, exist_ok=True)

    samples: list[Sample] = []

    def _write(stem: str, img: np.ndarray, label: str, attack: str) -> None:
        path = os.path.join(image_dir, f"{stem}.png")
        arr = (np.clip(img, 0.0, 1.0) * 255.0).round().astype(np.uint8)
        Image.fromarray(arr).save(path)
        samples.append(Sample(stem, path, label, attack))

    for i in range(n_per_class):
        _write(f"real_{i:04d}", _base_image(rng, image_size, style), REAL, "none")
    for i in range(n_per_class):
        attack = spoof_attacks[i % len(spoof_attacks)]
        img = _base_image(rng, image_size, style)
        if separable:
            img = _spoof_overlay(img, attack, rng)
        _write(f"{attack}_{i:04d}", img, SPOOF, attack)

    dataset = DomainDataset(name, tuple(samples))
    write_manifest(dataset, domain_dir)
    return dataset


def make_synthetic_registry(
    root: str,
    domains: tuple[str, ...] = ("M", "C", "I", "O"),
    **kwargs,
) -> dict[str, DomainDataset]:
    """Synthetic stand-ins for a set of named domains."""
    return {name: make_synthetic_domain(root, name, **kwargs) for name in domains}
