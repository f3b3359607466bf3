"""Domain datasets and their manifest files.

A domain ships as a directory with a ``manifest.csv`` of columns
``sample_id, relative_path, label, attack_type`` plus the referenced
pre-cropped face images. Face detection and cropping happen upstream.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

from ..labels import LABELS, REAL, SPOOF

ATTACK_TYPES = ("none", "print", "replay", "other")
MANIFEST_NAME = "manifest.csv"
MANIFEST_COLUMNS = ("sample_id", "relative_path", "label", "attack_type")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    path: str
    label: str
    attack_type: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"sample {self.sample_id!r}: unknown label {self.label!r}")
        if self.attack_type not in ATTACK_TYPES:
            raise ValueError(
                f"sample {self.sample_id!r}: unknown attack_type {self.attack_type!r}"
            )
        if (self.label == REAL) != (self.attack_type == "none"):
            raise ValueError(
                f"sample {self.sample_id!r}: label {self.label!r} is inconsistent with "
                f"attack_type {self.attack_type!r} (real <=> none)"
            )


@dataclass(frozen=True)
class DomainDataset:
    """A named domain and its sample list."""

    name: str
    samples: tuple[Sample, ...]

    def __post_init__(self):
        ids = [s.sample_id for s in self.samples]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"domain {self.name!r} has duplicate sample ids: {dupes[:5]}")

    def __len__(self) -> int:
        return len(self.samples)

    def by_label(self, label: str) -> tuple[Sample, ...]:
        return tuple(s for s in self.samples if s.label == label)

    def attack_types(self) -> set[str]:
        return {s.attack_type for s in self.samples if s.label == SPOOF}

    def global_ids(self) -> set[str]:
        return {global_id(self.name, s) for s in self.samples}

    def subset(self, samples: list[Sample] | tuple[Sample, ...], name: str | None = None) -> "DomainDataset":
        return DomainDataset(name or self.name, tuple(samples))


def global_id(domain: str, sample: Sample) -> str:
    return f"{domain}:{sample.sample_id}"


def read_manifest(domain_dir: str, name: str | None = None) -> DomainDataset:
    """Load one domain from ``<domain_dir>/manifest.csv``.

    Relative paths resolve against the manifest's directory; every referenced
    file must exist at load time.
    """
    manifest = os.path.join(domain_dir, MANIFEST_NAME)
    if not os.path.exists(manifest):
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {domain_dir!r}")
    name = name or os.path.basename(os.path.normpath(domain_dir))

    samples: list[Sample] = []
    missing: list[str] = []
    with open(manifest, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != MANIFEST_COLUMNS:
            raise ValueError(
                f"{manifest}: expected columns {MANIFEST_COLUMNS}, got {reader.fieldnames}"
            )
        for row in reader:
            path = os.path.join(domain_dir, row["relative_path"])
            if not os.path.exists(path):
                missing.append(row["relative_path"])
            samples.append(
                Sample(row["sample_id"], path, row["label"], row["attack_type"])
            )
    if missing:
        raise FileNotFoundError(
            f"{manifest}: {len(missing)} referenced image(s) missing, e.g. {missing[:3]}"
        )
    return DomainDataset(name, tuple(samples))


def write_manifest(dataset: DomainDataset, domain_dir: str) -> str:
    """Write ``manifest.csv`` for a domain whose image paths live under
    ``domain_dir``."""
    os.makedirs(domain_dir, exist_ok=True)
    manifest = os.path.join(domain_dir, MANIFEST_NAME)
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_COLUMNS)
        for s in dataset.samples:
            writer.writerow(
                [s.sample_id, os.path.relpath(s.path, domain_dir), s.label, s.attack_type]
            )
    return manifest


def load_registry(root: str, domains: list[str] | None = None) -> dict[str, DomainDataset]:
    """Load every domain directory under ``root`` (or the named subset)."""
    if not os.path.isdir(root):
        raise FileNotFoundError(f"dataset root {root!r} is not a directory")
    if domains is None:
        domains = sorted(
            d for d in os.listdir(root)
            if os.path.exists(os.path.join(root, d, MANIFEST_NAME))
        )
    registry = {}
    for name in domains:
        registry[name] = read_manifest(os.path.join(root, name), name)
    if not registry:
        raise ValueError(f"no domain manifests found under {root!r}")
    return registry
