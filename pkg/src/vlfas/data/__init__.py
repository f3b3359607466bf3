from .datasets import (
    ATTACK_TYPES,
    DomainDataset,
    Sample,
    load_registry,
    read_manifest,
    write_manifest,
)
from .protocols import (
    ProtocolSplit,
    build_protocol,
    enumerate_protocols,
    few_shot_inject,
)
from .sampler import BalancedDomainSampler
from .augment import AugmentConfig, AugmentedPair, augment_image, make_views
from .images import IMAGE_MEAN, IMAGE_STD, load_image01, normalize_batch, normalize_image01
from .synthetic import make_synthetic_domain, make_synthetic_registry

__all__ = [
    "ATTACK_TYPES",
    "AugmentConfig",
    "AugmentedPair",
    "BalancedDomainSampler",
    "DomainDataset",
    "IMAGE_MEAN",
    "IMAGE_STD",
    "ProtocolSplit",
    "Sample",
    "augment_image",
    "build_protocol",
    "enumerate_protocols",
    "few_shot_inject",
    "load_image01",
    "load_registry",
    "make_synthetic_domain",
    "make_synthetic_registry",
    "make_views",
    "normalize_batch",
    "normalize_image01",
    "read_manifest",
    "write_manifest",
]
