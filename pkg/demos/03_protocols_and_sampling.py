"""Protocol splits, balanced multi-domain batching, and two-view augmentation.

Builds synthetic stand-in domains on disk (procedurally textured face crops
plus manifests), then walks the leave-one-domain-out, single-source, and
unseen-attack splits, the k-shot budget, and the seeded batch sampler.
"""

import tempfile

import numpy as np

from vlfas.data import (
    AugmentConfig,
    BalancedDomainSampler,
    build_protocol,
    enumerate_protocols,
    load_image01,
    make_synthetic_registry,
    make_views,
)
from vlfas.prompts import PromptSet

root = tempfile.mkdtemp(prefix="vlfas_demo_domains_")
registry = make_synthetic_registry(
    root,
    domains=("M", "C", "I", "O", "CelebA-Spoof"),
    n_per_class=40,
    image_size=32,
    seed=11,
)
print(f"synthetic domains under {root}:")
for name, domain in registry.items():
    attacks = ", ".join(sorted(domain.attack_types()))
    print(f"  {name:<14} {len(domain):>3} samples (spoof attacks: {attacks})")

# every protocol scenario, statically enumerable
rows = enumerate_protocols()
print(f"\n{len(rows)} protocol scenarios "
      f"(4 leave-one-out + 3 large-scale + 12 single-source + 2 unseen-attack)")

# leave-one-domain-out with the supplementary domain attached and a 5-shot budget
split = build_protocol(1, registry, target="M", supplementary="CelebA-Spoof",
                       shots=5, seed=0)
print(f"\nscenario {split.name}")
print(f"  sources:       {[d.name for d in split.sources]}")
print(f"  supplementary: {split.supplementary.name}")
print(f"  5-shot pool:   {[s.sample_id for s in split.fewshot.samples]}")
print(f"  target size:   {len(split.target)} (was {len(registry['M'])})")
overlap = split.train_global_ids() & split.test_global_ids()
print(f"  train/test overlap: {len(overlap)} samples")

# the unseen-attack split holds one spoof type out of training entirely
unseen = build_protocol("unseen-spoof", registry, unseen_attack="replay", seed=0)
train_attacks = set()
for domain in unseen.sources:
    train_attacks |= domain.attack_types()
print(f"\nscenario {unseen.name}: train attacks {sorted(train_attacks)}, "
      f"test attacks {sorted(unseen.target.attack_types())}")

# balanced batches: exactly per_domain samples from every training domain,
# classes split as evenly as parity allows, reshuffle on exhaustion
sampler = BalancedDomainSampler(split.training_domains(), per_domain=3, seed=0)
print(f"\nbatch size {sampler.batch_size} "
      f"({len(split.training_domains())} domains x 3):")
for i in range(3):
    batch = sampler.next_batch()
    by_domain = {}
    for domain, sample in batch:
        by_domain.setdefault(domain, []).append(sample.label[0])
    parts = "  ".join(f"{d}:[{''.join(v)}]" for d, v in by_domain.items())
    print(f"  batch {i}: {parts}")

# two stochastic views plus two distinct class prompts, all from one generator
prompts = PromptSet.default()
rng = np.random.default_rng(5)
sample = registry["C"].samples[0]
pair = make_views(load_image01(sample.path), sample.label, prompts, rng)
print(f"\ntwo views of {sample.sample_id}: "
      f"identical = {np.array_equal(pair.view1, pair.view2)}")
print(f"  prompt view 1: {pair.prompt_view1!r}")
print(f"  prompt view 2: {pair.prompt_view2!r}")

identity = make_views(load_image01(sample.path), sample.label, prompts, rng,
                      AugmentConfig.identity())
print(f"identity config reproduces the input exactly: "
      f"{np.array_equal(identity.view1, identity.view2)}")
