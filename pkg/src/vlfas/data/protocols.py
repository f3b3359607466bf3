"""Domain-generalization protocol splits.

Protocols 1 and 2 are leave-one-domain-out over {M, C, I, O} and {W, C, S};
protocol 3 enumerates the 12 ordered single-source -> single-target pairs over
{M, C, I, O}; the unseen-spoof splits hold one attack type out of training
entirely. A supplementary domain can be attached as an extra training source,
and a k-shot budget moves k labeled target samples into training.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..labels import REAL, SPOOF
from .datasets import DomainDataset, Sample, global_id

PROTOCOL1_DOMAINS = ("M", "C", "I", "O")
PROTOCOL2_DOMAINS = ("W", "C", "S")
UNSEEN_ATTACKS = ("replay", "print")

# Source orderings follow the conventional split names (e.g. "OCI -> M").
_PROTOCOL1_SOURCES = {
    "M": ("O", "C", "I"),
    "C": ("O", "M", "I"),
    "I": ("O", "C", "M"),
    "O": ("I", "C", "M"),
}
_PROTOCOL2_SOURCES = {
    "W": ("C", "S"),
    "C": ("S", "W"),
    "S": ("C", "W"),
}


@dataclass(frozen=True)
class ProtocolSplit:
    """A resolved split: training sources, held-out target, optional extras.

    ``fewshot`` carries target samples moved into training by a k-shot
    budget; they are removed from ``target`` and keep the target's domain
    name so identifier bookkeeping stays honest.
    """

    protocol: str
    name: str
    sources: tuple[DomainDataset, ...]
    target: DomainDataset
    supplementary: DomainDataset | None = None
    fewshot: DomainDataset | None = None
    shots: int = 0
    seed: int = 0

    def __post_init__(self):
        source_names = [d.name for d in self.sources]
        if len(set(source_names)) != len(source_names):
            raise ValueError(f"duplicate source domains in {source_names}")
        if self.target.name in source_names:
            raise ValueError(
                f"target domain {self.target.name!r} must not appear among sources"
            )

    def training_domains(self) -> tuple[DomainDataset, ...]:
        domains = list(self.sources)
        if self.supplementary is not None:
            domains.append(self.supplementary)
        if self.fewshot is not None:
            domains.append(self.fewshot)
        return tuple(domains)

    def train_global_ids(self) -> set[str]:
        ids: set[str] = set()
        for domain in self.training_domains():
            ids |= domain.global_ids()
        return ids

    def test_global_ids(self) -> set[str]:
        return self.target.global_ids()


def enumerate_protocols() -> list[dict]:
    """Static descriptions of all 4 + 3 + 12 + 2 splits."""
    rows: list[dict] = []
    for target in PROTOCOL1_DOMAINS:
        sources = _PROTOCOL1_SOURCES[target]
        rows.append({
            "protocol": "1",
            "name": f"{''.join(sources)} -> {target}",
            "sources": sources,
            "target": target,
        })
    for target in PROTOCOL2_DOMAINS:
        sources = _PROTOCOL2_SOURCES[target]
        rows.append({
            "protocol": "2",
            "name": f"{''.join(sources)} -> {target}",
            "sources": sources,
            "target": target,
        })
    for source in PROTOCOL1_DOMAINS:
        for target in PROTOCOL1_DOMAINS:
            if source != target:
                rows.append({
                    "protocol": "3",
                    "name": f"{source} -> {target}",
                    "sources": (source,),
                    "target": target,
                })
    for attack in UNSEEN_ATTACKS:
        kept = [a for a in UNSEEN_ATTACKS if a != attack]
        rows.append({
            "protocol": "unseen_spoof",
            "name": f"unseen-{attack}",
            "sources": PROTOCOL1_DOMAINS,
            "target": f"aggregated unseen {attack}",
            "train_attacks": tuple(kept),
            "test_attack": attack,
        })
    return rows


def _require_domains(registry: dict[str, DomainDataset], names: tuple[str, ...]) -> None:
    unknown = [n for n in names if n not in registry]
    if unknown:
        raise ValueError(
            f"domain(s) {unknown} not registered; available: {sorted(registry)}"
        )


def _normalize_protocol(protocol) -> str:
    p = str(protocol).strip().lower().replace("-", "_")
    if p in {"1", "2", "3", "unseen_spoof"}:
        return p
    raise ValueError(
        f"unknown protocol {protocol!r}; expected 1, 2, 3, or 'unseen-spoof'"
    )


def _split_8020(samples: tuple[Sample, ...], rng: np.random.Generator) -> tuple[list[Sample], list[Sample]]:
    order = rng.permutation(len(samples))
    n_train = int(round(0.8 * len(samples)))
    train = [samples[i] for i in order[:n_train]]
    test = [samples[i] for i in order[n_train:]]
    return train, test


def _unseen_spoof_split(
    registry: dict[str, DomainDataset], unseen_attack: str, seed: int
) -> tuple[tuple[DomainDataset, ...], DomainDataset]:
    """Hold one attack type out of training entirely.

    Real, kept-attack, and unseen-attack samples are each split 80/20
    (stratified per domain); training keeps real + kept-attack of every
    protocol-1 domain, the test pool aggregates the held-out 20% of real
    samples with the 20% of the unseen attack type.
    """
    if unseen_attack not in UNSEEN_ATTACKS:
        raise ValueError(f"unseen attack must be one of {UNSEEN_ATTACKS}, got {unseen_attack!r}")
    kept_attack = next(a for a in UNSEEN_ATTACKS if a != unseen_attack)
    _require_domains(registry, PROTOCOL1_DOMAINS)

    rng = np.random.default_rng(seed)
    sources: list[DomainDataset] = []
    test_samples: list[Sample] = []
    for name in PROTOCOL1_DOMAINS:
        domain = registry[name]
        groups = {
            REAL: tuple(s for s in domain.samples if s.label == REAL),
            kept_attack: tuple(s for s in domain.samples if s.attack_type == kept_attack),
            unseen_attack: tuple(s for s in domain.samples if s.attack_type == unseen_attack),
        }
        train: list[Sample] = []
        for group, samples in groups.items():
            g_train, g_test = _split_8020(samples, rng)
            if group == unseen_attack:
                test_samples.extend(
                    Sample(f"{name}:{s.sample_id}", s.path, s.label, s.attack_type)
                    for s in g_test
                )
            else:
                train.extend(g_train)
                if group == REAL:
                    test_samples.extend(
                        Sample(f"{name}:{s.sample_id}", s.path, s.label, s.attack_type)
                        for s in g_test
                    )
        sources.append(DomainDataset(name, tuple(train)))
    target = DomainDataset(f"unseen-{unseen_attack}", tuple(test_samples))
    return tuple(sources), target


def build_protocol(
    protocol,
    registry: dict[str, DomainDataset],
    *,
    target: str | None = None,
    source: str | None = None,
    unseen_attack: str | None = None,
    shots: int = 0,
    seed: int = 0,
    supplementary: str | None = None,
) -> ProtocolSplit:
    """Resolve one protocol scenario against a domain registry.

    Protocols 1/2 need ``target``; protocol 3 needs ``source`` and ``target``;
    the unseen-spoof protocol needs ``unseen_attack``. ``supplementary`` names
    an extra registered domain attached as an additional training source.
    ``shots > 0`` moves that many labeled target samples into training.
    """
    p = _normalize_protocol(protocol)

    if p in {"1", "2"}:
        domains = PROTOCOL1_DOMAINS if p == "1" else PROTOCOL2_DOMAINS
        source_map = _PROTOCOL1_SOURCES if p == "1" else _PROTOCOL2_SOURCES
        if target is None:
            raise ValueError(f"protocol {p} needs a target domain (one of {domains})")
        if target not in domains:
            raise ValueError(f"protocol {p} target must be one of {domains}, got {target!r}")
        source_names = source_map[target]
        _require_domains(registry, source_names + (target,))
        sources = tuple(registry[n] for n in source_names)
        tgt = registry[target]
        name = f"{''.join(source_names)} -> {target}"
    elif p == "3":
        if source is None or target is None:
            raise ValueError("protocol 3 needs both a source and a target domain")
        if source == target:
            raise ValueError("protocol 3 source and target must differ")
        for d in (source, target):
            if d not in PROTOCOL1_DOMAINS:
                raise ValueError(
                    f"protocol 3 domains must come from {PROTOCOL1_DOMAINS}, got {d!r}"
                )
        _require_domains(registry, (source, target))
        sources = (registry[source],)
        tgt = registry[target]
        name = f"{source} -> {target}"
    else:
        if unseen_attack is None:
            raise ValueError(
                f"the unseen-spoof protocol needs unseen_attack (one of {UNSEEN_ATTACKS})"
            )
        sources, tgt = _unseen_spoof_split(registry, unseen_attack, seed)
        name = f"unseen-{unseen_attack}"

    supp = None
    if supplementary is not None:
        _require_domains(registry, (supplementary,))
        if supplementary == tgt.name:
            raise ValueError("the supplementary domain cannot be the target domain")
        supp = registry[supplementary]

    split = ProtocolSplit(
        protocol=p, name=name, sources=sources, target=tgt,
        supplementary=supp, shots=0, seed=seed,
    )
    if shots:
        split = few_shot_inject(split, shots, np.random.default_rng(seed))
    return split


def few_shot_inject(split: ProtocolSplit, k: int, rng: np.random.Generator) -> ProtocolSplit:
    """Move k labeled target samples into the training pool.

    Stratified ceil(k/2) / floor(k/2) across the classes, the larger share
    going to whichever class is rarer in the target pool (ties broken by the
    generator); selected samples leave the evaluation pool. k = 0 returns the
    split unchanged.
    """
    if k < 0:
        raise ValueError("shot count must be nonnegative")
    if k == 0:
        return split
    if split.fewshot is not None:
        raise ValueError("split already carries a few-shot injection")
    target = split.target
    if k > len(target):
        raise ValueError(f"cannot draw {k} shots from a target pool of {len(target)}")

    real = list(target.by_label(REAL))
    spoof = list(target.by_label(SPOOF))
    if not real or not spoof:
        raise ValueError("few-shot injection needs both classes present in the target pool")

    larger_share, smaller_share = (k + 1) // 2, k // 2
    if len(real) < len(spoof):
        rare, common = real, spoof
    elif len(spoof) < len(real):
        rare, common = spoof, real
    else:
        rare, common = (real, spoof) if rng.integers(2) == 0 else (spoof, real)
    if len(rare) < larger_share or len(common) < smaller_share:
        raise ValueError(
            f"target pool cannot satisfy a {larger_share}/{smaller_share} class split for k={k}"
        )

    chosen = [rare[i] for i in rng.choice(len(rare), size=larger_share, replace=False)]
    chosen += [common[i] for i in rng.choice(len(common), size=smaller_share, replace=False)]
    chosen_ids = {s.sample_id for s in chosen}

    remaining = tuple(s for s in target.samples if s.sample_id not in chosen_ids)
    return replace(
        split,
        target=target.subset(remaining),
        fewshot=DomainDataset(target.name, tuple(chosen)),
        shots=k,
    )
