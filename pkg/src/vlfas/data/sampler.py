"""Seeded infinite sampler producing class-balanced, domain-balanced batches."""

from __future__ import annotations

import numpy as np

from ..labels import REAL, SPOOF
from .datasets import DomainDataset, Sample


class BalancedDomainSampler:
    """Every batch holds exactly ``per_domain`` samples from each domain,
    split as evenly across the two classes as parity allows (odd counts
    alternate the extra slot between classes). Per-domain class pools are
    reshuffled on exhaustion, so iteration never stops; the draw order is a
    pure function of the seed.
    """

    def __init__(self, domains: list[DomainDataset] | tuple[DomainDataset, ...],
                 per_domain: int, seed: int = 0):
        if per_domain < 1:
            raise ValueError("per_domain must be at least 1")
        if not domains:
            raise ValueError("sampler needs at least one domain")
        names = [d.name for d in domains]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate domain names: {names}")
        for domain in domains:
            for label in (REAL, SPOOF):
                if not domain.by_label(label):
                    raise ValueError(
                        f"balanced batching needs both classes in every domain; "
                        f"domain {domain.name!r} has no {label!r} samples"
                    )
        self.domains = tuple(domains)
        self.per_domain = per_domain
        self.seed = seed
        self._samples = {
            (d.name, label): d.by_label(label) for d in domains for label in (REAL, SPOOF)
        }
        self._rng = np.random.default_rng(seed)
        self._pools = {
            key: {"order": list(self._rng.permutation(len(samples))), "cursor": 0}
            for key, samples in self._samples.items()
        }
        # Which class receives the odd extra slot next, per domain.
        self._extra_to_real = {d.name: True for d in domains}

    @property
    def batch_size(self) -> int:
        return self.per_domain * len(self.domains)

    def _draw(self, domain: str, label: str, n: int) -> list[Sample]:
        samples = self._samples[(domain, label)]
        pool = self._pools[(domain, label)]
        picked: list[Sample] = []
        while len(picked) < n:
            if pool["cursor"] >= len(pool["order"]):
                pool["order"] = list(self._rng.permutation(len(samples)))
                pool["cursor"] = 0
            take = min(n - len(picked), len(pool["order"]) - pool["cursor"])
            picked.extend(
                samples[i] for i in pool["order"][pool["cursor"] : pool["cursor"] + take]
            )
            pool["cursor"] += take
        return picked

    def next_batch(self) -> list[tuple[str, Sample]]:
        """One batch as (domain name, sample) pairs, grouped by domain."""
        batch: list[tuple[str, Sample]] = []
        for domain in self.domains:
            n_real = n_spoof = self.per_domain // 2
            if self.per_domain % 2:
                if self._extra_to_real[domain.name]:
                    n_real += 1
                else:
                    n_spoof += 1
                self._extra_to_real[domain.name] = not self._extra_to_real[domain.name]
            for sample in self._draw(domain.name, REAL, n_real):
                batch.append((domain.name, sample))
            for sample in self._draw(domain.name, SPOOF, n_spoof):
                batch.append((domain.name, sample))
        return batch

    def __iter__(self):
        return self

    def __next__(self) -> list[tuple[str, Sample]]:
        return self.next_batch()

    def state_dict(self) -> dict:
        return {
            "seed": self.seed,
            "per_domain": self.per_domain,
            "domains": [d.name for d in self.domains],
            "rng": self._rng.bit_generator.state,
            "pools": {
                f"{domain}\x00{label}": {"order": list(p["order"]), "cursor": p["cursor"]}
                for (domain, label), p in self._pools.items()
            },
            "extra_to_real": dict(self._extra_to_real),
        }

    def load_state_dict(self, state: dict) -> None:
        if state["domains"] != [d.name for d in self.domains]:
            raise ValueError(
                f"sampler state is for domains {state['domains']}, "
                f"but this sampler has {[d.name for d in self.domains]}"
            )
        if state["per_domain"] != self.per_domain:
            raise ValueError("sampler state has a different per_domain batch size")
        self._rng.bit_generator.state = state["rng"]
        for key, pool in state["pools"].items():
            domain, label = key.split("\x00")
            self._pools[(domain, label)] = {
                "order": list(pool["order"]),
                "cursor": pool["cursor"],
            }
        self._extra_to_real = dict(state["extra_to_real"])
