"""Run configuration files.

One YAML file is the single source of truth for a run. It is validated
against a strict schema before any work happens: unknown keys anywhere are
rejected, missing required fields and type mismatches are reported with
their full field paths. Scalar fields may be overridden from the command
line with ``section.field=value`` expressions; every override is logged and
folded into the config hash that all artifacts embed.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import yaml

from .config import ModelConfig, config_hash
from .data.datasets import DomainDataset, load_registry
from .data.augment import AugmentConfig
from .data.protocols import ProtocolSplit, build_protocol
from .losses import LossWeights
from .prompts import PromptSet
from .tokenizer import BpeTokenizer

logger = logging.getLogger(__name__)

DATA_ROOT_ENV = "VLFAS_DATA_ROOT"


class ConfigError(ValueError):
    pass


_REQUIRED = object()

# (type spec, default). Type specs: python types, tuples of literal choices,
# or the string kinds handled in _check_value.
_SCHEMA: dict = {
    "run": {
        "name": (str, _REQUIRED),
        "output_dir": (str, _REQUIRED),
        "seeds": ("int_list", [0, 1, 2, 3, 4]),
    },
    "model": {
        "preset": (("toy", "vit_b16"), "vit_b16"),
        "pretrained": ("str_or_null", None),
        "bpe_merges": ("str_or_null", None),
        "overrides": ("raw_dict", {}),
    },
    "data": {
        "root": ("str_or_null", None),
        "protocol": ("protocol", _REQUIRED),
        "target": ("str_or_null", None),
        "source": ("str_or_null", None),
        "unseen_attack": (("replay", "print"), None),
        "supplementary": ("str_or_null", None),
        "shots": (int, 0),
    },
    "train": {
        "strategy": (str, _REQUIRED),
        "iterations": (int, 4000),
        "lr": (float, 1e-6),
        "weight_decay": (float, 1e-6),
        "per_domain_batch": (int, 3),
        "ssl_temperature": (float, 0.5),
        "grad_clip": ("float_or_null", None),
        "checkpoint_every": (int, 500),
        "decoupled_weight_decay": (bool, True),
        "mcl_ce_source": (("view1", "original"), "view1"),
        "temperature_init": ("float_or_null", None),
        "freeze_text": (bool, False),
        "freeze_logit_scale": (bool, False),
        "loss_weights": {
            "alpha": (float, 1.0),
            "beta": (float, 1.0),
            "gamma": (float, 1.0),
        },
        "augment": {
            "crop_scale": ("float_pair", [0.5, 1.0]),
            "crop_ratio": ("float_pair", [0.75, 4.0 / 3.0]),
            "hflip_prob": (float, 0.5),
            "jitter_prob": (float, 0.8),
            "jitter_strength": (float, 0.4),
            "grayscale_prob": (float, 0.2),
        },
    },
    "prompts": {
        "catalog": ("str_or_null", None),
    },
    "eval": {
        "threshold_policy": (("fixed", "eer"), "fixed"),
        "fixed_threshold": (float, 0.5),
        "fpr_target": (float, 0.01),
        "batch_size": (int, 64),
        "baseline": ("str_or_null", None),
    },
}


def _check_value(value, spec, path: str, errors: list[str]):
    if isinstance(spec, tuple) and all(isinstance(s, str) for s in spec):
        if value is None or value in spec:
            return value
        errors.append(f"{path}: expected one of {spec}, got {value!r}")
        return value
    if spec is bool:
        if isinstance(value, bool):
            return value
        errors.append(f"{path}: expected a boolean, got {value!r}")
        return value
    if spec is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        errors.append(f"{path}: expected an integer, got {value!r}")
        return value
    if spec is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        errors.append(f"{path}: expected a number, got {value!r}")
        return value
    if spec is str:
        if isinstance(value, str) and value:
            return value
        errors.append(f"{path}: expected a nonempty string, got {value!r}")
        return value
    if spec == "str_or_null":
        if value is None or (isinstance(value, str) and value):
            return value
        errors.append(f"{path}: expected a string or null, got {value!r}")
        return value
    if spec == "float_or_null":
        if value is None or (isinstance(value, (int, float)) and not isinstance(value, bool)):
            return None if value is None else float(value)
        errors.append(f"{path}: expected a number or null, got {value!r}")
        return value
    if spec == "int_list":
        if isinstance(value, list) and value and all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            return list(value)
        errors.append(f"{path}: expected a nonempty list of integers, got {value!r}")
        return value
    if spec == "float_pair":
        if (
            isinstance(value, list) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
        ):
            return [float(v) for v in value]
        errors.append(f"{path}: expected a pair of numbers, got {value!r}")
        return value
    if spec == "raw_dict":
        if isinstance(value, dict):
            return dict(value)
        errors.append(f"{path}: expected a mapping, got {value!r}")
        return value
    if spec == "protocol":
        normalized = str(value).strip().lower().replace("-", "_")
        if normalized in ("1", "2", "3", "unseen_spoof"):
            return normalized
        errors.append(f"{path}: expected 1, 2, 3, or 'unseen-spoof', got {value!r}")
        return value
    raise AssertionError(f"unhandled schema spec {spec!r} at {path}")


def _validate(section: dict, schema: dict, path: str, errors: list[str]) -> dict:
    out: dict = {}
    unknown = set(section) - set(schema)
    for key in sorted(unknown):
        errors.append(f"{path}{key}: unknown field")
    for key, spec in schema.items():
        field_path = f"{path}{key}"
        if isinstance(spec, dict):
            sub = section.get(key, {})
            if not isinstance(sub, dict):
                errors.append(f"{field_path}: expected a mapping, got {sub!r}")
                sub = {}
            out[key] = _validate(sub, spec, field_path + ".", errors)
            continue
        type_spec, default = spec
        if key not in section or section[key] is None:
            if default is _REQUIRED:
                errors.append(f"{field_path}: required field is missing")
                out[key] = None
            else:
                out[key] = default
        else:
            out[key] = _check_value(section[key], type_spec, field_path, errors)
    return out


def apply_override(raw: dict, expression: str) -> tuple[str, object]:
    """Apply one ``section.field=value`` override in place; value parses as YAML."""
    if "=" not in expression:
        raise ConfigError(f"override {expression!r} is not of the form section.field=value")
    dotted, _, literal = expression.partition("=")
    keys = dotted.strip().split(".")
    if len(keys) < 2:
        raise ConfigError(f"override path {dotted!r} must name a section and a field")
    value = yaml.safe_load(literal)
    if isinstance(value, str):
        # YAML leaves scientific notation like 1e-3 as a string
        try:
            value = int(value)
        except ValueError:
            try:
                value = float(value)
            except ValueError:
                pass
    node = raw
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {dotted!r} crosses a non-mapping field")
    node[keys[-1]] = value
    return dotted.strip(), value


def _apply_protocol_batch_default(raw: dict) -> None:
    """Protocol 2 trains with 8 samples per domain unless the config says
    otherwise; the other protocols default to 3."""
    data_section = raw.get("data") or {}
    if not isinstance(data_section, dict):
        return
    protocol = str(data_section.get("protocol", "")).strip().lower().replace("-", "_")
    train_section = raw.setdefault("train", {})
    if protocol == "2" and isinstance(train_section, dict):
        train_section.setdefault("per_domain_batch", 8)


@dataclass(frozen=True)
class RunConfig:
    """A validated, normalized run configuration."""

    data: dict
    overrides: tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, raw: dict, overrides: tuple[str, ...] = ()) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("run config must be a mapping of sections")
        raw = {k: (dict(v) if isinstance(v, dict) else v) for k, v in raw.items()}
        applied = []
        for expression in overrides:
            dotted, value = apply_override(raw, expression)
            applied.append(f"{dotted}={value!r}")
            logger.info("config override: %s = %r", dotted, value)
        _apply_protocol_batch_default(raw)
        errors: list[str] = []
        normalized = _validate(raw, _SCHEMA, "", errors)
        errors.extend(cls._cross_checks(normalized))
        if errors:
            raise ConfigError("invalid run config:\n  " + "\n  ".join(errors))
        return cls(normalized, tuple(applied))

    @classmethod
    def load(cls, path: str, overrides: tuple[str, ...] = ()) -> "RunConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file {path} is not valid YAML: {exc}") from None
        return cls.from_dict(raw or {}, overrides)

    @staticmethod
    def _cross_checks(cfg: dict) -> list[str]:
        errors = []
        protocol = cfg["data"]["protocol"]
        if protocol in ("1", "2") and not cfg["data"]["target"]:
            errors.append("data.target: required for protocols 1 and 2")
        if protocol == "3" and not (cfg["data"]["source"] and cfg["data"]["target"]):
            errors.append("data.source/data.target: both required for protocol 3")
        if protocol == "unseen_spoof" and not cfg["data"]["unseen_attack"]:
            errors.append("data.unseen_attack: required for the unseen-spoof protocol")
        if cfg["data"]["shots"] < 0:
            errors.append("data.shots: must be nonnegative")
        return errors

    # --- accessors -----------------------------------------------------------

    def hash(self) -> str:
        return config_hash(self.data)

    @property
    def name(self) -> str:
        return self.data["run"]["name"]

    @property
    def output_dir(self) -> str:
        return self.data["run"]["output_dir"]

    @property
    def seeds(self) -> list[int]:
        return list(self.data["run"]["seeds"])

    @property
    def strategy(self) -> str:
        from .training import normalize_strategy

        return normalize_strategy(self.data["train"]["strategy"])

    def model_config(self) -> ModelConfig:
        section = self.data["model"]
        overrides = dict(section["overrides"])
        try:
            if section["preset"] == "toy":
                return ModelConfig.toy(**overrides)
            return ModelConfig.vit_b16(**overrides)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model.overrides: {exc}") from exc

    def tokenizer(self) -> BpeTokenizer:
        return BpeTokenizer(
            self.data["model"]["bpe_merges"],
            context_length=self.model_config().context_length,
        )

    def prompt_set(self) -> PromptSet:
        catalog = self.data["prompts"]["catalog"]
        return PromptSet.from_file(catalog) if catalog else PromptSet.default()

    def data_root(self) -> str:
        root = self.data["data"]["root"] or os.environ.get(DATA_ROOT_ENV)
        if not root:
            raise ConfigError(
                f"no dataset root: set data.root or the {DATA_ROOT_ENV} environment variable"
            )
        return root

    def load_registry(self) -> dict[str, DomainDataset]:
        return load_registry(self.data_root())

    def build_split(self, registry: dict[str, DomainDataset], seed: int) -> ProtocolSplit:
        d = self.data["data"]
        return build_protocol(
            d["protocol"],
            registry,
            target=d["target"],
            source=d["source"],
            unseen_attack=d["unseen_attack"],
            shots=d["shots"],
            seed=seed,
            supplementary=d["supplementary"],
        )

    def plan(self, seed: int):
        from .training import TrainPlan

        t = self.data["train"]
        return TrainPlan(
            strategy=t["strategy"],
            iterations=t["iterations"],
            lr=t["lr"],
            weight_decay=t["weight_decay"],
            per_domain_batch=t["per_domain_batch"],
            weights=LossWeights(**t["loss_weights"]),
            shots=self.data["data"]["shots"],
            seed=seed,
            freeze_text=t["freeze_text"],
            freeze_logit_scale=t["freeze_logit_scale"],
            ssl_temperature=t["ssl_temperature"],
            grad_clip=t["grad_clip"],
            checkpoint_every=t["checkpoint_every"],
            decoupled_weight_decay=t["decoupled_weight_decay"],
            mcl_ce_source=t["mcl_ce_source"],
            temperature_init=t["temperature_init"],
            augment=AugmentConfig(
                crop_scale=tuple(t["augment"]["crop_scale"]),
                crop_ratio=tuple(t["augment"]["crop_ratio"]),
                hflip_prob=t["augment"]["hflip_prob"],
                jitter_prob=t["augment"]["jitter_prob"],
                jitter_strength=t["augment"]["jitter_strength"],
                grayscale_prob=t["augment"]["grayscale_prob"],
            ),
        )

    def eval_options(self) -> dict:
        return dict(self.data["eval"])

    def snapshot(self, path: str) -> None:
        """Write the normalized config (plus hash and overrides) for the record."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# config_hash={self.hash()}\n")
            for expression in self.overrides:
                fh.write(f"# override {expression}\n")
            yaml.safe_dump(self.data, fh, sort_keys=False)
