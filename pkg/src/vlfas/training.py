"""The three finetuning strategies as interchangeable training loops.

* ``V``   - vision tower + MLP head, plain cross entropy on head logits.
* ``IT``  - both towers; cross entropy on the temperature-scaled cosine
            similarities between image embeddings and the prompt-ensemble
            class embeddings (recomputed every step, since the text tower
            is training).
* ``MCL`` - ``IT``'s objective plus the two-view contrastive loss on
            projected image views and the image-text view-consistency
            penalty, combined with configurable weights.
"""

from __future__ import annotations

import json
import math
import os
import random
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from . import __version__
from .checkpoints import Checkpoint, load_checkpoint, make_manifest, save_checkpoint
from .config import ModelConfig, config_hash
from .data.augment import AugmentConfig, make_views
from .data.images import load_image01, normalize_batch
from .data.protocols import ProtocolSplit
from .data.sampler import BalancedDomainSampler
from .labels import label_to_index
from .losses import LossWeights, ce_loss, joint_loss, mse_consistency, similarity_logits, simclr_loss
from .models import DualEncoder, MlpHead, ProjectorH
from .prompts import ClassEmbeddings, PromptSet, embed_prompt_set
from .tokenizer import BpeTokenizer

STRATEGIES = ("V", "IT", "MCL")
_STRATEGY_ALIASES = {
    "v": "V", "vision": "V",
    "it": "IT", "image-text": "IT", "image_text": "IT",
    "mcl": "MCL", "multimodal": "MCL",
}

LOG_COLUMNS = ("iteration", "l_ce", "l_simclr", "l_mse", "l_total", "lr", "wall_time")


class NonFiniteLossError(RuntimeError):
    """Training produced a non-finite loss; carries a diagnostic dump."""

    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


def normalize_strategy(strategy: str) -> str:
    s = str(strategy).strip()
    if s in STRATEGIES:
        return s
    if s.lower() in _STRATEGY_ALIASES:
        return _STRATEGY_ALIASES[s.lower()]
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


@dataclass(frozen=True)
class TrainPlan:
    """Strategy selector plus every optimization constant of a run."""

    strategy: str
    iterations: int = 4000
    lr: float = 1e-6
    weight_decay: float = 1e-6
    per_domain_batch: int = 3
    weights: LossWeights = field(default_factory=LossWeights)
    shots: int = 0
    seed: int = 0
    freeze_text: bool = False
    freeze_logit_scale: bool = False
    ssl_temperature: float = 0.5
    grad_clip: float | None = None
    checkpoint_every: int = 500
    decoupled_weight_decay: bool = True
    mcl_ce_source: str = "view1"
    temperature_init: float | None = None
    augment: AugmentConfig = field(default_factory=AugmentConfig)

    def __post_init__(self):
        object.__setattr__(self, "strategy", normalize_strategy(self.strategy))
        if self.iterations < 0:
            raise ValueError("iterations must be nonnegative")
        if self.lr < 0 or self.weight_decay < 0:
            raise ValueError("lr and weight_decay must be nonnegative")
        if self.per_domain_batch < 1:
            raise ValueError("per_domain_batch must be at least 1")
        if self.ssl_temperature <= 0:
            raise ValueError("ssl_temperature must be positive")
        if self.mcl_ce_source not in ("view1", "original"):
            raise ValueError("mcl_ce_source must be 'view1' or 'original'")
        if self.temperature_init is not None and self.temperature_init <= 0:
            raise ValueError("temperature_init must be positive when set")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy,
            "iterations": self.iterations,
            "lr": self.lr,
            "weight_decay": self.weight_decay,
            "per_domain_batch": self.per_domain_batch,
            "weights": [self.weights.alpha, self.weights.beta, self.weights.gamma],
            "shots": self.shots,
            "seed": self.seed,
            "freeze_text": self.freeze_text,
            "freeze_logit_scale": self.freeze_logit_scale,
            "ssl_temperature": self.ssl_temperature,
            "grad_clip": self.grad_clip,
            "checkpoint_every": self.checkpoint_every,
            "decoupled_weight_decay": self.decoupled_weight_decay,
            "mcl_ce_source": self.mcl_ce_source,
            "temperature_init": self.temperature_init,
            "augment": vars(self.augment) | {
                "crop_scale": list(self.augment.crop_scale),
                "crop_ratio": list(self.augment.crop_ratio),
            },
        }


@dataclass
class ModelBundle:
    """Everything the strategies touch: both towers, head, projector, tokenizer."""

    config: ModelConfig
    model: DualEncoder
    head: MlpHead
    projector: ProjectorH
    tokenizer: BpeTokenizer


def build_bundle(
    config: ModelConfig,
    *,
    tokenizer: BpeTokenizer | None = None,
    pretrained_path: str | None = None,
    seed: int | None = None,
) -> ModelBundle:
    """Instantiate the full stack, optionally from a published checkpoint."""
    if seed is not None:
        torch.manual_seed(seed)
    if pretrained_path:
        from .checkpoints import load_pretrained

        model = load_pretrained(pretrained_path, config)
    else:
        model = DualEncoder(config)
    head = MlpHead(config.vision_width, config.head_hidden).to(config.torch_dtype)
    projector = ProjectorH(config.embed_dim, config.projector_dims).to(config.torch_dtype)
    tokenizer = tokenizer or BpeTokenizer(context_length=config.context_length)
    if tokenizer.vocab_size > config.vocab_size:
        raise ValueError(
            f"tokenizer vocabulary ({tokenizer.vocab_size}) exceeds the text tower's "
            f"embedding table ({config.vocab_size})"
        )
    return ModelBundle(config, model, head, projector, tokenizer)


def bundle_from_checkpoint(checkpoint: Checkpoint, tokenizer: BpeTokenizer | None = None) -> ModelBundle:
    cfg = checkpoint.model_config
    bundle = build_bundle(cfg, tokenizer=tokenizer, seed=0)
    bundle.model.load_state_dict(checkpoint.model_state, strict=True)
    head = checkpoint.build_head()
    if head is not None:
        bundle.head = head
    projector = checkpoint.build_projector()
    if projector is not None:
        bundle.projector = projector
    return bundle


def seed_everything(seed: int) -> None:
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)


def strategy_parameters(bundle: ModelBundle, plan: TrainPlan) -> list[torch.nn.Parameter]:
    """The exact parameter set a strategy is allowed to update."""
    params = list(bundle.model.visual.parameters())
    if plan.strategy == "V":
        params += list(bundle.head.parameters())
        return params
    if not plan.freeze_text:
        params += list(bundle.model.text.parameters())
    if not plan.freeze_logit_scale:
        params.append(bundle.model.logit_scale)
    if plan.strategy == "MCL":
        params += list(bundle.projector.parameters())
    return params


def make_optimizer(params, plan: TrainPlan) -> torch.optim.Optimizer:
    if plan.decoupled_weight_decay:
        return torch.optim.AdamW(
            params, lr=plan.lr, betas=(0.9, 0.999), weight_decay=plan.weight_decay
        )
    return torch.optim.Adam(
        params, lr=plan.lr, betas=(0.9, 0.999), weight_decay=plan.weight_decay
    )


def _require_finite(components: dict[str, torch.Tensor], context: str) -> None:
    values = {k: float(v.detach()) for k, v in components.items()}
    if not all(np.isfinite(v) for v in values.values()):
        raise NonFiniteLossError(
            f"non-finite loss during {context}: {values}",
            {"context": context, "losses": values},
        )


def _clip_and_step(optimizer: torch.optim.Optimizer, grad_clip: float | None) -> None:
    if grad_clip is not None:
        params = [p for group in optimizer.param_groups for p in group["params"]]
        torch.nn.utils.clip_grad_norm_(params, grad_clip)
    optimizer.step()


def train_step_v(
    batch: tuple[torch.Tensor, torch.Tensor],
    model: DualEncoder,
    head: MlpHead,
    optimizer: torch.optim.Optimizer,
    grad_clip: float | None = None,
) -> float:
    """One update of the vision tower + head on plain cross entropy."""
    images, labels = batch
    optimizer.zero_grad(set_to_none=True)
    class_state, _ = model.encode_images(images)
    loss = ce_loss(head(class_state), labels)
    _require_finite({"l_ce": loss}, "strategy V step")
    loss.backward()
    _clip_and_step(optimizer, grad_clip)
    return float(loss.detach())


def train_step_it(
    batch: tuple[torch.Tensor, torch.Tensor],
    model: DualEncoder,
    class_emb: ClassEmbeddings,
    optimizer: torch.optim.Optimizer,
    grad_clip: float | None = None,
) -> float:
    """One update of both towers on cross entropy over similarity logits.

    ``class_emb`` must be the prompt ensemble computed for the *current*
    weights (with gradients when the text tower is training); logits are the
    cosine similarities scaled by 1/tau, matching the inference softmax.
    """
    images, labels = batch
    optimizer.zero_grad(set_to_none=True)
    _, image_emb = model.encode_images(images)
    logits = similarity_logits(image_emb, class_emb) / model.temperature
    loss = ce_loss(logits, labels)
    _require_finite({"l_ce": loss}, "strategy IT step")
    loss.backward()
    _clip_and_step(optimizer, grad_clip)
    return float(loss.detach())


@dataclass
class MclBatch:
    """Collated two-view batch: images, labels, and tokenized prompt views."""

    view1: torch.Tensor
    view2: torch.Tensor
    labels: torch.Tensor
    tokens1: torch.Tensor
    eot1: torch.Tensor
    tokens2: torch.Tensor
    eot2: torch.Tensor
    original: torch.Tensor | None = None


def train_step_mcl(
    batch: MclBatch,
    model: DualEncoder,
    projector: ProjectorH,
    class_emb: ClassEmbeddings,
    weights: LossWeights,
    optimizer: torch.optim.Optimizer,
    *,
    ssl_temperature: float = 0.5,
    grad_clip: float | None = None,
    ce_source: str = "view1",
) -> dict[str, float]:
    """One update on the joint objective; returns all loss components."""
    if batch.view1.shape[0] < 2:
        raise ValueError("the multimodal contrastive strategy needs a batch of at least 2")
    optimizer.zero_grad(set_to_none=True)

    _, x1 = model.encode_images(batch.view1)
    _, x2 = model.encode_images(batch.view2)
    z1 = model.encode_tokens(batch.tokens1, batch.eot1)
    z2 = model.encode_tokens(batch.tokens2, batch.eot2)

    l_simclr = simclr_loss(projector(x1), projector(x2), ssl_temperature)
    l_mse = mse_consistency(x1, z1, x2, z2)

    if ce_source == "original":
        if batch.original is None:
            raise ValueError("ce_source='original' needs the untransformed images in the batch")
        _, ce_emb = model.encode_images(batch.original)
    else:
        ce_emb = x1
    logits = similarity_logits(ce_emb, class_emb) / model.temperature
    l_ce = ce_loss(logits, batch.labels)

    l_total = joint_loss(l_ce, l_simclr, l_mse, weights)
    _require_finite(
        {"l_ce": l_ce, "l_simclr": l_simclr, "l_mse": l_mse, "l_total": l_total},
        "strategy MCL step",
    )
    l_total.backward()
    _clip_and_step(optimizer, grad_clip)
    return {
        "l_ce": float(l_ce.detach()),
        "l_simclr": float(l_simclr.detach()),
        "l_mse": float(l_mse.detach()),
        "l_total": float(l_total.detach()),
    }


# --- the loop ----------------------------------------------------------------

class TrainLog:
    """Append-only delimited loss log, one row per iteration."""

    def __init__(self, path: str, *, meta: dict, append: bool = False):
        self.path = path
        exists = os.path.exists(path)
        self._fh = open(path, "a" if append else "w", encoding="utf-8")
        if not (append and exists):
            header_meta = " ".join(f"{k}={v}" for k, v in meta.items())
            self._fh.write(f"# {header_meta}\n")
            self._fh.write(",".join(LOG_COLUMNS) + "\n")
            self._fh.flush()

    def append(self, iteration: int, losses: dict[str, float], lr: float, wall_time: float) -> None:
        row = [
            str(iteration),
            _fmt(losses.get("l_ce")),
            _fmt(losses.get("l_simclr")),
            _fmt(losses.get("l_mse")),
            _fmt(losses.get("l_total")),
            _fmt(lr),
            f"{wall_time:.3f}",
        ]
        self._fh.write(",".join(row) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def _fmt(value: float | None) -> str:
    return "" if value is None else f"{value:.17g}"


def read_train_log(path: str) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("iteration"):
                continue
            parts = line.split(",")
            rows.append(dict(zip(LOG_COLUMNS, parts)))
    return rows


def _collate_images(samples, image_size: int, dtype: torch.dtype):
    images01 = [load_image01(sample.path, image_size) for _domain, sample in samples]
    labels = torch.tensor([label_to_index(s.label) for _d, s in samples], dtype=torch.long)
    return normalize_batch(images01, dtype), labels


def _collate_mcl(
    samples,
    prompt_set: PromptSet,
    view_rng: np.random.Generator,
    plan: TrainPlan,
    tokenizer: BpeTokenizer,
    image_size: int,
    dtype: torch.dtype,
) -> MclBatch:
    pairs = []
    originals = []
    for _domain, sample in samples:
        img01 = load_image01(sample.path, image_size)
        pairs.append(make_views(img01, sample.label, prompt_set, view_rng, plan.augment))
        if plan.mcl_ce_source == "original":
            originals.append(img01)
    tokens1, eot1 = tokenizer.tokenize([p.prompt_view1 for p in pairs])
    tokens2, eot2 = tokenizer.tokenize([p.prompt_view2 for p in pairs])
    return MclBatch(
        view1=normalize_batch([p.view1 for p in pairs], dtype),
        view2=normalize_batch([p.view2 for p in pairs], dtype),
        labels=torch.tensor([label_to_index(p.label) for p in pairs], dtype=torch.long),
        tokens1=tokens1,
        eot1=eot1,
        tokens2=tokens2,
        eot2=eot2,
        original=normalize_batch(originals, dtype) if originals else None,
    )


def _plan_hash(plan: TrainPlan, cfg: ModelConfig, split: ProtocolSplit) -> str:
    return config_hash({
        "plan": plan.to_dict(),
        "model": cfg.to_dict(),
        "split": {"protocol": split.protocol, "name": split.name, "seed": split.seed},
    })


def run_training(
    plan: TrainPlan,
    split: ProtocolSplit,
    bundle: ModelBundle,
    *,
    prompt_set: PromptSet | None = None,
    out_dir: str,
    resume_from: str | None = None,
    run_hash: str | None = None,
) -> Checkpoint:
    """Execute a plan: seeded sampling, per-step losses logged, periodic and
    final checkpoints. Resuming from a mid-run checkpoint reproduces the
    uninterrupted run exactly on the same platform.
    """
    os.makedirs(out_dir, exist_ok=True)
    prompt_set = prompt_set or PromptSet.default()
    cfg = bundle.config
    run_hash = run_hash or _plan_hash(plan, cfg, split)

    seed_everything(plan.seed)
    if plan.temperature_init is not None:
        with torch.no_grad():
            bundle.model.logit_scale.fill_(math.log(1.0 / plan.temperature_init))
    sampler = BalancedDomainSampler(
        split.training_domains(), plan.per_domain_batch, seed=plan.seed
    )
    view_rng = np.random.default_rng(np.random.SeedSequence([plan.seed, 0x5EED]))

    frozen_text = plan.strategy in ("IT", "MCL") and plan.freeze_text
    if frozen_text:
        for p in bundle.model.text.parameters():
            p.requires_grad_(False)
    params = strategy_parameters(bundle, plan)
    optimizer = make_optimizer(params, plan)

    start_iteration = 0
    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if ckpt.strategy != plan.strategy:
            raise ValueError(
                f"checkpoint strategy {ckpt.strategy!r} does not match plan {plan.strategy!r}"
            )
        if ckpt.manifest["config_hash"] != run_hash:
            raise ValueError(
                "checkpoint config hash does not match this run; refusing to resume "
                f"({ckpt.manifest['config_hash']} != {run_hash})"
            )
        bundle.model.load_state_dict(ckpt.model_state, strict=True)
        if ckpt.head_state is not None:
            bundle.head.load_state_dict(ckpt.head_state, strict=True)
        if ckpt.projector_state is not None:
            bundle.projector.load_state_dict(ckpt.projector_state, strict=True)
        if ckpt.optimizer_state is not None:
            optimizer.load_state_dict(ckpt.optimizer_state)
        if ckpt.sampler_state is not None:
            sampler.load_state_dict(ckpt.sampler_state)
        if ckpt.rng_state is not None:
            torch.set_rng_state(ckpt.rng_state["torch"])
            view_rng.bit_generator.state = ckpt.rng_state["view_rng"]
        start_iteration = ckpt.iteration

    def snapshot(iteration: int) -> Checkpoint:
        return Checkpoint(
            manifest=make_manifest(
                strategy=plan.strategy,
                iteration=iteration,
                seed=plan.seed,
                config_hash=run_hash,
                model_config=cfg,
                extra={"protocol": split.protocol, "split": split.name, "plan": plan.to_dict()},
            ),
            model_state={k: v.clone() for k, v in bundle.model.state_dict().items()},
            head_state={k: v.clone() for k, v in bundle.head.state_dict().items()},
            projector_state={k: v.clone() for k, v in bundle.projector.state_dict().items()},
            optimizer_state=optimizer.state_dict(),
            sampler_state=sampler.state_dict(),
            rng_state={
                "torch": torch.get_rng_state(),
                "view_rng": view_rng.bit_generator.state,
            },
        )

    log = TrainLog(
        os.path.join(out_dir, "train_log.csv"),
        meta={
            "config_hash": run_hash,
            "seed": plan.seed,
            "strategy": plan.strategy,
            "version": __version__,
        },
        append=start_iteration > 0,
    )
    bundle.model.train()
    bundle.head.train()
    bundle.projector.train()

    started = time.perf_counter()
    try:
        for iteration in range(start_iteration + 1, plan.iterations + 1):
            samples = sampler.next_batch()
            if plan.strategy == "V":
                batch = _collate_images(samples, cfg.image_size, cfg.torch_dtype)
                l_ce = train_step_v(batch, bundle.model, bundle.head, optimizer, plan.grad_clip)
                losses = {"l_ce": l_ce, "l_total": l_ce}
            elif plan.strategy == "IT":
                batch = _collate_images(samples, cfg.image_size, cfg.torch_dtype)
                class_emb = embed_prompt_set(prompt_set, bundle.model, bundle.tokenizer)
                l_ce = train_step_it(batch, bundle.model, class_emb, optimizer, plan.grad_clip)
                losses = {"l_ce": l_ce, "l_total": l_ce}
            else:
                batch = _collate_mcl(
                    samples, prompt_set, view_rng, plan, bundle.tokenizer,
                    cfg.image_size, cfg.torch_dtype,
                )
                class_emb = embed_prompt_set(prompt_set, bundle.model, bundle.tokenizer)
                losses = train_step_mcl(
                    batch, bundle.model, bundle.projector, class_emb, plan.weights,
                    optimizer,
                    ssl_temperature=plan.ssl_temperature,
                    grad_clip=plan.grad_clip,
                    ce_source=plan.mcl_ce_source,
                )
            log.append(iteration, losses, plan.lr, time.perf_counter() - started)

            if (
                plan.checkpoint_every
                and iteration % plan.checkpoint_every == 0
                and iteration < plan.iterations
            ):
                save_checkpoint(
                    snapshot(iteration),
                    os.path.join(out_dir, f"checkpoint_{iteration:06d}.pt"),
                )
    except NonFiniteLossError as err:
        with open(os.path.join(out_dir, "diagnostics.json"), "w", encoding="utf-8") as fh:
            json.dump(err.diagnostics, fh, indent=2)
        raise
    finally:
        log.close()
        if frozen_text:
            for p in bundle.model.text.parameters():
                p.requires_grad_(True)

    final = snapshot(plan.iterations)
    save_checkpoint(final, os.path.join(out_dir, "checkpoint_final.pt"))
    return final
