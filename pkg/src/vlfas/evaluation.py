"""Target-domain scoring and the biometric error metrics.

Scores are p_real (probability of the bonafide class), so the real class is
the positive class throughout: FAR is the fraction of spoof samples accepted
as real, FRR the fraction of real samples rejected, TPR the fraction of real
samples accepted, FPR = FAR.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass

import numpy as np
import torch

from . import __version__
from .data.datasets import DomainDataset, global_id
from .data.images import load_image01, normalize_batch
from .labels import REAL_INDEX, SPOOF_INDEX, label_to_index
from .losses import similarity_softmax
from .prompts import PromptSet, embed_prompt_set

logger = logging.getLogger(__name__)


# --- score sets ---------------------------------------------------------------

@dataclass(frozen=True)
class ScoreSet:
    """Per-sample (id, p_real score, label) triples for one evaluation."""

    sample_ids: tuple[str, ...]
    scores: np.ndarray
    labels: np.ndarray
    skipped: tuple[str, ...] = ()

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)
        if not (len(self.sample_ids) == scores.shape[0] == labels.shape[0]):
            raise ValueError("sample_ids, scores, and labels must have equal lengths")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValueError("sample ids must be unique")
        if scores.size and not np.isfinite(scores).all():
            raise ValueError("scores must be finite")
        if scores.size and (scores.min() < 0.0 or scores.max() > 1.0):
            raise ValueError("scores are p_real probabilities and must lie in [0, 1]")
        if labels.size and not np.isin(labels, (REAL_INDEX, SPOOF_INDEX)).all():
            raise ValueError("labels must be 0 (real) or 1 (spoof)")

    def __len__(self) -> int:
        return len(self.sample_ids)

    @property
    def real_scores(self) -> np.ndarray:
        return self.scores[self.labels == REAL_INDEX]

    @property
    def spoof_scores(self) -> np.ndarray:
        return self.scores[self.labels == SPOOF_INDEX]

    def require_both_classes(self) -> None:
        if self.real_scores.size == 0 or self.spoof_scores.size == 0:
            raise ValueError("metric needs both classes present in the score set")

    def save(self, path: str, meta: dict | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            if meta:
                fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
            fh.write("sample_id,score,label\n")
            for sid, score, label in zip(self.sample_ids, self.scores, self.labels):
                fh.write(f"{sid},{score:.17g},{int(label)}\n")

    @classmethod
    def load(cls, path: str) -> "ScoreSet":
        ids, scores, labels = [], [], []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or line.startswith("sample_id"):
                    continue
                sid, score, label = line.rsplit(",", 2)
                ids.append(sid)
                scores.append(float(score))
                labels.append(int(label))
        return cls(tuple(ids), np.asarray(scores), np.asarray(labels))


def infer_scores(
    bundle,
    strategy: str,
    dataset: DomainDataset,
    *,
    prompt_set: PromptSet | None = None,
    batch_size: int = 64,
) -> ScoreSet:
    """Score every sample of a dataset with the strategy's inference path.

    Strategy ``V`` softmaxes the MLP head's logits and never touches the text
    tower; ``IT``/``MCL`` use the similarity softmax against prompt-ensemble
    embeddings computed once up front. Unreadable images are skipped with a
    logged warning and reported in ``skipped``.
    """
    from .training import normalize_strategy  # local import to avoid a cycle

    strategy = normalize_strategy(strategy)
    model = bundle.model
    cfg = bundle.config
    model.eval()
    bundle.head.eval()

    class_emb = None
    if strategy in ("IT", "MCL"):
        prompt_set = prompt_set or PromptSet.default()
        with torch.no_grad():
            class_emb = embed_prompt_set(prompt_set, model, bundle.tokenizer)

    ids: list[str] = []
    scores: list[float] = []
    labels: list[int] = []
    skipped: list[str] = []

    pending: list[tuple[str, int, np.ndarray]] = []

    def flush() -> None:
        if not pending:
            return
        images = normalize_batch([img for _sid, _lab, img in pending], cfg.torch_dtype)
        with torch.no_grad():
            class_state, image_emb = model.encode_images(images)
            if strategy == "V":
                p_real = torch.softmax(bundle.head(class_state), dim=-1)[:, REAL_INDEX]
            else:
                s_real = _cos(image_emb, class_emb.z_real)
                s_spoof = _cos(image_emb, class_emb.z_spoof)
                p_real, _ = similarity_softmax(s_real, s_spoof, model.temperature)
        for (sid, label, _img), p in zip(pending, p_real.tolist()):
            ids.append(sid)
            labels.append(label)
            scores.append(float(p))
        pending.clear()

    for sample in dataset.samples:
        sid = global_id(dataset.name, sample)
        try:
            img01 = load_image01(sample.path, cfg.image_size)
        except (FileNotFoundError, OSError) as exc:
            logger.warning("skipping unreadable sample %s: %s", sid, exc)
            skipped.append(sid)
            continue
        pending.append((sid, label_to_index(sample.label), img01))
        if len(pending) >= batch_size:
            flush()
    flush()

    if skipped:
        logger.warning("excluded %d unreadable sample(s) from scoring", len(skipped))
    return ScoreSet(tuple(ids), np.asarray(scores), np.asarray(labels), tuple(skipped))


def _cos(x: torch.Tensor, z: torch.Tensor) -> torch.Tensor:
    return (x * z).sum(dim=-1) / (x.norm(dim=-1) * z.norm())


def score_image(
    bundle,
    strategy: str,
    img01: np.ndarray,
    *,
    prompt_set: PromptSet | None = None,
) -> float:
    """p_real for one [0, 1] H x W x 3 image under the strategy's scoring path."""
    from .training import normalize_strategy

    strategy = normalize_strategy(strategy)
    model = bundle.model
    model.eval()
    bundle.head.eval()
    images = normalize_batch([img01], bundle.config.torch_dtype)
    with torch.no_grad():
        class_state, image_emb = model.encode_images(images)
        if strategy == "V":
            p_real = torch.softmax(bundle.head(class_state), dim=-1)[0, REAL_INDEX]
        else:
            prompt_set = prompt_set or PromptSet.default()
            class_emb = embed_prompt_set(prompt_set, model, bundle.tokenizer)
            s_real = _cos(image_emb, class_emb.z_real)[0]
            s_spoof = _cos(image_emb, class_emb.z_spoof)[0]
            p_real, _ = similarity_softmax(s_real, s_spoof, model.temperature)
    return float(p_real)


# --- metrics -------------------------------------------------------------------

def roc_thresholds(scores: np.ndarray) -> np.ndarray:
    """Midpoints between consecutive distinct scores plus infinite sentinels."""
    unique = np.unique(np.asarray(scores, dtype=np.float64))
    mids = (unique[:-1] + unique[1:]) / 2.0
    return np.concatenate([[-np.inf], mids, [np.inf]])


def far_frr(score_set: ScoreSet, threshold: float) -> tuple[float, float]:
    """Error rates at a threshold; a sample is accepted as real when
    score >= threshold."""
    score_set.require_both_classes()
    far = float(np.mean(score_set.spoof_scores >= threshold))
    frr = float(np.mean(score_set.real_scores < threshold))
    return far, frr


def eer_threshold(score_set: ScoreSet) -> float:
    """Threshold minimizing |FAR - FRR| over the midpoint sweep."""
    score_set.require_both_classes()
    thresholds = roc_thresholds(score_set.scores)
    gaps = [abs(far - frr) for far, frr in (far_frr(score_set, t) for t in thresholds)]
    return float(thresholds[int(np.argmin(gaps))])


def compute_hter(
    score_set: ScoreSet, threshold: float | str = 0.5
) -> tuple[float, float]:
    """(FAR + FRR) / 2 at a fixed threshold, or at the EER threshold when
    ``threshold='eer'``. Returns ``(hter, threshold_used)``."""
    if isinstance(threshold, str):
        if threshold != "eer":
            raise ValueError(f"unknown threshold policy {threshold!r}; use a float or 'eer'")
        threshold = eer_threshold(score_set)
    far, frr = far_frr(score_set, float(threshold))
    return (far + frr) / 2.0, float(threshold)


def compute_auc(score_set: ScoreSet) -> float:
    """Probability that a random real sample outscores a random spoof sample,
    ties counted one half (rank formulation of the Mann-Whitney statistic)."""
    score_set.require_both_classes()
    scores = score_set.scores
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j < len(scores) and sorted_scores[j] == sorted_scores[i]:
            j += 1
        ranks[order[i:j]] = (i + j + 1) / 2.0  # average 1-based rank across the tie
        i = j
    n_real = int(np.sum(score_set.labels == REAL_INDEX))
    n_spoof = len(scores) - n_real
    rank_sum = float(ranks[score_set.labels == REAL_INDEX].sum())
    u = rank_sum - n_real * (n_real + 1) / 2.0
    return u / (n_real * n_spoof)


@dataclass(frozen=True)
class TprAtFpr:
    value: float
    quantization_limited: bool


def compute_tpr_at_fpr(score_set: ScoreSet, fpr_target: float = 0.01) -> TprAtFpr:
    """Maximum TPR over thresholds whose FPR stays at or below the target
    (conservative step interpolation).

    With fewer spoof samples than 1/fpr_target the achievable FPR grid cannot
    resolve the target; the result is flagged as quantization-limited and
    still returned.
    """
    score_set.require_both_classes()
    if not 0 < fpr_target < 1:
        raise ValueError("fpr_target must lie strictly between 0 and 1")
    real, spoof = score_set.real_scores, score_set.spoof_scores
    best = 0.0
    for threshold in roc_thresholds(score_set.scores):
        fpr = float(np.mean(spoof >= threshold))
        if fpr <= fpr_target:
            best = max(best, float(np.mean(real >= threshold)))
    limited = spoof.size < 1.0 / fpr_target
    if limited:
        logger.warning(
            "TPR@FPR=%.2g is quantization-limited: only %d spoof samples", fpr_target, spoof.size
        )
    return TprAtFpr(best, limited)


# --- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    """One evaluation run's metrics plus the provenance needed to trace it."""

    protocol: str
    split_name: str
    seed: int
    strategy: str
    hter: float
    auc: float
    tpr_at_fpr: float
    fpr_target: float
    threshold: float
    threshold_policy: str
    n_real: int
    n_spoof: int
    tpr_quantization_limited: bool = False
    config_hash: str = ""
    version: str = __version__

    def __post_init__(self):
        checks = (("hter", self.hter), ("auc", self.auc), ("tpr_at_fpr", self.tpr_at_fpr))
        for name, value in checks:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} out of range [0, 1]: {value}")

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, d: dict) -> "MetricReport":
        return cls(**d)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path: str) -> "MetricReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def evaluate_scores(
    score_set: ScoreSet,
    *,
    protocol: str,
    split_name: str,
    seed: int,
    strategy: str,
    threshold_policy: str = "fixed",
    fixed_threshold: float = 0.5,
    fpr_target: float = 0.01,
    config_hash: str = "",
) -> MetricReport:
    """All three metrics for one score set under the chosen threshold policy."""
    if threshold_policy not in ("fixed", "eer"):
        raise ValueError("threshold_policy must be 'fixed' or 'eer'")
    hter, threshold = compute_hter(
        score_set, "eer" if threshold_policy == "eer" else fixed_threshold
    )
    auc = compute_auc(score_set)
    tpr = compute_tpr_at_fpr(score_set, fpr_target)
    return MetricReport(
        protocol=protocol,
        split_name=split_name,
        seed=seed,
        strategy=strategy,
        hter=hter,
        auc=auc,
        tpr_at_fpr=tpr.value,
        fpr_target=fpr_target,
        threshold=threshold,
        threshold_policy=threshold_policy,
        n_real=int(score_set.real_scores.size),
        n_spoof=int(score_set.spoof_scores.size),
        tpr_quantization_limited=tpr.quantization_limited,
        config_hash=config_hash,
    )


@dataclass(frozen=True)
class AggregateReport:
    """Mean and sample standard deviation of each metric over seeds."""

    protocol: str
    split_name: str
    strategy: str
    n_seeds: int
    seeds: tuple[int, ...]
    hter_mean: float
    hter_std: float
    auc_mean: float
    auc_std: float
    tpr_mean: float
    tpr_std: float

    def to_dict(self) -> dict:
        return dict(self.__dict__) | {"seeds": list(self.seeds)}

    def save(self, path: str, meta: dict | None = None) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict() | (meta or {}), fh, indent=2)


def aggregate_seeds(reports: list[MetricReport]) -> AggregateReport:
    """Combine per-seed reports of one protocol scenario."""
    if len(reports) < 2:
        raise ValueError("aggregation needs at least 2 per-seed reports")
    keys = {(r.protocol, r.split_name, r.strategy) for r in reports}
    if len(keys) != 1:
        raise ValueError(f"cannot aggregate mixed protocol scenarios: {sorted(keys)}")
    protocol, split_name, strategy = keys.pop()

    def stats(values: list[float]) -> tuple[float, float]:
        arr = np.asarray(values, dtype=np.float64)
        if np.all(arr == arr[0]):
            return float(arr[0]), 0.0
        return float(arr.mean()), float(arr.std(ddof=1))

    hter_mean, hter_std = stats([r.hter for r in reports])
    auc_mean, auc_std = stats([r.auc for r in reports])
    tpr_mean, tpr_std = stats([r.tpr_at_fpr for r in reports])
    return AggregateReport(
        protocol=protocol,
        split_name=split_name,
        strategy=strategy,
        n_seeds=len(reports),
        seeds=tuple(r.seed for r in reports),
        hter_mean=hter_mean,
        hter_std=hter_std,
        auc_mean=auc_mean,
        auc_std=auc_std,
        tpr_mean=tpr_mean,
        tpr_std=tpr_std,
    )


def summary_table(aggregates: list[AggregateReport]) -> str:
    """Human-readable table (percent scale, std in brackets), one scenario per row."""
    header = f"{'Scenario':<18} {'Strategy':<8} {'HTER %':<16} {'AUC %':<16} {'TPR@FPR=1% %':<16}"
    lines = [header, "-" * len(header)]
    for agg in aggregates:
        lines.append(
            f"{agg.split_name:<18} {agg.strategy:<8} "
            f"{100 * agg.hter_mean:>6.2f} ({100 * agg.hter_std:.2f})   "
            f"{100 * agg.auc_mean:>6.2f} ({100 * agg.auc_std:.2f})   "
            f"{100 * agg.tpr_mean:>6.2f} ({100 * agg.tpr_std:.2f})"
        )
    return "\n".join(lines)


def save_plots(score_set: ScoreSet, prefix: str) -> list[str]:
    """ROC curve and score histogram written as PNG files."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    thresholds = roc_thresholds(score_set.scores)
    fprs, tprs = [], []
    for t in thresholds:
        fprs.append(float(np.mean(score_set.spoof_scores >= t)))
        tprs.append(float(np.mean(score_set.real_scores >= t)))

    paths = []
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.plot(sorted(fprs), sorted(tprs), marker=".", lw=1)
    ax.plot([0, 1], [0, 1], ls="--", c="gray", lw=0.8)
    ax.set_xlabel("FPR"), ax.set_ylabel("TPR"), ax.set_title("ROC")
    roc_path = f"{prefix}_roc.png"
    fig.savefig(roc_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(roc_path)

    fig, ax = plt.subplots(figsize=(6, 4))
    bins = np.linspace(0, 1, 31)
    ax.hist(score_set.real_scores, bins=bins, alpha=0.6, label="real")
    ax.hist(score_set.spoof_scores, bins=bins, alpha=0.6, label="spoof")
    ax.set_xlabel("p_real"), ax.set_ylabel("count"), ax.legend()
    hist_path = f"{prefix}_hist.png"
    fig.savefig(hist_path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    paths.append(hist_path)
    return paths
