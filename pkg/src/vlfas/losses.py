"""Training objectives: cross-entropy (over head logits or cosine-similarity
logits), the two-view contrastive loss, the cross-modal view-consistency
penalty, and their weighted combination."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn.functional as F

from .prompts import ClassEmbeddings


@dataclass(frozen=True)
class LossWeights:
    """Nonnegative weights (alpha, beta, gamma) of the joint objective."""

    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 1.0

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.gamma < 0:
            raise ValueError("loss weights must be nonnegative")
        if self.alpha == 0 and self.beta == 0 and self.gamma == 0:
            raise ValueError("at least one loss weight must be positive")


def _checked_norm(v: torch.Tensor, name: str) -> torch.Tensor:
    norm = v.norm(dim=-1)
    if (norm == 0).any():
        raise ValueError(f"cosine similarity is undefined for zero-norm {name}")
    return norm


def cosine_sim(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    """dot(a, b) / (|a| |b|) over the last dimension; rejects zero vectors."""
    na = _checked_norm(a, "first argument")
    nb = _checked_norm(b, "second argument")
    return (a * b).sum(dim=-1) / (na * nb)


def similarity_logits(image_emb: torch.Tensor, class_emb: ClassEmbeddings) -> torch.Tensor:
    """Per-sample (cosine to real ensemble, cosine to spoof ensemble)."""
    s_real = cosine_sim(image_emb, class_emb.z_real)
    s_spoof = cosine_sim(image_emb, class_emb.z_spoof)
    return torch.stack([s_real, s_spoof], dim=-1)


def similarity_softmax(
    s_real: torch.Tensor | float,
    s_spoof: torch.Tensor | float,
    temperature: torch.Tensor | float,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Class probabilities from the two similarity logits at temperature tau.

    Probabilities sum to 1 and the argmax matches the larger raw similarity
    for any tau > 0.
    """
    if not torch.is_tensor(s_real):
        s_real = torch.tensor(float(s_real), dtype=torch.float64)
    s_spoof = torch.as_tensor(s_spoof, dtype=s_real.dtype)
    tau = torch.as_tensor(temperature, dtype=s_real.dtype)
    if (tau <= 0).any():
        raise ValueError("temperature must be positive")
    logits = torch.stack([s_real / tau, s_spoof / tau], dim=-1)
    probs = F.softmax(logits, dim=-1)
    return probs[..., 0], probs[..., 1]


def ce_loss(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """Mean negative log-likelihood of the labels under softmax of the logits."""
    if logits.ndim != 2 or logits.shape[-1] != 2:
        raise ValueError(f"expected logits of shape [B, 2], got {tuple(logits.shape)}")
    if logits.shape[0] == 0:
        raise ValueError("cross entropy over an empty batch")
    labels = torch.as_tensor(labels, dtype=torch.long)
    if ((labels != 0) & (labels != 1)).any():
        raise ValueError("labels must be 0 (real) or 1 (spoof)")
    return F.cross_entropy(logits, labels)


def simclr_loss(
    h1: torch.Tensor, h2: torch.Tensor, temperature: float = 0.5
) -> torch.Tensor:
    """Normalized-temperature cross entropy over the 2n projected views.

    Each view's positive is its counterpart from the other augmentation; the
    remaining 2n - 2 views in the batch are negatives regardless of class
    label. Mean over all 2n anchors.
    """
    if h1.ndim != 2 or h2.ndim != 2 or h1.shape != h2.shape:
        raise ValueError(
            f"expected two equally shaped view batches [n, d], got "
            f"{tuple(h1.shape)} and {tuple(h2.shape)}"
        )
    n = h1.shape[0]
    if n < 2:
        raise ValueError("contrastive loss needs a batch of at least 2 (no negatives otherwise)")
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if not torch.isfinite(h1).all() or not torch.isfinite(h2).all():
        raise ValueError("projected views contain non-finite values")

    z = F.normalize(torch.cat([h1, h2], dim=0), dim=1)
    sim = z @ z.T / temperature
    diag = torch.eye(2 * n, dtype=torch.bool, device=z.device)
    sim = sim.masked_fill(diag, float("-inf"))
    positives = torch.cat([torch.arange(n, 2 * n), torch.arange(0, n)])
    return F.cross_entropy(sim, positives.to(z.device))


def mse_consistency(
    x_v1: torch.Tensor, z_v1: torch.Tensor, x_v2: torch.Tensor, z_v2: torch.Tensor
) -> torch.Tensor:
    """Squared difference between the two image-text view similarities.

    For batched inputs the mean over the batch is returned; the value lies in
    [0, 4] and is symmetric under swapping the views.
    """
    s1 = cosine_sim(x_v1, z_v1)
    s2 = cosine_sim(x_v2, z_v2)
    return ((s1 - s2) ** 2).mean()


def joint_loss(
    l_ce: torch.Tensor | float,
    l_simclr: torch.Tensor | float,
    l_mse: torch.Tensor | float,
    weights: LossWeights,
) -> torch.Tensor | float:
    """alpha * l_ce + beta * l_simclr + gamma * l_mse."""
    for name, value in (("l_ce", l_ce), ("l_simclr", l_simclr), ("l_mse", l_mse)):
        v = float(value.detach() if torch.is_tensor(value) else value)
        if v != v or v in (float("inf"), float("-inf")):
            raise ValueError(f"component loss {name} is not finite: {v}")
    return weights.alpha * l_ce + weights.beta * l_simclr + weights.gamma * l_mse
