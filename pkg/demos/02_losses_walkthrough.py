"""The training objectives, verified against tiny hand-checkable cases.

Three losses drive the multimodal contrastive strategy:
  * cross entropy over temperature-scaled similarity logits,
  * the two-view contrastive loss on projected image views,
  * a consistency penalty tying the two image-text view similarities.
"""

import math

import torch

from vlfas import LossWeights, ce_loss, cosine_sim, joint_loss, mse_consistency, simclr_loss

# --- cross entropy -------------------------------------------------------------
# Uniform logits give ln 2 regardless of the label.
logits = torch.zeros(1, 2, dtype=torch.float64)
print(f"CE at uniform logits: {float(ce_loss(logits, torch.tensor([0]))):.6f} "
      f"(ln 2 = {math.log(2):.6f})")

# --- two-view contrastive loss ---------------------------------------------------
# Four mutually orthogonal unit projections: every anchor sees one positive and
# two negatives, all at similarity zero, so the loss is exactly log 3.
h1 = torch.tensor([[1.0, 0, 0, 0], [0, 1.0, 0, 0]], dtype=torch.float64)
h2 = torch.tensor([[0, 0, 1.0, 0], [0, 0, 0, 1.0]], dtype=torch.float64)
loss = float(simclr_loss(h1, h2, temperature=0.5))
print(f"contrastive loss, orthogonal views: {loss:.6f} (log 3 = {math.log(3):.6f})")

# Perfect positives with orthogonal negatives drive the loss toward zero as the
# temperature shrinks.
for temp in (0.5, 0.1, 0.01):
    value = float(simclr_loss(h1, h1.clone(), temperature=temp))
    print(f"  identical views at temperature {temp:>4}: {value:.6f}")

# --- view-consistency penalty ----------------------------------------------------
# Cosine pairs engineered to 0.9 and 0.6 give (0.9 - 0.6)^2 = 0.09.
def unit_with_cosine(c):
    return torch.tensor([c, math.sqrt(1 - c * c)], dtype=torch.float64)

e1 = torch.tensor([1.0, 0.0], dtype=torch.float64)
penalty = float(mse_consistency(unit_with_cosine(0.9), e1, unit_with_cosine(0.6), e1))
print(f"consistency penalty for similarities 0.9 vs 0.6: {penalty:.6f}")

# --- the joint objective -----------------------------------------------------------
# Weighted sum; (1, 1, 1) is the published default, and zeroing the latter two
# weights reduces the objective to plain cross entropy.
components = (0.5, 1.0, 0.25)
print(f"joint at (1,1,1): {joint_loss(*components, LossWeights(1, 1, 1)):.4f}")
print(f"joint at (1,0,0): {joint_loss(*components, LossWeights(1, 0, 0)):.4f} "
      f"(= the CE component)")
print(f"joint at (1,2,2): {joint_loss(*components, LossWeights(1, 2, 2)):.4f}")

# cosine similarity guards against degenerate inputs
try:
    cosine_sim(torch.zeros(4), torch.ones(4))
except ValueError as err:
    print(f"\nzero vectors are rejected: {err}")
