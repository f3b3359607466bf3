"""A tour of the dual encoder: images and text meet in one embedding space.

Uses the miniature randomly initialized stack (2 blocks, 32-wide towers) so
everything runs in seconds on a laptop CPU. With published ViT-B/16 weights
you would call ``load_pretrained(path)`` instead and get meaningful
similarities out of the box.
"""

import numpy as np
import torch

from vlfas import (
    BpeTokenizer,
    ModelConfig,
    PromptSet,
    cosine_sim,
    embed_prompt_set,
    encode_image,
    encode_text,
    similarity_softmax,
)
from vlfas.models import DualEncoder

torch.manual_seed(0)

# The toy preset keeps the architecture identical in shape terms: patch
# projector, class token, pre-norm transformer blocks, and a linear map into
# the shared vision-language space.
cfg = ModelConfig.toy()
model = DualEncoder(cfg)
tokenizer = BpeTokenizer()  # byte-level fallback vocabulary (514 symbols)

print(f"image tower:  {cfg.vision_layers} blocks, width {cfg.vision_width}, "
      f"{cfg.num_patches} patches of {cfg.patch_size}x{cfg.patch_size}")
print(f"text tower:   {cfg.text_layers} blocks, width {cfg.text_width}, "
      f"vocab {cfg.vocab_size}, context {cfg.context_length}")
print(f"shared space: {cfg.embed_dim} dimensions\n")

# Encode one image. The class token summarizes the patch sequence; the
# embedding is its projection into the shared space.
rng = np.random.default_rng(7)
image = rng.uniform(-1.0, 1.0, size=(32, 32, 3)).astype(np.float32)
class_token, image_emb = encode_image(image, model)
print(f"class token {tuple(class_token.shape)} -> embedding {tuple(image_emb.shape)}")

# Encode one prompt. The output is read off at the end-sentinel position.
text_emb = encode_text("This is a real face", model, tokenizer)
print(f"text embedding {tuple(text_emb.shape)} (same space as the image)\n")

# The full catalog carries six descriptions per class; averaging their
# embeddings gives one ensemble prototype per class.
prompts = PromptSet.default()
for label, texts in (("real", prompts.real_prompts), ("spoof", prompts.spoof_prompts)):
    print(f"{label} prompts:")
    for t in texts:
        print(f"  - {t}")
ensemble = embed_prompt_set(prompts, model, tokenizer)
print(f"\nensemble shapes: per-prompt {tuple(ensemble.per_prompt_real.shape)}, "
      f"class prototype {tuple(ensemble.z_real.shape)}")

# Classification is cosine similarity against the two prototypes, softmaxed
# at the learnable temperature.
s_real = float(cosine_sim(image_emb, ensemble.z_real))
s_spoof = float(cosine_sim(image_emb, ensemble.z_spoof))
tau = float(model.temperature.detach())
p_real, p_spoof = similarity_softmax(s_real, s_spoof, tau)
print(f"\nsimilarities: real {s_real:+.4f}, spoof {s_spoof:+.4f} (tau = {tau:.4f})")
print(f"p(real) = {float(p_real):.4f}, p(spoof) = {float(p_spoof):.4f}")
print("\n(random weights, so these numbers carry no meaning yet; see demo 04)")
