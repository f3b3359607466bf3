"""Cross-domain face anti-spoofing with a language-image dual encoder.

Three finetuning strategies over a shared encoder stack (vision-only,
image-text similarity with prompt ensembles, multimodal contrastive
learning), leave-one-domain-out and single-source evaluation protocols,
and biometric error metrics with multi-seed significance testing.
"""

__version__ = "0.1.0"

from .config import ModelConfig, config_hash
from .labels import REAL, REAL_INDEX, SPOOF, SPOOF_INDEX
from .losses import (
    LossWeights,
    ce_loss,
    cosine_sim,
    joint_loss,
    mse_consistency,
    similarity_logits,
    similarity_softmax,
    simclr_loss,
)
from .models import (
    DualEncoder,
    MlpHead,
    ProjectorH,
    TextTransformer,
    VisionTransformer,
    encode_image,
    encode_text,
    mlp_forward,
    project_h,
)
from .prompts import ClassEmbeddings, PromptSet, embed_prompt_set, sample_prompt_views
from .tokenizer import BpeTokenizer
from .checkpoints import (
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    load_pretrained,
    save_checkpoint,
)
from .training import (
    ModelBundle,
    NonFiniteLossError,
    TrainPlan,
    build_bundle,
    bundle_from_checkpoint,
    run_training,
    seed_everything,
    train_step_it,
    train_step_mcl,
    train_step_v,
)
from .evaluation import (
    AggregateReport,
    MetricReport,
    ScoreSet,
    aggregate_seeds,
    compute_auc,
    compute_hter,
    compute_tpr_at_fpr,
    evaluate_scores,
    infer_scores,
    score_image,
    summary_table,
)
from .stats import TTestResult, betainc, paired_ttest, t_cdf
from .runconfig import ConfigError, RunConfig

__all__ = [
    "AggregateReport",
    "BpeTokenizer",
    "Checkpoint",
    "CheckpointError",
    "ClassEmbeddings",
    "ConfigError",
    "DualEncoder",
    "LossWeights",
    "MetricReport",
    "MlpHead",
    "ModelBundle",
    "ModelConfig",
    "NonFiniteLossError",
    "ProjectorH",
    "PromptSet",
    "REAL",
    "REAL_INDEX",
    "RunConfig",
    "SPOOF",
    "SPOOF_INDEX",
    "ScoreSet",
    "TTestResult",
    "TextTransformer",
    "TrainPlan",
    "VisionTransformer",
    "aggregate_seeds",
    "betainc",
    "build_bundle",
    "bundle_from_checkpoint",
    "ce_loss",
    "compute_auc",
    "compute_hter",
    "compute_tpr_at_fpr",
    "config_hash",
    "cosine_sim",
    "embed_prompt_set",
    "encode_image",
    "encode_text",
    "evaluate_scores",
    "infer_scores",
    "joint_loss",
    "load_checkpoint",
    "load_pretrained",
    "mlp_forward",
    "mse_consistency",
    "paired_ttest",
    "project_h",
    "run_training",
    "sample_prompt_views",
    "save_checkpoint",
    "score_image",
    "seed_everything",
    "similarity_logits",
    "similarity_softmax",
    "simclr_loss",
    "summary_table",
    "t_cdf",
    "train_step_it",
    "train_step_mcl",
    "train_step_v",
]
