"""Biometric error metrics and multi-seed significance testing.

Scores are p_real, so the bonafide class is the positive class: FAR counts
spoof samples accepted as real, FRR counts real samples rejected.
"""

import numpy as np

from vlfas import ScoreSet, aggregate_seeds, compute_auc, compute_hter, compute_tpr_at_fpr, paired_ttest
from vlfas.evaluation import MetricReport, eer_threshold, far_frr

rng = np.random.default_rng(0)

# A synthetic score set: well separated but overlapping tails.
n = 200
real = np.clip(rng.normal(0.75, 0.15, size=n), 0, 1)
spoof = np.clip(rng.normal(0.30, 0.15, size=n), 0, 1)
scores = ScoreSet(
    tuple(f"r{i}" for i in range(n)) + tuple(f"s{i}" for i in range(n)),
    np.concatenate([real, spoof]),
    np.array([0] * n + [1] * n),
)

far, frr = far_frr(scores, 0.5)
hter_fixed, _ = compute_hter(scores, 0.5)
print(f"at threshold 0.5:  FAR {far:.3f}  FRR {frr:.3f}  HTER {hter_fixed:.3f}")

# The fixed-0.5 policy is the default; an EER-derived threshold balances the
# two error rates instead. Which policy a published number used is often the
# biggest reproduction ambiguity, so both are first-class here.
thr = eer_threshold(scores)
hter_eer, _ = compute_hter(scores, "eer")
far, frr = far_frr(scores, thr)
print(f"at EER threshold {thr:.3f}:  FAR {far:.3f}  FRR {frr:.3f}  HTER {hter_eer:.3f}")

print(f"AUC {compute_auc(scores):.4f} "
      f"(probability a random real sample outscores a random spoof)")
tpr = compute_tpr_at_fpr(scores, 0.01)
print(f"TPR at FPR<=1%: {tpr.value:.3f} (quantization-limited: {tpr.quantization_limited})")

# --- aggregation over seeds --------------------------------------------------------
reports = []
for seed in range(5):
    jitter = rng.normal(0, 0.01)
    reports.append(MetricReport(
        protocol="1", split_name="OCI -> M", seed=seed, strategy="MCL",
        hter=max(0.0, hter_fixed + jitter), auc=compute_auc(scores),
        tpr_at_fpr=tpr.value, fpr_target=0.01, threshold=0.5,
        threshold_policy="fixed", n_real=n, n_spoof=n,
    ))
agg = aggregate_seeds(reports)
print(f"\n5-seed aggregate: HTER {100 * agg.hter_mean:.2f}% "
      f"(std {100 * agg.hter_std:.2f})")

# --- one-sided paired significance test ----------------------------------------------
# Pairing is by seed; the alternative hypothesis says our method's HTER is
# lower than the baseline's.
ours = [r.hter for r in reports]
baseline = [h + rng.uniform(0.02, 0.05) for h in ours]
result = paired_ttest(ours, baseline, alternative="less")
print(f"\npaired t-test (ours vs baseline HTER over 5 seeds):")
print(f"  t = {result.statistic:.3f}, one-sided p = {result.p_value:.4g}, "
      f"reject at 0.05: {result.reject}")

close = [h + rng.normal(0, 0.002) for h in ours]
result = paired_ttest(ours, close, alternative="less")
print(f"against a statistically indistinguishable baseline: p = {result.p_value:.3f}, "
      f"reject: {result.reject}")

try:
    paired_ttest(ours, ours, alternative="less")
except ValueError as err:
    print(f"degenerate pairing is rejected: {err}")
