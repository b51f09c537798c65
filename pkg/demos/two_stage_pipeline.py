# two_stage_pipeline.py
# Run the full two-stage procedure on synthetic data with known ground truth.
#
# Stage 1 (screening) tests every candidate on one split of the subjects,
# adjusts the p-values for multiplicity, and keeps the candidates that
# pass.  Stage 2 (evaluation) combines the kept candidates into a single
# score with weights learned on the screening split, then tests that
# combined score once on the held-out split.
#
# Run with:  python3 demos/two_stage_pipeline.py

import numpy as np

from surrank import DgpConfig, TestConfig, generate, run_pipeline
from surrank.dataio import format_screening_table

# -----------------------------
# Synthetic data with labels
# -----------------------------
# 100 candidates, the first 10 of which genuinely track the response
# (individual effect calibrated to 0.9); the other 90 are correlated
# noise.  The generator records which is which, so we can score the
# screen afterwards.
cfg = DgpConfig(
    dgp="normal",
    scenario="ten_pct_valid",
    n1=150,
    n0=150,
    p_total=100,
    target_u_s=0.9,
    sigma_corr=0.3,
    seed=42,
)
sim = generate(cfg)
data = sim.dataset
truth = dict(zip(data.names, sim.valid))

print(f"dataset: {data.n_a} treated / {data.n_b} control, "
      f"{data.p} candidates ({sum(sim.valid)} genuinely valid)")
print()

# -----------------------------
# Both stages in one call
# -----------------------------
# The pipeline splits subjects 75/25, screens on the large split with
# Benjamini-Hochberg control, and evaluates the combined marker on the
# small one.  Reusing subjects from the screen would bias the final test;
# the split is what keeps stage 2 honest.
result = run_pipeline(
    data,
    ratio=0.75,
    seed=0,
    config=TestConfig(alpha=0.05, power=0.90),
    method="bh",
)

report = result.screening
print(f"screening split: {report.n_a} treated / {report.n_b} control")
print(f"response effect u = {report.u_response:.4f}, "
      f"adaptive margin = {report.epsilon_used:.4f}")
print(f"selected {len(report.selected)} of {data.p} candidates")
print()

# How did the screen do against the ground truth?
selected = set(report.selected)
true_hits = sum(1 for name in selected if truth[name])
false_hits = len(selected) - true_hits
missed = sum(sim.valid) - true_hits
print(f"  true positives  {true_hits}")
print(f"  false positives {false_hits}")
print(f"  missed valid    {missed}")
print()

# The first few rows of the screening table, strongest candidates first.
print(format_screening_table(report, digits=3, limit=8))
print()

# -----------------------------
# The combined marker
# -----------------------------
# Each selected candidate is standardized, then averaged with precision
# weights.  The weights are learned on the screening split; the
# standardization moments come from the evaluation split itself, which
# uses no response information and so costs nothing.
combined = result.combined
print("combined marker weights (top 5 by weight):")
order = np.argsort(combined.weights)[::-1][:5]
for k in order:
    print(f"  {combined.members[k]:>12s}  weight {combined.weights[k]:.4f}")
print()

# -----------------------------
# Held-out verdict
# -----------------------------
evaluation = result.evaluation
print(f"evaluation split: response u = {evaluation.u_response:.4f}, "
      f"margin = {evaluation.epsilon:.4f}")
print(f"combined marker u = {evaluation.u_candidate:.4f}")
print(f"delta = {evaluation.delta:+.4f}, sigma = {evaluation.sigma:.4f}")
print(f"p = {evaluation.p_value:.4g}  ->  "
      + ("combined marker passes" if evaluation.reject else "no call"))
