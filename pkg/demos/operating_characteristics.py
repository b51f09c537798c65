# operating_characteristics.py
# Monte Carlo checks of the procedure's error rates and power.
#
# Three small studies:
#   1. null calibration: with no valid candidates the per-candidate test
#      should flag about alpha of them (boundary margin, no correction);
#   2. screening power: with 10% valid candidates, power should climb as
#      the candidates' individual effects strengthen;
#   3. evaluation dilution: how many noise members can a combined marker
#      absorb before the held-out test stops passing it?
#
# Replicate counts are kept modest so the script runs in under a minute.
#
# Run with:  python3 demos/operating_characteristics.py

from surrank import (
    DgpConfig,
    TestConfig,
    run_evaluation_experiment,
    run_screening_experiment,
)

ALPHA = 0.05
N_SIM = 200

# -----------------------------
# 1. Null calibration
# -----------------------------
# Every candidate is noise, the margin is pinned to the boundary case, and
# no multiplicity correction is applied, so each candidate is a pure
# alpha-level test.  The false positive rate across replicates should sit
# near alpha.
null_cfg = DgpConfig(
    dgp="normal",
    scenario="none_valid",
    n1=50,
    n0=50,
    p_total=20,
    seed=7,
)
null_run = run_screening_experiment(
    null_cfg,
    test_config=TestConfig(alpha=ALPHA, power=0.90),
    method=None,
    n_sim=N_SIM,
    boundary_epsilon=True,
)
print("1. null calibration (no valid candidates, uncorrected)")
print(f"   mean false positive rate = {null_run.mean_fpr:.4f}  (alpha = {ALPHA})")
print()

# -----------------------------
# 2. Screening power vs. candidate strength
# -----------------------------
# Now 10% of candidates are valid.  Benjamini-Hochberg keeps the false
# discovery proportion controlled while power rises with the calibrated
# individual effect of the valid candidates.
print("2. screening power (10% valid, Benjamini-Hochberg)")
print("   target u    power     fdp")
for target in (0.6, 0.75, 0.9):
    cfg = DgpConfig(
        dgp="normal",
        scenario="ten_pct_valid",
        n1=50,
        n0=50,
        p_total=50,
        target_u_s=target,
        seed=100 + round(100 * target),
    )
    run = run_screening_experiment(
        cfg,
        test_config=TestConfig(alpha=ALPHA, power=0.90),
        method="bh",
        n_sim=N_SIM,
        boundary_epsilon=True,
    )
    print(f"   {target:8.2f}  {run.mean_power:7.3f}  {run.mean_fdp:7.3f}")
print()

# -----------------------------
# 3. Evaluation stage vs. contamination
# -----------------------------
# Build a 20-member equal-weight combined marker where a fraction rho of
# the members are pure noise, then test the combination on fresh data.
# An all-noise combination essentially never passes.  But an averaged
# combination is strikingly tolerant of dilution: even a few strong
# members keep the pooled ordering close to the response's, so the test
# keeps passing until nearly every member is noise.  The held-out test
# certifies the combination as a whole; keeping junk *out* of it is the
# screen's job, which is why stage one controls false discoveries.
print("3. evaluation pass rate vs. noise fraction (20-member marker)")
experiment = run_evaluation_experiment(
    n=50,
    valid_strength=0.9,
    set_size=20,
    rho_grid=(0.0, 0.5, 0.75, 0.9, 0.95, 1.0),
    n_sim=N_SIM,
    alpha=ALPHA,
    power=0.80,
    seed=3,
)
print("   noise fraction   pass rate")
for rho, fraction in zip(experiment.rho_grid, experiment.rejection_fraction(ALPHA)):
    print(f"   {rho:14.2f}  {fraction:10.3f}")
