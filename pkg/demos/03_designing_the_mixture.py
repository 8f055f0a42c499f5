"""
Picking the mixture variance before launch
==========================================

The sequential test needs one tuning knob: the variance tau^2 of the normal
mixing distribution over effect sizes.  This script walks the pre-launch
design workflow for a product team that believes effects near +-0.5 (in
per-observation standard deviations) and would have run a fixed-horizon
test at alpha = 0.05 with 80% power.
"""

import math

from avstats.design import (
    PriorSpec,
    TruncationSet,
    asymptotic_power_constants,
    expected_runtime_leading,
    fixed_horizon_sample_size,
    msprt_truncation_horizon,
    normal_unit_variance_family,
    optimal_mixture_general,
    optimal_tau_normal,
)

ALPHA, BETA = 0.05, 0.2
MDE = 0.5            # smallest effect worth detecting
PRIOR_SD = 0.5       # belief about plausible true effects

# Step 1: what would the classical test have cost?
n_fixed = fixed_horizon_sample_size(mde=MDE, alpha=ALPHA, beta=BETA, variance_per_obs=1.0)
print(f"fixed-horizon test: n = {n_fixed} per the usual z formula")

# Step 2: give the sequential test a truncation horizon with the same
# asymptotic power against the same alternative.  At everyday alphas the
# scaling factor (C_S/C_f)^2 is essentially 1: always-valid monitoring costs
# almost no extra truncation room, while typically stopping much earlier.
horizon = msprt_truncation_horizon(n_fixed=n_fixed, alpha=ALPHA)
print(f"matched-power truncation horizon: {horizon}")

# Step 3: the mixture variance that maximizes power against effects drawn
# from the prior, given that truncation set.
tau_sq = optimal_tau_normal(PriorSpec(variance=PRIOR_SD**2), TruncationSet(ALPHA, horizon))
print(f"optimal tau^2 = {tau_sq:.6f}")

# Being off by a decade barely matters; the scenario 'tau-robustness' in the
# simulation lab measures this on real runs.
for wrong_horizon in (horizon // 10, horizon * 10):
    t = optimal_tau_normal(PriorSpec(variance=PRIOR_SD**2), TruncationSet(ALPHA, wrong_horizon))
    print(f"  horizon misjudged to {wrong_horizon:>5} -> tau^2 = {t:.6f}")

# The same optimization runs for an arbitrary discrete prior when the team's
# beliefs are lumpier than a normal, here "probably +0.5, maybe nothing".
atoms = [(0.5, 0.9), (0.0, 0.1)]
tau_sq_lumpy = optimal_mixture_general(
    prior=atoms,
    family=normal_unit_variance_family(),
    mixture_density=lambda gamma, theta: math.exp(-theta * theta / (2 * gamma))
    / math.sqrt(2 * math.pi * gamma),
    trunc=TruncationSet(ALPHA, horizon),
    gamma_grid=[g / 100 for g in range(2, 400, 2)],
)
print(f"two-point prior        -> tau^2 = {tau_sq_lumpy:.6f}")

# Step 4: how long will it actually run?  Against a real effect theta the
# expected stopping time grows like this leading term, compared with the
# fixed n the classical test commits to up front no matter what.
print(f"\n{'theta':>7} {'E[stop] leading term':>21} {'fixed n':>8}")
for theta in (0.3, 0.5, 0.8):
    lead = expected_runtime_leading(theta=theta, alpha=ALPHA)
    nf = fixed_horizon_sample_size(mde=theta, alpha=ALPHA, beta=BETA, variance_per_obs=1.0)
    print(f"{theta:>7.2f} {lead:>21.1f} {nf:>8}")

# The constants behind step 2: the sequential design needs (C_S/C_f)^2 times
# the fixed-horizon observations for the same asymptotic power.
c_f, c_s = asymptotic_power_constants(ALPHA)
print(f"\npower constants at alpha={ALPHA}: C_f = {c_f:.4f}, C_S = {c_s:.4f},"
      f" ratio (C_S/C_f)^2 = {(c_s / c_f) ** 2:.3f}")
