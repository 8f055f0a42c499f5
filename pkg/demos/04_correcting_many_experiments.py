"""
A portfolio of experiments: false discovery and false coverage control
======================================================================

A platform rarely runs one experiment.  Here twelve run side by side, nine
of them A/A by construction, and we decide which to ship using always-valid
p-values fed into step-up multiple-testing corrections, then widen the
winners' confidence intervals so that the act of selecting them does not
break coverage.
"""

import numpy as np

from avstats.engine import MixtureSpec, av_ci_interval, log_mixture_lr_normal_path, p_value_path
from avstats.multitest import bh_general, bh_independent, bonferroni, fcr_adjusted_levels, qvalues

rng = np.random.default_rng(11)
HORIZON = 4000
ALPHA = 0.05
MIXTURE = MixtureSpec(tau_sq=0.05)

# true effects: three real winners buried among nine nulls
effects = [0.0] * 9 + [0.06, 0.08, 0.10]
rng.shuffle(effects)

names, p_finals, estimates, variances = [], [], [], []
for i, theta in enumerate(effects):
    draws = rng.normal(theta, 1.0, size=HORIZON)
    k = np.arange(1, HORIZON + 1)
    means = np.cumsum(draws) / k
    ll = log_mixture_lr_normal_path(means, 1.0 / k, MIXTURE)
    p_path = p_value_path(ll)
    names.append(f"exp-{i:02d}")
    p_finals.append(float(p_path[-1]))          # still valid: it is a running min
    estimates.append(float(means[-1]))
    variances.append(1.0 / HORIZON)

# Three corrections, ordered from most to least conservative on these inputs.
bonf = bonferroni(p_finals, ALPHA)
bh_g = bh_general(p_finals, ALPHA)      # valid under arbitrary dependence
bh_i = bh_independent(p_finals, ALPHA)  # the classical step-up
q = qvalues(p_finals, "bh-independent")

print(f"{'experiment':>10} {'truth':>6} {'p':>9} {'q':>7}  rejected by")
for i in range(len(names)):
    procs = [
        label
        for label, r in (("bonf", bonf), ("bh-g", bh_g), ("bh-i", bh_i))
        if i in r.indices
    ]
    truth = "null" if effects[i] == 0.0 else f"+{effects[i]:.2f}"
    print(f"{names[i]:>10} {truth:>6} {p_finals[i]:>9.2e} {q[i]:>7.3f}  {', '.join(procs) or '-'}")

print(f"\nbonferroni rejects {len(bonf.indices)}, bh-general {len(bh_g.indices)},"
      f" bh-independent {len(bh_i.indices)} of {bh_i.m}")
print("q <= alpha reproduces the step-up rejection set exactly:",
      frozenset(i for i, qi in enumerate(q) if qi <= ALPHA) == bh_i.indices)

# Reporting intervals only for the selected experiments is itself a selection
# bias.  The false-coverage-rate adjustment bumps every selected interval to
# a higher confidence level (and nudges the unselected ones too).
adj = fcr_adjusted_levels(p_finals, ALPHA, extra_selected=())
print(f"\nFCR adjustment: selected get level {adj.selected_level:.4f},"
      f" unselected {adj.unselected_level:.4f}")
for i in sorted(adj.selected):
    naive = av_ci_interval(estimates[i], variances[i], MIXTURE, alpha=ALPHA)
    wide = av_ci_interval(estimates[i], variances[i], MIXTURE, alpha=1.0 - adj.levels[i])
    print(f"  {names[i]}: 95% [{naive.lo:+.4f}, {naive.hi:+.4f}]"
          f" -> {100 * adj.levels[i]:.2f}% [{wide.lo:+.4f}, {wide.hi:+.4f}]")
