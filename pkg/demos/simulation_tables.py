"""
Monte Carlo accuracy tables
===========================

Small versions of the two accuracy studies.  Pass a larger M for the
full 100-replication runs (a few seconds each on one core).
"""

import sys

from cexpectile import simulation as sim

M = int(sys.argv[1]) if len(sys.argv) > 1 else 20

print("unpenalized, p=2, slopes (5 log n, log n), 25% censoring")
print(f"{'n':>5}{'expectile L2':>14}{'LS L2':>8}")
for n in (10, 50, 100, 200):
    model, template = sim.two_covariate_design(n)
    rep = sim.run_study(model, template, methods=("expectile", "ls"), penalized=False,
                        M=M, censoring_target=0.25)
    print(f"{n:>5}{rep['expectile'].l2_error:>14.3f}{rep['ls'].l2_error:>8.3f}")

print("\nadaptive LASSO, p=50, 25% censoring")
print(f"{'n':>5}{'rule':>8}{'L2':>8}{'true 0 %':>10}{'false 0 %':>11}")
for n in (400, 1000):
    for rule in ("sqrt-n", "n-0.4"):
        model, template = sim.sparse_design(n)
        e = sim.run_study(model, template, M=M, lambda_rule=rule, censoring_target=0.25)["expectile"]
        print(f"{n:>5}{rule:>8}{e.l2_error:>8.3f}{e.pct_true_zeros:>10.1f}{e.pct_false_zeros:>11.1f}")
