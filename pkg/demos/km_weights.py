"""
Censoring weights from a Kaplan-Meier curve
===========================================

Every censored expectile fit starts by estimating the survival function of
the censoring time and turning it into case weights delta / G(Y-).
"""

import numpy as np

from cexpectile import SurvivalSample, fit_km, km_weights

# three patients: events at t=1 and t=3, a censoring at t=2
sample = SurvivalSample.from_arrays(np.array([1.0, 2.0, 3.0]), np.array([1, 0, 1]), np.ones((3, 1)))
curve = fit_km(sample)
print("jump times", curve.jump_times, "values", curve.values)

# the event at t=3 was observed after half the cohort could have been
# censored, so it counts twice
_, w = km_weights(sample)
print("weights", w.w)

# a larger sample: weights average to about one
rng = np.random.default_rng(1)
t = rng.exponential(2.0, 500)
c = rng.uniform(0, 6, 500)
sample = SurvivalSample.from_arrays(np.minimum(t, c), (t <= c).astype(int), np.ones((500, 1)))
_, w = km_weights(sample)
print(f"censored {sample.censoring_fraction:.0%}, mean weight {w.w.mean():.3f}, max {w.w.max():.2f}")
