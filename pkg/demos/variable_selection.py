"""
Adaptive LASSO selection
========================

Fifty candidate covariates, five of which matter.  The adaptive penalty
built from the unpenalized pilot drops the noise variables exactly.
"""

from dataclasses import replace

import numpy as np

from cexpectile import km_weights, two_stage_fit
from cexpectile import simulation as sim

model, template = sim.sparse_design(1000, p=50)
template = replace(template, c1=sim.calibrate_c1(model, template, 0.25), seed=11)
sample, _ = sim.generate_dataset(template, model)
tau = sim.centering_tau("gumbel")
_, w = km_weights(sample)

res = two_stage_fit(sample, tau, w)   # lambda = n^0.4, gamma = 2
pen = res.penalized
print(f"lambda {pen.penalty.lam:.2f}, KKT violation {pen.kkt_max_violation:.1e}")
print("selected", [sample.names[j] for j in pen.active_set])
print("pilot  ", np.round(res.pilot.beta[:7], 3))
print("alasso ", np.round(pen.beta[:7], 3))
print("refit  ", np.round(res.coefficients[:7], 3))
print("truth  ", model.beta0[:7])

# how many noise coefficients the pilot left nonzero versus the penalized fit
print("nonzero noise coefficients: pilot", np.count_nonzero(res.pilot.beta[5:]),
      "alasso", np.count_nonzero(pen.beta[5:]))
