"""Audit a KDE release on a neighbouring dataset, correctly and under-noised."""

import numpy as np

from gpdp import (
    Dataset,
    PrivacyParams,
    analytic_dp_check,
    kde_build,
    kde_sensitivity_gaussian,
    noise_scale,
    power_experiment,
)

rng = np.random.default_rng(0)
n, h = 100, 0.1
pts = rng.uniform(size=(n, 1))
data = Dataset(pts)
neighbour = data.replace(n - 1, [0.95])
f0, f1 = kde_build(data, h), kde_build(neighbour, h)

params = PrivacyParams(1.0, 0.1)
sigma = noise_scale(params, kde_sensitivity_gaussian(n, h))
grid = np.linspace(0, 1, 32)[:, None]

for scale in (1.0, 0.1):
    rep = analytic_dp_check(f0, f1, grid, scale * sigma, params)
    print(f"sigma x {scale}: u = {rep.u_norm:.3f}, "
          f"violation = {rep.violation_prob:.4f}, bound_ok = {rep.bound_ok}")

rep = power_experiment(f0, f1, grid, sigma, params, gamma=0.05, reps=10_000, seed=1)
print(f"test power {rep.power_estimate:.4f} +- {rep.power_se:.4f}, bound {rep.power_bound:.4f}")
