"""Private release of a 1-d kernel density estimate on a 1000-point grid.

Prints a coarse text profile of the non-private and released estimates.
"""

import numpy as np

from gpdp import Dataset, PrivacyParams, kde_build, kde_sensitivity_gaussian, release_function

rng = np.random.default_rng(0)
n, h = 100, 0.1
x = np.where(rng.uniform(size=n) < 0.5, 0.3, 0.7) + 0.1 * rng.standard_normal(n)

f = kde_build(Dataset(x[:, None]), h)
bound = kde_sensitivity_gaussian(n, h)
params = PrivacyParams(alpha=1.0, beta=0.1)
released = release_function(f, bound, params, strategy="batch", seed=1)

grid = np.linspace(0, 1, 1000)[:, None]
private = released.evaluate(grid)
base = f(grid)

print(f"sensitivity {bound.delta:.6f}, noise scale {released.sigma:.6f}")
for i in range(0, 1000, 50):
    print(f"x={grid[i, 0]:.3f}  kde={base[i]:7.3f}  private={private[i]:7.3f}")
