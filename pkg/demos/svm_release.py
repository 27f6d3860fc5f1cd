"""Private release of a kernel SVM decision function."""

import numpy as np

from gpdp import (
    Dataset,
    KernelSpec,
    PrivacyParams,
    erm_sensitivity,
    release_function,
    svm_train,
)

rng = np.random.default_rng(0)
n, lam = 200, 0.1
x = rng.uniform(size=(n, 2))
y = np.where(x[:, 0] + x[:, 1] > 1.0, 1.0, -1.0)
kernel = KernelSpec.gaussian_iso(0.2, 2)

f = svm_train(Dataset(x, y), kernel, lam)
bound = erm_sensitivity(1.0, lam, n, 1.0, kernel)
released = release_function(f, bound, PrivacyParams(1.0, 0.1), seed=7)

test = rng.uniform(size=(500, 2))
truth = np.where(test.sum(axis=1) > 1.0, 1.0, -1.0)
print(f"noise scale {released.sigma:.4f}")
print(f"non-private accuracy {np.mean(np.sign(f(test)) == truth):.3f}")
print(f"private accuracy     {np.mean(np.sign(released.evaluate(test)) == truth):.3f}")
