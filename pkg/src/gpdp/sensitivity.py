"""RKHS sensitivity bounds for the supported release pipelines.

Every closed-form bound records the kernel whose RKHS it was measured in.
The noise process of a release must use exactly that kernel as covariance.
"""

from __future__ import annotations

import math

import numpy as np

from ._linalg import cholesky_jitter
from .errors import NumericError, ParameterError
from .kernels import KernelSpec
from .privacy import Provenance, SensitivityBound
from .rkhs import RkhsElement, rkhs_norm


def _positive(name, value):
    if not value > 0:
        raise ParameterError(f"{name} must be > 0, got {value}")


def _positive_int(name, value):
    if int(value) != value or value < 1:
        raise ParameterError(f"{name} must be a positive integer, got {value}")


def kde_sensitivity_gaussian(n: int, h: float, d: int = 1) -> SensitivityBound:
    """``sqrt(2) / (n (2 pi h^2)^{d/2})``, licensing ``gaussian_iso(h)`` noise."""
    _positive_int("n", n)
    _positive_int("d", d)
    _positive("h", h)
    delta = math.sqrt(2.0) / (n * (2.0 * math.pi * h * h) ** (d / 2.0))
    return SensitivityBound(delta, Provenance.CLOSED_FORM_KDE,
                            KernelSpec.gaussian_iso(h, d))


def kde_sensitivity_anisotropic(n: int, H) -> SensitivityBound:
    """``sqrt(2) / (n (2 pi)^{d/2} |H|^{1/2})``, licensing ``gaussian_aniso(H)``."""
    _positive_int("n", n)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    try:
        chol = cholesky_jitter(H, jitter=False)
    except NumericError as exc:
        raise NumericError("H must be positive definite") from exc
    d = H.shape[0]
    sqrt_det = float(np.prod(np.diag(chol)))
    delta = math.sqrt(2.0) / (n * (2.0 * math.pi) ** (d / 2.0) * sqrt_det)
    return SensitivityBound(delta, Provenance.CLOSED_FORM_KDE_ANISO,
                            KernelSpec.gaussian_aniso(H))


def kde_sensitivity_sobolev(n: int, h: float, d: int = 1) -> SensitivityBound:
    """``2 / ((2 pi)^{d/4} n h^d)`` in the Sobolev RKHS on ``[0, 1]^d``.

    The bound holds with the exponential kernel at ``gamma = 1 / h``, which is
    the kernel it licenses.
    """
    _positive_int("n", n)
    _positive_int("d", d)
    _positive("h", h)
    delta = 2.0 / ((2.0 * math.pi) ** (d / 4.0) * n * h ** d)
    return SensitivityBound(delta, Provenance.SOBOLEV_BOUND,
                            KernelSpec.exp_l1(1.0 / h, d))


def erm_sensitivity(lipschitz: float, lam: float, n: int, sup_k: float = 1.0,
                    kernel: KernelSpec | None = None) -> SensitivityBound:
    """Stability of a regularized ERM minimizer: ``M sqrt(sup K) / (lam n)``.

    Valid for losses convex and ``lipschitz``-Lipschitz in the prediction
    (hinge loss: 1). ``kernel`` is the RKHS the minimizer lives in.
    """
    _positive("lipschitz", lipschitz)
    _positive("lam", lam)
    _positive("sup_k", sup_k)
    _positive_int("n", n)
    delta = lipschitz * math.sqrt(sup_k) / (lam * n)
    return SensitivityBound(delta, Provenance.ERM_STABILITY, kernel)


def empirical_rkhs_sensitivity(f1: RkhsElement, f2: RkhsElement) -> SensitivityBound:
    """``||f1 - f2||_H`` for a single pair.

    This is a diagnostic, not a privacy bound: it omits the supremum over
    adjacent datasets. Releases refuse it unless explicitly overridden.
    """
    delta = rkhs_norm((f1 - f2).merged())
    return SensitivityBound(delta, Provenance.EMPIRICAL, f1.kernel)
