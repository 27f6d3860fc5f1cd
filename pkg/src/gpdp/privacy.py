"""Privacy budget arithmetic and the finite-dimensional Gaussian mechanism.

The mechanism releases ``v + (c(beta) * delta / alpha) * Z`` with
``Z ~ N(0, M)``; it is (alpha, beta)-DP whenever the Mahalanobis distance
``||M^{-1/2}(v_D - v_D')||`` between adjacent outputs is at most ``delta``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import cholesky_jitter, whiten
from .errors import ParameterError


class Provenance(enum.Enum):
    """Where a sensitivity value came from."""

    CLOSED_FORM_KDE = "ClosedFormKde"
    CLOSED_FORM_KDE_ANISO = "ClosedFormKdeAniso"
    SOBOLEV_BOUND = "SobolevBound"
    ERM_STABILITY = "ErmStability"
    EMPIRICAL = "Empirical"


@dataclass(frozen=True)
class PrivacyParams:
    """An (alpha, beta) budget with ``0 < alpha <= 1`` and ``0 < beta < 1``."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (0.0 < self.alpha <= 1.0):
            raise ParameterError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not (0.0 < self.beta < 1.0):
            raise ParameterError(f"beta must lie in (0, 1), got {self.beta}")

    @property
    def c(self) -> float:
        return c_beta(self.beta)


@dataclass(frozen=True)
class SensitivityBound:
    """A sensitivity value together with how it was obtained.

    ``kernel`` is the reproducing kernel of the RKHS in which ``delta`` was
    measured, i.e. the only covariance the noise process may use. ``None``
    means "whatever kernel the released function itself carries".
    """

    delta: float
    provenance: Provenance
    kernel: Optional[object] = None

    def __post_init__(self):
        if not (self.delta >= 0.0) or not math.isfinite(self.delta):
            raise ParameterError(f"delta must be finite and >= 0, got {self.delta}")

    @property
    def is_certified(self) -> bool:
        return self.provenance is not Provenance.EMPIRICAL


def c_beta(beta: float) -> float:
    """Smallest admissible noise multiplier ``sqrt(2 log(2 / beta))``."""
    if not (0.0 < beta < 1.0):
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    return math.sqrt(2.0 * math.log(2.0 / beta))


def noise_scale(params: PrivacyParams, bound: SensitivityBound) -> float:
    """Noise standard deviation ``c(beta) * delta / alpha``."""
    return params.c * bound.delta / params.alpha


def _as_rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def gaussian_mechanism_vector(v, cov, bound: SensitivityBound,
                              params: PrivacyParams, seed) -> np.ndarray:
    """Release ``v`` with correlated Gaussian noise shaped by ``cov``.

    Parameters
    ----------
    v : array_like, shape (d,)
        Non-private vector.
    cov : array_like, shape (d, d)
        Symmetric positive definite noise shape ``M``.
    bound : SensitivityBound
        Mahalanobis sensitivity with respect to ``cov``.
    params : PrivacyParams
    seed : int or numpy.random.Generator
        All randomness comes from here.

    Returns
    -------
    numpy.ndarray
        ``v + sigma * L z`` with ``L`` the lower Cholesky factor of ``cov``.
    """
    v = np.asarray(v, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if v.ndim != 1 or cov.shape != (v.size, v.size):
        raise ParameterError(
            f"shape mismatch: v {v.shape}, cov {cov.shape}"
        )
    if not np.all(np.isfinite(v)):
        raise ParameterError("v must be finite")
    sigma = noise_scale(params, bound)
    chol = cholesky_jitter(cov)
    if sigma == 0.0:
        return v.copy()
    z = _as_rng(seed).standard_normal(v.size)
    return v + sigma * (chol @ z)


def mahalanobis_sensitivity(v1, v2, cov) -> float:
    """``||cov^{-1/2} (v1 - v2)||_2`` via a triangular solve."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if v1.shape != v2.shape or v1.ndim != 1 or cov.shape != (v1.size, v1.size):
        raise ParameterError(
            f"shape mismatch: v1 {v1.shape}, v2 {v2.shape}, cov {cov.shape}"
        )
    chol = cholesky_jitter(cov, jitter=False)
    return float(np.linalg.norm(whiten(chol, v1 - v2)))
