"""Checks that a release is (alpha, beta)-DP on finite projections.

Two releases ``f1 + sigma G`` and ``f2 + sigma G`` restricted to a grid are
Gaussians with a common covariance ``sigma^2 K``. Their log-likelihood ratio
is itself Gaussian, with mean ``u^2 / 2`` and variance ``u^2`` under the first
law, where ``u^2 = delta^T K^{-1} delta / sigma^2`` and ``delta`` is the
mean shift. The probability that it exceeds ``alpha`` is therefore available
in closed form, which is what :func:`analytic_dp_check` reports.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from ._linalg import cholesky_jitter, dedup_points, whiten
from .errors import ParameterError
from .gp_noise import NoiseSampler
from .kernels import DUPLICATE_TOL, KernelSpec, gram
from .privacy import PrivacyParams
from .rkhs import RkhsElement, evaluate_points

MIN_SOBOLEV_POINTS = 1024


@dataclass
class AuditReport:
    grid: list
    u_norm: float
    violation_prob: float
    bound_ok: bool
    power_estimate: Optional[float] = None
    power_se: Optional[float] = None
    power_bound: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def _values(f, pts):
    if isinstance(f, RkhsElement):
        return evaluate_points(f, pts)
    return np.asarray(f(pts), dtype=float).reshape(-1)


def _whitened_shift(f1, f2, grid, sigma, kernel):
    pts = kernel.as_points(grid)
    if len(pts) == 0:
        raise ParameterError("grid must contain at least one point")
    keep, _ = dedup_points(pts, DUPLICATE_TOL)
    if len(keep) < len(pts):
        raise ParameterError("grid points must be distinct")
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    chol = cholesky_jitter(gram(kernel, pts).values)
    shift = whiten(chol, _values(f1, pts) - _values(f2, pts)) / sigma
    return pts, chol, shift


def _noise_kernel(f1, kernel):
    if kernel is not None:
        return kernel
    if isinstance(f1, RkhsElement):
        return f1.kernel
    raise ParameterError("kernel is required when f1 is not an RkhsElement")


def analytic_dp_check(f1, f2, grid, sigma: float, params: PrivacyParams,
                      kernel: Optional[KernelSpec] = None) -> AuditReport:
    """Exact probability that the privacy loss on ``grid`` exceeds ``alpha``.

    Parameters
    ----------
    f1, f2 : RkhsElement or callable
        Non-private outputs on two adjacent datasets. Callables map an
        ``(n, d)`` array to ``n`` values.
    grid : array_like, shape (n, d)
        Distinct evaluation points.
    sigma : float
        Noise scale of the release.
    params : PrivacyParams
    kernel : KernelSpec, optional
        Noise covariance; defaults to ``f1.kernel``.

    Returns
    -------
    AuditReport
        ``bound_ok`` is true when the exceedance probability is at most beta.
    """
    kernel = _noise_kernel(f1, kernel)
    pts, _, shift = _whitened_shift(f1, f2, grid, sigma, kernel)
    u = float(np.linalg.norm(shift))
    if u == 0.0:
        viol = 0.0
    else:
        viol = float(stats.norm.sf((params.alpha - 0.5 * u * u) / u))
    return AuditReport(
        grid=pts.tolist(),
        u_norm=u,
        violation_prob=viol,
        bound_ok=viol <= params.beta,
    )


def power_experiment(f0, f1, grid, sigma: float, params: PrivacyParams,
                     gamma: float, reps: int = 10_000, seed: int = 0,
                     kernel: Optional[KernelSpec] = None) -> AuditReport:
    """Monte Carlo power of the level-``gamma`` likelihood-ratio test.

    The release is drawn from the alternative ``f1`` through the batch noise
    sampler; the adversary tests ``H: D = D0`` (mean ``f0``) with the
    Neyman-Pearson statistic along the whitened mean shift. Any such test has
    power at most ``gamma * e^alpha + beta`` under (alpha, beta)-DP.
    """
    if not (0.0 <= gamma <= 1.0):
        raise ParameterError(f"gamma must lie in [0, 1], got {gamma}")
    if reps < 1000:
        raise ParameterError(f"need at least 1000 repetitions, got {reps}")
    kernel = _noise_kernel(f0, kernel)
    pts, chol, shift = _whitened_shift(f1, f0, grid, sigma, kernel)
    u = float(np.linalg.norm(shift))
    direction = shift / u if u > 0 else np.eye(len(pts))[0]
    mean0 = _values(f0, pts)
    mean1 = _values(f1, pts)
    threshold = stats.norm.isf(gamma) if 0.0 < gamma < 1.0 else (
        math.inf if gamma == 0.0 else -math.inf
    )
    seeds = np.random.SeedSequence(seed).generate_state(reps)
    rejections = 0
    for s in seeds:
        sampler = NoiseSampler(kernel, sigma, strategy="batch", seed=int(s))
        release = mean1 + sampler.sample_batch(pts)
        stat = direction @ whiten(chol, release - mean0) / sigma
        rejections += stat > threshold
    power = rejections / reps
    se = math.sqrt(max(power * (1.0 - power), 1.0 / reps) / reps)
    viol = 0.0 if u == 0.0 else float(stats.norm.sf((params.alpha - 0.5 * u * u) / u))
    bound = gamma * math.exp(params.alpha) + params.beta
    return AuditReport(
        grid=pts.tolist(),
        u_norm=u,
        violation_prob=viol,
        bound_ok=viol <= params.beta,
        power_estimate=float(power),
        power_se=float(se),
        power_bound=bound,
        extra={"gamma_level": gamma, "reps": reps,
               "power_exact": float(stats.norm.sf(threshold - u))},
    )


def sobolev_norm_1d(values, gamma: float, derivative=None, grid=None) -> float:
    """Squared norm in the RKHS of ``exp(-gamma |x - y|)`` on ``[0, 1]``.

    ``||f||^2 = (f(0)^2 + f(1)^2) / 2
               + (1 / (2 gamma)) * int_0^1 (f'(t)^2 + gamma^2 f(t)^2) dt``

    evaluated with the composite trapezoid rule on a uniform grid. When
    ``derivative`` is not supplied it is estimated by second-order central
    differences.
    """
    f = np.asarray(values, dtype=float).reshape(-1)
    n = f.size
    if n < MIN_SOBOLEV_POINTS:
        raise ParameterError(f"need at least {MIN_SOBOLEV_POINTS} grid points, got {n}")
    if not gamma > 0:
        raise ParameterError(f"gamma must be > 0, got {gamma}")
    if grid is not None:
        grid = np.asarray(grid, dtype=float).reshape(-1)
        expected = np.linspace(0.0, 1.0, n)
        if grid.shape != (n,) or not np.allclose(grid, expected, rtol=0, atol=1e-12):
            raise ParameterError("sobolev_norm_1d needs a uniform grid on [0, 1]")
    dx = 1.0 / (n - 1)
    if derivative is None:
        df = np.gradient(f, dx, edge_order=2)
    else:
        df = np.asarray(derivative, dtype=float).reshape(-1)
        if df.shape != f.shape:
            raise ParameterError("derivative must match values in length")
    integrand = df * df + gamma * gamma * f * f
    integral = dx * (integrand.sum() - 0.5 * (integrand[0] + integrand[-1]))
    return float(0.5 * (f[0] ** 2 + f[-1] ** 2) + integral / (2.0 * gamma))
