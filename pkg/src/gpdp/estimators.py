"""Releasable functions: kernel density estimates and kernel SVMs.

Builders return :class:`~gpdp.rkhs.RkhsElement` values; :func:`release_function`
binds one to calibrated GP noise, producing a :class:`ReleasedFunction`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._linalg import dedup_points
from .errors import (
    ConvergenceError,
    DegenerateDataError,
    LicenseError,
    ParameterError,
)
from .gp_noise import NoiseSampler
from .kernels import EXP_L1, KernelSpec
from .privacy import PrivacyParams, Provenance, SensitivityBound, noise_scale
from .rkhs import RkhsElement, evaluate_points

HINGE_LIPSCHITZ = 1.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """``n`` records in ``d`` dimensions, optionally labelled."""

    points: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or len(pts) < 1:
            raise ParameterError("a dataset needs at least one record")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("dataset entries must be finite")
        object.__setattr__(self, "points", pts)
        if self.labels is not None:
            labels = np.asarray(self.labels, dtype=float).reshape(-1)
            if len(labels) != len(pts):
                raise ParameterError(
                    f"{len(labels)} labels for {len(pts)} records"
                )
            object.__setattr__(self, "labels", labels)

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def d(self):
        return self.points.shape[1]

    def replace(self, index, point, label=None):
        """Adjacent dataset: record ``index`` swapped for ``point`` (and ``label``)."""
        pts = self.points.copy()
        pts[index] = point
        labels = None
        if self.labels is not None:
            labels = self.labels.copy()
            if label is not None:
                labels[index] = label
        return Dataset(pts, labels)


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path, labels=False) -> Dataset:
    """Read a dataset from CSV; a non-numeric first row is taken as a header.

    With ``labels=True`` the final column holds the labels.
    """
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise ParameterError(f"{path}: no data rows")
    try:
        arr = np.array([[float(c) for c in r] for r in rows])
    except ValueError as exc:
        raise ParameterError(f"{path}: non-numeric entry") from exc
    if labels:
        if arr.shape[1] < 2:
            raise ParameterError(f"{path}: need feature columns plus a label column")
        return Dataset(arr[:, :-1], arr[:, -1])
    return Dataset(arr)


def kde_build(data: Dataset, h: float) -> RkhsElement:
    """Gaussian KDE with bandwidth ``h`` as an element of the Gaussian RKHS."""
    if not h > 0:
        raise ParameterError(f"h must be > 0, got {h}")
    weight = 1.0 / (data.n * (2.0 * math.pi * h * h) ** (data.d / 2.0))
    kernel = KernelSpec.gaussian_iso(h, data.d)
    return RkhsElement(kernel, data.points, np.full(data.n, weight))


def kde_build_aniso(data: Dataset, H) -> RkhsElement:
    """KDE with a fixed positive definite bandwidth matrix ``H``."""
    kernel = KernelSpec.gaussian_aniso(H)
    if kernel.dim != data.d:
        raise ParameterError(f"H is {kernel.dim}-d but data is {data.d}-d")
    sqrt_det = float(np.prod(np.diag(np.linalg.cholesky(kernel.H))))
    weight = 1.0 / (data.n * (2.0 * math.pi) ** (data.d / 2.0) * sqrt_det)
    return RkhsElement(kernel, data.points, np.full(data.n, weight))


@dataclass(frozen=True)
class BandwidthEstimate:
    """Rule-of-thumb bandwidths. Computed from raw data: NOT private."""

    h: np.ndarray
    private: bool = False

    @property
    def H(self):
        return np.diag(self.h ** 2)


def rule_of_thumb_bandwidth(data: Dataset) -> BandwidthEstimate:
    """``h_j = (4 / ((d + 1) n))^{1/(d+4)} * IQR_j / 1.34`` per coordinate.

    Quartiles use linear interpolation between order statistics.
    """
    n, d = data.n, data.d
    if n < 4:
        raise DegenerateDataError(f"need at least 4 records for an IQR, got {n}")
    q75, q25 = np.percentile(data.points, [75, 25], axis=0)
    iqr = q75 - q25
    if np.any(iqr <= 0):
        raise DegenerateDataError(
            f"zero interquartile range in coordinate(s) {np.flatnonzero(iqr <= 0).tolist()}"
        )
    factor = (4.0 / ((d + 1) * n)) ** (1.0 / (d + 4))
    return BandwidthEstimate(factor * iqr / 1.34)


def svm_objective(f: RkhsElement, data: Dataset, lam: float) -> float:
    """``mean(hinge(y f(x))) + lam ||f||_H^2``."""
    margins = data.labels * evaluate_points(f, data.points)
    fx = f.kernel.cross(f.centers, f.centers) if len(f) else np.zeros((0, 0))
    return float(np.mean(np.maximum(0.0, 1.0 - margins)) + lam * f.coeffs @ fx @ f.coeffs)


def svm_train(data: Dataset, kernel: KernelSpec, lam: float, tol: float = 1e-8,
              max_epochs: int = 100_000, seed: int = 0) -> RkhsElement:
    """Hinge-loss kernel machine ``argmin_g mean(hinge) + lam ||g||_H^2``.

    Solved by cyclic coordinate ascent on the box-constrained dual
    ``0 <= a_i <= 1 / (2 lam n)``; the sweep order is a fixed permutation
    drawn from ``seed``. Iteration stops once the duality gap, expressed on
    the primal objective above, is at most ``tol``.

    Raises
    ------
    ConvergenceError
        If the gap is still above ``tol`` after ``max_epochs`` sweeps.
    """
    if data.labels is None or not np.all(np.isin(data.labels, (-1.0, 1.0))):
        raise ParameterError("svm_train needs labels in {-1, +1}")
    if not lam > 0:
        raise ParameterError(f"lam must be > 0, got {lam}")
    if kernel.dim != data.d:
        raise ParameterError(f"kernel is {kernel.dim}-d but data is {data.d}-d")
    n = data.n
    y = data.labels
    K = kernel.cross(data.points, data.points)
    diag = np.diag(K).copy()
    C = 1.0 / (2.0 * lam * n)
    order = np.random.default_rng(seed).permutation(n)
    a = np.zeros(n)
    u = np.zeros(n)  # u = K (a * y), i.e. f(x_i)
    gap = math.inf
    for epoch in range(max_epochs):
        for i in order:
            g = y[i] * u[i] - 1.0
            new = min(max(a[i] - g / diag[i], 0.0), C)
            step = new - a[i]
            if step != 0.0:
                u += (step * y[i]) * K[:, i]
                a[i] = new
        if epoch % 64 == 63:
            u = K @ (a * y)
        norm_sq = float((a * y) @ u)
        primal = 0.5 * norm_sq + C * float(np.maximum(0.0, 1.0 - y * u).sum())
        dual = float(a.sum()) - 0.5 * norm_sq
        gap = 2.0 * lam * (primal - dual)
        if gap <= tol:
            break
    else:
        raise ConvergenceError(
            f"svm_train did not reach gap {tol} in {max_epochs} epochs", gap=gap
        )
    return RkhsElement(kernel, data.points, a * y)


class ReleasedFunction:
    """A function released as ``base + sigma * G`` with ``G ~ GP(0, K)``.

    Evaluation is consistent: asking twice for the same point returns the same
    value, because every answer is stored in the sampler's history.
    """

    def __init__(self, base: RkhsElement, sampler: NoiseSampler,
                 params: PrivacyParams, bound: SensitivityBound,
                 unit_cube: bool = False):
        self.base = base
        self.sampler = sampler
        self.params = params
        self.bound = bound
        self.unit_cube = unit_cube

    @property
    def sigma(self):
        return self.sampler.sigma

    @property
    def dim(self):
        return self.base.kernel.dim

    def _check_domain(self, pts):
        if self.unit_cube and (np.any(pts < 0.0) or np.any(pts > 1.0)):
            raise ParameterError("this release is only valid on the unit cube [0, 1]^d")

    def noise(self, points):
        """Noise values at ``points`` (drawing where needed)."""
        pts = self.base.kernel.as_points(points)
        if not np.all(np.isfinite(pts)):
            raise ParameterError("query points must be finite")
        self._check_domain(pts)
        s = self.sampler
        if s.strategy == "batch" and len(s) == 0 and len(pts):
            keep, inverse = dedup_points(pts)
            return s.sample_batch(pts[keep])[inverse]
        return s.query_many(pts)

    def evaluate(self, points):
        pts = self.base.kernel.as_points(points)
        noise = self.noise(pts)
        return evaluate_points(self.base, pts) + noise

    def __call__(self, x):
        pts = self.base.kernel.as_points(x)
        vals = self.evaluate(pts)
        if np.ndim(x) <= 1 and len(pts) == 1:
            return float(vals[0])
        return vals


def licensed_noise_kernel(base: RkhsElement, bound: SensitivityBound) -> KernelSpec:
    """The covariance kernel the noise must use for ``bound`` to be valid."""
    prov = bound.provenance
    if prov is Provenance.SOBOLEV_BOUND:
        if bound.kernel is None or bound.kernel.variant != EXP_L1:
            raise LicenseError("a Sobolev bound licenses only exp_l1 noise")
        if bound.kernel.dim != base.kernel.dim:
            raise LicenseError("Sobolev bound dimension does not match the function")
        return bound.kernel
    if bound.kernel is not None and bound.kernel != base.kernel:
        raise LicenseError(
            f"{prov.value} bound was measured in the RKHS of {bound.kernel!r}, "
            f"but the function lives in {base.kernel!r}"
        )
    return base.kernel


def release_function(base: RkhsElement, bound: SensitivityBound,
                     params: PrivacyParams, strategy: str = "online",
                     seed: int = 0, allow_empirical: bool = False) -> ReleasedFunction:
    """Bind ``base`` to GP noise of scale ``c(beta) * delta / alpha``.

    Parameters
    ----------
    base : RkhsElement
        The non-private function.
    bound : SensitivityBound
        Must license the noise kernel; empirical bounds are refused unless
        ``allow_empirical`` is set.
    params : PrivacyParams
    strategy : {"batch", "online", "fast"}
    seed : int
    allow_empirical : bool
        Accept a single-pair empirical bound. This voids the guarantee.
    """
    if bound.provenance is Provenance.EMPIRICAL and not allow_empirical:
        raise LicenseError(
            "empirical sensitivity is not a privacy bound; pass allow_empirical=True "
            "to override"
        )
    kernel = licensed_noise_kernel(base, bound)
    if strategy == "fast" and (kernel.variant != EXP_L1 or kernel.dim != 1):
        raise LicenseError("the fast strategy needs 1-d exp_l1 noise")
    sigma = noise_scale(params, bound)
    sampler = NoiseSampler(kernel, sigma, strategy=strategy, seed=seed)
    return ReleasedFunction(base, sampler, params, bound,
                            unit_cube=bound.provenance is Provenance.SOBOLEV_BOUND)


__all__ = [
    "Dataset",
    "BandwidthEstimate",
    "ReleasedFunction",
    "HINGE_LIPSCHITZ",
    "kde_build",
    "kde_build_aniso",
    "licensed_noise_kernel",
    "load_csv",
    "release_function",
    "rule_of_thumb_bandwidth",
    "svm_objective",
    "svm_train",
]
