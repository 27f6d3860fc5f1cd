"""Finite-span RKHS elements ``f = sum_i coeffs[i] * K(centers[i], .)``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._linalg import cholesky_jitter, dedup_points, whiten
from .errors import NumericError, ParameterError
from .kernels import DUPLICATE_TOL, KernelSpec

NEGATIVE_NORM_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class RkhsElement:
    """A finite linear combination of kernel sections.

    Attributes
    ----------
    kernel : KernelSpec
    centers : ndarray, shape (m, d)
    coeffs : ndarray, shape (m,)
    """

    kernel: KernelSpec
    centers: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        centers = self.kernel.as_points(self.centers)
        coeffs = np.asarray(self.coeffs, dtype=float).reshape(-1)
        if len(centers) != len(coeffs):
            raise ParameterError(
                f"{len(centers)} centers but {len(coeffs)} coefficients"
            )
        centers = centers.copy()
        coeffs = coeffs.copy()
        centers.setflags(write=False)
        coeffs.setflags(write=False)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def section(cls, kernel, x, weight=1.0):
        """``weight * K(x, .)``."""
        return cls(kernel, kernel.as_points(x)[:1], [weight])

    @classmethod
    def zero(cls, kernel):
        return cls(kernel, np.zeros((0, kernel.dim)), [])

    def __len__(self):
        return len(self.coeffs)

    def __call__(self, x):
        return rkhs_eval(self, x)

    def __mul__(self, a):
        return RkhsElement(self.kernel, self.centers, float(a) * self.coeffs)

    __rmul__ = __mul__

    def __add__(self, other):
        _check_same_kernel(self, other)
        return RkhsElement(
            self.kernel,
            np.vstack([self.centers, other.centers]),
            np.concatenate([self.coeffs, other.coeffs]),
        )

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def merged(self):
        """Same function with coincident centers combined and zero terms dropped."""
        if len(self) == 0:
            return self
        keep, inverse = dedup_points(self.centers, DUPLICATE_TOL)
        coeffs = np.zeros(len(keep))
        np.add.at(coeffs, inverse, self.coeffs)
        nz = coeffs != 0.0
        return RkhsElement(self.kernel, self.centers[keep][nz], coeffs[nz])


def _check_same_kernel(f, g):
    if f.kernel != g.kernel:
        raise ParameterError(f"kernel mismatch: {f.kernel!r} vs {g.kernel!r}")


def rkhs_eval(f: RkhsElement, x):
    """Evaluate ``f`` at one point (returns float) or many (returns array)."""
    pts = f.kernel.as_points(x)
    vals = evaluate_points(f, pts)
    if np.ndim(x) <= 1 and len(pts) == 1:
        return float(vals[0])
    return vals


def evaluate_points(f: RkhsElement, points) -> np.ndarray:
    """Evaluate ``f`` at an ``(n, d)`` array of points; always an array."""
    pts = f.kernel.as_points(points)
    if len(f) == 0:
        return np.zeros(len(pts))
    return f.kernel.cross(pts, f.centers) @ f.coeffs


def rkhs_inner(f: RkhsElement, g: RkhsElement) -> float:
    """``<f, g>_H = sum_ij f.coeffs[i] g.coeffs[j] K(f.centers[i], g.centers[j])``."""
    _check_same_kernel(f, g)
    if len(f) == 0 or len(g) == 0:
        return 0.0
    return float(f.coeffs @ f.kernel.cross(f.centers, g.centers) @ g.coeffs)


def rkhs_norm(f: RkhsElement) -> float:
    sq = rkhs_inner(f, f)
    if sq < -NEGATIVE_NORM_TOL:
        raise NumericError(f"squared RKHS norm is negative: {sq}")
    return float(np.sqrt(max(sq, 0.0)))


def projection_quadratic_form(f: RkhsElement, points) -> float:
    """``v^T M^{-1} v`` with ``v = f(points)`` and ``M`` the Gram at ``points``.

    This is the squared norm of the orthogonal projection of ``f`` onto
    ``span{K(x_i, .)}``, so it never exceeds ``||f||_H^2`` and equals it when
    the points include every center of ``f``. Coincident points are merged
    before factorizing.
    """
    pts = f.kernel.as_points(points)
    if len(pts) == 0:
        return 0.0
    keep, _ = dedup_points(pts, DUPLICATE_TOL)
    pts = pts[keep]
    M = f.kernel.cross(pts, pts)
    np.fill_diagonal(M, 1.0)
    chol = cholesky_jitter(M)
    w = whiten(chol, evaluate_points(f, pts))
    return float(w @ w)
