"""Positive-definite kernels and Gram matrices.

Three correlation kernels (``K(x, x) = 1``) are supported, each with a known
RKHS sensitivity theory:

* ``gaussian_iso``:   ``exp(-||x - y||_2^2 / (2 h^2))``
* ``gaussian_aniso``: ``exp(-(x - y)^T H^{-1} (x - y) / 2)``
* ``exp_l1``:         ``exp(-gamma ||x - y||_1)``
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg

from ._linalg import cholesky_jitter, dedup_points
from .errors import NumericError, ParameterError

GAUSSIAN_ISO = "gaussian_iso"
GAUSSIAN_ANISO = "gaussian_aniso"
EXP_L1 = "exp_l1"

DUPLICATE_TOL = 1e-12


class KernelSpec:
    """An immutable kernel description.

    Build instances with :meth:`gaussian_iso`, :meth:`gaussian_aniso` or
    :meth:`exp_l1` rather than calling the constructor.
    """

    __slots__ = ("variant", "dim", "h", "H", "gamma", "_H_chol")

    def __init__(self, variant, dim, h=None, H=None, gamma=None):
        if int(dim) < 1:
            raise ParameterError(f"dim must be >= 1, got {dim}")
        object.__setattr__(self, "variant", variant)
        object.__setattr__(self, "dim", int(dim))
        object.__setattr__(self, "h", None if h is None else float(h))
        object.__setattr__(self, "gamma", None if gamma is None else float(gamma))
        chol = None
        if H is not None:
            H = np.array(H, dtype=float)
            H.setflags(write=False)
            try:
                chol = cholesky_jitter(H, jitter=False)
            except NumericError as exc:
                raise ParameterError("H must be symmetric positive definite") from exc
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "_H_chol", chol)

    def __setattr__(self, name, value):
        raise AttributeError("KernelSpec is immutable")

    @classmethod
    def gaussian_iso(cls, h, dim=1):
        if not h > 0:
            raise ParameterError(f"bandwidth h must be > 0, got {h}")
        return cls(GAUSSIAN_ISO, dim, h=h)

    @classmethod
    def gaussian_aniso(cls, H):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        if H.shape[0] != H.shape[1] or not np.allclose(H, H.T, rtol=0, atol=1e-14):
            raise ParameterError("H must be a symmetric square matrix")
        return cls(GAUSSIAN_ANISO, H.shape[0], H=H)

    @classmethod
    def exp_l1(cls, gamma, dim=1):
        if not gamma > 0:
            raise ParameterError(f"gamma must be > 0, got {gamma}")
        return cls(EXP_L1, dim, gamma=gamma)

    def _key(self):
        H = None if self.H is None else self.H.tobytes()
        return (self.variant, self.dim, self.h, H, self.gamma)

    def __eq__(self, other):
        if not isinstance(other, KernelSpec):
            return NotImplemented
        return self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        if self.variant == GAUSSIAN_ISO:
            return f"KernelSpec.gaussian_iso(h={self.h!r}, dim={self.dim})"
        if self.variant == GAUSSIAN_ANISO:
            return f"KernelSpec.gaussian_aniso(H={self.H.tolist()!r})"
        return f"KernelSpec.exp_l1(gamma={self.gamma!r}, dim={self.dim})"

    def sup_diag(self):
        """``sup_x K(x, x)``; 1 for every supported kernel."""
        return 1.0

    def as_points(self, x):
        """Coerce ``x`` to a 2-d ``(n, dim)`` array, validating the width."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1, 1)
        elif x.ndim == 1:
            x = x.reshape(-1, self.dim) if self.dim > 1 or x.size == 0 else x[:, None]
        if x.ndim != 2 or x.shape[1] != self.dim:
            raise ParameterError(
                f"points must have {self.dim} coordinates, got shape {x.shape}"
            )
        return x

    def cross(self, X, Y):
        """Kernel matrix ``K[i, j] = K(X[i], Y[j])``."""
        X = self.as_points(X)
        Y = self.as_points(Y)
        diff = X[:, None, :] - Y[None, :, :]
        if self.variant == GAUSSIAN_ISO:
            sq = np.einsum("ijk,ijk->ij", diff, diff)
            return np.exp(-sq / (2.0 * self.h ** 2))
        if self.variant == GAUSSIAN_ANISO:
            # (x-y)^T H^{-1} (x-y) = ||L^{-1}(x-y)||^2
            w = linalg.solve_triangular(
                self._H_chol, diff.reshape(-1, self.dim).T, lower=True
            )
            sq = np.einsum("ij,ij->j", w, w).reshape(diff.shape[:2])
            return np.exp(-0.5 * sq)
        return np.exp(-self.gamma * np.abs(diff).sum(axis=-1))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """Evaluate ``K(x, y)`` for two single points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != (spec.dim,) or y.shape != (spec.dim,):
        raise ParameterError(
            f"expected points of dimension {spec.dim}, got {x.shape} and {y.shape}"
        )
    return float(spec.cross(x[None, :], y[None, :])[0, 0])


@dataclass
class GramMatrix:
    """Gram matrix of a kernel over a point list, with a lazy Cholesky."""

    spec: KernelSpec
    points: np.ndarray
    values: np.ndarray
    rank_deficient: bool
    _chol: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self):
        return len(self.points)

    @property
    def chol(self):
        if self._chol is None:
            if self.rank_deficient:
                raise NumericError(
                    "Gram matrix has coincident points and cannot be factorized"
                )
            self._chol = cholesky_jitter(self.values)
        return self._chol


def gram(spec: KernelSpec, points) -> GramMatrix:
    """Build the symmetric, unit-diagonal Gram matrix at ``points``."""
    pts = spec.as_points(points)
    if not np.all(np.isfinite(pts)):
        raise ParameterError("points must be finite")
    n = len(pts)
    values = spec.cross(pts, pts)
    # exact symmetry and unit diagonal regardless of rounding in cross()
    iu = np.triu_indices(n, 1)
    values[(iu[1], iu[0])] = values[iu]
    np.fill_diagonal(values, 1.0)
    keep, _ = dedup_points(pts, DUPLICATE_TOL) if n else (np.arange(0), None)
    return GramMatrix(spec, pts, values, rank_deficient=len(keep) < n)
