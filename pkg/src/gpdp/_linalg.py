"""Small dense linear-algebra helpers shared by the kernel and noise code."""

import numpy as np
from scipy import linalg
from scipy.spatial import distance

from .errors import NumericError

JITTER_EPS = 1e-10


def cholesky_jitter(a, jitter=True):
    """Lower Cholesky factor of ``a`` with a single bounded jitter retry.

    If the plain factorization fails, ``JITTER_EPS * mean(diag(a))`` is added
    to the diagonal and the factorization is attempted once more. A second
    failure raises :class:`NumericError`; the noise is never inflated further.
    With ``jitter=False`` the first failure raises.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.zeros((0, 0))
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        if not jitter:
            raise NumericError("matrix is not positive definite") from exc
    bump = JITTER_EPS * float(np.mean(np.diag(a)))
    try:
        return np.linalg.cholesky(a + bump * np.eye(a.shape[0]))
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            "matrix is not positive definite even after jitter"
        ) from exc


def whiten(chol, v):
    """Return ``L^{-1} v`` for lower-triangular ``L``."""
    return linalg.solve_triangular(chol, v, lower=True, check_finite=False)


def dedup_points(points, tol=1e-12):
    """Indices of the first occurrence of each point, up to an l-inf tolerance.

    Returns ``(keep, inverse)`` where ``points[keep]`` are the distinct points
    and ``inverse[i]`` is the position in ``keep`` that point ``i`` maps to.
    """
    points = np.asarray(points, dtype=float)
    n = len(points)
    inverse = np.arange(n)
    if n > 1:
        close = distance.squareform(distance.pdist(points, "chebyshev")) <= tol
        for i in range(n):
            earlier = np.flatnonzero(close[i, :i])
            if earlier.size:
                inverse[i] = inverse[earlier[0]]
    keep = np.flatnonzero(inverse == np.arange(n))
    inverse = np.searchsorted(keep, inverse)
    return keep, inverse
