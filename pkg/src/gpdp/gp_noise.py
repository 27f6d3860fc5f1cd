"""Gaussian-process noise with consistent answers across queries.

A :class:`NoiseSampler` draws a sample path of a zero-mean GP with covariance
``sigma^2 K`` lazily: only at the points somebody asked about. Three
strategies are available.

``batch``
    Joint draw at a fixed point set from ``N(0, sigma^2 K)``.
``online``
    Sequential draws from the conditional law given all earlier answers.
    The Cholesky factor ``L`` of the conditioning-set Gram (so implicitly
    ``C^{-1} = L^{-T} L^{-1}``) is grown by block (Schur complement)
    updates together with ``L^{-1} xi``, and rebuilt from scratch every
    ``REFRESH_EVERY`` additions. Working with the factor rather than the
    explicit inverse keeps the conditional variance ``1 - |L^{-1} v|^2``
    accurate for badly conditioned Gaussian-kernel histories.
``fast``
    The same conditional law for the 1-d exponential kernel, which is
    Markov: only the nearest stored neighbours on each side matter, so a
    query costs ``O(log i)`` lookups in a sorted index.

Randomness for the ``i``-th draw comes from ``SeedSequence(seed,
spawn_key=(0, i))``, so a sampler restored from its history continues
exactly as an uninterrupted one would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ._linalg import cholesky_jitter, dedup_points
from .errors import NumericError, ParameterError, StateFileError
from .kernels import DUPLICATE_TOL, EXP_L1, KernelSpec, gram

STRATEGIES = ("batch", "online", "fast")
REFRESH_EVERY = 256
NEGATIVE_VAR_TOL = 1e-8
# A history point joins the conditioning set only if its unit-scale
# conditional variance exceeds DEGENERATE_VAR and the bound
# cond(C) <= k * trace(C^{-1}) stays below COND_LIMIT. Otherwise it is
# numerically determined by the set: its stored value is still answered
# exactly, but later draws do not condition on it. Without the bound, dense
# Gaussian-kernel histories drive cond(C) past 1e16 and the conditional
# variance 1 - |L^{-1} v|^2 loses every digit.
DEGENERATE_VAR = 1e-8
COND_LIMIT = 1e10


@dataclass
class QueryState:
    """Ordered history of answered points and the noise drawn at each."""

    dim: int
    points: list = field(default_factory=list)
    noise: list = field(default_factory=list)
    _buf: np.ndarray = field(default=None, init=False, repr=False, compare=False)

    def __len__(self):
        return len(self.noise)

    def append(self, x, value):
        x = np.array(x, dtype=float).reshape(self.dim)
        n = len(self.points)
        if self._buf is None or len(self._buf) < len(self.points):
            self._buf = self.points_array()
        if n == len(self._buf):
            grown = np.empty((max(16, 2 * n), self.dim))
            grown[:n] = self._buf[:n]
            self._buf = grown
        self._buf[n] = x
        self.points.append(x)
        self.noise.append(float(value))

    def points_array(self):
        """History points as an ``(n, dim)`` array (a read-only view)."""
        n = len(self.points)
        if self._buf is None or len(self._buf) < n:
            self._buf = np.vstack(self.points) if n else np.zeros((0, self.dim))
        view = self._buf[:n]
        view.flags.writeable = False
        return view

    @staticmethod
    def format_line(x, value):
        coords = ",".join(format(float(c), ".17g") for c in np.ravel(x))
        return f"{coords};{float(value):.17g}"

    @staticmethod
    def parse_line(line, dim=None):
        try:
            coords, value = line.strip().split(";")
            x = np.array([float(c) for c in coords.split(",")])
            v = float(value)
        except ValueError as exc:
            raise StateFileError(f"malformed state line: {line!r}") from exc
        if dim is not None and x.size != dim:
            raise StateFileError(
                f"state line has {x.size} coordinates, expected {dim}: {line!r}"
            )
        if not (np.all(np.isfinite(x)) and math.isfinite(v)):
            raise StateFileError(f"non-finite value in state line: {line!r}")
        return x, v

    def to_lines(self):
        return [self.format_line(x, v) for x, v in zip(self.points, self.noise)]

    @classmethod
    def from_lines(cls, lines, dim):
        state = cls(dim)
        for line in lines:
            if line.strip():
                state.append(*cls.parse_line(line, dim))
        return state


class NoiseSampler:
    """Lazily evaluated GP noise path with covariance ``sigma^2 * kernel``.

    Parameters
    ----------
    kernel : KernelSpec
    sigma : float
        Noise scale ``c(beta) * delta / alpha``.
    strategy : {"batch", "online", "fast"}
    seed : int
    """

    def __init__(self, kernel: KernelSpec, sigma: float, strategy="online", seed=0):
        if strategy not in STRATEGIES:
            raise ParameterError(f"unknown strategy {strategy!r}")
        if not (sigma >= 0.0) or not math.isfinite(sigma):
            raise ParameterError(f"sigma must be finite and >= 0, got {sigma}")
        if strategy == "fast" and (kernel.variant != EXP_L1 or kernel.dim != 1):
            raise ParameterError("the fast sampler needs a 1-d exp_l1 kernel")
        self.kernel = kernel
        self.sigma = float(sigma)
        self.strategy = strategy
        self.seed = int(seed)
        self.state = QueryState(kernel.dim)
        # generic conditioning set: history indices, the lower Cholesky factor
        # of its unit-scale Gram and L^{-1} xi, stored in growable buffers
        self._cond = []
        self._L = np.zeros((0, 0))
        self._eta = np.zeros(0)
        self._trace_inv = 0.0
        self._since_refresh = 0
        self._generic_synced = 0
        # fast sampler: sorted coordinates and history index of each
        self._xs = []
        self._idx = []
        self.last_probes = 0

    # ------------------------------------------------------------------
    # public API

    def __len__(self):
        return len(self.state)

    def lookup(self, x):
        """History index of a stored point within ``DUPLICATE_TOL``, else None."""
        x = self._point(x)
        if self.strategy == "fast":
            pos = self._bisect(x[0])
            for j in (pos - 1, pos):
                if 0 <= j < len(self._xs) and abs(self._xs[j] - x[0]) <= DUPLICATE_TOL:
                    return self._idx[j]
            return None
        if not len(self.state):
            return None
        pts = self.state.points_array()
        hit = np.flatnonzero(np.max(np.abs(pts - x), axis=1) <= DUPLICATE_TOL)
        return int(hit[0]) if hit.size else None

    def query(self, x):
        """Noise at ``x``: the stored value if seen before, else a fresh draw."""
        if self.strategy == "fast":
            return self.query_online_fast(x)
        return self.query_online_generic(x)

    def query_many(self, points):
        return np.array([self.query(p) for p in self.kernel.as_points(points)])

    def conditional(self, x):
        """Conditional ``(mean, variance)`` of the noise at ``x`` given history."""
        if self.strategy == "fast":
            return self.conditional_fast(x)
        return self.conditional_generic(x)

    def sample_batch(self, points):
        """Joint draw at distinct ``points`` on a fresh sampler."""
        if len(self.state):
            raise ParameterError("sample_batch needs a sampler with empty history")
        pts = self.kernel.as_points(points)
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must be finite")
        if len(pts) == 0:
            return np.zeros(0)
        keep, _ = dedup_points(pts, DUPLICATE_TOL)
        if len(keep) < len(pts):
            raise ParameterError("sample_batch points must be distinct")
        if self.sigma == 0.0:
            noise = np.zeros(len(pts))
        else:
            chol = gram(self.kernel, pts).chol
            z = self._rng(("batch",)).standard_normal(len(pts))
            noise = self.sigma * (chol @ z)
        for p, v in zip(pts, noise):
            self._record(p, v)
        return noise

    def query_online_generic(self, x):
        x = self._point(x)
        hit = self.lookup(x)
        if hit is not None:
            return self.state.noise[hit]
        mean, var = self.conditional_generic(x)
        value = self._draw(mean, var)
        self._record(x, value)
        return value

    def query_online_fast(self, x):
        if self.strategy != "fast":
            raise ParameterError("query_online_fast needs strategy='fast'")
        x = self._point(x)
        hit = self.lookup(x)
        if hit is not None:
            return self.state.noise[hit]
        mean, var = self.conditional_fast(x)
        value = self._draw(mean, var)
        self._record(x, value)
        return value

    def restore(self, state: QueryState):
        """Replace the history with ``state`` (e.g. replayed from disk)."""
        if state.dim != self.kernel.dim:
            raise ParameterError("state dimension does not match the kernel")
        self.__init__(self.kernel, self.sigma, self.strategy, self.seed)
        for x, v in zip(state.points, state.noise):
            x = self._point(x)
            if self.lookup(x) is not None:
                raise StateFileError(f"duplicate point in state: {x.tolist()}")
            self._record(x, v)

    # ------------------------------------------------------------------
    # conditional laws

    def conditional_generic(self, x):
        x = self._point(x)
        hit = self.lookup(x)
        if hit is not None:
            return self.state.noise[hit], 0.0
        self._sync_generic()
        if not self._cond:
            return 0.0, self.sigma ** 2
        k = len(self._cond)
        l = self._whiten(self.state.points_array()[self._cond], x)
        s = self._unit_schur(l, l)
        return float(l @ self._eta[:k]), self.sigma ** 2 * s

    def conditional_fast(self, x):
        x = self._point(x)
        xv = float(x[0])
        n = len(self._xs)
        if n == 0:
            return 0.0, self.sigma ** 2
        pos = self._bisect(xv)
        for j in (pos - 1, pos):
            if 0 <= j < n and abs(self._xs[j] - xv) <= DUPLICATE_TOL:
                return self.state.noise[self._idx[j]], 0.0
        g = self.kernel.gamma
        noise = self.state.noise
        if pos == 0 or pos == n:
            j = 0 if pos == 0 else n - 1
            t = abs(self._xs[j] - xv)
            k = math.exp(-g * t)
            return k * noise[self._idx[j]], self.sigma ** 2 * -math.expm1(-2.0 * g * t)
        xl, xr = self._xs[pos - 1], self._xs[pos]
        a, b, span = xv - xl, xr - xv, xr - xl
        # sinh ratios written with expm1 so nearby points do not cancel
        den = math.expm1(-2.0 * g * span)
        ea, eb = math.expm1(-2.0 * g * a), math.expm1(-2.0 * g * b)
        w_left = math.exp(-g * a) * eb / den
        w_right = math.exp(-g * b) * ea / den
        var = -ea * eb / den
        mean = w_left * noise[self._idx[pos - 1]] + w_right * noise[self._idx[pos]]
        return mean, self.sigma ** 2 * min(max(var, 0.0), 1.0)

    # ------------------------------------------------------------------
    # internals

    def _point(self, x):
        pts = self.kernel.as_points(x)
        if len(pts) != 1:
            raise ParameterError(f"expected a single point, got {len(pts)}")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("query point must be finite")
        return pts[0]

    def _rng(self, key):
        if key == ("batch",):
            spawn = (1,)
        else:
            spawn = (0, int(key[0]))
        ss = np.random.SeedSequence(self.seed, spawn_key=spawn)
        return np.random.Generator(np.random.PCG64(ss))

    def _draw(self, mean, var):
        if var == 0.0:
            return float(mean)
        z = self._rng((len(self.state),)).standard_normal()
        return float(mean + math.sqrt(var) * z)

    def _unit_schur(self, v, w):
        s = 1.0 - float(v @ w)
        if s < -NEGATIVE_VAR_TOL:
            raise NumericError(f"negative conditional variance {s}")
        return min(max(s, 0.0), 1.0)

    def _record(self, x, value):
        idx = len(self.state)
        self.state.append(x, value)
        if self.strategy == "fast":
            pos = self._bisect(float(x[0]))
            self._xs.insert(pos, float(x[0]))
            self._idx.insert(pos, idx)

    def _whiten(self, xc, x):
        """``L^{-1} v`` with ``v`` the kernel column of ``x`` against ``xc``."""
        k = len(xc)
        v = self.kernel.cross(xc, x[None, :])[:, 0]
        return linalg.solve_triangular(self._L[:k, :k], v, lower=True, check_finite=False)

    def _sync_generic(self):
        """Fold history entries not yet in the conditioning set into it."""
        pts = None
        while self._generic_synced < len(self.state):
            i = self._generic_synced
            self._generic_synced += 1
            if pts is None:
                pts = self.state.points_array()
            xi = self.state.noise[i]
            k = len(self._cond)
            if k == 0:
                self._L = np.zeros((8, 8))
                self._L[0, 0] = 1.0
                self._eta = np.empty(8)
                self._eta[0] = xi
                self._cond = [i]
                self._trace_inv = 1.0
                continue
            l = self._whiten(pts[self._cond], pts[i])
            s = 1.0 - float(l @ l)
            if s <= DEGENERATE_VAR:
                continue
            # block inverse: trace grows by (|C^{-1} v|^2 + 1) / s
            w = linalg.solve_triangular(self._L[:k, :k], l, lower=True, trans="T",
                                        check_finite=False)
            trace = self._trace_inv + (float(w @ w) + 1.0) / s
            if (k + 1) * trace > COND_LIMIT:
                continue
            if k == len(self._eta):
                L = np.zeros((2 * k, 2 * k))
                L[:k, :k] = self._L[:k, :k]
                eta = np.empty(2 * k)
                eta[:k] = self._eta[:k]
                self._L, self._eta = L, eta
            d = math.sqrt(s)
            self._L[k, :k] = l
            self._L[k, k] = d
            self._eta[k] = (xi - float(l @ self._eta[:k])) / d
            self._trace_inv = trace
            self._cond.append(i)
            self._since_refresh += 1
            if self._since_refresh >= REFRESH_EVERY:
                self._refresh(pts)

    def _refresh(self, pts):
        k = len(self._cond)
        chol = cholesky_jitter(gram(self.kernel, pts[self._cond]).values)
        self._L[:k, :k] = chol
        xi = np.asarray(self.state.noise)[self._cond]
        self._eta[:k] = linalg.solve_triangular(chol, xi, lower=True)
        linv = linalg.solve_triangular(chol, np.eye(k), lower=True)
        self._trace_inv = float(np.sum(linv * linv))
        self._since_refresh = 0

    def _bisect(self, xv):
        """Insertion index of ``xv`` in the sorted index; counts probes."""
        lo, hi = 0, len(self._xs)
        probes = 0
        while lo < hi:
            mid = (lo + hi) // 2
            probes += 1
            if self._xs[mid] < xv:
                lo = mid + 1
            else:
                hi = mid
        self.last_probes = probes
        return lo


def sample_batch(sampler: NoiseSampler, points):
    return sampler.sample_batch(points)


def query_online_generic(sampler: NoiseSampler, x):
    return sampler.query_online_generic(x)


def query_online_fast(sampler: NoiseSampler, x):
    return sampler.query_online_fast(x)
