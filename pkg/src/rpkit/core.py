"""Dense linear algebra and deterministic sampling shared by every module.

Matrices and vectors are plain float64 numpy arrays; the helpers here
validate shape and finiteness at module boundaries.
"""
import math
from typing import NamedTuple, Sequence

import numpy as np

from . import kernels
from .errors import ConvergenceError, DimensionError

MAX_SWEEPS = 30
SVD_MAX_SIDE = 64
RANK_RTOL = 1e-10
_EPS = np.finfo(np.float64).eps
_MASK64 = (1 << 64) - 1


def as_matrix(a, name="matrix"):
    """Coerce to a finite 2-D float64 array with positive extents."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be nonempty, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)


def as_vector(v, name="vector"):
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 1:
        raise DimensionError(f"{name} must be a nonempty 1-D array, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return np.ascontiguousarray(arr)


def matmul(a, b):
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def singular_values(a, max_sweeps=MAX_SWEEPS):
    """Singular values by one-sided Jacobi, largest first.

    Parameters
    ----------
    a : array_like, shape (m, n)
        Input matrix with ``min(m, n) <= 64``.
    max_sweeps : int
        Sweep bound; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    ndarray of shape (min(m, n),), nonincreasing and nonnegative.
    """
    a = as_matrix(a, "a")
    if min(a.shape) > SVD_MAX_SIDE:
        raise DimensionError(f"singular_values is desk-scale: min side {min(a.shape)} > {SVD_MAX_SIDE}")
    if a.shape[0] < a.shape[1]:
        a = np.ascontiguousarray(a.T)
    sv, sweeps, converged = kernels.jacobi_singular_values(a, max_sweeps, jacobi_tolerance(a.shape[0]))
    if not converged:
        raise ConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")
    return np.asarray(sv)


def jacobi_tolerance(rows):
    """Relative orthogonality threshold for a column pair of length ``rows``."""
    return _EPS * max(rows, 1)


class LeastSquaresResult(NamedTuple):
    solution: np.ndarray
    residual_norm: float
    rank_deficient: bool
    rank: int


def least_squares(a, y, rtol=RANK_RTOL):
    """Minimise ``|a x - y|`` via column-pivoted Householder QR.

    Rank is the count of pivots above ``rtol`` times the leading pivot. When
    rank-deficient the minimum-norm minimiser is returned (complete
    orthogonal decomposition).
    """
    a = as_matrix(a, "a")
    y = as_vector(y, "y")
    if a.shape[0] != y.size:
        raise DimensionError(f"a has {a.shape[0]} rows but y has length {y.size}")
    x, res, rank = kernels.lstsq(a, y, rtol)
    return LeastSquaresResult(np.asarray(x), float(res), rank < a.shape[1], int(rank))


# ---------------------------------------------------------------------------
# random streams

def _mix64(z):
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def _as_u64(value, name):
    value = int(value)
    if value < 0 or value > _MASK64:
        raise ValueError(f"{name} must be an unsigned 64-bit integer, got {value}")
    return value


class RngStream:
    """Counter-based SplitMix64 stream.

    The key is ``mix(mix(seed) ^ mix(stream_id + gamma))``; output ``i`` is
    ``mix(key + (i + 1) * gamma)``. Identical ``(seed, stream_id)`` pairs
    reproduce the identical sequence. Not safe for concurrent use; give each
    worker its own stream_id.
    """

    def __init__(self, seed=0, stream_id=0):
        self.seed = _as_u64(seed, "seed")
        self.stream_id = _as_u64(stream_id, "stream_id")
        gamma = 0x9E3779B97F4A7C15
        self._key = _mix64(_mix64(self.seed) ^ _mix64(self.stream_id + gamma))
        self.counter = 0

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"

    def bits(self, n):
        out = kernels.splitmix64_block(np.uint64(self._key), np.uint64(self.counter), int(n))
        self.counter += int(n)
        return np.asarray(out, dtype=np.uint64)

    def uniform(self, n):
        """Uniform draws on [0, 1) with 53 random bits each."""
        return (self.bits(n) >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)

    def gaussian(self, n):
        """Standard normal draws by Box-Muller; consumes 2*ceil(n/2) counters."""
        pairs = (int(n) + 1) // 2
        u = self.uniform(2 * pairs)
        u1 = 1.0 - u[0::2]
        u2 = u[1::2]
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * pairs)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n]


def sample_gaussian(rng, n):
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return rng.gaussian(n)


def sample_discrete(rng, outcomes: Sequence, n):
    """Draw ``n`` i.i.d. values from ``[(value, probability), ...]``."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if not outcomes:
        raise ValueError("outcomes must be nonempty")
    values = np.array([float(v) for v, _ in outcomes])
    probs = np.array([float(p) for _, p in outcomes])
    if (probs < 0).any():
        raise ValueError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
    cum = np.cumsum(probs)
    u = rng.uniform(n)
    idx = np.searchsorted(cum, u, side="right")
    np.minimum(idx, len(values) - 1, out=idx)
    return values[idx]
