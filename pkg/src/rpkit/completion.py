"""Matrix-completion formula utilities.

Nuclear norm, subspace coherence and the observed-entry lower bound, plus a
feasibility check for candidate completions. No solver is provided.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .core import as_matrix, singular_values
from .errors import DimensionError

RANK_RTOL = 1e-9


def nuclear_norm(x):
    """Sum of singular values."""
    return float(np.sum(singular_values(x)))


def coherence(basis, tol=1e-8):
    """mu(U) = (n / r) * max_i |row_i(U)|^2 for an orthonormal n x r basis.

    Lies in [1, n / r].
    """
    u = as_matrix(basis, "basis")
    n, r = u.shape
    if r > n:
        raise DimensionError(f"basis has more columns ({r}) than rows ({n})")
    gram = u.T @ u
    if np.max(np.abs(gram - np.eye(r))) > tol:
        raise ValueError("basis columns are not orthonormal")
    return float(n / r * np.max(np.einsum("ij,ij->i", u, u)))


@dataclass(frozen=True)
class CoherenceParams:
    mu0: float
    r: int
    n: int

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError(f"mu0 must be positive, got {self.mu0}")
        if self.r < 1:
            raise ValueError(f"rank r must be >= 1, got {self.r}")
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")

    @property
    def mu1(self):
        return self.mu0 * math.sqrt(self.r)


def sample_count_bound(params, beta, C=1.0):
    """ceil(C max(mu1^2, sqrt(mu0) mu1, mu0 n^(1/4)) n r beta ln n)."""
    if not beta > 2:
        raise ValueError(f"beta={beta} must exceed 2 for the completion to be solvable w.h.p.")
    if not C > 0:
        raise ValueError(f"C must be positive, got {C}")
    mu0, mu1, n, r = params.mu0, params.mu1, params.n, params.r
    lead = max(mu1 ** 2, math.sqrt(mu0) * mu1, mu0 * n ** 0.25)
    return int(math.ceil(C * lead * n * r * beta * math.log(n)))


@dataclass(frozen=True)
class ObservedMatrix:
    shape: tuple
    rows: np.ndarray = field(repr=False)
    cols: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.int64)
        cols = np.asarray(self.cols, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ValueError("rows, cols and values must have equal length")
        n1, n2 = self.shape
        if rows.size and (rows.min() < 0 or rows.max() >= n1 or cols.min() < 0 or cols.max() >= n2):
            raise ValueError(f"observed location outside shape {self.shape}")
        if not np.isfinite(vals).all():
            raise ValueError("observed values must be finite")
        object.__setattr__(self, "shape", (int(n1), int(n2)))
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_mask(cls, y, mask):
        y = np.asarray(y, dtype=np.float64)
        rows, cols = np.nonzero(mask)
        return cls(y.shape, rows, cols, y[rows, cols])


@dataclass(frozen=True)
class CompletionCheck:
    feasible: bool
    rank: int
    nuclear_norm: float
    max_violation: float


def check_completion(candidate, observed, tol=1e-9):
    x = as_matrix(candidate, "candidate")
    if x.shape != observed.shape:
        raise DimensionError(f"candidate is {x.shape[0]}x{x.shape[1]} but observations are "
                             f"{observed.shape[0]}x{observed.shape[1]}")
    gap = np.abs(x[observed.rows, observed.cols] - observed.values)
    worst = float(gap.max()) if gap.size else 0.0
    sv = singular_values(x)
    rank = int(np.sum(sv > RANK_RTOL * sv[0])) if sv[0] > 0 else 0
    return CompletionCheck(worst <= tol, rank, float(sv.sum()), worst)
