"""Desk-scale compressed sensing: RIP certification and sparse recovery by
exhaustive support enumeration.

The restricted isometry constant is taken on unsquared norms:
``(1 - delta)|x| <= |Ax| <= (1 + delta)|x|`` for every S-sparse ``x``, so
``delta_S`` is the largest of ``sigma_max(A_T) - 1`` and ``1 - sigma_min(A_T)``
over column supports ``T`` of size S.
"""
import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .core import (MAX_SWEEPS, RANK_RTOL, as_matrix, as_vector, jacobi_tolerance,
                   singular_values)
from .errors import BudgetExceededError, ConvergenceError, DimensionError

SUPPORT_BUDGET = 10 ** 6
RESIDUAL_TIE = 1e-8
SIGNAL_DISAGREEMENT = 1e-6


@dataclass(frozen=True)
class SparseSignal:
    n: int
    support: tuple
    values: np.ndarray

    def __post_init__(self):
        sup = tuple(int(i) for i in self.support)
        if list(sup) != sorted(set(sup)):
            raise ValueError("support must be sorted and distinct")
        if sup and (sup[0] < 0 or sup[-1] >= self.n):
            raise ValueError(f"support indices must lie in [0, {self.n})")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape != (len(sup),):
            raise ValueError(f"{len(sup)} support entries but {vals.size} values")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "values", vals)

    @property
    def sparsity(self):
        return len(self.support)

    def to_dense(self):
        out = np.zeros(self.n)
        out[list(self.support)] = self.values
        return out

    @classmethod
    def from_dense(cls, x, tol=0.0):
        x = np.asarray(x, dtype=np.float64)
        sup = np.flatnonzero(np.abs(x) > tol)
        return cls(x.size, tuple(sup.tolist()), x[sup])


@dataclass(frozen=True)
class SensingSystem:
    phi: np.ndarray
    psi: np.ndarray | None = None

    def __post_init__(self):
        phi = as_matrix(self.phi, "phi")
        object.__setattr__(self, "phi", phi)
        if self.psi is not None:
            psi = as_matrix(self.psi, "psi")
            n = phi.shape[1]
            if psi.shape != (n, n):
                raise DimensionError(f"psi must be {n}x{n}, got {psi.shape[0]}x{psi.shape[1]}")
            if np.linalg.matrix_rank(psi) < n:
                raise ValueError("psi must be invertible")
            object.__setattr__(self, "psi", psi)

    @property
    def A(self):
        return self.phi if self.psi is None else self.phi @ self.psi


def sense(f, system):
    """Measurements y = Phi f."""
    f = as_vector(f, "f")
    if f.size != system.phi.shape[1]:
        raise DimensionError(f"signal has length {f.size} but phi has {system.phi.shape[1]} columns")
    return system.phi @ f


def _check_budget(n, s, budget):
    if s < 1 or s > n:
        raise ValueError(f"sparsity must lie in [1, {n}], got {s}")
    count = math.comb(n, s)
    if count > budget:
        raise BudgetExceededError(f"C({n}, {s}) = {count} supports exceeds the budget of {budget}")
    return count


@dataclass(frozen=True)
class RipReport:
    S: int
    delta: float
    worst_support: tuple
    supports_checked: int

    def to_dict(self):
        return {"S": self.S, "delta": self.delta, "worst_support": list(self.worst_support),
                "supports_checked": self.supports_checked}


def support_deviation(a, support):
    """max(sigma_max - 1, 1 - sigma_min) for the columns in ``support``."""
    sub = np.ascontiguousarray(as_matrix(a, "A")[:, list(support)])
    sv = singular_values(sub)
    smin = sv[-1] if sub.shape[0] >= sub.shape[1] else 0.0
    return max(sv[0] - 1.0, 1.0 - smin)


def rip_constant(a, s, budget=SUPPORT_BUDGET):
    """Exact unsquared restricted isometry constant of order ``s``."""
    a = as_matrix(a, "A")
    count = _check_budget(a.shape[1], s, budget)
    delta, worst, ok = kernels.rip_scan(a, int(s), MAX_SWEEPS, jacobi_tolerance(max(a.shape[0], s)))
    if not ok:
        raise ConvergenceError("Jacobi SVD did not converge on some support")
    return RipReport(int(s), float(delta), tuple(int(i) for i in worst), count)


@dataclass(frozen=True)
class RecoveryResult:
    signal: SparseSignal
    residual: float
    unique: bool
    competitors: int = field(default=0)


def recover_sparse(a, y, s, budget=SUPPORT_BUDGET):
    """Best S-sparse least-squares fit over every support.

    ``unique`` is False when another support fits within 1e-8 of the best
    residual yet yields a signal differing by more than 1e-6 (max-abs).
    ``competitors`` counts such supports.
    """
    a = as_matrix(a, "A")
    y = as_vector(y, "y")
    if a.shape[0] != y.size:
        raise DimensionError(f"A has {a.shape[0]} rows but y has length {y.size}")
    n = a.shape[1]
    _check_budget(n, s, budget)
    residuals, solutions = kernels.subset_lstsq_scan(a, y, int(s), RANK_RTOL)
    residuals = np.asarray(residuals)
    solutions = np.asarray(solutions)
    best = int(np.argmin(residuals))
    supports = _support_table(n, s)
    dense_best = np.zeros(n)
    dense_best[supports[best]] = solutions[best]
    near = np.flatnonzero(residuals <= residuals[best] + RESIDUAL_TIE)
    competitors = 0
    for i in near:
        if i == best:
            continue
        other = np.zeros(n)
        other[supports[i]] = solutions[i]
        if np.max(np.abs(other - dense_best)) > SIGNAL_DISAGREEMENT:
            competitors += 1
    signal = SparseSignal.from_dense(dense_best)
    return RecoveryResult(signal, float(residuals[best]), competitors == 0, competitors)


def _support_table(n, s):
    """All size-s supports in lexicographic order as an int array."""
    return np.fromiter((i for c in combinations(range(n), s) for i in c),
                       dtype=np.int64, count=math.comb(n, s) * s).reshape(-1, s)


def measurement_bound(s, n, constant):
    """ceil(constant * S * ln(n / S)), never below S."""
    if not 1 <= s <= n:
        raise ValueError(f"need 1 <= S <= n, got S={s}, n={n}")
    if not constant > 0:
        raise ValueError(f"constant must be positive, got {constant}")
    return max(int(math.ceil(constant * s * math.log(n / s))), int(s))


def rip_pairwise_check(a, x1, x2, s=None, budget=SUPPORT_BUDGET, rtol=1e-12):
    """Check the distance sandwich for two sparse signals using delta_{2S}.

    ``s`` defaults to the larger sparsity of the two signals. A relative
    slack of ``rtol`` absorbs rounding.
    """
    a = as_matrix(a, "A")
    n = a.shape[1]
    if x1.n != n or x2.n != n:
        raise DimensionError(f"signals must have length {n}")
    if s is None:
        s = max(x1.sparsity, x2.sparsity, 1)
    union = set(x1.support) | set(x2.support)
    order = min(2 * s, n)
    if len(union) > order:
        raise ValueError(f"difference has {len(union)} nonzeros, more than 2S = {2 * s}")
    delta = rip_constant(a, order, budget).delta
    diff = x1.to_dense() - x2.to_dense()
    dx = float(np.linalg.norm(diff))
    dy = float(np.linalg.norm(a @ diff))
    slack = rtol * max(dx, 1.0)
    return (1 - delta) * dx - slack <= dy <= (1 + delta) * dx + slack
