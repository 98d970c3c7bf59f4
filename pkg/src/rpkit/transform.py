"""Random projection matrices, the JL dimension bound, and distortion audits."""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import RngStream, as_matrix, sample_discrete, sample_gaussian
from .errors import DimensionError

KINDS = ("gaussian", "sign", "sparse_ternary")
SCALINGS = ("raw", "unit")
ZERO_DISTANCE = 1e-12

_SQRT3 = math.sqrt(3.0)
SIGN_OUTCOMES = ((1.0, 0.5), (-1.0, 0.5))
TERNARY_OUTCOMES = ((_SQRT3, 1.0 / 6.0), (0.0, 2.0 / 3.0), (-_SQRT3, 1.0 / 6.0))


@dataclass(frozen=True)
class JlConfig:
    """Annulus concentration constant ``c``.

    The default 0.25 is a conservative choice; callers who know a sharper
    constant for their setting should pass it explicitly.
    """

    c: float = 0.25

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError(f"annulus constant c must be positive, got {self.c}")


DEFAULT_JL = JlConfig()


def jl_min_dimension(n, eps, cfg=DEFAULT_JL):
    """Smallest k with k >= 3 ln(n) / (c eps^2)."""
    if n < 2:
        raise ValueError(f"need at least 2 points, got n={n}")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    return int(math.ceil(3.0 * math.log(n) / (cfg.c * eps * eps)))


def failure_bound(eps, k, cfg=DEFAULT_JL):
    """Probability bound 3 exp(-c eps^2 k), clipped to [0, 1]."""
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return min(1.0, 3.0 * math.exp(-cfg.c * eps * eps * k))


@dataclass(frozen=True)
class ProjectionSpec:
    kind: str
    input_dim: int
    output_dim: int
    seed: int = 0
    scaling: str = "unit"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown projection kind {self.kind!r}; expected one of {KINDS}")
        if self.scaling not in SCALINGS:
            raise ValueError(f"unknown scaling {self.scaling!r}; expected one of {SCALINGS}")
        if self.input_dim < 1 or self.output_dim < 1:
            raise ValueError(f"dimensions must be >= 1, got d={self.input_dim}, k={self.output_dim}")
        if self.output_dim > self.input_dim:
            warnings.warn(f"output_dim {self.output_dim} exceeds input_dim {self.input_dim}; "
                          "the projection does not reduce dimension", stacklevel=3)

    @property
    def reducing(self):
        return self.output_dim <= self.input_dim


@dataclass(frozen=True)
class ProjectionMatrix:
    spec: ProjectionSpec
    matrix: np.ndarray = field(repr=False)

    @property
    def shape(self):
        return self.matrix.shape


def sample_entries(rng, kind, count):
    """Draw ``count`` unit-variance entries of the given kind."""
    if kind == "gaussian":
        return sample_gaussian(rng, count)
    if kind == "sign":
        return sample_discrete(rng, SIGN_OUTCOMES, count)
    if kind == "sparse_ternary":
        return sample_discrete(rng, TERNARY_OUTCOMES, count)
    raise ValueError(f"unknown projection kind {kind!r}; expected one of {KINDS}")


def sample_projection(spec):
    rng = RngStream(spec.seed, 0)
    k, d = spec.output_dim, spec.input_dim
    m = sample_entries(rng, spec.kind, k * d).reshape(k, d)
    m.flags.writeable = False
    return ProjectionMatrix(spec, m)


def project(data, p):
    """Map rows of ``data`` (n x d) to n x k.

    Row i becomes ``P @ v_i``; with unit scaling it is further divided by
    sqrt(k) so projected distances are comparable to the originals.
    """
    data = as_matrix(data, "data")
    if data.shape[1] != p.spec.input_dim:
        raise DimensionError(f"data has {data.shape[1]} columns but projection expects "
                             f"input_dim {p.spec.input_dim}")
    out = data @ p.matrix.T
    if p.spec.scaling == "unit":
        out = out / math.sqrt(p.spec.output_dim)
    return out


@dataclass(frozen=True)
class DistortionReport:
    pair_count: int
    pass_fraction: float
    max_expansion: float
    max_contraction: float
    epsilon: float

    def to_dict(self):
        return {
            "pair_count": self.pair_count,
            "pass_fraction": self.pass_fraction,
            "max_expansion": self.max_expansion,
            "max_contraction": self.max_contraction,
            "epsilon": self.epsilon,
        }


def distortion_audit(original, projected, eps):
    """Fraction of point pairs whose distance survives within (1 +/- eps).

    ``projected`` must come from unit scaling. Pairs at zero original
    distance pass only if their projected distance is also below 1e-12.
    """
    original = as_matrix(original, "original")
    projected = as_matrix(projected, "projected")
    if original.shape[0] != projected.shape[0]:
        raise DimensionError(f"row counts differ: {original.shape[0]} vs {projected.shape[0]}")
    if original.shape[0] < 2:
        raise ValueError("distortion audit needs at least 2 rows")
    if not 0 < eps < 1:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    d_orig = np.asarray(kernels.pairwise_distances(original))
    d_proj = np.asarray(kernels.pairwise_distances(projected))
    zero = d_orig < ZERO_DISTANCE
    passed = np.where(zero, d_proj < ZERO_DISTANCE,
                      (d_proj >= (1 - eps) * d_orig) & (d_proj <= (1 + eps) * d_orig))
    ratios = d_proj[~zero] / d_orig[~zero]
    if ratios.size:
        expansion = max(0.0, float(ratios.max()) - 1.0)
        contraction = max(0.0, 1.0 - float(ratios.min()))
    else:
        expansion = contraction = 0.0
    return DistortionReport(
        pair_count=int(d_orig.size),
        pass_fraction=float(passed.mean()),
        max_expansion=expansion,
        max_contraction=contraction,
        epsilon=float(eps),
    )
