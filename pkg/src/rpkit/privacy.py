"""Multiplicative random-projection perturbation.

A data owner holding ``X`` (m attributes x n records, records are columns)
releases ``U = R X / (sqrt(k) * sigma_r)`` for a secret ``k x m`` matrix
``R`` with i.i.d. zero-mean entries of variance ``sigma_r**2``. Inner
products, distances and angles between records remain estimable from ``U``
alone; the key ``R`` is returned separately so it can be discarded.
"""
import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .core import RngStream, as_matrix, as_vector, least_squares
from .errors import DimensionError
from .transform import KINDS, sample_entries

UNIT_TOL = 1e-9
DEFAULT_RESTARTS = 10


@dataclass(frozen=True)
class PerturbationKey:
    R: np.ndarray = field(repr=False)
    sigma_r: float
    seed: int = 0
    kind: str = "gaussian"

    @property
    def k(self):
        return self.R.shape[0]

    @property
    def m(self):
        return self.R.shape[1]

    @property
    def fingerprint(self):
        return zlib.crc32(np.ascontiguousarray(self.R, dtype="<f8").tobytes())


@dataclass(frozen=True)
class PerturbedDataset:
    U: np.ndarray = field(repr=False)
    k: int
    sigma_r: float
    column_norms_normalized: bool
    key_fingerprint: int | None = None

    @property
    def n(self):
        return self.U.shape[1]


def sample_key(k, m, sigma_r=1.0, seed=0, kind="gaussian", stream_id=0):
    if kind not in KINDS:
        raise ValueError(f"unknown key distribution {kind!r}; expected one of {KINDS}")
    if k < 1 or m < 1:
        raise ValueError(f"key dimensions must be >= 1, got k={k}, m={m}")
    if not sigma_r > 0:
        raise ValueError(f"sigma_r must be positive, got {sigma_r}")
    r = sample_entries(RngStream(seed, stream_id), kind, k * m).reshape(k, m) * sigma_r
    return PerturbationKey(r, float(sigma_r), int(seed), kind)


def _unit_columns(x):
    return bool(np.all(np.abs(np.linalg.norm(x, axis=0) - 1.0) <= UNIT_TOL))


def apply_key(X, key):
    X = as_matrix(X, "X")
    if X.shape[0] != key.m:
        raise DimensionError(f"X has {X.shape[0]} attribute rows but the key expects m={key.m}")
    U = key.R @ X / (math.sqrt(key.k) * key.sigma_r)
    return PerturbedDataset(U, key.k, key.sigma_r, _unit_columns(X), key.fingerprint)


def perturb(X, k, sigma_r=1.0, seed=0, kind="gaussian", privacy=True):
    """Perturb ``X`` (m x n) down to ``k`` rows.

    With ``privacy=True`` the call refuses ``k >= m``: a square or tall key
    that leaks can be inverted exactly (see :func:`attack_exact`).

    Returns
    -------
    (PerturbedDataset, PerturbationKey)
    """
    X = as_matrix(X, "X")
    m = X.shape[0]
    if privacy and k >= m:
        raise ValueError(f"k={k} >= m={m}: in privacy mode k must be below the attribute count, "
                         "otherwise a disclosed key recovers X exactly")
    key = sample_key(k, m, sigma_r, seed, kind)
    return apply_key(X, key), key


@dataclass(frozen=True)
class GramCheck:
    mean_gram: np.ndarray = field(repr=False)
    expected_diag: float
    max_diag_deviation: float
    max_offdiag_deviation: float

    @property
    def max_deviation(self):
        return max(self.max_diag_deviation, self.max_offdiag_deviation)


def gram_expectation_check(k, m, sigma_r=1.0, trials=10_000, seed=0, kind="gaussian"):
    """Average R^T R over fresh keys and compare with k sigma_r^2 I."""
    if trials < 100:
        raise ValueError(f"trials must be >= 100, got {trials}")
    acc = np.zeros((m, m))
    for t in range(trials):
        r = sample_key(k, m, sigma_r, seed, kind, stream_id=t).R
        acc += r.T @ r
    mean = acc / trials
    expected = k * sigma_r ** 2
    off = mean - np.diag(np.diag(mean))
    return GramCheck(
        mean_gram=mean,
        expected_diag=expected,
        max_diag_deviation=float(np.max(np.abs(np.diag(mean) - expected))),
        max_offdiag_deviation=float(np.max(np.abs(off))),
    )


def estimate_inner(U, V):
    """Estimate X^T Y from two releases made with the same key."""
    if U.k != V.k or U.sigma_r != V.sigma_r:
        raise ValueError(f"releases disagree on (k, sigma_r): ({U.k}, {U.sigma_r}) vs ({V.k}, {V.sigma_r})")
    if (U.key_fingerprint is not None and V.key_fingerprint is not None
            and U.key_fingerprint != V.key_fingerprint):
        raise ValueError("releases were produced with different keys")
    return U.U.T @ V.U


def _clipped(u, v):
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    if u.size != v.size:
        raise DimensionError(f"vectors differ in length: {u.size} vs {v.size}")
    return min(1.0, max(-1.0, float(u @ v)))


def estimate_cosine(u, v):
    """Cosine of the source angle; equals the inner estimate for unit-norm sources."""
    return _clipped(u, v)


estimate_correlation = estimate_cosine


def estimate_distance(u, v):
    """sqrt(2 - 2 u.v) with u.v clipped to [-1, 1]; assumes unit-norm sources."""
    return math.sqrt(2.0 - 2.0 * _clipped(u, v))


def estimate_distances(ds):
    """All pairwise record distances estimated from a release (any norms)."""
    g = ds.U.T @ ds.U
    sq = np.diag(g)[:, None] + np.diag(g)[None, :] - 2.0 * g
    return np.sqrt(np.maximum(sq, 0.0))


@dataclass(frozen=True)
class EstimatorErrorStats:
    trials: int
    mean_error: float
    variance: float
    variance_bound: float

    @property
    def standard_error(self):
        return math.sqrt(self.variance / self.trials)


def _require_unit(v, name):
    v = as_vector(v, name)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise ValueError(f"{name} must have unit norm, has norm {np.linalg.norm(v)!r}")
    return v


def estimator_error_stats(x, y, k, sigma_r=1.0, trials=10_000, seed=0, kind="gaussian"):
    """Empirical mean and variance of u.v - x.y over fresh keys."""
    x = _require_unit(x, "x")
    y = _require_unit(y, "y")
    if x.size != y.size:
        raise DimensionError(f"x and y differ in length: {x.size} vs {y.size}")
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    pair = np.stack([x, y], axis=1)
    truth = float(x @ y)
    errors = np.empty(trials)
    for t in range(trials):
        key = sample_key(k, x.size, sigma_r, seed, kind, stream_id=t)
        uv = key.R @ pair / (math.sqrt(k) * sigma_r)
        errors[t] = uv[:, 0] @ uv[:, 1] - truth
    return EstimatorErrorStats(trials, float(errors.mean()), float(errors.var(ddof=1)), 2.0 / k)


@dataclass(frozen=True)
class ExactAttackResult:
    reconstruction: np.ndarray = field(repr=False)
    unique: bool
    residual_norms: np.ndarray = field(repr=False)

    @property
    def verdict(self):
        return "unique" if self.unique else "non-unique"


def attack_exact(U, key):
    """Invert a release with a disclosed key by per-record least squares.

    Solves ``R x = sqrt(k) sigma_r u`` for every column. When ``R`` has
    fewer rows than columns the system is underdetermined and only the
    minimum-norm member of an infinite solution set is returned.
    """
    if U.k != key.k:
        raise DimensionError(f"release has k={U.k} but key has k={key.k}")
    rhs = U.U * (math.sqrt(key.k) * key.sigma_r)
    cols = []
    residuals = []
    unique = True
    for j in range(rhs.shape[1]):
        res = least_squares(key.R, rhs[:, j])
        cols.append(res.solution)
        residuals.append(res.residual_norm)
        unique &= not res.rank_deficient
    return ExactAttackResult(np.stack(cols, axis=1), bool(unique), np.array(residuals))


@dataclass(frozen=True)
class AttackEstimateStats:
    trials: int
    mean: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)
    predicted_variance: float

    @property
    def standard_error(self):
        return np.sqrt(self.variance / self.trials)


def attack_estimate(u, m, sigma_hat=1.0, trials=10_000, seed=0, kind="gaussian"):
    """Attacker guesses a key from the known distribution and back-projects.

    ``u`` is a single released record (length k). Each trial draws a fresh
    guess ``R_hat`` and forms ``R_hat^T u / (sqrt(k) sigma_hat)``. For a
    fixed ``u`` every element has mean 0 and variance ``|u|^2 / k``.
    """
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.size < 1 or not np.isfinite(u).all():
        raise ValueError("u must be a nonempty finite vector")
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    k = u.size
    est = np.empty((trials, m))
    scale = math.sqrt(k) * sigma_hat
    for t in range(trials):
        guess = sample_key(k, m, sigma_hat, seed, kind, stream_id=t).R
        est[t] = guess.T @ u / scale
    return AttackEstimateStats(trials, est.mean(axis=0), est.var(axis=0, ddof=1), float(u @ u) / k)


def simulate_attack_estimate(x, k, sigma_r=1.0, sigma_hat=1.0, trials=10_000, seed=0, kind="gaussian"):
    """Attack statistics averaged over both the owner's key and the guess.

    Trial ``t`` releases ``x`` under key stream ``2t`` and guesses with stream
    ``2t + 1``. Each estimated element then has mean 0 and variance
    ``|x|^2 / k``.
    """
    x = as_vector(x, "x")
    if trials < 2:
        raise ValueError(f"trials must be >= 2, got {trials}")
    m = x.size
    est = np.empty((trials, m))
    for t in range(trials):
        owner = sample_key(k, m, sigma_r, seed, kind, stream_id=2 * t).R
        guess = sample_key(k, m, sigma_hat, seed, kind, stream_id=2 * t + 1).R
        u = owner @ x / (math.sqrt(k) * sigma_r)
        est[t] = guess.T @ u / (math.sqrt(k) * sigma_hat)
    return AttackEstimateStats(trials, est.mean(axis=0), est.var(axis=0, ddof=1), float(x @ x) / k)


# ---------------------------------------------------------------------------
# applications: clustering and a perceptron on released columns

@dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray = field(repr=False)
    iterations: int
    converged: bool
    cost: float


def initial_centroid_indices(n, clusters, seed, restart=0):
    """Distinct record indices used as starting centroids for one restart.

    The choice depends only on ``(n, clusters, seed, restart)``, never on the
    data, so plaintext and perturbed runs can start from the same records.
    """
    order = np.argsort(RngStream(seed, restart).uniform(n), kind="stable")
    return np.sort(order[:clusters])


def _lloyd_once(points, start, max_iters):
    centroids = points[start].copy()
    n = points.shape[0]
    assign = np.full(n, -1)
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new = np.argmin(d2, axis=1)
        if np.array_equal(new, assign):
            converged = True
            break
        assign = new
        for c in range(centroids.shape[0]):
            members = points[assign == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
    cost = float(((points - centroids[assign]) ** 2).sum())
    return KMeansResult(assign, centroids, it, converged, cost)


def lloyd(points, clusters, max_iters=100, seed=0, restarts=DEFAULT_RESTARTS):
    """Lloyd's k-means on the rows of ``points``, best of ``restarts`` starts.

    Each start takes distinct seeded rows as centroids; an empty cluster keeps
    its previous centroid; distance ties go to the lower cluster index; among
    restarts the lowest cost wins, ties to the earliest.
    """
    points = as_matrix(points, "points")
    n = points.shape[0]
    if clusters < 1:
        raise ValueError(f"clusters must be >= 1, got {clusters}")
    if clusters > n:
        raise ValueError(f"clusters={clusters} exceeds the {n} records")
    if restarts < 1:
        raise ValueError(f"restarts must be >= 1, got {restarts}")
    best = None
    for r in range(restarts):
        res = _lloyd_once(points, initial_centroid_indices(n, clusters, seed, r), max_iters)
        if best is None or res.cost < best.cost:
            best = res
    return best


def kmeans_perturbed(U, clusters, max_iters=100, seed=0, restarts=DEFAULT_RESTARTS):
    """k-means over released records; only columns of ``U`` are touched."""
    return lloyd(U.U.T, clusters, max_iters, seed, restarts)


@dataclass(frozen=True)
class PerceptronResult:
    weights: np.ndarray
    bias: float
    accuracy: float
    tie_label: int
    epochs: int


def perceptron_perturbed(U, labels, epochs=20, seed=0):
    """Perceptron trained on released columns.

    ``labels`` take two values (``{-1, 1}`` or ``{0, 1}``). A zero score
    predicts the majority training label (+1 on an exact split), so an
    untrained model scores the majority fraction and a single-class set is
    already separated. Sample order is reshuffled from ``seed`` each epoch.
    """
    X = U.U.T if isinstance(U, PerturbedDataset) else as_matrix(U, "U").T
    y = np.asarray(labels).ravel()
    if y.size != X.shape[0]:
        raise DimensionError(f"{y.size} labels for {X.shape[0]} records")
    classes = np.unique(y)
    if classes.size > 2:
        raise ValueError(f"labels must be binary, found {classes.size} classes")
    if set(classes.tolist()) <= {0, 1}:
        y = np.where(y == 1, 1, -1)
    elif not set(classes.tolist()) <= {-1, 1}:
        raise ValueError("labels must be in {-1, 1} or {0, 1}")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")
    tie = 1 if (y == 1).sum() >= (y == -1).sum() else -1
    w = np.zeros(X.shape[1])
    b = 0.0
    rng = RngStream(seed, 0)

    def predict(scores):
        return np.where(scores > 0, 1, np.where(scores < 0, -1, tie))

    for _ in range(epochs):
        order = np.argsort(rng.uniform(len(y)), kind="stable")
        mistakes = 0
        for i in order:
            if predict(np.array([X[i] @ w + b]))[0] != y[i]:
                w += y[i] * X[i]
                b += y[i]
                mistakes += 1
        if mistakes == 0:
            break
    acc = float(np.mean(predict(X @ w + b) == y))
    return PerceptronResult(w, b, acc, tie, epochs)
