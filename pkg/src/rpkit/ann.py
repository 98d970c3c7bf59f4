"""Approximate nearest neighbours with forests of random-projection trees.

Each tree splits a node's points at the median of their projections onto a
fresh Gaussian direction until a node holds at most ``leaf_size`` rows.
Queries gather candidates from the leaves the query routes to, expanding the
smallest-margin alternative branches across all trees until ``budget``
distinct rows are held, then rank candidates by exact Euclidean distance.
"""
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels
from .core import RngStream, as_matrix, as_vector
from .errors import DimensionError, MatrixFileError

DEFAULT_TREES = 10
DEFAULT_LEAF_SIZE = 16
BUDGET_FACTOR = 10


@dataclass(frozen=True)
class RpTree:
    """Flat tree. Node 0 is the root; leaves have ``children == (-1, -1)``.

    ``indices[leaf_start[v]:leaf_end[v]]`` are the rows held by leaf ``v``.
    Internal node ``v`` splits on ``directions[dir_index[v]]`` at
    ``thresholds[v]``: projections below go left, the rest right.
    """

    children: np.ndarray
    thresholds: np.ndarray
    dir_index: np.ndarray
    directions: np.ndarray
    leaf_start: np.ndarray
    leaf_end: np.ndarray
    indices: np.ndarray

    @property
    def n_nodes(self):
        return self.children.shape[0]

    @property
    def n_internal(self):
        return self.directions.shape[0]

    def leaves(self):
        """Row-index arrays of every leaf, in node order."""
        mask = self.children[:, 0] < 0
        return [self.indices[s:e] for s, e in zip(self.leaf_start[mask], self.leaf_end[mask])]


@dataclass(frozen=True, eq=False)
class RpForest:
    trees: tuple
    data: np.ndarray = field(repr=False)
    leaf_size: int
    seed: int

    @property
    def n_trees(self):
        return len(self.trees)

    @cached_property
    def _stacked(self):
        t = len(self.trees)
        nodes = max(tr.n_nodes for tr in self.trees)
        internal = max(1, max(tr.n_internal for tr in self.trees))
        d = self.data.shape[1]
        children = np.full((t, nodes, 2), -1, dtype=np.int32)
        thresholds = np.zeros((t, nodes))
        dir_index = np.full((t, nodes), -1, dtype=np.int32)
        directions = np.zeros((t, internal, d))
        leaf_start = np.zeros((t, nodes), dtype=np.int32)
        leaf_end = np.zeros((t, nodes), dtype=np.int32)
        indices = np.zeros((t, self.data.shape[0]), dtype=np.int32)
        for i, tr in enumerate(self.trees):
            k = tr.n_nodes
            children[i, :k] = tr.children
            thresholds[i, :k] = tr.thresholds
            dir_index[i, :k] = tr.dir_index
            directions[i, :tr.n_internal] = tr.directions
            leaf_start[i, :k] = tr.leaf_start
            leaf_end[i, :k] = tr.leaf_end
            indices[i] = tr.indices
        return children, thresholds, dir_index, directions, leaf_start, leaf_end, indices


@dataclass(frozen=True)
class QueryResult:
    indices: np.ndarray
    distances: np.ndarray
    candidate_count: int


def _max_leaves(n, leaf_size):
    if n <= leaf_size:
        return 1
    smallest = max(1, (leaf_size + 1) // 2)
    return max(1, n // smallest)


def _build_one(data, leaf_size, seed, tree_id):
    n, d = data.shape
    leaves = _max_leaves(n, leaf_size)
    pool = RngStream(seed, tree_id).gaussian(leaves * d).reshape(leaves, d)
    (children, thresholds, dir_index, leaf_start, leaf_end, indices,
     _, n_internal) = kernels.build_tree(data, pool, leaf_size, 2 * leaves - 1)
    return RpTree(
        children=np.asarray(children),
        thresholds=np.asarray(thresholds),
        dir_index=np.asarray(dir_index),
        directions=pool[:n_internal].copy(),
        leaf_start=np.asarray(leaf_start),
        leaf_end=np.asarray(leaf_end),
        indices=np.asarray(indices),
    )


def build_forest(data, n_trees=DEFAULT_TREES, leaf_size=DEFAULT_LEAF_SIZE, seed=0, threads=1):
    """Build ``n_trees`` trees; tree ``t`` draws directions from stream ``(seed, t)``.

    The result does not depend on ``threads``.
    """
    data = as_matrix(data, "data")
    if n_trees < 1:
        raise ValueError(f"n_trees must be >= 1, got {n_trees}")
    if leaf_size < 1:
        raise ValueError(f"leaf_size must be >= 1, got {leaf_size}")
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trees = list(pool.map(lambda t: _build_one(data, leaf_size, seed, t), range(n_trees)))
    else:
        trees = [_build_one(data, leaf_size, seed, t) for t in range(n_trees)]
    return RpForest(tuple(trees), data, int(leaf_size), int(seed))


def exact_distances(data, rows, q):
    diff = data[rows] - q
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _rank(rows, dists, top_k):
    order = np.lexsort((rows, dists))[:top_k]
    return rows[order], dists[order]


def _check_query(data, q, top_k):
    q = as_vector(q, "q")
    if q.size != data.shape[1]:
        raise DimensionError(f"query has dimension {q.size} but data has {data.shape[1]} columns")
    if top_k < 1:
        raise ValueError(f"top_k must be >= 1, got {top_k}")
    if top_k > data.shape[0]:
        raise ValueError(f"top_k={top_k} exceeds the {data.shape[0]} indexed rows")
    return q


def query(forest, q, top_k=10, budget=None):
    data = forest.data
    q = _check_query(data, q, top_k)
    if budget is None:
        budget = BUDGET_FACTOR * top_k
    if budget < top_k:
        raise ValueError(f"budget={budget} must be >= top_k={top_k}")
    cand = np.asarray(kernels.collect_candidates(*forest._stacked, q, int(budget)), dtype=np.int64)
    rows, dists = _rank(cand, exact_distances(data, cand, q), top_k)
    return QueryResult(rows, dists, int(cand.size))


def query_batch(forest, queries, top_k=10, budget=None, threads=1):
    queries = as_matrix(queries, "queries")
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda q: query(forest, q, top_k, budget), queries))
    return [query(forest, q, top_k, budget) for q in queries]


def brute_force_knn(data, q, top_k):
    """Exact top_k rows by Euclidean distance; ties go to the lower row index."""
    data = as_matrix(data, "data")
    q = _check_query(data, q, top_k)
    rows = np.arange(data.shape[0])
    rows, dists = _rank(rows, exact_distances(data, rows, q), top_k)
    return QueryResult(rows, dists, data.shape[0])


def recall_at_k(forest, data, queries, top_k=10, budget=None):
    """Mean fraction of each query's exact top_k found by the forest."""
    data = as_matrix(data, "data")
    queries = as_matrix(queries, "queries")
    hits = 0.0
    for q in queries:
        approx = query(forest, q, top_k, budget).indices
        exact = brute_force_knn(data, q, top_k).indices
        hits += np.intersect1d(approx, exact).size / top_k
    return hits / queries.shape[0]


# ---------------------------------------------------------------------------
# persistence
#
# "RPKF", version u32, n_trees u32, leaf_size u32, seed u64, n u32, d u32,
# data crc32 u32; then per tree: n_nodes u32, n_internal u32, children
# i32[n_nodes*2], thresholds f64[n_nodes], dir_index i32[n_nodes],
# leaf_start i32[n_nodes], leaf_end i32[n_nodes], directions
# f64[n_internal*d], indices i32[n]. All little-endian.

FOREST_MAGIC = b"RPKF"
_FOREST_VERSION = 1
_FHDR = struct.Struct("<4sIIIQIII")
_THDR = struct.Struct("<II")


def data_checksum(data):
    return zlib.crc32(np.ascontiguousarray(data, dtype="<f8").tobytes())


def save_forest(path, forest):
    n, d = forest.data.shape
    parts = [_FHDR.pack(FOREST_MAGIC, _FOREST_VERSION, forest.n_trees, forest.leaf_size,
                        forest.seed, n, d, data_checksum(forest.data))]
    for tr in forest.trees:
        parts.append(_THDR.pack(tr.n_nodes, tr.n_internal))
        parts.append(tr.children.astype("<i4").tobytes())
        parts.append(tr.thresholds.astype("<f8").tobytes())
        parts.append(tr.dir_index.astype("<i4").tobytes())
        parts.append(tr.leaf_start.astype("<i4").tobytes())
        parts.append(tr.leaf_end.astype("<i4").tobytes())
        parts.append(tr.directions.astype("<f8").tobytes())
        parts.append(tr.indices.astype("<i4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_forest(path, data):
    """Load a forest file and attach it to ``data``, which must match the checksum."""
    path = Path(path)
    data = as_matrix(data, "data")
    try:
        buf = path.read_bytes()
    except OSError as exc:
        raise MatrixFileError(path, exc.strerror or str(exc)) from None
    if len(buf) < _FHDR.size:
        raise MatrixFileError(path, "truncated forest header", f"byte {len(buf)}")
    magic, version, n_trees, leaf_size, seed, n, d, crc = _FHDR.unpack_from(buf)
    if magic != FOREST_MAGIC:
        raise MatrixFileError(path, f"bad magic {magic!r}", "byte 0")
    if version != _FOREST_VERSION:
        raise MatrixFileError(path, f"unsupported version {version}", "byte 4")
    if data.shape != (n, d):
        raise DimensionError(f"forest indexes {n}x{d} data but {data.shape[0]}x{data.shape[1]} was given")
    if data_checksum(data) != crc:
        raise ValueError("data does not match the checksum recorded in the forest file")
    off = _FHDR.size

    def take(dtype, count):
        nonlocal off
        size = np.dtype(dtype).itemsize * count
        if off + size > len(buf):
            raise MatrixFileError(path, "truncated tree payload", f"byte {len(buf)}")
        arr = np.frombuffer(buf, dtype=dtype, count=count, offset=off)
        off += size
        return arr

    trees = []
    for _ in range(n_trees):
        if off + _THDR.size > len(buf):
            raise MatrixFileError(path, "truncated tree header", f"byte {len(buf)}")
        n_nodes, n_internal = _THDR.unpack_from(buf, off)
        off += _THDR.size
        children = take("<i4", 2 * n_nodes).reshape(n_nodes, 2).astype(np.int32)
        thresholds = take("<f8", n_nodes).astype(np.float64)
        dir_index = take("<i4", n_nodes).astype(np.int32)
        leaf_start = take("<i4", n_nodes).astype(np.int32)
        leaf_end = take("<i4", n_nodes).astype(np.int32)
        directions = take("<f8", n_internal * d).reshape(n_internal, d).astype(np.float64)
        indices = take("<i4", n).astype(np.int32)
        trees.append(RpTree(children, thresholds, dir_index, directions, leaf_start, leaf_end, indices))
    if off != len(buf):
        raise MatrixFileError(path, "trailing bytes after last tree", f"byte {off}")
    return RpForest(tuple(trees), data, int(leaf_size), int(seed))
