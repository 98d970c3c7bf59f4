"""Pure-numpy implementations of the hot kernels.

Every function here has a twin in ``_numba`` with the same signature and
semantics. Integer outputs (RNG blocks, tree layouts, enumeration order) are
identical across the two; floating outputs agree to rounding.
"""
import heapq
import itertools
import math

import numpy as np

GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix64_block(key, start, n):
    """Counter-mode SplitMix64: output i is mix(key + (start + i + 1) * gamma)."""
    counters = np.arange(1, n + 1, dtype=np.uint64) + np.uint64(start)
    with np.errstate(over="ignore"):
        z = np.uint64(key) + counters * GOLDEN_GAMMA
        return _mix64(z)


# ---------------------------------------------------------------------------
# one-sided Jacobi SVD

def _jacobi_batch(stack, max_sweeps, tol):
    """One-sided Jacobi on a stack of shape (B, m, r) with m >= r.

    Returns (singular values (B, r) sorted descending, sweeps used, converged
    flags (B,)).
    """
    x = np.array(stack, dtype=np.float64, copy=True)
    b, _, r = x.shape
    active = np.ones(b, dtype=bool)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        rotated = np.zeros(b, dtype=bool)
        for p in range(r - 1):
            for q in range(p + 1, r):
                xp = x[:, :, p]
                xq = x[:, :, q]
                alpha = np.einsum("ij,ij->i", xp, xp)
                beta = np.einsum("ij,ij->i", xq, xq)
                gamma = np.einsum("ij,ij->i", xp, xq)
                hit = active & (np.abs(gamma) > tol * np.sqrt(alpha * beta))
                if not hit.any():
                    continue
                g = np.where(hit, gamma, 1.0)
                zeta = (beta - alpha) / (2.0 * g)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                c = np.where(hit, c, 1.0)[:, None]
                s = np.where(hit, s, 0.0)[:, None]
                new_p = c * xp - s * xq
                new_q = s * xp + c * xq
                x[:, :, p] = new_p
                x[:, :, q] = new_q
                rotated |= hit
        active &= rotated
        if not active.any():
            break
    sv = np.sqrt(np.einsum("bij,bij->bj", x, x))
    sv = -np.sort(-sv, axis=1)
    return sv, sweeps, ~active


def jacobi_singular_values(a, max_sweeps, tol):
    """Singular values of a single tall-or-square matrix (m >= r)."""
    sv, sweeps, conv = _jacobi_batch(a[None, :, :], max_sweeps, tol)
    return sv[0], sweeps, bool(conv[0])


# ---------------------------------------------------------------------------
# least squares via column-pivoted Householder QR + complete orthogonal
# decomposition (minimum-norm solution when rank deficient)

def lstsq(a, y, rtol):
    m, n = a.shape
    r = a.astype(np.float64).copy()
    b = y.astype(np.float64).copy()
    perm = np.arange(n)
    norms = (r * r).sum(axis=0)
    kmax = min(m, n)
    for j in range(kmax):
        piv = j + int(np.argmax(norms[j:]))
        if piv != j:
            r[:, [j, piv]] = r[:, [piv, j]]
            norms[[j, piv]] = norms[[piv, j]]
            perm[[j, piv]] = perm[[piv, j]]
        col = r[j:, j]
        nrm = math.sqrt(float(col @ col))
        if nrm == 0.0:
            break
        v = col.copy()
        v[0] += nrm if v[0] >= 0 else -nrm
        vv = float(v @ v)
        if vv > 0.0:
            r[j:, j:] -= np.outer(v, (2.0 / vv) * (v @ r[j:, j:]))
            b[j:] -= (2.0 / vv) * (v @ b[j:]) * v
        norms[j + 1:] = (r[j + 1:, j + 1:] ** 2).sum(axis=0)
    diag = np.abs(np.diag(r[:kmax, :kmax]))
    rank = 0
    if kmax > 0 and diag[0] > 0.0:
        rank = int(np.sum(diag > rtol * diag[0]))
    z = np.zeros(n)
    if rank > 0:
        top = r[:rank, :]
        c = b[:rank]
        if rank == n:
            z = _back_substitute(top[:, :rank], c)
        else:
            # minimum-norm solve of top @ z = c via QR of top.T
            qt, st = np.linalg.qr(top.T)
            w = _forward_substitute(st.T, c)
            z = qt @ w
    x = np.empty(n)
    x[perm] = z
    res = a @ x - y
    return x, math.sqrt(float(res @ res)), rank


def _back_substitute(u, c):
    n = u.shape[0]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (c[i] - u[i, i + 1:] @ x[i + 1:]) / u[i, i]
    return x


def _forward_substitute(lo, c):
    n = lo.shape[0]
    x = np.zeros(n)
    for i in range(n):
        x[i] = (c[i] - lo[i, :i] @ x[:i]) / lo[i, i]
    return x


# ---------------------------------------------------------------------------
# support enumeration

_CHUNK = 4096


def rip_scan(a, s, max_sweeps, tol):
    """Max over size-s column supports of max(sv_max - 1, 1 - sv_min).

    Returns (delta, worst support, all_converged). Ties keep the
    lexicographically first support.
    """
    m, n = a.shape
    best = -1.0
    worst = None
    ok = True
    combos = itertools.combinations(range(n), s)
    while True:
        chunk = np.array(list(itertools.islice(combos, _CHUNK)), dtype=np.int64)
        if chunk.size == 0:
            break
        sub = a[:, chunk].transpose(1, 0, 2)  # (B, m, s)
        if m < s:
            sub = sub.transpose(0, 2, 1)
            sv, _, conv = _jacobi_batch(sub, max_sweeps, tol)
            sv = np.concatenate([sv, np.zeros((sv.shape[0], s - m))], axis=1)
        else:
            sv, _, conv = _jacobi_batch(sub, max_sweeps, tol)
        ok &= bool(conv.all())
        dev = np.maximum(sv[:, 0] - 1.0, 1.0 - sv[:, -1])
        i = int(np.argmax(dev))
        if dev[i] > best:
            best = float(dev[i])
            worst = chunk[i].copy()
    return best, worst, ok


def subset_lstsq_scan(a, y, s, rtol):
    """Least squares on every size-s column support, lexicographic order."""
    n = a.shape[1]
    total = math.comb(n, s)
    residuals = np.empty(total)
    solutions = np.empty((total, s))
    for i, sup in enumerate(itertools.combinations(range(n), s)):
        x, res, _ = lstsq(a[:, list(sup)], y, rtol)
        residuals[i] = res
        solutions[i] = x
    return residuals, solutions


# ---------------------------------------------------------------------------
# distances

def pairwise_distances(x):
    """Condensed Euclidean distances for i < j in row-major pair order."""
    n = x.shape[0]
    out = np.empty(n * (n - 1) // 2)
    pos = 0
    for i in range(n - 1):
        diff = x[i + 1:] - x[i]
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        out[pos:pos + d.size] = d
        pos += d.size
    return out


# ---------------------------------------------------------------------------
# random-projection trees

def build_tree(data, pool, leaf_size, max_nodes):
    """Recursive median split, preorder-numbered internal directions.

    ``pool`` holds one Gaussian direction per potential internal node; the
    j-th node that gets split consumes row j.
    """
    n = data.shape[0]
    children = np.full((max_nodes, 2), -1, dtype=np.int32)
    thresholds = np.zeros(max_nodes)
    dir_index = np.full(max_nodes, -1, dtype=np.int32)
    leaf_start = np.zeros(max_nodes, dtype=np.int32)
    leaf_end = np.zeros(max_nodes, dtype=np.int32)
    indices = np.arange(n, dtype=np.int32)
    n_nodes = 1
    n_internal = 0
    stack = [(0, 0, n)]
    while stack:
        node, lo, hi = stack.pop()
        leaf_start[node] = lo
        leaf_end[node] = hi
        if hi - lo <= leaf_size:
            continue
        direction = pool[n_internal]
        members = indices[lo:hi]
        proj = data[members] @ direction
        order = np.argsort(proj, kind="mergesort")
        sp = proj[order]
        cnt = hi - lo
        h = cnt // 2
        if cnt % 2 == 0:
            thr = 0.5 * (sp[h - 1] + sp[h])
        else:
            thr = sp[h]
        indices[lo:hi] = members[order]
        dir_index[node] = n_internal
        thresholds[node] = thr
        n_internal += 1
        left, right = n_nodes, n_nodes + 1
        n_nodes += 2
        children[node, 0] = left
        children[node, 1] = right
        stack.append((right, lo + h, hi))
        stack.append((left, lo, lo + h))
    return (children[:n_nodes], thresholds[:n_nodes], dir_index[:n_nodes],
            leaf_start[:n_nodes], leaf_end[:n_nodes], indices, n_nodes, n_internal)


def collect_candidates(children, thresholds, dir_index, directions,
                       leaf_start, leaf_end, indices, q, budget):
    """Margin-ordered traversal across a stacked forest.

    Arrays are stacked per tree (leading axis = tree). Returns candidate row
    indices in discovery order; stops once ``budget`` distinct rows are held
    or every leaf has been visited.
    """
    n_trees = children.shape[0]
    n = indices.shape[1]
    seen = np.zeros(n, dtype=np.bool_)
    out = np.empty(n, dtype=np.int64)
    count = 0
    heap = [(0.0, t, 0) for t in range(n_trees)]
    heapq.heapify(heap)
    proj_cache = directions @ q  # (T, max_internal)
    while heap and count < budget:
        _, t, node = heapq.heappop(heap)
        while children[t, node, 0] >= 0:
            margin = proj_cache[t, dir_index[t, node]] - thresholds[t, node]
            if margin < 0:
                near, far = children[t, node, 0], children[t, node, 1]
            else:
                near, far = children[t, node, 1], children[t, node, 0]
            heapq.heappush(heap, (abs(margin), t, int(far)))
            node = near
        for i in indices[t, leaf_start[t, node]:leaf_end[t, node]]:
            if not seen[i]:
                seen[i] = True
                out[count] = i
                count += 1
    return out[:count]
