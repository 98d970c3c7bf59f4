"""numba-compiled twins of the kernels in ``_numpy``."""
import heapq
import math

import numba
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_ONE = np.uint64(1)

_opts = dict(cache=True, nogil=True)


@numba.njit(**_opts)
def splitmix64_block(key, start, n):
    out = np.empty(n, dtype=np.uint64)
    k = np.uint64(key)
    c = np.uint64(start)
    for i in range(n):
        c = c + _ONE
        z = k + c * _GAMMA
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        out[i] = z ^ (z >> _S31)
    return out


@numba.njit(**_opts)
def _jacobi_inplace(x, max_sweeps, tol):
    m, r = x.shape
    sweeps = 0
    converged = False
    for sweep in range(1, max_sweeps + 1):
        sweeps = sweep
        rotated = False
        for p in range(r - 1):
            for q in range(p + 1, r):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for i in range(m):
                    alpha += x[i, p] * x[i, p]
                    beta += x[i, q] * x[i, q]
                    gamma += x[i, p] * x[i, q]
                if abs(gamma) <= tol * math.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                sgn = 1.0 if zeta >= 0 else -1.0
                t = sgn / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for i in range(m):
                    xp = x[i, p]
                    xq = x[i, q]
                    x[i, p] = c * xp - s * xq
                    x[i, q] = s * xp + c * xq
        if not rotated:
            converged = True
            break
    sv = np.empty(r)
    for j in range(r):
        acc = 0.0
        for i in range(m):
            acc += x[i, j] * x[i, j]
        sv[j] = math.sqrt(acc)
    sv = -np.sort(-sv)
    return sv, sweeps, converged


@numba.njit(**_opts)
def jacobi_singular_values(a, max_sweeps, tol):
    x = a.copy()
    return _jacobi_inplace(x, max_sweeps, tol)


@numba.njit(**_opts)
def lstsq(a, y, rtol):
    m, n = a.shape
    r = a.copy()
    b = y.copy()
    perm = np.arange(n)
    norms = np.empty(n)
    for j in range(n):
        acc = 0.0
        for i in range(m):
            acc += r[i, j] * r[i, j]
        norms[j] = acc
    kmax = min(m, n)
    v = np.empty(m)
    for j in range(kmax):
        piv = j
        for c in range(j + 1, n):
            if norms[c] > norms[piv]:
                piv = c
        if piv != j:
            for i in range(m):
                tmp = r[i, j]
                r[i, j] = r[i, piv]
                r[i, piv] = tmp
            tmp = norms[j]
            norms[j] = norms[piv]
            norms[piv] = tmp
            ti = perm[j]
            perm[j] = perm[piv]
            perm[piv] = ti
        nrm = 0.0
        for i in range(j, m):
            nrm += r[i, j] * r[i, j]
        nrm = math.sqrt(nrm)
        if nrm == 0.0:
            break
        vv = 0.0
        for i in range(j, m):
            v[i] = r[i, j]
        v[j] += nrm if v[j] >= 0 else -nrm
        for i in range(j, m):
            vv += v[i] * v[i]
        if vv > 0.0:
            f = 2.0 / vv
            for c in range(j, n):
                dot = 0.0
                for i in range(j, m):
                    dot += v[i] * r[i, c]
                dot *= f
                for i in range(j, m):
                    r[i, c] -= dot * v[i]
            dot = 0.0
            for i in range(j, m):
                dot += v[i] * b[i]
            dot *= f
            for i in range(j, m):
                b[i] -= dot * v[i]
        for c in range(j + 1, n):
            acc = 0.0
            for i in range(j + 1, m):
                acc += r[i, c] * r[i, c]
            norms[c] = acc
    rank = 0
    if kmax > 0 and abs(r[0, 0]) > 0.0:
        lim = rtol * abs(r[0, 0])
        for i in range(kmax):
            if abs(r[i, i]) > lim:
                rank += 1
    z = np.zeros(n)
    if rank > 0:
        if rank == n:
            for i in range(n - 1, -1, -1):
                acc = b[i]
                for c in range(i + 1, n):
                    acc -= r[i, c] * z[c]
                z[i] = acc / r[i, i]
        else:
            top_t = np.ascontiguousarray(r[:rank, :].T)
            qt, st = np.linalg.qr(top_t)
            w = np.zeros(rank)
            for i in range(rank):
                acc = b[i]
                for c in range(i):
                    acc -= st[c, i] * w[c]
                w[i] = acc / st[i, i]
            z = np.ascontiguousarray(qt) @ w
    x = np.empty(n)
    for i in range(n):
        x[perm[i]] = z[i]
    res = 0.0
    for i in range(m):
        acc = -y[i]
        for c in range(n):
            acc += a[i, c] * x[c]
        res += acc * acc
    return x, math.sqrt(res), rank


@numba.njit(**_opts)
def _next_combination(comb, n):
    s = comb.shape[0]
    i = s - 1
    while i >= 0 and comb[i] == n - s + i:
        i -= 1
    if i < 0:
        return False
    comb[i] += 1
    for j in range(i + 1, s):
        comb[j] = comb[j - 1] + 1
    return True


@numba.njit(**_opts)
def rip_scan(a, s, max_sweeps, tol):
    m, n = a.shape
    comb = np.arange(s)
    worst = comb.copy()
    best = -1.0
    ok = True
    tall = m >= s
    if tall:
        sub = np.empty((m, s))
    else:
        sub = np.empty((s, m))
    while True:
        for j in range(s):
            for i in range(m):
                if tall:
                    sub[i, j] = a[i, comb[j]]
                else:
                    sub[j, i] = a[i, comb[j]]
        sv, _, conv = _jacobi_inplace(sub, max_sweeps, tol)
        ok = ok and conv
        smin = sv[-1] if tall else 0.0
        dev = max(sv[0] - 1.0, 1.0 - smin)
        if dev > best:
            best = dev
            worst[:] = comb
        if not _next_combination(comb, n):
            break
    return best, worst, ok


@numba.njit(**_opts)
def subset_lstsq_scan(a, y, s, rtol):
    m, n = a.shape
    total = 1
    for i in range(s):
        total = total * (n - i) // (i + 1)
    residuals = np.empty(total)
    solutions = np.empty((total, s))
    comb = np.arange(s)
    sub = np.empty((m, s))
    for k in range(total):
        for j in range(s):
            for i in range(m):
                sub[i, j] = a[i, comb[j]]
        x, res, _ = lstsq(sub, y, rtol)
        residuals[k] = res
        solutions[k] = x
        _next_combination(comb, n)
    return residuals, solutions


@numba.njit(**_opts)
def pairwise_distances(x):
    n, d = x.shape
    out = np.empty(n * (n - 1) // 2)
    pos = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(d):
                diff = x[j, k] - x[i, k]
                acc += diff * diff
            out[pos] = math.sqrt(acc)
            pos += 1
    return out


@numba.njit(**_opts)
def build_tree(data, pool, leaf_size, max_nodes):
    n, d = data.shape
    children = np.full((max_nodes, 2), -1, dtype=np.int32)
    thresholds = np.zeros(max_nodes)
    dir_index = np.full(max_nodes, -1, dtype=np.int32)
    leaf_start = np.zeros(max_nodes, dtype=np.int32)
    leaf_end = np.zeros(max_nodes, dtype=np.int32)
    indices = np.arange(n).astype(np.int32)
    stack = np.empty((max_nodes, 3), dtype=np.int64)
    top = 0
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    top = 1
    n_nodes = 1
    n_internal = 0
    while top > 0:
        top -= 1
        node = stack[top, 0]
        lo = stack[top, 1]
        hi = stack[top, 2]
        leaf_start[node] = lo
        leaf_end[node] = hi
        cnt = hi - lo
        if cnt <= leaf_size:
            continue
        proj = np.empty(cnt)
        for r in range(cnt):
            row = indices[lo + r]
            acc = 0.0
            for k in range(d):
                acc += data[row, k] * pool[n_internal, k]
            proj[r] = acc
        order = np.argsort(proj, kind="mergesort")
        members = indices[lo:hi].copy()
        for r in range(cnt):
            indices[lo + r] = members[order[r]]
        h = cnt // 2
        if cnt % 2 == 0:
            thr = 0.5 * (proj[order[h - 1]] + proj[order[h]])
        else:
            thr = proj[order[h]]
        dir_index[node] = n_internal
        thresholds[node] = thr
        n_internal += 1
        left = n_nodes
        right = n_nodes + 1
        n_nodes += 2
        children[node, 0] = left
        children[node, 1] = right
        stack[top, 0] = right
        stack[top, 1] = lo + h
        stack[top, 2] = hi
        top += 1
        stack[top, 0] = left
        stack[top, 1] = lo
        stack[top, 2] = lo + h
        top += 1
    return (children[:n_nodes], thresholds[:n_nodes], dir_index[:n_nodes],
            leaf_start[:n_nodes], leaf_end[:n_nodes], indices, n_nodes, n_internal)


@numba.njit(**_opts)
def collect_candidates(children, thresholds, dir_index, directions,
                       leaf_start, leaf_end, indices, q, budget):
    n_trees = children.shape[0]
    n = indices.shape[1]
    d = q.shape[0]
    seen = np.zeros(n, dtype=np.bool_)
    out = np.empty(n, dtype=np.int64)
    count = 0
    heap = [(0.0, np.int64(0), np.int64(0))]
    for t in range(1, n_trees):
        heap.append((0.0, np.int64(t), np.int64(0)))
    heapq.heapify(heap)
    while len(heap) > 0 and count < budget:
        item = heapq.heappop(heap)
        t = item[1]
        node = item[2]
        while children[t, node, 0] >= 0:
            di = dir_index[t, node]
            acc = 0.0
            for k in range(d):
                acc += directions[t, di, k] * q[k]
            margin = acc - thresholds[t, node]
            if margin < 0:
                near = children[t, node, 0]
                far = children[t, node, 1]
            else:
                near = children[t, node, 1]
                far = children[t, node, 0]
            heapq.heappush(heap, (abs(margin), t, np.int64(far)))
            node = np.int64(near)
        for p in range(leaf_start[t, node], leaf_end[t, node]):
            i = indices[t, p]
            if not seen[i]:
                seen[i] = True
                out[count] = i
                count += 1
    return out[:count]
