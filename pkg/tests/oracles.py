"""Independent reference computations used by the tests.

None of these touch rpkit's numeric paths.
"""
import itertools

import mpmath
import numpy as np


def triple_loop_matmul(a, b):
    n, k = len(a), len(a[0])
    m = len(b[0])
    out = [[0.0] * m for _ in range(n)]
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i][t] * b[t][j]
            out[i][j] = acc
    return np.array(out)


def mp_jacobi_singular_values(a, dps=30, max_sweeps=300):
    """One-sided Jacobi in mpmath at ``dps`` digits, returned as floats."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] < a.shape[1]:
        a = a.T
    with mpmath.workdps(dps):
        cols = [[mpmath.mpf(float(a[i, j])) for i in range(a.shape[0])] for j in range(a.shape[1])]
        tol = mpmath.mpf(10) ** (-(dps - 2))
        for _ in range(max_sweeps):
            done = True
            for p in range(len(cols) - 1):
                for q in range(p + 1, len(cols)):
                    x, y = cols[p], cols[q]
                    alpha = mpmath.fsum(v * v for v in x)
                    beta = mpmath.fsum(v * v for v in y)
                    gamma = mpmath.fsum(u * v for u, v in zip(x, y))
                    if abs(gamma) <= tol * mpmath.sqrt(alpha * beta):
                        continue
                    done = False
                    zeta = (beta - alpha) / (2 * gamma)
                    t = mpmath.sign(zeta) / (abs(zeta) + mpmath.sqrt(1 + zeta * zeta)) if zeta != 0 else mpmath.mpf(1)
                    c = 1 / mpmath.sqrt(1 + t * t)
                    s = c * t
                    cols[p] = [c * u - s * v for u, v in zip(x, y)]
                    cols[q] = [s * u + c * v for u, v in zip(x, y)]
            if done:
                break
        else:
            raise RuntimeError("oracle Jacobi did not converge")
        sv = sorted((mpmath.sqrt(mpmath.fsum(v * v for v in col)) for col in cols), reverse=True)
        return [float(v) for v in sv]


def full_sort_knn(data, q, top_k):
    """Sort every row by (distance, index) using Python's sort."""
    rows = []
    for i, row in enumerate(np.asarray(data)):
        d = sum((float(x) - float(y)) ** 2 for x, y in zip(row, q)) ** 0.5
        rows.append((d, i))
    rows.sort()
    return [i for _, i in rows[:top_k]]


def rip_by_numpy(a, s):
    """delta_S with LAPACK singular values over every support."""
    best = -1.0
    for sup in itertools.combinations(range(a.shape[1]), s):
        sv = np.linalg.svd(a[:, list(sup)], compute_uv=False)
        smin = sv[-1] if a.shape[0] >= s else 0.0
        best = max(best, sv[0] - 1.0, 1.0 - smin)
    return best


def plaintext_lloyd(points, init_idx, max_iters=100):
    """Plain Lloyd iterations from given starting rows; returns (labels, cost)."""
    pts = np.asarray(points, dtype=float)
    cent = pts[list(init_idx)].copy()
    assign = None
    for _ in range(max_iters):
        d2 = np.array([[np.sum((p - c) ** 2) for c in cent] for p in pts])
        new = d2.argmin(axis=1)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for c in range(len(cent)):
            if np.any(assign == c):
                cent[c] = pts[assign == c].mean(axis=0)
    cost = sum(float(np.sum((p - cent[a]) ** 2)) for p, a in zip(pts, assign))
    return assign, cost


def plaintext_kmeans(points, starts, max_iters=100):
    """Lowest-cost Lloyd run over the given start sets (earliest wins ties)."""
    best = None
    for init_idx in starts:
        labels, cost = plaintext_lloyd(points, init_idx, max_iters)
        if best is None or cost < best[1]:
            best = (labels, cost)
    return best[0]


def best_permutation_agreement(a, b, clusters):
    """Max fraction of equal labels over relabelings of ``b``."""
    best = 0.0
    for perm in itertools.permutations(range(clusters)):
        mapped = np.array([perm[v] for v in b])
        best = max(best, float(np.mean(mapped == a)))
    return best
