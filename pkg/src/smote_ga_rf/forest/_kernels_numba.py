"""numba kernels: tree growth and routing over flat node arrays.

A tree is five parallel arrays indexed by node id: ``feature`` (-1 on
leaves), ``threshold``, ``left``, ``right`` and ``counts`` (node x class,
weighted by bootstrap multiplicity).  Rows with ``x[feature] <= threshold`` go
left.  Node ids follow creation order; the left child is expanded first.
"""
import numpy as np
from numba import njit

GAIN_EPS = 1e-12

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


@njit(cache=True, nogil=True)
def _next(state):
    # splitmix64
    state[0] += _GOLDEN
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


@njit(cache=True, nogil=True)
def _entropy(counts, total):
    h = 0.0
    for c in range(counts.shape[0]):
        if counts[c] > 0:
            p = counts[c] / total
            h -= p * np.log2(p)
    return h


@njit(cache=True, nogil=True)
def _best_split(X, y, idx, start, end, cand, n_classes, min_leaf, parent_h,
                vals_buf, labels, gain_buf, left, right, total):
    # Gains within GAIN_EPS of the best count as ties: the lowest feature wins,
    # then the lowest threshold within that feature.
    m = end - start
    n_cand = cand.shape[0]
    f_gain = np.full(n_cand, -np.inf)
    f_thr = np.zeros(n_cand)
    vals = vals_buf[:m]
    total[:] = 0
    for i in range(m):
        total[y[idx[start + i]]] += 1
    for ci in range(n_cand):
        f = cand[ci]
        for i in range(m):
            vals[i] = X[idx[start + i], f]
        order = np.argsort(vals)
        for i in range(m):
            labels[i] = y[idx[start + order[i]]]
        left[:] = 0
        top = -np.inf
        for i in range(m - 1):
            left[labels[i]] += 1
            gain_buf[i] = -np.inf
            if vals[order[i + 1]] <= vals[order[i]]:
                continue
            nl = i + 1
            nr = m - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            for c in range(n_classes):
                right[c] = total[c] - left[c]
            g = parent_h - (nl / m) * _entropy(left, nl) - (nr / m) * _entropy(right, nr)
            gain_buf[i] = g
            if g > top:
                top = g
        if top == -np.inf:
            continue
        for i in range(m - 1):
            if gain_buf[i] >= top - GAIN_EPS:
                a = vals[order[i]]
                b = vals[order[i + 1]]
                t = 0.5 * (a + b)
                if t >= b:
                    t = a
                f_gain[ci] = gain_buf[i]
                f_thr[ci] = t
                break
    best = -np.inf
    for ci in range(n_cand):
        if f_gain[ci] > best:
            best = f_gain[ci]
    if best <= GAIN_EPS:
        return -1, 0.0, 0.0
    for ci in range(n_cand):
        if f_gain[ci] >= best - GAIN_EPS:
            return cand[ci], f_thr[ci], f_gain[ci]
    return -1, 0.0, 0.0


@njit(cache=True, nogil=True)
def grow_tree(X, y, sample_idx, n_classes, max_features, min_leaf, max_depth, seed):
    n_features = X.shape[1]
    m0 = sample_idx.shape[0]
    cap = 2 * m0 - 1 if m0 > 0 else 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    counts = np.zeros((cap, n_classes), dtype=np.int64)
    gains = np.zeros(cap)

    idx = sample_idx.copy()
    buf = np.empty_like(idx)
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed)
    perm = np.empty(n_features, dtype=np.int64)
    vals_buf = np.empty(max(m0, 1))
    labels_buf = np.empty(max(m0, 1), dtype=np.int64)
    gain_buf = np.empty(max(m0, 1))
    c_left = np.zeros(n_classes, dtype=np.int64)
    c_right = np.zeros(n_classes, dtype=np.int64)
    c_total = np.zeros(n_classes, dtype=np.int64)

    st_node = np.empty(cap, dtype=np.int64)
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    top = 0
    st_node[0] = 0
    st_start[0] = 0
    st_end[0] = m0
    st_depth[0] = 0
    top = 1
    n_nodes = 1

    while top > 0:
        top -= 1
        node = st_node[top]
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        m = end - start
        for i in range(start, end):
            counts[node, y[idx[i]]] += 1
        n_present = 0
        for c in range(n_classes):
            if counts[node, c] > 0:
                n_present += 1
        if n_present <= 1 or m < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth):
            continue

        for j in range(n_features):
            perm[j] = j
        for j in range(max_features):
            r = j + np.int64(_next(state) % np.uint64(n_features - j))
            tmp = perm[j]
            perm[j] = perm[r]
            perm[r] = tmp
        cand = np.sort(perm[:max_features])

        parent_h = _entropy(counts[node], m)
        f, t, g = _best_split(X, y, idx, start, end, cand, n_classes, min_leaf, parent_h,
                              vals_buf, labels_buf, gain_buf, c_left, c_right, c_total)
        if f < 0:
            continue

        nl = 0
        nr = 0
        for i in range(start, end):
            r = idx[i]
            if X[r, f] <= t:
                idx[start + nl] = r
                nl += 1
            else:
                buf[nr] = r
                nr += 1
        for i in range(nr):
            idx[start + nl + i] = buf[i]

        lid = n_nodes
        rid = n_nodes + 1
        n_nodes += 2
        feature[node] = f
        threshold[node] = t
        left[node] = lid
        right[node] = rid
        gains[node] = g

        st_node[top] = rid
        st_start[top] = start + nl
        st_end[top] = end
        st_depth[top] = depth + 1
        top += 1
        st_node[top] = lid
        st_start[top] = start
        st_end[top] = start + nl
        st_depth[top] = depth + 1
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        counts[:n_nodes].copy(),
        gains[:n_nodes].copy(),
    )


@njit(cache=True, nogil=True)
def apply_tree(feature, threshold, left, right, X):
    """Leaf id reached by each row of ``X``."""
    n = X.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@njit(cache=True, nogil=True)
def tree_seed(base, t):
    """Kernel seed for tree ``t``: one splitmix step over ``base + t``."""
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(base) + np.uint64(t) * _GOLDEN
    return _next(state)


@njit(cache=True, nogil=True)
def bootstrap(n, seed):
    """``n`` row draws with replacement, then the multiplicity of every row."""
    state = np.empty(1, dtype=np.uint64)
    state[0] = np.uint64(seed) ^ _MIX2
    rows = np.empty(n, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        r = np.int64(_next(state) % np.uint64(n))
        rows[i] = r
        counts[r] += 1
    return rows, counts
