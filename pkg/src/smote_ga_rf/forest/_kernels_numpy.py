"""Pure-numpy fallback for the tree kernels.

Same contracts and the same splitmix64 stream as the numba kernels; the split
search is vectorised per candidate feature instead of looped.
"""
import numpy as np

GAIN_EPS = 1e-12
_MASK = (1 << 64) - 1


class _SplitMix:
    def __init__(self, seed):
        self.state = int(seed) & _MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


def _entropy_rows(counts, totals):
    # counts: (m, C); one entropy per row, classes accumulated in index order
    h = np.zeros(counts.shape[0])
    t = totals.astype(np.float64)
    for c in range(counts.shape[1]):
        cc = counts[:, c]
        nz = cc > 0
        p = cc[nz] / t[nz]
        h[nz] -= p * np.log2(p)
    return h


def _best_split(X, y, rows, cand, n_classes, min_leaf, parent_h):
    # ties within GAIN_EPS: lowest feature, then lowest threshold
    m = rows.shape[0]
    onehot = np.zeros((m, n_classes), dtype=np.int64)
    labels = y[rows]
    total = np.bincount(labels, minlength=n_classes)
    found = []
    for f in cand:
        vals = X[rows, f]
        order = np.argsort(vals, kind="mergesort")
        sv = vals[order]
        onehot[:] = 0
        onehot[np.arange(m), labels[order]] = 1
        left = np.cumsum(onehot, axis=0)[:-1]
        nl = np.arange(1, m)
        nr = m - nl
        ok = (sv[1:] > sv[:-1]) & (nl >= min_leaf) & (nr >= min_leaf)
        if not ok.any():
            continue
        left, nl, nr = left[ok], nl[ok], nr[ok]
        right = total[None, :] - left
        gain = parent_h - (nl / m) * _entropy_rows(left, nl) - (nr / m) * _entropy_rows(right, nr)
        i = int(np.flatnonzero(gain >= gain.max() - GAIN_EPS)[0])
        pos = np.flatnonzero(ok)[i]
        a, b = sv[pos], sv[pos + 1]
        t = 0.5 * (a + b)
        if t >= b:
            t = a
        found.append((float(gain[i]), int(f), float(t)))
    if not found:
        return -1, 0.0, 0.0
    best = max(g for g, _, _ in found)
    if best <= GAIN_EPS:
        return -1, 0.0, 0.0
    g, f, t = next(r for r in found if r[0] >= best - GAIN_EPS)
    return f, t, g


def grow_tree(X, y, sample_idx, n_classes, max_features, min_leaf, max_depth, seed):
    n_features = X.shape[1]
    rng = _SplitMix(seed)
    feature, threshold, left, right, counts, gains = [-1], [0.0], [-1], [-1], [None], [0.0]
    stack = [(0, np.asarray(sample_idx, dtype=np.int64), 0)]
    while stack:
        node, rows, depth = stack.pop()
        m = rows.shape[0]
        cnt = np.bincount(y[rows], minlength=n_classes)
        counts[node] = cnt
        if np.count_nonzero(cnt) <= 1 or m < 2 * min_leaf or (0 <= max_depth <= depth):
            continue
        perm = list(range(n_features))
        for j in range(max_features):
            r = j + rng.next() % (n_features - j)
            perm[j], perm[r] = perm[r], perm[j]
        cand = sorted(perm[:max_features])
        parent_h = _entropy_rows(cnt[None, :], np.array([m]))[0]
        f, t, g = _best_split(X, y, rows, cand, n_classes, min_leaf, parent_h)
        if f < 0:
            continue
        go_left = X[rows, f] <= t
        lid, rid = len(feature), len(feature) + 1
        for _ in range(2):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(None)
            gains.append(0.0)
        feature[node], threshold[node], left[node], right[node], gains[node] = f, t, lid, rid, g
        stack.append((rid, rows[~go_left], depth + 1))
        stack.append((lid, rows[go_left], depth + 1))
    return (
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(counts, dtype=np.int64).reshape(len(feature), n_classes),
        np.array(gains, dtype=np.float64),
    )


def apply_tree(feature, threshold, left, right, X):
    n = X.shape[0]
    node = np.zeros(n, dtype=np.int64)
    active = feature[node] >= 0
    while active.any():
        cur = node[active]
        f = feature[cur]
        go_left = X[np.flatnonzero(active), f] <= threshold[cur]
        node[active] = np.where(go_left, left[cur], right[cur])
        active = feature[node] >= 0
    return node


def tree_seed(base, t):
    rng = _SplitMix((int(base) + int(t) * 0x9E3779B97F4A7C15) & _MASK)
    return rng.next()


def bootstrap(n, seed):
    rng = _SplitMix(int(seed) ^ 0x94D049BB133111EB)
    rows = np.array([rng.next() % n for _ in range(n)], dtype=np.int64)
    return rows, np.bincount(rows, minlength=n).astype(np.int64)
