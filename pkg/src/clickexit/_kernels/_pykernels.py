"""Pure-Python/numpy kernels.

Reference implementation of the hot loops; ``_ckernels.pyx`` mirrors it
operation for operation so both backends produce bit-identical trees.
Entropies are always taken from a shared ``x*log2(x)`` lookup table and
summed in a fixed order for that reason.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
POSITIVE_GAIN = 1e-12
AVERAGE_SLACK = 1e-9


def joint_counts(x, nx, y, ny):
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    flat = np.bincount(x * ny + y, minlength=nx * ny)
    return flat.reshape(nx, ny).astype(np.int64)


def session_breaks(keys, times, timeout):
    """Flag rows that open a new session; input sorted by (key, time)."""
    keys = np.asarray(keys, dtype=np.int64)
    times = np.asarray(times, dtype=np.int64)
    out = np.ones(len(keys), dtype=bool)
    if len(keys) > 1:
        out[1:] = (keys[1:] != keys[:-1]) | ((times[1:] - times[:-1]) > timeout)
    return out


class _SplitMix:
    def __init__(self, seed):
        self.state = seed & _MASK

    def next(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)


def _seq_class_sum(xlx, counts2d):
    # sum over the class axis, left to right
    acc = np.zeros(counts2d.shape[0], dtype=np.float64)
    for c in range(counts2d.shape[1]):
        acc = acc + xlx[counts2d[:, c]]
    return acc


def _seq_sum(values):
    if len(values) == 0:
        return 0.0
    return float(np.add.accumulate(values)[-1])


def _entropy_mass(xlx, counts):
    s = 0.0
    for c in counts:
        s += xlx[c]
    return s


def _eval_nominal(codes, yr, card, n_classes, n, xlx, nh_node, min_leaf):
    cont = np.bincount(
        codes.astype(np.int64) * n_classes + yr, minlength=card * n_classes
    ).reshape(card, n_classes)
    nv = cont.sum(axis=1)
    if int((nv >= min_leaf).sum()) < 2:
        return None
    term = xlx[nv] - _seq_class_sum(xlx, cont)
    nh_child = _seq_sum(term)
    gain = (nh_node - nh_child) / n
    split = (xlx[n] - _seq_sum(xlx[nv])) / n
    return gain, split, np.nan, -1


def _eval_numeric(vals, yr, n_classes, n, xlx, min_leaf):
    known = ~np.isnan(vals)
    kv = vals[known]
    ky = yr[known]
    nk = len(kv)
    nm = n - nk
    if nk < 2 * min_leaf:
        return None
    order = np.argsort(kv, kind="stable")
    sv = kv[order]
    sy = ky[order]
    onehot = np.zeros((nk, n_classes), dtype=np.int64)
    onehot[np.arange(nk), sy] = 1
    left = np.cumsum(onehot, axis=0)
    kc = left[-1]
    nh_known = xlx[nk] - _entropy_mass(xlx, kc)
    idx = np.arange(nk - 1)
    nl = idx + 1
    nr = nk - nl
    ok = (sv[:-1] != sv[1:]) & (nl >= min_leaf) & (nr >= min_leaf)
    if not ok.any():
        return None
    cand = idx[ok]
    lc = left[cand]
    rc = kc[None, :] - lc
    nh_l = xlx[nl[ok]] - _seq_class_sum(xlx, lc)
    nh_r = xlx[nr[ok]] - _seq_class_sum(xlx, rc)
    g = nh_known - (nh_l + nh_r)
    b = int(np.argmax(g))
    i = int(cand[b])
    bl = i + 1
    br = nk - bl
    gain = g[b] / n
    split = (((xlx[n] - xlx[bl]) - xlx[br]) - xlx[nm]) / n
    thr = (sv[i] + sv[i + 1]) / 2.0
    if not thr < sv[i + 1]:
        thr = sv[i]
    return float(gain), float(split), float(thr), 1 if bl >= br else 0


def grow_tree(
    Xn,
    Xc,
    feat_kind,
    feat_pos,
    feat_card,
    y,
    n_classes,
    rows,
    allowed,
    min_leaf,
    max_features,
    gain_ratio,
    seed,
    xlx,
):
    """Grow a classification tree and return it as flat node/edge lists.

    Nominal splits are multiway over observed values, numeric splits binary
    at a midpoint threshold; with ``gain_ratio`` the split maximizes gain
    ratio among candidates whose gain is at least average, otherwise plain
    information gain. An impure node with no positive-gain split still
    splits on its best valid candidate so consistent data is shattered.
    """
    Xn = np.asarray(Xn)
    Xc = np.asarray(Xc)
    y = np.asarray(y, dtype=np.int64)
    rows = np.asarray(rows, dtype=np.int64)
    allowed = [int(a) for a in allowed]
    rng = _SplitMix(seed)

    feature, threshold, missing_branch = [], [], []
    counts, child_start, n_children = [], [], []
    edge_value, edge_child = [], []
    pending = {}

    def new_node(node_rows):
        feature.append(-1)
        threshold.append(float("nan"))
        missing_branch.append(-1)
        counts.append([int(c) for c in np.bincount(y[node_rows], minlength=n_classes)])
        child_start.append(0)
        n_children.append(0)
        pending[len(feature) - 1] = node_rows
        return len(feature) - 1

    stack = [new_node(rows)]
    while stack:
        node = stack.pop()
        node_rows = pending.pop(node)
        cnt = counts[node]
        n = len(node_rows)
        if n < 2 * min_leaf or max(cnt) == n:
            continue
        if 0 < max_features < len(allowed):
            arr = list(allowed)
            for i in range(max_features):
                j = i + rng.next() % (len(arr) - i)
                arr[i], arr[j] = arr[j], arr[i]
            cands = sorted(arr[:max_features])
        else:
            cands = allowed
        yr = y[node_rows]
        nh_node = xlx[n] - _entropy_mass(xlx, cnt)
        results = []
        for f in cands:
            if feat_kind[f] == 0:
                r = _eval_nominal(
                    Xn[node_rows, feat_pos[f]], yr, int(feat_card[f]), n_classes,
                    n, xlx, nh_node, min_leaf,
                )
            else:
                r = _eval_numeric(Xc[node_rows, feat_pos[f]], yr, n_classes, n, xlx, min_leaf)
            if r is not None:
                results.append((f, r))
        if not results:
            continue
        best = None
        if gain_ratio:
            total = 0.0
            npos = 0
            for f, r in results:
                if r[0] > POSITIVE_GAIN:
                    total += r[0]
                    npos += 1
            if npos:
                avg = total / npos
                best_ratio = -np.inf
                for f, r in results:
                    if r[0] > POSITIVE_GAIN and r[0] >= avg - AVERAGE_SLACK:
                        ratio = r[0] / r[1]
                        if ratio > best_ratio:
                            best_ratio = ratio
                            best = (f, r)
        else:
            best_gain = POSITIVE_GAIN
            for f, r in results:
                if r[0] > best_gain:
                    best_gain = r[0]
                    best = (f, r)
        if best is None:
            best = results[0]
        f, (_, _, thr, miss) = best
        feature[node] = f
        threshold[node] = thr
        missing_branch[node] = miss
        child_start[node] = len(edge_value)
        if feat_kind[f] == 0:
            codes = Xn[node_rows, feat_pos[f]]
            parts = [(int(v), node_rows[codes == v]) for v in np.unique(codes)]
        else:
            vals = Xc[node_rows, feat_pos[f]]
            nan = np.isnan(vals)
            go_left = (vals <= thr) | (nan & (miss == 1))
            parts = [(0, node_rows[go_left]), (1, node_rows[~go_left])]
        ids = []
        for value, part in parts:
            child = new_node(part)
            edge_value.append(value)
            edge_child.append(child)
            ids.append(child)
        n_children[node] = len(ids)
        stack.extend(reversed(ids))

    return {
        "feature": feature,
        "threshold": threshold,
        "missing_branch": missing_branch,
        "counts": counts,
        "child_start": child_start,
        "n_children": n_children,
        "edge_value": edge_value,
        "edge_child": edge_child,
    }


def apply_tree(feature, threshold, missing_branch, child_start, n_children,
               edge_value, edge_child, feat_kind, feat_pos, Xn, Xc):
    """Return, per row, the node where descent stops (leaf or unseen value)."""
    n = Xn.shape[0] if Xn.ndim == 2 else Xc.shape[0]
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        node = 0
        while True:
            f = feature[node]
            if f < 0:
                break
            start = child_start[node]
            if feat_kind[f] == 0:
                code = Xn[i, feat_pos[f]]
                nxt = -1
                for e in range(start, start + n_children[node]):
                    if edge_value[e] == code:
                        nxt = edge_child[e]
                        break
                if nxt < 0:
                    break
                node = nxt
            else:
                v = Xc[i, feat_pos[f]]
                if v != v:
                    branch = 0 if missing_branch[node] == 1 else 1
                else:
                    branch = 0 if v <= threshold[node] else 1
                node = edge_child[start + branch]
        out[i] = node
    return out
