# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; arithmetic mirrors ``_pykernels`` step for step."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free, qsort
from libc.string cimport memset
from libc.math cimport isnan, INFINITY
from libc.stdint cimport uint64_t, int64_t, int32_t

cnp.import_array()

cdef double POSITIVE_GAIN = 1e-12
cdef double AVERAGE_SLACK = 1e-9


ctypedef struct ValClass:
    double v
    int64_t y


cdef int _cmp_valclass(const void* a, const void* b) noexcept nogil:
    cdef double x = (<ValClass*>a).v
    cdef double z = (<ValClass*>b).v
    if x < z:
        return -1
    if x > z:
        return 1
    return 0


def joint_counts(x, Py_ssize_t nx, y, Py_ssize_t ny):
    cdef cnp.int64_t[:] xv = np.ascontiguousarray(x, dtype=np.int64)
    cdef cnp.int64_t[:] yv = np.ascontiguousarray(y, dtype=np.int64)
    out = np.zeros((nx, ny), dtype=np.int64)
    cdef cnp.int64_t[:, :] ov = out
    cdef Py_ssize_t i
    for i in range(xv.shape[0]):
        ov[xv[i], yv[i]] += 1
    return out


def session_breaks(keys, times, int64_t timeout):
    cdef cnp.int64_t[:] kv = np.ascontiguousarray(keys, dtype=np.int64)
    cdef cnp.int64_t[:] tv = np.ascontiguousarray(times, dtype=np.int64)
    cdef Py_ssize_t n = kv.shape[0]
    out = np.ones(n, dtype=bool)
    cdef cnp.uint8_t[:] ov = out.view(np.uint8)
    cdef Py_ssize_t i
    for i in range(1, n):
        ov[i] = (kv[i] != kv[i - 1]) or (tv[i] - tv[i - 1] > timeout)
    return out


cdef inline uint64_t _splitmix(uint64_t* state) noexcept nogil:
    state[0] += <uint64_t>0x9E3779B97F4A7C15
    cdef uint64_t z = state[0]
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef class _Grower:
    cdef cnp.int32_t[:, :] Xn
    cdef double[:, :] Xc
    cdef cnp.int32_t[:] kind
    cdef cnp.int32_t[:] pos
    cdef cnp.int32_t[:] card
    cdef cnp.int64_t[:] y
    cdef int C
    cdef int min_leaf
    cdef double[:] xlx
    cdef int64_t* cont
    cdef int64_t* nv
    cdef int64_t* left
    cdef int64_t* kc
    cdef ValClass* buf
    # best candidate of the current feature
    cdef double r_gain, r_split, r_thr
    cdef int r_miss

    def __cinit__(self, Xn, Xc, kind, pos, card, y, int C, int min_leaf, xlx, Py_ssize_t max_rows):
        self.Xn = Xn
        self.Xc = Xc
        self.kind = kind
        self.pos = pos
        self.card = card
        self.y = y
        self.C = C
        self.min_leaf = min_leaf
        self.xlx = xlx
        cdef Py_ssize_t maxcard = 1
        cdef Py_ssize_t f
        for f in range(card.shape[0]):
            if card[f] > maxcard:
                maxcard = card[f]
        self.cont = <int64_t*>malloc(maxcard * C * sizeof(int64_t))
        self.nv = <int64_t*>malloc(maxcard * sizeof(int64_t))
        self.left = <int64_t*>malloc(C * sizeof(int64_t))
        self.kc = <int64_t*>malloc(C * sizeof(int64_t))
        self.buf = <ValClass*>malloc((max_rows + 1) * sizeof(ValClass))
        if not (self.cont and self.nv and self.left and self.kc and self.buf):
            raise MemoryError()

    def __dealloc__(self):
        free(self.cont)
        free(self.nv)
        free(self.left)
        free(self.kc)
        free(self.buf)

    cdef bint eval_nominal(self, cnp.int64_t[:] rows, int f, Py_ssize_t n, double nh_node):
        cdef int C = self.C
        cdef int p = self.pos[f]
        cdef Py_ssize_t k = self.card[f]
        cdef Py_ssize_t i, v, c
        cdef int64_t r
        memset(self.cont, 0, k * C * sizeof(int64_t))
        memset(self.nv, 0, k * sizeof(int64_t))
        for i in range(n):
            r = rows[i]
            v = self.Xn[r, p]
            self.cont[v * C + self.y[r]] += 1
            self.nv[v] += 1
        cdef int big = 0
        for v in range(k):
            if self.nv[v] >= self.min_leaf:
                big += 1
        if big < 2:
            return False
        cdef double acc = 0.0, acc2 = 0.0, s
        for v in range(k):
            s = 0.0
            for c in range(C):
                s = s + self.xlx[self.cont[v * C + c]]
            acc = acc + (self.xlx[self.nv[v]] - s)
            acc2 = acc2 + self.xlx[self.nv[v]]
        self.r_gain = (nh_node - acc) / n
        self.r_split = (self.xlx[n] - acc2) / n
        self.r_thr = np.nan
        self.r_miss = -1
        return True

    cdef bint eval_numeric(self, cnp.int64_t[:] rows, int f, Py_ssize_t n):
        cdef int C = self.C
        cdef int p = self.pos[f]
        cdef Py_ssize_t i, c, nk = 0, nl, nr, best_i = -1
        cdef int64_t r
        cdef double v
        for i in range(n):
            r = rows[i]
            v = self.Xc[r, p]
            if not isnan(v):
                self.buf[nk].v = v
                self.buf[nk].y = self.y[r]
                nk += 1
        cdef Py_ssize_t nm = n - nk
        if nk < 2 * self.min_leaf:
            return False
        qsort(self.buf, nk, sizeof(ValClass), _cmp_valclass)
        for c in range(C):
            self.kc[c] = 0
            self.left[c] = 0
        for i in range(nk):
            self.kc[self.buf[i].y] += 1
        cdef double mass = 0.0
        for c in range(C):
            mass += self.xlx[self.kc[c]]
        cdef double nh_known = self.xlx[nk] - mass
        cdef double best_g = -INFINITY, sl, sr, g
        for i in range(nk - 1):
            self.left[self.buf[i].y] += 1
            if self.buf[i].v == self.buf[i + 1].v:
                continue
            nl = i + 1
            nr = nk - nl
            if nl < self.min_leaf or nr < self.min_leaf:
                continue
            sl = 0.0
            sr = 0.0
            for c in range(C):
                sl = sl + self.xlx[self.left[c]]
            for c in range(C):
                sr = sr + self.xlx[self.kc[c] - self.left[c]]
            g = nh_known - ((self.xlx[nl] - sl) + (self.xlx[nr] - sr))
            if g > best_g:
                best_g = g
                best_i = i
        if best_i < 0:
            return False
        nl = best_i + 1
        nr = nk - nl
        self.r_gain = best_g / n
        self.r_split = (((self.xlx[n] - self.xlx[nl]) - self.xlx[nr]) - self.xlx[nm]) / n
        cdef double a = self.buf[best_i].v, b = self.buf[best_i + 1].v
        cdef double thr = (a + b) / 2.0
        if not thr < b:
            thr = a
        self.r_thr = thr
        self.r_miss = 1 if nl >= nr else 0
        return True


cdef Py_ssize_t _new_node(part, cnp.int64_t[:] y_v, Py_ssize_t C, list feature,
                          list threshold, list missing_branch, list counts,
                          list child_start, list n_children, dict pending):
    cdef cnp.int64_t[:] pv = part
    cdef Py_ssize_t ii
    cnt = np.zeros(C, dtype=np.int64)
    cdef cnp.int64_t[:] cv = cnt
    for ii in range(pv.shape[0]):
        cv[y_v[pv[ii]]] += 1
    feature.append(-1)
    threshold.append(float("nan"))
    missing_branch.append(-1)
    counts.append([int(c) for c in cnt])
    child_start.append(0)
    n_children.append(0)
    nid = len(feature) - 1
    pending[nid] = part
    return nid


def grow_tree(Xn, Xc, feat_kind, feat_pos, feat_card, y, int n_classes, rows,
              allowed, int min_leaf, int max_features, bint gain_ratio,
              seed, xlx):
    Xn_a = np.ascontiguousarray(Xn, dtype=np.int32)
    Xc_a = np.ascontiguousarray(Xc, dtype=np.float64)
    if Xn_a.ndim != 2:
        Xn_a = Xn_a.reshape(len(y), -1)
    if Xc_a.ndim != 2:
        Xc_a = Xc_a.reshape(len(y), -1)
    kind_a = np.ascontiguousarray(feat_kind, dtype=np.int32)
    pos_a = np.ascontiguousarray(feat_pos, dtype=np.int32)
    card_a = np.ascontiguousarray(feat_card, dtype=np.int32)
    y_a = np.ascontiguousarray(y, dtype=np.int64)
    rows_a = np.ascontiguousarray(rows, dtype=np.int64)
    xlx_a = np.ascontiguousarray(xlx, dtype=np.float64)
    cdef list allowed_l = [int(a) for a in allowed]
    cdef _Grower gr = _Grower(Xn_a, Xc_a, kind_a, pos_a, card_a, y_a, n_classes,
                              min_leaf, xlx_a, rows_a.shape[0])
    cdef cnp.int32_t[:, :] Xn_v = Xn_a
    cdef double[:, :] Xc_v = Xc_a
    cdef cnp.int64_t[:] y_v = y_a
    cdef double[:] xlx_v = xlx_a
    cdef uint64_t state = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)

    cdef list feature = [], threshold = [], missing_branch = []
    cdef list counts = [], child_start = [], n_children = []
    cdef list edge_value = [], edge_child = []
    cdef dict pending = {}
    cdef list stack = []

    cdef Py_ssize_t C = n_classes
    cdef cnp.int64_t[:] node_rows
    cdef Py_ssize_t n, i, j, node, nc, k_feat, n_allowed = len(allowed_l)
    cdef int f, best_f, miss
    cdef double mass, nh_node, total, avg, ratio, best_ratio, best_gain
    cdef double best_thr
    cdef int npos
    cdef int64_t mx, r
    cdef list cands, arr, res_f, res_gain, res_split, res_thr, res_miss
    cdef Py_ssize_t q, best_q

    stack.append(_new_node(rows_a, y_v, C, feature, threshold, missing_branch, counts,
                           child_start, n_children, pending))
    while stack:
        node = stack.pop()
        part = pending.pop(node)
        node_rows = part
        n = node_rows.shape[0]
        cnt_l = counts[node]
        mx = max(cnt_l)
        if n < 2 * min_leaf or mx == n:
            continue
        if 0 < max_features < n_allowed:
            arr = list(allowed_l)
            for i in range(max_features):
                j = i + <Py_ssize_t>(_splitmix(&state) % <uint64_t>(n_allowed - i))
                arr[i], arr[j] = arr[j], arr[i]
            cands = sorted(arr[:max_features])
        else:
            cands = allowed_l
        mass = 0.0
        for i in range(C):
            mass += xlx_v[<Py_ssize_t>cnt_l[i]]
        nh_node = xlx_v[n] - mass
        res_f = []
        res_gain = []
        res_split = []
        res_thr = []
        res_miss = []
        for f in cands:
            if kind_a[f] == 0:
                ok = gr.eval_nominal(node_rows, f, n, nh_node)
            else:
                ok = gr.eval_numeric(node_rows, f, n)
            if ok:
                res_f.append(f)
                res_gain.append(gr.r_gain)
                res_split.append(gr.r_split)
                res_thr.append(gr.r_thr)
                res_miss.append(gr.r_miss)
        if not res_f:
            continue
        best_q = -1
        if gain_ratio:
            total = 0.0
            npos = 0
            for q in range(len(res_f)):
                if res_gain[q] > POSITIVE_GAIN:
                    total += res_gain[q]
                    npos += 1
            if npos:
                avg = total / npos
                best_ratio = -INFINITY
                for q in range(len(res_f)):
                    if res_gain[q] > POSITIVE_GAIN and res_gain[q] >= avg - AVERAGE_SLACK:
                        ratio = res_gain[q] / res_split[q]
                        if ratio > best_ratio:
                            best_ratio = ratio
                            best_q = q
        else:
            best_gain = POSITIVE_GAIN
            for q in range(len(res_f)):
                if res_gain[q] > best_gain:
                    best_gain = res_gain[q]
                    best_q = q
        if best_q < 0:
            best_q = 0
        best_f = res_f[best_q]
        best_thr = res_thr[best_q]
        miss = res_miss[best_q]
        feature[node] = best_f
        threshold[node] = best_thr
        missing_branch[node] = miss
        child_start[node] = len(edge_value)
        ids = []
        if kind_a[best_f] == 0:
            parts = _partition_nominal(Xn_v, node_rows, pos_a[best_f], card_a[best_f])
        else:
            parts = _partition_numeric(Xc_v, node_rows, pos_a[best_f], best_thr, miss)
        for value, sub in parts:
            child = _new_node(sub, y_v, C, feature, threshold, missing_branch, counts,
                              child_start, n_children, pending)
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


cdef list _partition_nominal(cnp.int32_t[:, :] Xn, cnp.int64_t[:] rows, int p, int k):
    cdef Py_ssize_t n = rows.shape[0], i, v
    sizes_a = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[:] sizes = sizes_a
    for i in range(n):
        sizes[Xn[rows[i], p]] += 1
    starts_a = np.zeros(k, dtype=np.int64)
    cdef cnp.int64_t[:] starts = starts_a
    cdef int64_t acc = 0
    for v in range(k):
        starts[v] = acc
        acc += sizes[v]
    out_a = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] out = out_a
    fill_a = starts_a.copy()
    cdef cnp.int64_t[:] fill = fill_a
    for i in range(n):
        v = Xn[rows[i], p]
        out[fill[v]] = rows[i]
        fill[v] += 1
    cdef list parts = []
    for v in range(k):
        if sizes[v] > 0:
            parts.append((int(v), out_a[starts[v]:starts[v] + sizes[v]]))
    return parts


cdef list _partition_numeric(double[:, :] Xc, cnp.int64_t[:] rows, int p, double thr, int miss):
    cdef Py_ssize_t n = rows.shape[0], i, nl = 0, nr = 0
    left_a = np.empty(n, dtype=np.int64)
    right_a = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] lv = left_a
    cdef cnp.int64_t[:] rv = right_a
    cdef double v
    cdef bint go_left
    for i in range(n):
        v = Xc[rows[i], p]
        if isnan(v):
            go_left = miss == 1
        else:
            go_left = v <= thr
        if go_left:
            lv[nl] = rows[i]
            nl += 1
        else:
            rv[nr] = rows[i]
            nr += 1
    return [(0, left_a[:nl]), (1, right_a[:nr])]


def apply_tree(feature, threshold, missing_branch, child_start, n_children,
               edge_value, edge_child, feat_kind, feat_pos, Xn, Xc):
    cdef cnp.int64_t[:] fe = np.ascontiguousarray(feature, dtype=np.int64)
    cdef double[:] th = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef cnp.int64_t[:] mb = np.ascontiguousarray(missing_branch, dtype=np.int64)
    cdef cnp.int64_t[:] cs = np.ascontiguousarray(child_start, dtype=np.int64)
    cdef cnp.int64_t[:] nch = np.ascontiguousarray(n_children, dtype=np.int64)
    cdef cnp.int64_t[:] ev = np.ascontiguousarray(edge_value, dtype=np.int64)
    cdef cnp.int64_t[:] ec = np.ascontiguousarray(edge_child, dtype=np.int64)
    cdef cnp.int32_t[:] fk = np.ascontiguousarray(feat_kind, dtype=np.int32)
    cdef cnp.int32_t[:] fp = np.ascontiguousarray(feat_pos, dtype=np.int32)
    Xn_a = np.ascontiguousarray(Xn, dtype=np.int32)
    Xc_a = np.ascontiguousarray(Xc, dtype=np.float64)
    cdef Py_ssize_t n = max(Xn_a.shape[0], Xc_a.shape[0])
    if Xn_a.ndim != 2 or Xn_a.shape[0] != n:
        Xn_a = np.zeros((n, 0), dtype=np.int32)
    if Xc_a.ndim != 2 or Xc_a.shape[0] != n:
        Xc_a = np.zeros((n, 0), dtype=np.float64)
    cdef cnp.int32_t[:, :] xn = Xn_a
    cdef double[:, :] xc = Xc_a
    out_a = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[:] out = out_a
    cdef Py_ssize_t i, node, e, start, nxt, branch
    cdef int64_t f, code
    cdef double v
    for i in range(n):
        node = 0
        while True:
            f = fe[node]
            if f < 0:
                break
            start = cs[node]
            if fk[f] == 0:
                code = xn[i, fp[f]]
                nxt = -1
                for e in range(start, start + nch[node]):
                    if ev[e] == code:
                        nxt = ec[e]
                        break
                if nxt < 0:
                    break
                node = nxt
            else:
                v = xc[i, fp[f]]
                if isnan(v):
                    branch = 0 if mb[node] == 1 else 1
                else:
                    branch = 0 if v <= th[node] else 1
                node = ec[start + branch]
        out[i] = node
    return out_a
