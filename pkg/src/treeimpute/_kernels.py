"""Numba kernels for binary CART fitting, routing and prediction.

Trees live in flat parallel arrays so they can be built and evaluated
without Python-level object overhead; the `cart` module wraps them.

Conventions:
  feature[v] == -1        -> leaf v
  kinds[f] == 0           -> threshold split (x <= thr goes left)
  kinds[f] == 1           -> nominal split (level bit set in mask goes left)
  value[v]                -> regression leaf prediction (or boosting leaf step)
  probs[v]                -> classification leaf class-frequency vector

Deterministic tie-breaking: candidate features are scanned in ascending
index order, thresholds ascending, nominal subsets by ascending canonical
mask (bit 0 always set); only strict impurity improvements replace the
incumbent, so the first-best candidate wins.
"""

import numpy as np
from numba import njit

_EPS = 1e-12
MAX_NOMINAL_EXHAUSTIVE = 10
MAX_NOMINAL_LEVELS = 63


@njit(cache=True, nogil=True)
def _node_stats(y, w, idx, start, end, K):
    """(weight, impurity, value, class_weights) of the rows idx[start:end]."""
    cw = np.zeros(K if K > 0 else 1)
    sw = 0.0
    swy = 0.0
    swyy = 0.0
    for t in range(start, end):
        i = idx[t]
        sw += w[i]
        if K > 0:
            cw[int(y[i])] += w[i]
        else:
            swy += w[i] * y[i]
            swyy += w[i] * y[i] * y[i]
    if K > 0:
        s2 = 0.0
        for k in range(K):
            s2 += cw[k] * cw[k]
        imp = sw - s2 / sw
        val = 0.0
    else:
        val = swy / sw
        imp = swyy - swy * swy / sw
    if imp < 0.0:
        imp = 0.0
    return sw, imp, val, cw


@njit(cache=True, nogil=True)
def _child_impurity_reg(sw, swy, swyy):
    if sw <= 0.0:
        return 0.0
    imp = swyy - swy * swy / sw
    return imp if imp > 0.0 else 0.0


@njit(cache=True, nogil=True)
def _child_impurity_cls(cw, K):
    sw = 0.0
    s2 = 0.0
    for k in range(K):
        sw += cw[k]
        s2 += cw[k] * cw[k]
    if sw <= 0.0:
        return 0.0
    imp = sw - s2 / sw
    return imp if imp > 0.0 else 0.0


@njit(cache=True, nogil=True)
def build_tree(X, kinds, nlev, y, w, K, mtry, min_node, max_depth, seed):
    """Fit one CART tree; returns flat node arrays.

    K == 0 requests a regression tree (variance impurity, mean leaves);
    K >= 2 a classification tree (Gini impurity, class-frequency leaves).
    """
    np.random.seed(seed)
    n, q = X.shape
    max_nodes = 2 * n + 1
    feature = np.full(max_nodes, -1, dtype=np.int64)
    thr = np.zeros(max_nodes)
    smask = np.zeros(max_nodes, dtype=np.int64)
    left = np.full(max_nodes, -1, dtype=np.int64)
    right = np.full(max_nodes, -1, dtype=np.int64)
    wl_arr = np.zeros(max_nodes)
    wr_arr = np.zeros(max_nodes)
    value = np.zeros(max_nodes)
    probs = np.zeros((max_nodes, K if K > 0 else 1))

    idx = np.arange(n)
    # explicit stack of (node, start, end, depth)
    stack = np.empty((max_nodes, 4), dtype=np.int64)
    stack[0, 0] = 0
    stack[0, 1] = 0
    stack[0, 2] = n
    stack[0, 3] = 0
    top = 1
    n_nodes = 1

    feats = np.arange(q)
    lsw = np.zeros(MAX_NOMINAL_LEVELS + 1)
    lswy = np.zeros(MAX_NOMINAL_LEVELS + 1)
    lswyy = np.zeros(MAX_NOMINAL_LEVELS + 1)
    lcount = np.zeros(MAX_NOMINAL_LEVELS + 1, dtype=np.int64)
    lcw = np.zeros((MAX_NOMINAL_LEVELS + 1, K if K > 0 else 1))

    while top > 0:
        top -= 1
        node = stack[top, 0]
        start = stack[top, 1]
        end = stack[top, 2]
        depth = stack[top, 3]
        m = end - start

        sw, parent_imp, node_val, node_cw = _node_stats(y, w, idx, start, end, K)
        if K > 0:
            for k in range(K):
                probs[node, k] = node_cw[k] / sw
        else:
            value[node] = node_val

        if m < 2 * min_node or depth >= max_depth or parent_imp <= _EPS:
            continue

        # draw mtry candidate features without replacement, scan ascending
        mm = mtry if mtry < q else q
        for t in range(mm):
            r = t + np.random.randint(0, q - t)
            tmp = feats[t]
            feats[t] = feats[r]
            feats[r] = tmp
        cand = np.sort(feats[:mm])

        best_imp = parent_imp - _EPS
        best_f = -1
        best_thr = 0.0
        best_mask = np.int64(0)
        best_is_mask = False

        if K == 0:
            tswy = _tot_swy(y, w, idx, start, end)
            tswyy = _tot_swyy(y, w, idx, start, end)
        else:
            tswy = 0.0
            tswyy = 0.0

        for ci in range(mm):
            f = cand[ci]
            if kinds[f] == 0:
                # threshold split over sorted distinct values
                vals = np.empty(m)
                for t in range(m):
                    vals[t] = X[idx[start + t], f]
                order = np.argsort(vals, kind="mergesort")
                lw = 0.0
                lwy = 0.0
                lwyy = 0.0
                if K > 0:
                    ccw = np.zeros(K)
                for t in range(m - 1):
                    i = idx[start + order[t]]
                    lw += w[i]
                    if K > 0:
                        ccw[int(y[i])] += w[i]
                    else:
                        lwy += w[i] * y[i]
                        lwyy += w[i] * y[i] * y[i]
                    v0 = vals[order[t]]
                    v1 = vals[order[t + 1]]
                    if v1 <= v0:
                        continue
                    if t + 1 < min_node or m - t - 1 < min_node:
                        continue
                    if K > 0:
                        rcw = node_cw - ccw
                        child = _child_impurity_cls(ccw, K) + _child_impurity_cls(rcw, K)
                    else:
                        child = _child_impurity_reg(lw, lwy, lwyy) + \
                            _child_impurity_reg(sw - lw, tswy - lwy, tswyy - lwyy)
                    if child < best_imp:
                        best_imp = child
                        best_f = f
                        best_thr = 0.5 * (v0 + v1)
                        best_is_mask = False
            else:
                L = int(nlev[f])
                if L > MAX_NOMINAL_LEVELS:
                    continue
                for l in range(L):
                    lsw[l] = 0.0
                    lswy[l] = 0.0
                    lswyy[l] = 0.0
                    lcount[l] = 0
                    if K > 0:
                        for k in range(K):
                            lcw[l, k] = 0.0
                for t in range(start, end):
                    i = idx[t]
                    l = int(X[i, f])
                    lsw[l] += w[i]
                    lcount[l] += 1
                    if K > 0:
                        lcw[l, int(y[i])] += w[i]
                    else:
                        lswy[l] += w[i] * y[i]
                        lswyy[l] += w[i] * y[i] * y[i]
                if L <= MAX_NOMINAL_EXHAUSTIVE:
                    # canonical masks keep bit 0 set so each partition is seen once
                    full = (1 << L) - 1
                    for mask in range(1, full, 2):
                        lcnt = 0
                        rcnt = 0
                        lw = 0.0
                        lwy = 0.0
                        lwyy = 0.0
                        if K > 0:
                            ccw = np.zeros(K)
                        for l in range(L):
                            if (mask >> l) & 1:
                                lcnt += lcount[l]
                                lw += lsw[l]
                                if K > 0:
                                    for k in range(K):
                                        ccw[k] += lcw[l, k]
                                else:
                                    lwy += lswy[l]
                                    lwyy += lswyy[l]
                            else:
                                rcnt += lcount[l]
                        if lcnt < min_node or rcnt < min_node:
                            continue
                        if K > 0:
                            rcw = node_cw - ccw
                            child = _child_impurity_cls(ccw, K) + _child_impurity_cls(rcw, K)
                        else:
                            child = _child_impurity_reg(lw, lwy, lwyy) + \
                                _child_impurity_reg(sw - lw, tswy - lwy, tswyy - lwyy)
                        if child < best_imp:
                            best_imp = child
                            best_f = f
                            best_mask = np.int64(mask)
                            best_is_mask = True
                else:
                    # one-vs-rest ordering: levels sorted by mean response or
                    # first-class proportion, then prefix splits
                    stat = np.empty(L)
                    for l in range(L):
                        if lcount[l] == 0:
                            stat[l] = 1e300  # absent levels sort last
                        elif K > 0:
                            stat[l] = lcw[l, 0] / lsw[l]
                        else:
                            stat[l] = lswy[l] / lsw[l]
                    order_l = np.argsort(stat, kind="mergesort")
                    lcnt = 0
                    lw = 0.0
                    lwy = 0.0
                    lwyy = 0.0
                    if K > 0:
                        ccw = np.zeros(K)
                    mask = np.int64(0)
                    for pos in range(L - 1):
                        l = order_l[pos]
                        mask |= np.int64(1) << l
                        lcnt += lcount[l]
                        lw += lsw[l]
                        if K > 0:
                            for k in range(K):
                                ccw[k] += lcw[l, k]
                        else:
                            lwy += lswy[l]
                            lwyy += lswyy[l]
                        if lcnt < min_node or m - lcnt < min_node:
                            continue
                        if K > 0:
                            rcw = node_cw - ccw
                            child = _child_impurity_cls(ccw, K) + _child_impurity_cls(rcw, K)
                        else:
                            child = _child_impurity_reg(lw, lwy, lwyy) + \
                                _child_impurity_reg(sw - lw, tswy - lwy, tswyy - lwyy)
                        if child < best_imp:
                            best_imp = child
                            best_f = f
                            best_mask = mask
                            best_is_mask = True

        if best_f < 0:
            continue  # no impurity-reducing split: leaf

        # stable partition of idx[start:end]
        buf = np.empty(m, dtype=np.int64)
        nl = 0
        nr = 0
        wl = 0.0
        for t in range(start, end):
            i = idx[t]
            if best_is_mask:
                go_left = ((best_mask >> int(X[i, best_f])) & 1) == 1
            else:
                go_left = X[i, best_f] <= best_thr
            if go_left:
                idx[start + nl] = i
                nl += 1
                wl += w[i]
            else:
                buf[nr] = i
                nr += 1
        for t in range(nr):
            idx[start + nl + t] = buf[t]

        lc = n_nodes
        rc = n_nodes + 1
        n_nodes += 2
        feature[node] = best_f
        if best_is_mask:
            smask[node] = best_mask
            thr[node] = np.nan
        else:
            thr[node] = best_thr
        left[node] = lc
        right[node] = rc
        wl_arr[node] = wl
        wr_arr[node] = sw - wl

        stack[top, 0] = rc
        stack[top, 1] = start + nl
        stack[top, 2] = end
        stack[top, 3] = depth + 1
        top += 1
        stack[top, 0] = lc
        stack[top, 1] = start
        stack[top, 2] = start + nl
        stack[top, 3] = depth + 1
        top += 1

    return (feature[:n_nodes], thr[:n_nodes], smask[:n_nodes], left[:n_nodes],
            right[:n_nodes], wl_arr[:n_nodes], wr_arr[:n_nodes],
            value[:n_nodes], probs[:n_nodes])


@njit(cache=True, nogil=True)
def _tot_swy(y, w, idx, start, end):
    s = 0.0
    for t in range(start, end):
        s += w[idx[t]] * y[idx[t]]
    return s


@njit(cache=True, nogil=True)
def _tot_swyy(y, w, idx, start, end):
    s = 0.0
    for t in range(start, end):
        s += w[idx[t]] * y[idx[t]] * y[idx[t]]
    return s


@njit(cache=True, nogil=True)
def route_batch(feature, thr, smask, left, right, wl, wr, kinds, nlev, X):
    """Leaf node id for every row of X."""
    m = X.shape[0]
    out = np.empty(m, dtype=np.int64)
    for i in range(m):
        node = 0
        while feature[node] >= 0:
            f = feature[node]
            if kinds[f] == 0:
                go_left = X[i, f] <= thr[node]
            else:
                lev = int(X[i, f])
                if lev < 0 or lev >= nlev[f]:
                    go_left = wl[node] >= wr[node]  # unseen level fallback
                else:
                    go_left = ((smask[node] >> lev) & 1) == 1
            node = left[node] if go_left else right[node]
        out[i] = node
    return out


@njit(cache=True, nogil=True)
def predict_values(feature, thr, smask, left, right, wl, wr, value, kinds, nlev, X):
    leaves = route_batch(feature, thr, smask, left, right, wl, wr, kinds, nlev, X)
    m = X.shape[0]
    out = np.empty(m)
    for i in range(m):
        out[i] = value[leaves[i]]
    return out


@njit(cache=True, nogil=True)
def predict_probs(feature, thr, smask, left, right, wl, wr, probs, kinds, nlev, X):
    leaves = route_batch(feature, thr, smask, left, right, wl, wr, kinds, nlev, X)
    m = X.shape[0]
    K = probs.shape[1]
    out = np.empty((m, K))
    for i in range(m):
        for k in range(K):
            out[i, k] = probs[leaves[i], k]
    return out
