"""Numba kernels behind the tree module.

Everything here works on flat node arrays: ``feature[k] < 0`` marks a leaf,
otherwise ``threshold``/``default_left``/``left``/``right`` describe the
split. Missing cells are NaN; rows missing the split feature follow the
learned default direction. All loops run in a fixed order so results are
bit-reproducible.
"""

import numpy as np
from numba import njit

HESS_FLOOR = 1e-16


@njit(cache=True)
def _leaf_weight(G, H, lam, alpha):
    mag = abs(G) - alpha
    if mag <= 0.0:
        return 0.0
    h = H if H > HESS_FLOOR else HESS_FLOOR
    w = mag / (h + lam)
    return -w if G > 0.0 else w


@njit(cache=True)
def _gain(GL, HL, GR, HR, lam, gamma):
    hl = HL if HL > HESS_FLOOR else HESS_FLOOR
    hr = HR if HR > HESS_FLOOR else HESS_FLOOR
    G = GL + GR
    return 0.5 * (GL * GL / (hl + lam) + GR * GR / (hr + lam)
                  - G * G / (hl + hr + lam)) - gamma


@njit(cache=True)
def grow_tree(X, grad, hess, max_depth, lam, alpha, gamma, eta, mtry, seed, max_nodes):
    """Exact greedy tree grown breadth-first over presorted feature columns.

    Split candidates are midpoints between consecutive distinct observed
    values; for each candidate both missing-direction options are scored
    and the better one becomes the node's default. Ties resolve to the
    lowest feature index, then the lowest threshold, then missing-goes-left.
    ``mtry > 0`` samples that many candidate features per node (seeded
    numpy RNG).
    """
    n, p = X.shape
    feature = np.full(max_nodes, -1, np.int32)
    threshold = np.zeros(max_nodes)
    default_left = np.zeros(max_nodes, np.uint8)
    left = np.full(max_nodes, -1, np.int32)
    right = np.full(max_nodes, -1, np.int32)
    weight = np.zeros(max_nodes)

    if mtry > 0:
        np.random.seed(seed)

    # one sort per feature per tree; nodes later walk these lists in order
    offsets = np.zeros(p + 1, np.int64)
    for j in range(p):
        cnt = 0
        for i in range(n):
            if not np.isnan(X[i, j]):
                cnt += 1
        offsets[j + 1] = offsets[j] + cnt
    sorted_rows = np.empty(offsets[p], np.int64)
    buf = np.empty(n)
    seg = np.empty(n, np.int64)
    for j in range(p):
        cnt = 0
        for i in range(n):
            v = X[i, j]
            if not np.isnan(v):
                buf[cnt] = v
                seg[cnt] = i
                cnt += 1
        if cnt > 0:
            idx = np.argsort(buf[:cnt])
            for t in range(cnt):
                sorted_rows[offsets[j] + t] = seg[idx[t]]

    node_of_row = np.zeros(n, np.int32)
    g_total = np.zeros(max_nodes)
    h_total = np.zeros(max_nodes)
    counts = np.zeros(max_nodes, np.int64)
    best_gain = np.zeros(max_nodes)
    best_feat = np.full(max_nodes, -1, np.int32)
    best_thr = np.zeros(max_nodes)
    best_defleft = np.zeros(max_nodes, np.uint8)

    gl = np.zeros(max_nodes)
    hl = np.zeros(max_nodes)
    g_pres = np.zeros(max_nodes)
    h_pres = np.zeros(max_nodes)
    prev_val = np.zeros(max_nodes)
    started = np.zeros(max_nodes, np.uint8)

    for i in range(n):
        g_total[0] += grad[i]
        h_total[0] += hess[i]
    counts[0] = n

    level_lo = 0
    level_hi = 1
    n_nodes = 1
    feat_buf = np.empty(p, np.int64)
    use_feat = np.zeros((1, 1), np.uint8)  # reallocated per level when mtry > 0

    for depth in range(max_depth):
        if level_lo >= level_hi:
            break
        level_size = level_hi - level_lo
        for nid in range(level_lo, level_hi):
            best_gain[nid] = 0.0
            best_feat[nid] = -1

        if 0 < mtry < p:
            use_feat = np.zeros((level_size, p), np.uint8)
            for nid in range(level_lo, level_hi):
                if counts[nid] < 2:
                    continue
                for j in range(p):
                    feat_buf[j] = j
                for j in range(mtry):
                    k = np.random.randint(j, p)
                    t = feat_buf[j]
                    feat_buf[j] = feat_buf[k]
                    feat_buf[k] = t
                for j in range(mtry):
                    use_feat[nid - level_lo, feat_buf[j]] = 1

        for j in range(p):
            lo = offsets[j]
            hi = offsets[j + 1]
            if hi - lo < 2:
                continue
            for nid in range(level_lo, level_hi):
                g_pres[nid] = 0.0
                h_pres[nid] = 0.0
                gl[nid] = 0.0
                hl[nid] = 0.0
                started[nid] = 0
            for t in range(lo, hi):
                row = sorted_rows[t]
                nid = node_of_row[row]
                if nid < level_lo or counts[nid] < 2:
                    continue
                if 0 < mtry < p and use_feat[nid - level_lo, j] == 0:
                    continue
                g_pres[nid] += grad[row]
                h_pres[nid] += hess[row]
            for t in range(lo, hi):
                row = sorted_rows[t]
                nid = node_of_row[row]
                if nid < level_lo or counts[nid] < 2:
                    continue
                if 0 < mtry < p and use_feat[nid - level_lo, j] == 0:
                    continue
                v = X[row, j]
                if started[nid] == 1 and v > prev_val[nid]:
                    thr = 0.5 * (prev_val[nid] + v)
                    if thr > prev_val[nid] and thr <= v:
                        g_miss = g_total[nid] - g_pres[nid]
                        h_miss = h_total[nid] - h_pres[nid]
                        gl_ = gl[nid]
                        hl_ = hl[nid]
                        gr_ = g_pres[nid] - gl_
                        hr_ = h_pres[nid] - hl_
                        gain_left = _gain(gl_ + g_miss, hl_ + h_miss, gr_, hr_, lam, gamma)
                        gain_right = _gain(gl_, hl_, gr_ + g_miss, hr_ + h_miss, lam, gamma)
                        if gain_left >= gain_right:
                            cand_gain = gain_left
                            cand_defleft = np.uint8(1)
                        else:
                            cand_gain = gain_right
                            cand_defleft = np.uint8(0)
                        if cand_gain > best_gain[nid]:
                            best_gain[nid] = cand_gain
                            best_feat[nid] = j
                            best_thr[nid] = thr
                            best_defleft[nid] = cand_defleft
                gl[nid] += grad[row]
                hl[nid] += hess[row]
                prev_val[nid] = v
                started[nid] = 1

        any_split = False
        for nid in range(level_lo, level_hi):
            if best_feat[nid] < 0:
                continue
            any_split = True
            feature[nid] = best_feat[nid]
            threshold[nid] = best_thr[nid]
            default_left[nid] = best_defleft[nid]
            left[nid] = n_nodes
            right[nid] = n_nodes + 1
            n_nodes += 2

        if not any_split:
            break

        for row in range(n):
            nid = node_of_row[row]
            if nid < level_lo or feature[nid] < 0:
                continue
            v = X[row, feature[nid]]
            if np.isnan(v):
                child = left[nid] if default_left[nid] == 1 else right[nid]
            elif v < threshold[nid]:
                child = left[nid]
            else:
                child = right[nid]
            node_of_row[row] = child
            g_total[child] += grad[row]
            h_total[child] += hess[row]
            counts[child] += 1

        level_lo = level_hi
        level_hi = n_nodes

    for nid in range(n_nodes):
        if feature[nid] < 0:
            weight[nid] = eta * _leaf_weight(g_total[nid], h_total[nid], lam, alpha)

    return (feature[:n_nodes], threshold[:n_nodes], default_left[:n_nodes],
            left[:n_nodes], right[:n_nodes], weight[:n_nodes])


@njit(cache=True)
def predict_tree(X, feature, threshold, default_left, left, right, weight, out):
    """Add each row's leaf weight to ``out`` (accumulator across trees)."""
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            v = X[i, feature[node]]
            if np.isnan(v):
                node = left[node] if default_left[node] == 1 else right[node]
            elif v < threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] += weight[node]


@njit(cache=True)
def route_covers(X, feature, threshold, default_left, left, right, n_nodes):
    """Count how many rows of X pass through each node."""
    covers = np.zeros(n_nodes)
    for i in range(X.shape[0]):
        node = 0
        covers[node] += 1.0
        while feature[node] >= 0:
            v = X[i, feature[node]]
            if np.isnan(v):
                node = left[node] if default_left[node] == 1 else right[node]
            elif v < threshold[node]:
                node = left[node]
            else:
                node = right[node]
            covers[node] += 1.0
    return covers


@njit(cache=True)
def _unwound_sum(pz, po, pw, length, i):
    # Sum of path weights once element i is removed; mirrors _unwind without
    # mutating the path.
    one = po[i]
    zero = pz[i]
    total = 0.0
    next_one = pw[length - 1]
    if one != 0.0:
        for j in range(length - 2, -1, -1):
            tmp = next_one * length / ((j + 1) * one)
            total += tmp
            next_one = pw[j] - tmp * zero * (length - 1 - j) / length
    else:
        for j in range(length - 2, -1, -1):
            total += pw[j] * length / (zero * (length - 1 - j))
    return total


@njit(cache=True)
def _unwind(pd, pz, po, pw, length, k):
    one = po[k]
    zero = pz[k]
    next_one = pw[length - 1]
    if one != 0.0:
        for j in range(length - 2, -1, -1):
            tmp = pw[j]
            pw[j] = next_one * length / ((j + 1) * one)
            next_one = tmp - pw[j] * zero * (length - 1 - j) / length
    else:
        for j in range(length - 2, -1, -1):
            pw[j] = pw[j] * length / (zero * (length - 1 - j))
    for j in range(k, length - 1):
        pd[j] = pd[j + 1]
        pz[j] = pz[j + 1]
        po[j] = po[j + 1]


@njit(cache=True)
def _extend(pd, pz, po, pw, length, feat, zero_frac, one_frac):
    pd[length] = feat
    pz[length] = zero_frac
    po[length] = one_frac
    pw[length] = 1.0 if length == 0 else 0.0
    new_len = length + 1
    for i in range(length - 1, -1, -1):
        pw[i + 1] += one_frac * pw[i] * (i + 1) / new_len
        pw[i] = zero_frac * pw[i] * (new_len - 1 - i) / new_len
    return new_len


@njit(cache=True)
def shap_tree_batch(X, feature, threshold, default_left, left, right, weight,
                    covers, max_depth, phi):
    """Path-dependent Shapley values for every row of X against one tree,
    accumulated into ``phi`` (rows x features).

    Iterative form of the recursive path algorithm: the unique path of the
    node being visited lives in the arena row for its depth, children copy
    the parent's row before extending it.
    """
    width = max_depth + 2
    pd = np.empty((width, width), np.int64)
    pz = np.empty((width, width))
    po = np.empty((width, width))
    pw = np.empty((width, width))

    cap = 2 * width + 4
    st_node = np.empty(cap, np.int64)
    st_level = np.empty(cap, np.int64)
    st_plen = np.empty(cap, np.int64)
    st_pz = np.empty(cap)
    st_po = np.empty(cap)
    st_pf = np.empty(cap, np.int64)

    for row in range(X.shape[0]):
        st_node[0] = 0
        st_level[0] = 0
        st_plen[0] = 0
        st_pz[0] = 1.0
        st_po[0] = 1.0
        st_pf[0] = -1
        top = 1
        while top > 0:
            top -= 1
            node = st_node[top]
            level = st_level[top]
            plen = st_plen[top]
            frac_zero = st_pz[top]
            frac_one = st_po[top]
            pfeat = st_pf[top]

            if level > 0:
                for i in range(plen):
                    pd[level, i] = pd[level - 1, i]
                    pz[level, i] = pz[level - 1, i]
                    po[level, i] = po[level - 1, i]
                    pw[level, i] = pw[level - 1, i]
            plen = _extend(pd[level], pz[level], po[level], pw[level],
                           plen, pfeat, frac_zero, frac_one)

            if feature[node] < 0:
                for i in range(1, plen):
                    s = _unwound_sum(pz[level], po[level], pw[level], plen, i)
                    phi[row, pd[level, i]] += s * (po[level, i] - pz[level, i]) * weight[node]
                continue

            feat = feature[node]
            v = X[row, feat]
            if np.isnan(v):
                hot = left[node] if default_left[node] == 1 else right[node]
            elif v < threshold[node]:
                hot = left[node]
            else:
                hot = right[node]
            cold = right[node] if hot == left[node] else left[node]

            incoming_zero = 1.0
            incoming_one = 1.0
            k = -1
            for i in range(1, plen):
                if pd[level, i] == feat:
                    k = i
                    break
            if k >= 0:
                incoming_zero = pz[level, k]
                incoming_one = po[level, k]
                _unwind(pd[level], pz[level], po[level], pw[level], plen, k)
                plen -= 1

            cover_node = covers[node]
            hot_ratio = covers[hot] / cover_node if cover_node > 0.0 else 0.0
            cold_ratio = covers[cold] / cover_node if cover_node > 0.0 else 0.0

            # a child reachable neither by x nor by background flow
            # contributes zero weight everywhere; prune it
            cold_zero = incoming_zero * cold_ratio
            if cold_zero != 0.0:
                st_node[top] = cold
                st_level[top] = level + 1
                st_plen[top] = plen
                st_pz[top] = cold_zero
                st_po[top] = 0.0
                st_pf[top] = feat
                top += 1
            hot_zero = incoming_zero * hot_ratio
            if hot_zero != 0.0 or incoming_one != 0.0:
                st_node[top] = hot
                st_level[top] = level + 1
                st_plen[top] = plen
                st_pz[top] = hot_zero
                st_po[top] = incoming_one
                st_pf[top] = feat
                top += 1
