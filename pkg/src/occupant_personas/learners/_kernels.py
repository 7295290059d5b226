"""Compiled inner loops for tree growth, stump search, and the linear SVM.

The split scans use an incremental sum-of-squared-class-counts update so a
full threshold sweep costs O(m log m) per feature regardless of the class
count. Kernels are nogil so forests can grow trees on a thread pool while
staying deterministic (each call re-seeds its own RNG stream).
"""

import numpy as np
from numba import njit

UNLIMITED_DEPTH = 2**31 - 1


@njit(cache=True, nogil=True)
def build_tree(X, y, idx, n_classes, max_depth, min_split, mtry, seed,
               feature, threshold, left, right, leaf):
    """Grow a binary gini tree over the sample multiset idx; returns node count.

    Splits whenever a node is impure, large and deep enough, and some candidate
    feature has two distinct values; ties in impurity break toward the lowest
    column index, then the lowest threshold. Output arrays must hold 2*len(idx)
    nodes. leaf[] holds the majority class index (-1 on internal nodes).
    """
    d = X.shape[1]
    m0 = idx.shape[0]
    use_rng = mtry < d
    if use_rng:
        np.random.seed(seed)

    vals = np.empty(m0, np.float64)
    labs = np.empty(m0, np.int64)
    buf = np.empty(m0, np.int64)
    cnt = np.zeros(n_classes, np.int64)
    cntl = np.zeros(n_classes, np.int64)
    pool = np.empty(d, np.int64)
    feats = np.empty(d, np.int64)

    cap = 2 * m0
    stack_start = np.empty(cap, np.int64)
    stack_end = np.empty(cap, np.int64)
    stack_depth = np.empty(cap, np.int64)
    stack_node = np.empty(cap, np.int64)

    stack_start[0] = 0
    stack_end[0] = m0
    stack_depth[0] = 0
    stack_node[0] = 0
    sp = 1
    n_nodes = 1

    while sp > 0:
        sp -= 1
        start = stack_start[sp]
        end = stack_end[sp]
        depth = stack_depth[sp]
        node = stack_node[sp]
        m = end - start

        for c in range(n_classes):
            cnt[c] = 0
        for p in range(start, end):
            cnt[y[idx[p]]] += 1
        best_c = 0
        for c in range(1, n_classes):
            if cnt[c] > cnt[best_c]:
                best_c = c

        if cnt[best_c] == m or m < min_split or depth >= max_depth:
            feature[node] = -1
            threshold[node] = 0.0
            left[node] = -1
            right[node] = -1
            leaf[node] = best_c
            continue

        if use_rng:
            for j in range(d):
                pool[j] = j
            for t in range(mtry):
                r = t + np.random.randint(0, d - t)
                tmp = pool[t]
                pool[t] = pool[r]
                pool[r] = tmp
                feats[t] = pool[t]
            for a in range(1, mtry):
                key = feats[a]
                b = a - 1
                while b >= 0 and feats[b] > key:
                    feats[b + 1] = feats[b]
                    b -= 1
                feats[b + 1] = key
            n_feats = mtry
        else:
            for j in range(d):
                feats[j] = j
            n_feats = d

        # maximize ssl/ml + ssr/mr, equivalent to minimizing weighted gini
        base_ss = 0.0
        for c in range(n_classes):
            base_ss += float(cnt[c]) * float(cnt[c])
        best_score = -1.0
        best_col = -1
        best_thr = 0.0
        for fi in range(n_feats):
            j = feats[fi]
            for p in range(m):
                vals[p] = X[idx[start + p], j]
            order = np.argsort(vals[:m])
            for p in range(m):
                labs[p] = y[idx[start + order[p]]]
            for c in range(n_classes):
                cntl[c] = 0
            ssl = 0.0
            ssr = base_ss
            for p in range(m - 1):
                c = labs[p]
                old_l = float(cntl[c])
                old_r = float(cnt[c] - cntl[c])
                ssl += 2.0 * old_l + 1.0
                ssr += -2.0 * old_r + 1.0
                cntl[c] += 1
                v = vals[order[p]]
                vnext = vals[order[p + 1]]
                if v != vnext:
                    ml = float(p + 1)
                    mr = float(m - p - 1)
                    score = ssl / ml + ssr / mr
                    if score > best_score:
                        best_score = score
                        best_col = j
                        thr = 0.5 * (v + vnext)
                        if thr >= vnext:  # fp midpoint collapse
                            thr = v
                        best_thr = thr

        if best_col == -1:
            feature[node] = -1
            threshold[node] = 0.0
            left[node] = -1
            right[node] = -1
            leaf[node] = best_c
            continue

        nl = 0
        for p in range(start, end):
            if X[idx[p], best_col] <= best_thr:
                buf[nl] = idx[p]
                nl += 1
        nr = nl
        for p in range(start, end):
            if X[idx[p], best_col] > best_thr:
                buf[nr] = idx[p]
                nr += 1
        for p in range(m):
            idx[start + p] = buf[p]

        node_l = n_nodes
        node_r = n_nodes + 1
        n_nodes += 2
        feature[node] = best_col
        threshold[node] = best_thr
        left[node] = node_l
        right[node] = node_r
        leaf[node] = -1

        stack_start[sp] = start
        stack_end[sp] = start + nl
        stack_depth[sp] = depth + 1
        stack_node[sp] = node_l
        sp += 1
        stack_start[sp] = start + nl
        stack_end[sp] = end
        stack_depth[sp] = depth + 1
        stack_node[sp] = node_r
        sp += 1

    return n_nodes


@njit(cache=True, nogil=True)
def predict_tree(X, feature, threshold, left, right, leaf, out):
    for i in range(X.shape[0]):
        node = 0
        while feature[node] != -1:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = leaf[node]


@njit(cache=True, nogil=True)
def best_stump_split(X, y, w, sort_idx, n_classes, wl_out, wr_out):
    """Weighted single-split search over all columns using presorted orders.

    Returns (column, threshold); column is -1 when no feature has two distinct
    values, in which case wr_out carries the total weighted class sums.
    wl_out/wr_out receive the per-class weighted sums of each side.
    """
    n, d = X.shape
    tot = np.zeros(n_classes, np.float64)
    for i in range(n):
        tot[y[i]] += w[i]
    total_w = 0.0
    for c in range(n_classes):
        total_w += tot[c]
    base_ss = 0.0
    for c in range(n_classes):
        base_ss += tot[c] * tot[c]

    best_score = -1.0
    best_col = -1
    best_thr = 0.0
    sl = np.zeros(n_classes, np.float64)
    for j in range(d):
        for c in range(n_classes):
            sl[c] = 0.0
        ssl = 0.0
        ssr = base_ss
        wl = 0.0
        for p in range(n - 1):
            i = sort_idx[p, j]
            c = y[i]
            wi = w[i]
            old_l = sl[c]
            old_r = tot[c] - old_l
            ssl += 2.0 * wi * old_l + wi * wi
            ssr += -2.0 * wi * old_r + wi * wi
            sl[c] += wi
            wl += wi
            v = X[i, j]
            vnext = X[sort_idx[p + 1, j], j]
            if v != vnext:
                wr = total_w - wl
                if wl > 0.0 and wr > 0.0:
                    score = ssl / wl + ssr / wr
                    if score > best_score:
                        best_score = score
                        best_col = j
                        thr = 0.5 * (v + vnext)
                        if thr >= vnext:
                            thr = v
                        best_thr = thr

    for c in range(n_classes):
        wl_out[c] = 0.0
        wr_out[c] = 0.0
    if best_col == -1:
        for c in range(n_classes):
            wr_out[c] = tot[c]
        return -1, 0.0
    for i in range(n):
        if X[i, best_col] <= best_thr:
            wl_out[y[i]] += w[i]
        else:
            wr_out[y[i]] += w[i]
    return best_col, best_thr


@njit(cache=True, nogil=True)
def pegasos_ovr(X, ysign, lam, epochs, seed):
    """One-vs-rest hinge-loss subgradient descent with step 1/(lam*(t+1)).

    The bias is treated as an augmented constant feature, so it shares the
    regularization decay; the decay itself is tracked as a lazy scalar, and
    each sample costs one score pass plus updates for violated classes only.
    """
    n, d = X.shape
    n_cls = ysign.shape[0]
    W = np.zeros((n_cls, d), np.float64)
    b = np.zeros(n_cls, np.float64)
    s = 1.0
    np.random.seed(seed)
    t = 0
    for _ in range(epochs):
        perm = np.random.permutation(n)
        for pi in range(n):
            i = perm[pi]
            t += 1
            eta = 1.0 / (lam * (t + 1))
            s *= 1.0 - eta * lam
            if s < 1e-9:
                for c in range(n_cls):
                    for jj in range(d):
                        W[c, jj] *= s
                    b[c] *= s
                s = 1.0
            for c in range(n_cls):
                score = 0.0
                for jj in range(d):
                    score += W[c, jj] * X[i, jj]
                score = s * (score + b[c])
                yv = ysign[c, i]
                if yv * score < 1.0:
                    coef = eta * yv / s
                    for jj in range(d):
                        W[c, jj] += coef * X[i, jj]
                    b[c] += coef
    for c in range(n_cls):
        for jj in range(d):
            W[c, jj] *= s
        b[c] *= s
    return W, b
