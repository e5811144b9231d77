"""Compiled inner loops for tree growth, prediction, TreeSHAP and partial dependence."""

import numpy as np
from numba import njit

LEAF = -1


@njit(cache=True)
def grow_tree(X, order, g, h, max_depth, min_leaf, lam, allowed_keys, mtry, min_gain):
    """Grow one regression tree level by level with exact greedy splits.

    ``order[f]`` lists row indices sorted by feature ``f``. ``allowed_keys``
    holds one random key per (node, feature); a node may split on the
    ``mtry`` features with the smallest keys. Rows go left when
    ``x < threshold``. Returns node arrays plus each row's leaf id.
    """
    n, nf = X.shape
    max_nodes = 2 ** (max_depth + 1) - 1
    feat = np.full(max_nodes, LEAF, np.int64)
    thr = np.zeros(max_nodes)
    left = np.full(max_nodes, LEAF, np.int64)
    right = np.full(max_nodes, LEAF, np.int64)
    value = np.zeros(max_nodes)
    weight = np.zeros(max_nodes)
    gsum = np.zeros(max_nodes)
    hsum = np.zeros(max_nodes)

    row_node = np.zeros(n, np.int64)
    for i in range(n):
        gsum[0] += g[i]
        hsum[0] += h[i]
    weight[0] = n
    n_nodes = 1
    frontier = np.zeros(1, np.int64)
    pos = np.full(max_nodes, -1, np.int64)

    for depth in range(max_depth + 1):
        nfr = frontier.shape[0]
        if nfr == 0:
            break
        for k in range(nfr):
            pos[frontier[k]] = k
        if depth == max_depth:
            for k in range(nfr):
                nd = frontier[k]
                value[nd] = -gsum[nd] / (hsum[nd] + lam)
                pos[nd] = -1
            break
        allowed = np.ones((nfr, nf), np.bool_)
        if mtry < nf:
            for k in range(nfr):
                keys = allowed_keys[frontier[k]]
                rank = np.argsort(keys)
                for f in range(nf):
                    allowed[k, f] = False
                for r in range(mtry):
                    allowed[k, rank[r]] = True
        best_gain = np.full(nfr, min_gain)
        best_feat = np.full(nfr, LEAF, np.int64)
        best_thr = np.zeros(nfr)
        gl = np.zeros(nfr)
        hl = np.zeros(nfr)
        cl = np.zeros(nfr)
        lastx = np.zeros(nfr)
        seen = np.zeros(nfr, np.bool_)
        for f in range(nf):
            gl[:] = 0.0
            hl[:] = 0.0
            cl[:] = 0.0
            seen[:] = False
            for t in range(n):
                i = order[f, t]
                nd = row_node[i]
                if nd < 0:
                    continue
                k = pos[nd]
                if k < 0 or not allowed[k, f]:
                    continue
                x = X[i, f]
                if seen[k] and x > lastx[k]:
                    cnt = weight[nd]
                    if cl[k] >= min_leaf and cnt - cl[k] >= min_leaf:
                        gr = gsum[nd] - gl[k]
                        hr = hsum[nd] - hl[k]
                        gain = (gl[k] * gl[k] / (hl[k] + lam) + gr * gr / (hr + lam)
                                - gsum[nd] * gsum[nd] / (hsum[nd] + lam))
                        if gain > best_gain[k]:
                            best_gain[k] = gain
                            best_feat[k] = f
                            mid = 0.5 * (lastx[k] + x)
                            if mid <= lastx[k]:
                                mid = x
                            best_thr[k] = mid
                gl[k] += g[i]
                hl[k] += h[i]
                cl[k] += 1.0
                lastx[k] = x
                seen[k] = True
        # create children
        n_split = 0
        for k in range(nfr):
            if best_feat[k] != LEAF:
                n_split += 1
        new_frontier = np.zeros(2 * n_split, np.int64)
        q = 0
        for k in range(nfr):
            nd = frontier[k]
            if best_feat[k] == LEAF:
                value[nd] = -gsum[nd] / (hsum[nd] + lam)
                continue
            feat[nd] = best_feat[k]
            thr[nd] = best_thr[k]
            left[nd] = n_nodes
            right[nd] = n_nodes + 1
            new_frontier[q] = n_nodes
            new_frontier[q + 1] = n_nodes + 1
            q += 2
            n_nodes += 2
        for i in range(n):
            nd = row_node[i]
            if nd < 0:
                continue
            if feat[nd] == LEAF:
                row_node[i] = -1 - nd
                continue
            child = left[nd] if X[i, feat[nd]] < thr[nd] else right[nd]
            row_node[i] = child
            gsum[child] += g[i]
            hsum[child] += h[i]
            weight[child] += 1.0
        for k in range(nfr):
            pos[frontier[k]] = -1
        frontier = new_frontier
    leaf_of = np.empty(n, np.int64)
    for i in range(n):
        nd = row_node[i]
        leaf_of[i] = -1 - nd if nd < 0 else nd
    return (feat[:n_nodes].copy(), thr[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy(), weight[:n_nodes].copy(), leaf_of)


@njit(cache=True)
def predict_forest(X, offsets, feat, thr, left, right, value):
    """Per-row sum of leaf values over trees stored back to back.

    Tree ``t`` occupies nodes ``offsets[t]:offsets[t+1]``; child indices are
    local to the tree. Trees are added in order.
    """
    n = X.shape[0]
    out = np.zeros(n)
    n_trees = offsets.shape[0] - 1
    for i in range(n):
        s = 0.0
        for t in range(n_trees):
            base = offsets[t]
            nd = 0
            while feat[base + nd] != LEAF:
                f = feat[base + nd]
                nd = left[base + nd] if X[i, f] < thr[base + nd] else right[base + nd]
            s += value[base + nd]
        out[i] = s
    return out


@njit(cache=True)
def predict_tree_values(X, feat, thr, left, right, value):
    n = X.shape[0]
    out = np.zeros(n)
    for i in range(n):
        nd = 0
        while feat[nd] != LEAF:
            nd = left[nd] if X[i, feat[nd]] < thr[nd] else right[nd]
        out[i] = value[nd]
    return out


# -- path-dependent TreeSHAP ------------------------------------------------------

@njit(cache=True)
def _extend(pd, pz, po, pw, ud, zero, one, fi):
    pd[ud] = fi
    pz[ud] = zero
    po[ud] = one
    pw[ud] = 1.0 if ud == 0 else 0.0
    for i in range(ud - 1, -1, -1):
        pw[i + 1] += one * pw[i] * (i + 1) / (ud + 1)
        pw[i] = zero * pw[i] * (ud - i) / (ud + 1)


@njit(cache=True)
def _unwind(pd, pz, po, pw, ud, k):
    one = po[k]
    zero = pz[k]
    nxt = pw[ud]
    for i in range(ud - 1, -1, -1):
        if one != 0.0:
            tmp = pw[i]
            pw[i] = nxt * (ud + 1) / ((i + 1) * one)
            nxt = tmp - pw[i] * zero * (ud - i) / (ud + 1)
        else:
            pw[i] = pw[i] * (ud + 1) / (zero * (ud - i))
    for i in range(k, ud):
        pd[i] = pd[i + 1]
        pz[i] = pz[i + 1]
        po[i] = po[i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, ud, k):
    one = po[k]
    zero = pz[k]
    nxt = pw[ud]
    total = 0.0
    for i in range(ud - 1, -1, -1):
        if one != 0.0:
            tmp = nxt * (ud + 1) / ((i + 1) * one)
            total += tmp
            nxt = pw[i] - tmp * zero * (ud - i) / (ud + 1)
        else:
            total += pw[i] / zero / ((ud - i) / (ud + 1))
    return total


@njit(cache=False)  # numba cannot cache recursive functions reliably
def _shap_recurse(node, level, x, phi, feat, thr, left, right, value, weight,
                  PD, PZ, PO, PW, ud, zero, one, fi):
    # each recursion level works on its own copy of the parent's path
    pd, pz, po, pw = PD[level], PZ[level], PO[level], PW[level]
    if level > 0:
        for i in range(ud):
            pd[i] = PD[level - 1, i]
            pz[i] = PZ[level - 1, i]
            po[i] = PO[level - 1, i]
            pw[i] = PW[level - 1, i]
    _extend(pd, pz, po, pw, ud, zero, one, fi)
    f = feat[node]
    if f == LEAF:
        for i in range(1, ud + 1):
            w = _unwound_sum(pz, po, pw, ud, i)
            phi[pd[i]] += w * (po[i] - pz[i]) * value[node]
        return
    if x[f] < thr[node]:
        hot, cold = left[node], right[node]
    else:
        hot, cold = right[node], left[node]
    in_zero = 1.0
    in_one = 1.0
    k = 1
    while k <= ud:
        if pd[k] == f:
            break
        k += 1
    if k <= ud:
        in_zero = pz[k]
        in_one = po[k]
        _unwind(pd, pz, po, pw, ud, k)
        ud -= 1
    w_node = weight[node]
    _shap_recurse(hot, level + 1, x, phi, feat, thr, left, right, value, weight,
                  PD, PZ, PO, PW, ud + 1, in_zero * weight[hot] / w_node, in_one, f)
    _shap_recurse(cold, level + 1, x, phi, feat, thr, left, right, value, weight,
                  PD, PZ, PO, PW, ud + 1, in_zero * weight[cold] / w_node, 0.0, f)


@njit(cache=False)  # numba cannot cache recursive functions reliably
def tree_shap_forest(X, offsets, feat, thr, left, right, value, weight, max_depth):
    """Summed path-dependent TreeSHAP values of trees stored back to back."""
    n, nf = X.shape
    phi = np.zeros((n, nf + 1))
    size = max_depth + 2
    PD = np.zeros((size + 1, size + 1), np.int64)
    PZ = np.zeros((size + 1, size + 1))
    PO = np.zeros((size + 1, size + 1))
    PW = np.zeros((size + 1, size + 1))
    for t in range(offsets.shape[0] - 1):
        a, b = offsets[t], offsets[t + 1]
        if feat[a] == LEAF:
            continue
        for i in range(n):
            _shap_recurse(0, 0, X[i], phi[i], feat[a:b], thr[a:b], left[a:b], right[a:b],
                          value[a:b], weight[a:b], PD, PZ, PO, PW, 0, 1.0, 1.0, nf)
    return phi[:, :nf]


# -- partial dependence via leaf decomposition ------------------------------------

@njit(cache=True)
def pd_forest(X_eval, X_bg, in_s, offsets, feat, thr, left, right, value, max_nodes):
    """Mean forest output over background rows with the ``in_s`` features taken from each eval row.

    For one tree, the leaf reached by a hybrid row is fixed by the eval row on
    ``in_s`` splits and by the background row elsewhere, so the mean equals
    ``sum_leaf value * [eval row passes the in_s tests] * (share of
    background rows passing the others)``.
    """
    n_eval = X_eval.shape[0]
    n_bg = X_bg.shape[0]
    out = np.zeros(n_eval)
    mass = np.zeros(max_nodes)
    stack = np.zeros(max_nodes, np.int64)
    inv = 1.0 / n_bg
    for t in range(offsets.shape[0] - 1):
        a, b = offsets[t], offsets[t + 1]
        mass[: b - a] = 0.0
        for r in range(n_bg):
            top = 0
            stack[0] = 0
            top = 1
            while top > 0:
                top -= 1
                nd = stack[top]
                f = feat[a + nd]
                if f == LEAF:
                    mass[nd] += inv
                elif in_s[f]:
                    stack[top] = left[a + nd]
                    stack[top + 1] = right[a + nd]
                    top += 2
                else:
                    stack[top] = left[a + nd] if X_bg[r, f] < thr[a + nd] else right[a + nd]
                    top += 1
        for r in range(n_eval):
            s = 0.0
            stack[0] = 0
            top = 1
            while top > 0:
                top -= 1
                nd = stack[top]
                f = feat[a + nd]
                if f == LEAF:
                    s += value[a + nd] * mass[nd]
                elif in_s[f]:
                    stack[top] = left[a + nd] if X_eval[r, f] < thr[a + nd] else right[a + nd]
                    top += 1
                else:
                    stack[top] = left[a + nd]
                    stack[top + 1] = right[a + nd]
                    top += 2
            out[r] += s
    return out
