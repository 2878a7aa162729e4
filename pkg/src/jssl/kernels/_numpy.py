"""Pure numpy versions of the kernels in ``_numba``.

Same signatures and outputs. The forest grower consumes the SplitMix64
stream in the same order as the compiled version, so both backends grow
identical trees.
"""
import numpy as np

from ..rng import UINT64_MASK, splitmix64

_GOLDEN = 0x9E3779B97F4A7C15


def brier_step(time, status, grid, dA1, dA2, dAc, tau, product_limit):
    n = time.shape[0]
    keep = grid <= tau
    g = grid[keep]
    dA1, dA2, dAc = dA1[:, keep], dA2[:, keep], dAc[:, keep]
    dA = dA1 + dA2 + dAc
    if product_limit:
        f0 = np.cumprod(1.0 - dA, axis=1)
    else:
        f0 = np.exp(-np.cumsum(dA, axis=1))
    ones = np.ones((n, 1))
    zeros = np.zeros((n, 1))
    f0_left = np.hstack([ones, f0[:, :-1]])
    # state values on cells [0, g0), [g0, g1), ..., [g_last, tau)
    F0 = np.hstack([ones, f0])
    F1 = np.hstack([zeros, np.cumsum(f0_left * dA1, axis=1)])
    F2 = np.hstack([zeros, np.cumsum(f0_left * dA2, axis=1)])
    Fc = np.hstack([zeros, np.cumsum(f0_left * dAc, axis=1)])
    edges = np.concatenate([[0.0], g, [tau]])
    width = np.diff(edges)
    sq = F0 ** 2 + F1 ** 2 + F2 ** 2 + Fc ** 2
    q0 = sq - 2.0 * F0 + 1.0
    Fs = np.where((status == 1)[:, None], F1, np.where((status == 2)[:, None], F2, Fc))
    qs = sq - 2.0 * Fs + 1.0
    c0 = np.hstack([zeros, np.cumsum(q0 * width, axis=1)])
    cs = np.hstack([zeros, np.cumsum(qs * width, axis=1)])
    total0 = c0[:, -1]
    totals = cs[:, -1]
    ncell = width.shape[0]
    j = np.clip(np.searchsorted(edges, time, side="right") - 1, 0, ncell - 1)
    rows = np.arange(n)
    lo = edges[j]
    hi = edges[j + 1]
    mixed = c0[rows, j] + q0[rows, j] * (time - lo) + qs[rows, j] * (hi - time) + (totals - cs[rows, j + 1])
    return np.where(time >= tau, total0, mixed)


# ---------------------------------------------------------------------------
# forest
# ---------------------------------------------------------------------------

class _Stream:
    def __init__(self, seed, b):
        self.state = (int(seed) + b * _GOLDEN) & UINT64_MASK
        self.next()

    def next(self):
        self.state, z = splitmix64(self.state)
        return z

    def below(self, m):
        return self.next() % m


def _groups_desc(t):
    """Start offsets of equal-time groups in the reversed (descending) array."""
    tr = t[::-1]
    return np.flatnonzero(np.concatenate([[True], tr[1:] != tr[:-1]]))


def _logrank_all(t, e, v, cuts):
    starts = _groups_desc(t)
    er = e[::-1].astype(float)
    L = (v[::-1][None, :] <= cuts[:, None])
    ny = np.diff(np.append(starts, t.shape[0])).astype(float)
    nyl = np.add.reduceat(L.astype(float), starts, axis=1)
    d = np.add.reduceat(er, starts)
    dl = np.add.reduceat(L * er[None, :], starts, axis=1)
    Y = np.cumsum(ny)
    YL = np.cumsum(nyl, axis=1)
    has = d > 0
    w = d / Y
    Ym1 = np.where(Y > 1.0, Y - 1.0, 1.0)
    a = np.where(Y > 1.0, (Y - d) * d / (Ym1 * Y * Y), 0.0)
    num_terms = np.where(has, dl - YL * w, 0.0)
    var_terms = np.where(has, YL * (Y - YL) * a, 0.0)
    num = np.cumsum(num_terms, axis=1)[:, -1]
    var = np.cumsum(var_terms, axis=1)[:, -1]
    nl = L.sum(axis=1)
    stat = np.full(cuts.shape[0], -1.0)
    good = (nl > 0) & (nl < t.shape[0]) & (var > 0.0)
    stat[good] = np.abs(num[good]) / np.sqrt(var[good])
    return stat


def _leaf_entries(t, e, gi):
    starts = _groups_desc(t)
    er = e[::-1]
    gir = gi[::-1]
    ny = np.diff(np.append(starts, t.shape[0])).astype(float)
    d = np.add.reduceat(er.astype(float), starts)
    Y = np.cumsum(ny)
    cols, vals = [], []
    ends = np.append(starts[1:], t.shape[0])
    for g in np.flatnonzero(d > 0):
        seg = slice(starts[g], ends[g])
        cols.append(int(gir[seg][er[seg]][0]))
        vals.append(d[g] / Y[g])
    return cols, vals


def grow_forest(X, time, event, grid_index, n_trees, mtry, min_node_size, bootstrap, seed, max_cuts):
    n, p = X.shape
    feature, threshold, left, right, leaf = [], [], [], [], []
    tree_offset = [0]
    leaf_ptr = [0]
    leaf_col, leaf_val = [], []
    event = np.asarray(event, dtype=bool)
    for b in range(n_trees):
        rs = _Stream(seed, b)
        if bootstrap:
            idx = np.sort(np.array([rs.below(n) for _ in range(n)], dtype=np.int64))
        else:
            idx = np.arange(n)
        root = len(feature)
        for lst, val in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (leaf, -1)):
            lst.append(val)
        stack = [(root, idx)]
        while stack:
            node, ids = stack.pop()
            m = ids.shape[0]
            best, best_j, best_cut = -1.0, -1, 0.0
            if m >= min_node_size:
                feats = list(range(p))
                t = time[ids]
                e = event[ids]
                for f in range(mtry):
                    r = f + rs.below(p - f)
                    feats[f], feats[r] = feats[r], feats[f]
                    j = feats[f]
                    v = X[ids, j]
                    sv = np.sort(v)
                    cutpos = list(np.flatnonzero(sv[1:] != sv[:-1]) + 1)
                    nd = len(cutpos)
                    ncut = nd
                    if nd > max_cuts:
                        for c in range(max_cuts):
                            r2 = c + rs.below(nd - c)
                            cutpos[c], cutpos[r2] = cutpos[r2], cutpos[c]
                        ncut = max_cuts
                    if ncut == 0:
                        continue
                    q = np.array(cutpos[:ncut])
                    cuts = 0.5 * (sv[q - 1] + sv[q])
                    stats = _logrank_all(t, e, v, cuts)
                    for c in range(ncut):
                        if stats[c] > best:
                            best, best_j, best_cut = stats[c], j, cuts[c]
            if best_j < 0:
                leaf[node] = len(leaf_ptr) - 1
                cols, vals = _leaf_entries(time[ids], event[ids], grid_index[ids])
                leaf_col.extend(cols)
                leaf_val.extend(vals)
                leaf_ptr.append(len(leaf_col))
                continue
            go_left = X[ids, best_j] <= best_cut
            feature[node] = best_j
            threshold[node] = best_cut
            lnode = len(feature)
            for _ in range(2):
                for lst, val in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1), (leaf, -1)):
                    lst.append(val)
            left[node], right[node] = lnode, lnode + 1
            stack.append((lnode + 1, ids[~go_left]))
            stack.append((lnode, ids[go_left]))
        tree_offset.append(len(feature))
    i64 = np.int64
    return (np.array(feature, i64), np.array(threshold, float), np.array(left, i64),
            np.array(right, i64), np.array(leaf, i64), np.array(tree_offset, i64),
            np.array(leaf_ptr, i64), np.array(leaf_col, i64), np.array(leaf_val, float))


def forest_apply(X, feature, threshold, left, right, leaf, tree_offset):
    n = X.shape[0]
    n_trees = tree_offset.shape[0] - 1
    out = np.empty((n, n_trees), np.int64)
    rows = np.arange(n)
    for b in range(n_trees):
        node = np.full(n, tree_offset[b], np.int64)
        while True:
            f = feature[node]
            inner = f >= 0
            if not inner.any():
                break
            r = rows[inner]
            nd = node[inner]
            go = X[r, f[inner]] <= threshold[nd]
            node[inner] = np.where(go, left[nd], right[nd])
        out[:, b] = leaf[node]
    return out


def forest_increments(leaf_ids, leaf_ptr, leaf_col, leaf_val, m):
    n, n_trees = leaf_ids.shape
    out = np.zeros((n, m))
    n_leaves = leaf_ptr.shape[0] - 1
    owner = np.repeat(np.arange(n_leaves), np.diff(leaf_ptr))
    keep = leaf_col < m
    dense = np.zeros((n_leaves, m))
    np.add.at(dense, (owner[keep], leaf_col[keep]), leaf_val[keep])
    for b in range(n_trees):
        out += dense[leaf_ids[:, b]] / n_trees
    return out


# ---------------------------------------------------------------------------
# continuous Weibull triples: fixed composite Simpson rules
# ---------------------------------------------------------------------------

def _simpson_weights(k):
    w = np.ones(2 * k + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / (6.0 * k)


def _component_panels(c, nu, l, ua, ub, k=4):
    """int_{ua}^{ub} S(u) dLambda_l(u) for arrays ua, ub of shape (n, K)."""
    if not np.any(c[:, l] > 0):
        return np.zeros(ua.shape)
    va = ua ** nu[l]
    vb = ub ** nu[l]
    s = np.linspace(0.0, 1.0, 2 * k + 1)
    v = va[..., None] + (vb - va)[..., None] * s
    expo = np.zeros(v.shape)
    for kk in range(3):
        ck = c[:, kk][:, None, None]
        expo += np.where(ck > 0, ck * v ** (nu[kk] / nu[l]), 0.0)
    h = np.exp(-expo)
    return c[:, l][:, None] * (vb - va) * (h @ _simpson_weights(k))


def _surv(c, nu, t):
    expo = np.zeros(np.broadcast(c[:, :1], t).shape)
    for k in range(3):
        expo = expo + np.where(c[:, k:k + 1] > 0, c[:, k:k + 1] * t ** nu[k], 0.0)
    return np.exp(-expo)


def _cumulative(c, nu, nodes):
    """F for cause1, cause2, censoring at each row's sorted nodes (n, K), starting from 0."""
    lo = np.hstack([np.zeros((nodes.shape[0], 1)), nodes[:, :-1]])
    return [np.cumsum(_component_panels(c, nu, l, lo, nodes), axis=1) for l in range(3)]


def weibull_occupation(c, nu, t, tol):
    n = c.shape[0]
    t = np.asarray(t, dtype=float)
    out = np.empty((n, t.shape[0], 4))
    if t.shape[0] == 0:
        return out
    base = np.linspace(0.0, t[-1], 513)[1:]
    nodes = np.union1d(base, t)
    pos = np.searchsorted(nodes, t)
    for s0 in range(0, n, 64):
        cc = c[s0:s0 + 64]
        F = _cumulative(cc, nu, np.broadcast_to(nodes, (cc.shape[0], nodes.shape[0])))
        out[s0:s0 + 64, :, 0] = F[2][:, pos]
        out[s0:s0 + 64, :, 1] = _surv(cc, nu, t[None, :])
        out[s0:s0 + 64, :, 2] = F[0][:, pos]
        out[s0:s0 + 64, :, 3] = F[1][:, pos]
    return out


def weibull_brier(c, nu, time, status, tau, tol, panels=256):
    n = c.shape[0]
    out = np.empty(n)
    w = _simpson_weights(panels)
    sig = np.linspace(0.0, 1.0, 2 * panels + 1)
    active = np.any(c > 0, axis=0)
    # integrate in s with t = s**k, the same stretch as the compiled kernel
    k = max(1.0, 4.0 / nu[active].min()) if active.any() else 1.0
    for s0 in range(0, n, 64):
        cc = c[s0:s0 + 64]
        T = np.minimum(time[s0:s0 + 64], tau)
        st = status[s0:s0 + 64]
        m = cc.shape[0]
        sT = T ** (1.0 / k)
        s_tau = tau ** (1.0 / k)
        s1 = sT[:, None] * sig[None, :]
        s2 = sT[:, None] + (s_tau - sT)[:, None] * sig[None, :]
        snodes = np.hstack([s1, s2[:, 1:]])
        nodes = snodes ** k
        jac = k * snodes ** (k - 1.0)
        F1, F2, Fc = _cumulative(cc, nu, nodes)
        F0 = _surv(cc, nu, nodes)
        q = s1.shape[1]
        # before T: eta = 0
        g1 = ((F0[:, :q] - 1.0) ** 2 + F1[:, :q] ** 2 + F2[:, :q] ** 2 + Fc[:, :q] ** 2) * jac[:, :q]
        i1 = sT * (g1 @ w)
        # from T on: eta = state of the observation
        sl = slice(q - 1, None)
        e1 = F1[:, sl] - (st == 1)[:, None]
        e2 = F2[:, sl] - (st == 2)[:, None]
        ec = Fc[:, sl] - (st == 0)[:, None]
        g2 = (F0[:, sl] ** 2 + e1 ** 2 + e2 ** 2 + ec ** 2) * jac[:, sl]
        i2 = (s_tau - sT) * (g2 @ w)
        out[s0:s0 + m] = i1 + i2
    return out


def step_cif(grid, dA1, dA2, t, j):
    dA = dA1 + dA2
    cum = np.cumsum(dA, axis=1)
    left = np.exp(-np.hstack([np.zeros((dA.shape[0], 1)), cum[:, :-1]]))
    inc = np.cumsum(left * (dA1 if j == 1 else dA2), axis=1)
    inc = np.hstack([np.zeros((dA.shape[0], 1)), inc])
    return inc[:, np.searchsorted(grid, t, side="right")]
