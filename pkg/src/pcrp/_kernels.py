"""Compiled seating loops.

All kernels consume a pre-drawn vector of U(0, 1) variates, one per
customer, so that the random stream stays under control of a numpy
``Generator`` on the Python side. Table masses are ``(N_k - beta)**r``
scaled by ``exp(-log_scale)`` to keep large-N, large-r runs finite; the
new-table mass ``alpha + beta*K`` is scaled identically.

Table selection uses a Fenwick tree over table slots, so one step costs
O(log K) regardless of how many tables are open.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True)
def _fenwick_add(tree, i, delta):
    size = tree.shape[0] - 1
    i += 1
    while i <= size:
        tree[i] += delta
        i += i & (-i)


@njit(cache=True)
def _fenwick_find(tree, x, n_tables):
    # smallest index whose prefix sum exceeds x
    size = tree.shape[0] - 1
    step = 1
    while step * 2 <= size:
        step *= 2
    pos = 0
    while step > 0:
        nxt = pos + step
        if nxt <= size and tree[nxt] <= x:
            pos = nxt
            x -= tree[nxt]
        step //= 2
    if pos >= n_tables:
        pos = n_tables - 1
    return pos


@njit(cache=True)
def _mass(m, r, beta, log_scale):
    return np.exp(r * np.log(m - beta) - log_scale)


@njit(cache=True)
def _log_sum_powers(pops, n_tables, r):
    if n_tables == 0:
        return -np.inf
    top = -np.inf
    for k in range(n_tables):
        v = r * np.log(pops[k])
        if v > top:
            top = v
    acc = 0.0
    for k in range(n_tables):
        acc += np.exp(r * np.log(pops[k]) - top)
    return top + np.log(acc)


@njit(cache=True)
def seat_run(u, r, alpha, beta, log_scale, checkpoints):
    """Seat ``len(u)`` customers from an empty restaurant.

    Returns (history, populations, K at checkpoints, log sum N_k^r at
    checkpoints).
    """
    n = u.shape[0]
    size = 1
    while size < n + 1:
        size *= 2
    tree = np.zeros(size + 1)
    pops = np.zeros(n, dtype=np.int64)
    history = np.empty(n, dtype=np.int64)
    n_cp = checkpoints.shape[0]
    k_at = np.zeros(n_cp, dtype=np.int64)
    lsum_at = np.zeros(n_cp)
    alpha_s = np.exp(np.log(alpha) - log_scale)
    beta_s = beta * np.exp(-log_scale)
    total = 0.0
    n_tables = 0
    cp = 0
    for i in range(n):
        new_mass = alpha_s + beta_s * n_tables
        x = u[i] * (new_mass + total)
        if n_tables == 0 or x >= total:
            k = n_tables
            n_tables += 1
            pops[k] = 1
            w = _mass(1.0, r, beta, log_scale)
            _fenwick_add(tree, k, w)
            total += w
        else:
            k = _fenwick_find(tree, x, n_tables)
            old = _mass(pops[k], r, beta, log_scale)
            pops[k] += 1
            w = _mass(pops[k], r, beta, log_scale)
            _fenwick_add(tree, k, w - old)
            total += w - old
        history[i] = k
        while cp < n_cp and checkpoints[cp] == i + 1:
            k_at[cp] = n_tables
            lsum_at[cp] = _log_sum_powers(pops, n_tables, r)
            cp += 1
    return history, pops[:n_tables].copy(), k_at, lsum_at


@njit(cache=True)
def final_tables(u, r, alpha, beta, log_scale):
    """Table count after seating each row of ``u`` as one independent run."""
    n_runs, n = u.shape
    cps = np.array([n], dtype=np.int64)
    out = np.empty(n_runs, dtype=np.int64)
    for j in range(n_runs):
        out[j] = seat_run(u[j], r, alpha, beta, log_scale, cps)[2][0]
    return out


@njit(cache=True)
def gap_run(u, r, alpha, log_scale, checkpoints, drift_from):
    """Powered seating that starts from two tables of one customer each.

    ``u`` drives customers 3..N. Records at each checkpoint the signed gap
    p_1 - p_2 between the two founding tables and the largest table
    probability. Also accumulates sign(gap) * (gap' - gap) over every step
    taken once at least ``drift_from`` customers are seated.
    """
    n_extra = u.shape[0]
    n = n_extra + 2
    size = 1
    while size < n + 1:
        size *= 2
    tree = np.zeros(size + 1)
    pops = np.zeros(n, dtype=np.int64)
    n_cp = checkpoints.shape[0]
    gap_at = np.zeros(n_cp)
    pmax_at = np.zeros(n_cp)
    alpha_s = np.exp(np.log(alpha) - log_scale)
    w1 = _mass(1.0, r, 0.0, log_scale)
    pops[0] = 1
    pops[1] = 1
    _fenwick_add(tree, 0, w1)
    _fenwick_add(tree, 1, w1)
    total = 2.0 * w1
    n_tables = 2
    max_pop = 1
    drift = 0.0
    n_drift = 0
    cp = 0
    while cp < n_cp and checkpoints[cp] <= 2:
        if checkpoints[cp] == 2:
            gap_at[cp] = 0.0
            pmax_at[cp] = w1 / (alpha_s + total)
        cp += 1
    gap = 0.0
    for i in range(n_extra):
        x = u[i] * (alpha_s + total)
        if x >= total:
            k = n_tables
            n_tables += 1
            pops[k] = 1
            w = w1
            _fenwick_add(tree, k, w)
            total += w
        else:
            k = _fenwick_find(tree, x, n_tables)
            old = _mass(pops[k], r, 0.0, log_scale)
            pops[k] += 1
            w = _mass(pops[k], r, 0.0, log_scale)
            _fenwick_add(tree, k, w - old)
            total += w - old
        if pops[k] > max_pop:
            max_pop = pops[k]
        denom = alpha_s + total
        new_gap = (_mass(pops[0], r, 0.0, log_scale)
                   - _mass(pops[1], r, 0.0, log_scale)) / denom
        seated = i + 3
        if seated - 1 >= drift_from:
            if gap > 0:
                drift += new_gap - gap
            elif gap < 0:
                drift -= new_gap - gap
            n_drift += 1
        gap = new_gap
        while cp < n_cp and checkpoints[cp] == seated:
            gap_at[cp] = gap
            pmax_at[cp] = _mass(max_pop, r, 0.0, log_scale) / denom
            cp += 1
    return gap_at, pmax_at, drift, n_drift


# -- collapsed Gibbs --------------------------------------------------------

@njit(cache=True)
def _student_refresh(k, counts, totals, outers, mu0, kappa0, psi, nu0, loc, inv, df, norm):
    d = mu0.shape[0]
    n = counts[k]
    kn = kappa0 + n
    nn = nu0 + n
    mun = (kappa0 * mu0 + totals[k]) / kn
    shape = np.empty((d, d))
    dof = nn - d + 1.0
    fac = (kn + 1.0) / (kn * dof)
    for a in range(d):
        for b in range(d):
            v = (psi[a, b] + outers[k, a, b] + kappa0 * mu0[a] * mu0[b] - kn * mun[a] * mun[b])
            shape[a, b] = v
    for a in range(d):
        for b in range(a + 1, d):
            s = 0.5 * (shape[a, b] + shape[b, a])
            shape[a, b] = s
            shape[b, a] = s
    shape *= fac
    for a in range(d):
        if not shape[a, a] > 0.0:
            return False
    chol = np.linalg.cholesky(shape)
    logdet = 0.0
    for a in range(d):
        if not chol[a, a] > 0.0:
            return False
        logdet += 2.0 * np.log(chol[a, a])
    inv[k] = np.linalg.inv(shape)
    loc[k] = mun
    df[k] = dof
    norm[k] = (math.lgamma((dof + d) / 2.0) - math.lgamma(dof / 2.0)
               - 0.5 * d * (np.log(dof) + np.log(np.pi)) - 0.5 * logdet)
    return True


@njit(cache=True)
def _t_logpdf(x, loc_k, inv_k, df_k, norm_k):
    d = x.shape[0]
    q = 0.0
    for a in range(d):
        da = x[a] - loc_k[a]
        for b in range(d):
            q += da * inv_k[a, b] * (x[b] - loc_k[b])
    return norm_k - 0.5 * (df_k + d) * np.log1p(q / df_k)


@njit(cache=True)
def gibbs_pass(data, outer_pts, order, u, assign, counts, totals, outers, loc, inv, df, norm,
               n_clusters, mu0, kappa0, psi, nu0, p_loc, p_inv, p_df, p_norm,
               power, discount, alpha):
    """Resample the points in ``order`` once; unassigned points (-1) are just seated.

    Mirrors GibbsState.resample step for step. Returns the new cluster
    count, or -1 - i if the posterior scale of a cluster touched while
    moving point i stopped being positive definite.
    """
    n, d = data.shape
    lw = np.empty(n + 1)
    save_loc = np.zeros(d)
    save_inv = np.zeros((d, d))
    save_df = 0.0
    save_norm = 0.0
    for t in range(order.shape[0]):
        i = order[t]
        x = data[i]
        old = assign[i]
        if old >= 0:
            assign[i] = -1
            counts[old] -= 1
            if counts[old] == 0:
                last = n_clusters - 1
                if old != last:
                    for j in range(n):
                        if assign[j] == last:
                            assign[j] = old
                    counts[old] = counts[last]
                    totals[old] = totals[last]
                    outers[old] = outers[last]
                    loc[old] = loc[last]
                    inv[old] = inv[last]
                    df[old] = df[last]
                    norm[old] = norm[last]
                counts[last] = 0
                totals[last] = 0.0
                outers[last] = 0.0
                n_clusters -= 1
                old = -1
            else:
                totals[old] -= x
                outers[old] -= outer_pts[i]
                save_loc = loc[old].copy()
                save_inv = inv[old].copy()
                save_df = df[old]
                save_norm = norm[old]
                if not _student_refresh(old, counts, totals, outers, mu0, kappa0, psi, nu0,
                                        loc, inv, df, norm):
                    return -1 - i
        top = -np.inf
        for k in range(n_clusters):
            v = (power * np.log(counts[k] - discount)
                 + _t_logpdf(x, loc[k], inv[k], df[k], norm[k]))
            lw[k] = v
            if v > top:
                top = v
        v = np.log(alpha + discount * n_clusters) + _t_logpdf(x, p_loc, p_inv, p_df, p_norm)
        lw[n_clusters] = v
        if v > top:
            top = v
        tot = 0.0
        for k in range(n_clusters + 1):
            lw[k] = np.exp(lw[k] - top)
            tot += lw[k]
        target = u[t]
        acc = 0.0
        new = n_clusters
        for k in range(n_clusters + 1):
            acc += lw[k] / tot
            if acc > target:
                new = k
                break
        if new == n_clusters:
            n_clusters += 1
        assign[i] = new
        counts[new] += 1
        totals[new] += x
        outers[new] += outer_pts[i]
        if new == old and old >= 0:
            loc[new] = save_loc
            inv[new] = save_inv
            df[new] = save_df
            norm[new] = save_norm
        elif not _student_refresh(new, counts, totals, outers, mu0, kappa0, psi, nu0,
                                  loc, inv, df, norm):
            return -1 - i
    return n_clusters


@njit(cache=True)
def seating_log_mass(labels, n_labels, power, discount, alpha):
    """log P(seating points 0..n-1 in order at their tables)."""
    n = labels.shape[0]
    table_of = np.full(n_labels, -1, dtype=np.int64)
    pops = np.zeros(n_labels, dtype=np.int64)
    logs = np.empty(n_labels + 1)
    n_tables = 0
    total = 0.0
    for i in range(n):
        top = -np.inf
        for k in range(n_tables):
            logs[k] = power * np.log(pops[k] - discount)
            if logs[k] > top:
                top = logs[k]
        logs[n_tables] = np.log(alpha + discount * n_tables)
        if logs[n_tables] > top:
            top = logs[n_tables]
        acc = 0.0
        for k in range(n_tables + 1):
            acc += np.exp(logs[k] - top)
        k = table_of[labels[i]]
        if k < 0:
            k = n_tables
            table_of[labels[i]] = k
            n_tables += 1
        total += logs[k] - top - np.log(acc)
        pops[k] += 1
    return total
