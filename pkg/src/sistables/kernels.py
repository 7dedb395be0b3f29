"""Hot loops: one column of SIS, whole trials, batches of trials, and the
running-estimate accumulator with the sliding stop window.

Everything here is written in the numba-compatible subset of Python/numpy and
compiled with ``njit`` unless ``SISTABLES_DISABLE_NUMBA`` is set, in which
case the identical source runs interpreted. Callers must wrap fallback calls
in ``np.errstate(over="ignore")`` because the RNG relies on uint64 wraparound.

Column step
-----------
Rows are counting-sorted by residual sum (descending, stable in the row
index) and grouped by equal residual ``v``. Every row in a group carries the
same weight ``v / (n' - v)``, so the proposal over column vectors factors
into "how many ones does each group take" (weighted by ``C(size, x) w^x``)
followed by a uniformly random choice of which ``x`` rows. Rows with
``v == n'`` must take a one, rows with ``v == 0`` cannot.

For the feasible variant the residual after this column must satisfy
Gale-Ryser against the columns still to come. Placing a group's ones on its
last rows keeps the residual sorted, so the condition becomes lower bounds on
prefix counts of ones: ``T_k >= L_k = R_k - C*_k`` with ``R_k`` the prefix sum
of the sorted residuals and ``C*_k`` the conjugate of the remaining columns.
Within a group these reduce to two range maxima of ``L``.

The group DP is carried in log space; ``log B[g, P]`` is the total weight of
completing groups ``g..`` given ``P`` ones already placed.
"""
import math

import numpy as np

from ._jit import njit
from .rng import trial_key, uniform

KIND_FREE = 0
KIND_FORCED = 1
KIND_FORBIDDEN = 2


@njit
def log_factorials(n):
    lf = np.zeros(n + 1)
    for k in range(2, n + 1):
        lf[k] = lf[k - 1] + math.log(k)
    return lf


@njit
def _logaddexp(a, b):
    if a == -np.inf:
        return b
    if b == -np.inf:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit
def _column_dp(res, nprime, c, feasible, ge, lf, order, cnt, gval, gstart, gsize,
               glw, gkind, lbound, pmax, smax, logb):
    """Group rows and fill the backward DP. Returns the number of groups."""
    m = res.size
    for v in range(nprime + 1):
        cnt[v] = 0
    for i in range(m):
        cnt[res[i]] += 1
    # descending counting sort; cnt[v] becomes the first slot of value v
    pos = 0
    for v in range(nprime, -1, -1):
        k = cnt[v]
        cnt[v] = pos
        pos += k
    ngroups = 0
    for v in range(nprime, -1, -1):
        start = cnt[v]
        end = cnt[v - 1] if v > 0 else m
        if end > start:
            gval[ngroups] = v
            gstart[ngroups] = start
            gsize[ngroups] = end - start
            if v == nprime:
                gkind[ngroups] = KIND_FORCED
                glw[ngroups] = 0.0
            elif v == 0:
                gkind[ngroups] = KIND_FORBIDDEN
                glw[ngroups] = 0.0
            else:
                gkind[ngroups] = KIND_FREE
                glw[ngroups] = math.log(v) - math.log(nprime - v)
            ngroups += 1
    for i in range(m):
        v = res[i]
        order[cnt[v]] = i
        cnt[v] += 1

    if feasible:
        run_rows = 0
        run_conj = 0
        for p in range(m):
            run_rows += res[order[p]]
            run_conj += ge[p + 1]
            lbound[p] = run_rows - run_conj
        for g in range(ngroups):
            a0 = gstart[g]
            b0 = a0 + gsize[g] - 1
            best = lbound[a0]
            for p in range(a0, b0 + 1):
                if lbound[p] > best:
                    best = lbound[p]
                pmax[p] = best
            best = lbound[b0] - (b0 + 1)
            for p in range(b0, a0 - 1, -1):
                val = lbound[p] - (p + 1)
                if val > best:
                    best = val
                smax[p] = best

    for p in range(c + 1):
        logb[ngroups, p] = -np.inf
    logb[ngroups, c] = 0.0
    for g in range(ngroups - 1, -1, -1):
        for p in range(c + 1):
            logb[g, p] = _group_total(g, p, c, feasible, lf, gstart, gsize, glw, gkind,
                                      pmax, smax, logb)
    return ngroups


@njit
def _x_range(g, p, c, gsize, gkind):
    s = gsize[g]
    if gkind[g] == KIND_FORCED:
        lo = s
        hi = s
    elif gkind[g] == KIND_FORBIDDEN:
        lo = 0
        hi = 0
    else:
        lo = 0
        hi = s
    if hi > c - p:
        hi = c - p
    return lo, hi


@njit
def _allowed(g, p, x, gstart, gsize, pmax, smax):
    a0 = gstart[g]
    b0 = a0 + gsize[g] - 1
    if b0 - x >= a0 and p < pmax[b0 - x]:
        return False
    if x >= 1 and p + x - (b0 + 1) < smax[b0 - x + 1]:
        return False
    return True


@njit
def _term(g, p, x, lf, gsize, glw, logb):
    s = gsize[g]
    nxt = logb[g + 1, p + x]
    if nxt == -np.inf:
        return -np.inf
    return lf[s] - lf[x] - lf[s - x] + x * glw[g] + nxt


@njit
def _group_total(g, p, c, feasible, lf, gstart, gsize, glw, gkind, pmax, smax, logb):
    lo, hi = _x_range(g, p, c, gsize, gkind)
    top = -np.inf
    for x in range(lo, hi + 1):
        if feasible and not _allowed(g, p, x, gstart, gsize, pmax, smax):
            continue
        t = _term(g, p, x, lf, gsize, glw, logb)
        if t > top:
            top = t
    if top == -np.inf:
        return -np.inf
    acc = 0.0
    for x in range(lo, hi + 1):
        if feasible and not _allowed(g, p, x, gstart, gsize, pmax, smax):
            continue
        t = _term(g, p, x, lf, gsize, glw, logb)
        if t > -np.inf:
            acc += math.exp(t - top)
    return top + math.log(acc)


@njit
def sample_column_step(res, nprime, c, feasible, ge, lf, key, ctr, assign, order, cnt,
                       gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb):
    """Draw one column. Returns (ok, log_prob, next_counter); fills ``assign``."""
    ngroups = _column_dp(res, nprime, c, feasible, ge, lf, order, cnt, gval, gstart,
                         gsize, glw, gkind, lbound, pmax, smax, logb)
    for i in range(res.size):
        assign[i] = 0
    logz = logb[0, 0]
    if logz == -np.inf:
        return False, 0.0, ctr
    p = 0
    logw = 0.0
    for g in range(ngroups):
        lo, hi = _x_range(g, p, c, gsize, gkind)
        total = logb[g, p]
        chosen = -1
        n_ok = 0
        last_ok = -1
        for x in range(lo, hi + 1):
            if feasible and not _allowed(g, p, x, gstart, gsize, pmax, smax):
                continue
            if _term(g, p, x, lf, gsize, glw, logb) > -np.inf:
                n_ok += 1
                last_ok = x
        if n_ok == 1:
            chosen = last_ok
        else:
            u = uniform(key, ctr)
            ctr += 1
            cum = 0.0
            for x in range(lo, hi + 1):
                if feasible and not _allowed(g, p, x, gstart, gsize, pmax, smax):
                    continue
                t = _term(g, p, x, lf, gsize, glw, logb)
                if t == -np.inf:
                    continue
                cum += math.exp(t - total)
                if u < cum:
                    chosen = x
                    break
            if chosen < 0:
                chosen = last_ok
        # uniform subset of size `chosen` via partial Fisher-Yates
        s = gsize[g]
        a0 = gstart[g]
        if chosen == s:
            for q in range(a0, a0 + s):
                assign[order[q]] = 1
        else:
            for q in range(chosen):
                u = uniform(key, ctr)
                ctr += 1
                r = q + int(u * (s - q))
                if r >= s:
                    r = s - 1
                tmp = order[a0 + q]
                order[a0 + q] = order[a0 + r]
                order[a0 + r] = tmp
                assign[order[a0 + q]] = 1
        logw += chosen * glw[g]
        p += chosen
    return True, logw - logz, ctr


@njit
def score_column_step(res, nprime, c, feasible, ge, lf, assign, order, cnt, gval, gstart,
                      gsize, glw, gkind, lbound, pmax, smax, logb):
    """Log proposal probability of the given column vector (-inf if not admissible)."""
    ngroups = _column_dp(res, nprime, c, feasible, ge, lf, order, cnt, gval, gstart,
                         gsize, glw, gkind, lbound, pmax, smax, logb)
    logz = logb[0, 0]
    if logz == -np.inf:
        return -np.inf
    p = 0
    logw = 0.0
    for g in range(ngroups):
        x = 0
        for q in range(gstart[g], gstart[g] + gsize[g]):
            x += assign[order[q]]
        lo, hi = _x_range(g, p, c, gsize, gkind)
        if x < lo or x > hi:
            return -np.inf
        if feasible and not _allowed(g, p, x, gstart, gsize, pmax, smax):
            return -np.inf
        if _term(g, p, x, lf, gsize, glw, logb) == -np.inf:
            return -np.inf
        logw += x * glw[g]
        p += x
    if p != c:
        return -np.inf
    return logw - logz


@njit
def _alloc(m, n, cols):
    maxc = 0
    for j in range(cols.size):
        if cols[j] > maxc:
            maxc = cols[j]
    res = np.zeros(m, np.int64)
    assign = np.zeros(m, np.int64)
    order = np.zeros(m, np.int64)
    cnt = np.zeros(n + 2, np.int64)
    ge = np.zeros(m + 2, np.int64)
    ng = min(m, n + 1) + 1
    gval = np.zeros(ng, np.int64)
    gstart = np.zeros(ng, np.int64)
    gsize = np.zeros(ng, np.int64)
    glw = np.zeros(ng)
    gkind = np.zeros(ng, np.int64)
    lbound = np.zeros(m, np.int64)
    pmax = np.zeros(m, np.int64)
    smax = np.zeros(m, np.int64)
    logb = np.zeros((ng + 1, maxc + 1))
    return res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb


@njit
def _trial(rows, cols, feasible, key, lf, table, record, res, assign, order, cnt, ge, gval,
           gstart, gsize, glw, gkind, lbound, pmax, smax, logb):
    """One SIS trial. Returns (success, log_mu, columns_assigned)."""
    m = rows.size
    n = cols.size
    for i in range(m):
        res[i] = rows[i]
    for s in range(m + 2):
        ge[s] = 0
    for j in range(n):
        for s in range(1, cols[j] + 1):
            ge[s] += 1
    ctr = 0
    log_mu = 0.0
    for j in range(n):
        c = cols[j]
        for s in range(1, c + 1):
            ge[s] -= 1
        ok, lp, ctr = sample_column_step(res, n - j, c, feasible, ge, lf, key, ctr, assign,
                                         order, cnt, gval, gstart, gsize, glw, gkind,
                                         lbound, pmax, smax, logb)
        if not ok:
            return False, log_mu, j
        log_mu += lp
        for i in range(m):
            if assign[i] == 1:
                res[i] -= 1
                if record:
                    table[i, j] = 1
    return True, log_mu, n


@njit
def run_one(rows, cols, feasible, key):
    """A single trial with its table (working frame)."""
    m = rows.size
    n = cols.size
    res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb = \
        _alloc(m, n, cols)
    lf = log_factorials(m)
    table = np.zeros((m, n), np.int8)
    ok, log_mu, step = _trial(rows, cols, feasible, key, lf, table, True, res, assign, order,
                              cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax,
                              logb)
    return ok, log_mu, step, table


@njit
def run_batch(rows, cols, feasible, rkey, start, count, out_logw, out_step):
    """Trials ``start .. start+count-1`` of the run keyed by ``rkey``.

    ``out_logw[t]`` receives log(1/mu) or -inf for a dead end; ``out_step[t]``
    the number of columns assigned.
    """
    m = rows.size
    n = cols.size
    res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb = \
        _alloc(m, n, cols)
    lf = log_factorials(m)
    dummy = np.zeros((1, 1), np.int8)
    for t in range(count):
        key = trial_key(rkey, np.uint64(start + t))
        ok, log_mu, step = _trial(rows, cols, feasible, key, lf, dummy, False, res, assign,
                                  order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound,
                                  pmax, smax, logb)
        out_logw[t] = -log_mu if ok else -np.inf
        out_step[t] = step


@njit
def sample_tables_batch(rows, cols, feasible, rkey, start, count, out_tables, out_logw):
    m = rows.size
    n = cols.size
    res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb = \
        _alloc(m, n, cols)
    lf = log_factorials(m)
    for t in range(count):
        key = trial_key(rkey, np.uint64(start + t))
        ok, log_mu, step = _trial(rows, cols, feasible, key, lf, out_tables[t], True, res,
                                  assign, order, cnt, ge, gval, gstart, gsize, glw, gkind,
                                  lbound, pmax, smax, logb)
        out_logw[t] = -log_mu if ok else -np.inf


@njit
def score_table(rows, cols, feasible, table):
    """Log proposal probability that a trial produces ``table`` (working frame)."""
    m = rows.size
    n = cols.size
    res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb = \
        _alloc(m, n, cols)
    lf = log_factorials(m)
    for i in range(m):
        res[i] = rows[i]
    for j in range(n):
        for s in range(1, cols[j] + 1):
            ge[s] += 1
    total = 0.0
    for j in range(n):
        c = cols[j]
        for s in range(1, c + 1):
            ge[s] -= 1
        for i in range(m):
            assign[i] = table[i, j]
        lp = score_column_step(res, n - j, c, feasible, ge, lf, assign, order, cnt, gval,
                               gstart, gsize, glw, gkind, lbound, pmax, smax, logb)
        if lp == -np.inf:
            return -np.inf
        total += lp
        for i in range(m):
            res[i] -= table[i, j]
    return total


@njit
def sample_column_many(res_in, nprime, c, feasible, remaining_cols, key, ctr, draws, out):
    """``draws`` consecutive column draws from one stream, starting at draw ``ctr``.

    Returns (ok, log_probs, next_counter).
    """
    m = res_in.size
    n = nprime
    res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb = \
        _alloc(m, n, np.array([c]))
    lf = log_factorials(m)
    for j in range(remaining_cols.size):
        for s in range(1, min(remaining_cols[j], m) + 1):
            ge[s] += 1
    logp = np.zeros(draws)
    for d in range(draws):
        for i in range(m):
            res[i] = res_in[i]
        ok, lp, ctr = sample_column_step(res, nprime, c, feasible, ge, lf, key, ctr, assign,
                                         order, cnt, gval, gstart, gsize, glw, gkind, lbound,
                                         pmax, smax, logb)
        if not ok:
            return False, logp, ctr
        for i in range(m):
            out[d, i] = assign[i]
        logp[d] = lp
    return True, logp, ctr


@njit
def score_column(res_in, nprime, c, feasible, remaining_cols, vec):
    m = res_in.size
    res, assign, order, cnt, ge, gval, gstart, gsize, glw, gkind, lbound, pmax, smax, logb = \
        _alloc(m, nprime, np.array([c]))
    lf = log_factorials(m)
    for j in range(remaining_cols.size):
        for s in range(1, min(remaining_cols[j], m) + 1):
            ge[s] += 1
    for i in range(m):
        res[i] = res_in[i]
        assign[i] = vec[i]
    return score_column_step(res, nprime, c, feasible, ge, lf, assign, order, cnt, gval,
                             gstart, gsize, glw, gkind, lbound, pmax, smax, logb)


@njit
def accumulate_chunk(logw, t0, ref, scaled, fails, trace, fail_trace, window, log_tol,
                     stop_at_first):
    """Fold ``logw`` into the running estimate starting after trial ``t0``.

    The sum of importance weights is held as ``exp(ref) * scaled``. ``trace``
    receives ln X_t for every trial (index t-1) and must already hold the
    earlier entries, from which the sliding min/max window is rebuilt.
    Returns (ref, scaled, fails, trials_done, stop_trial) where stop_trial is
    the first t at which the stop rule held, or -1.
    """
    cap = window + logw.size + 1
    qmax = np.empty(cap, np.int64)
    qmin = np.empty(cap, np.int64)
    hmax = 0
    tmax = 0
    hmin = 0
    tmin = 0
    lo = t0 - window
    if lo < 0:
        lo = 0
    for q in range(lo, t0):
        v = trace[q]
        while tmax > hmax and trace[qmax[tmax - 1]] <= v:
            tmax -= 1
        qmax[tmax] = q
        tmax += 1
        while tmin > hmin and trace[qmin[tmin - 1]] >= v:
            tmin -= 1
        qmin[tmin] = q
        tmin += 1
    stop_trial = -1
    t = t0
    for k in range(logw.size):
        lw = logw[k]
        if lw == -np.inf:
            fails += 1
        elif ref == -np.inf:
            ref = lw
            scaled = 1.0
        elif lw > ref:
            scaled = scaled * math.exp(ref - lw) + 1.0
            ref = lw
        else:
            scaled += math.exp(lw - ref)
        t += 1
        if ref == -np.inf:
            cur = -np.inf
        else:
            cur = ref + math.log(scaled) - math.log(t)
        q = t - 1
        trace[q] = cur
        fail_trace[q] = fails
        while tmax > hmax and trace[qmax[tmax - 1]] <= cur:
            tmax -= 1
        qmax[tmax] = q
        tmax += 1
        while tmin > hmin and trace[qmin[tmin - 1]] >= cur:
            tmin -= 1
        qmin[tmin] = q
        tmin += 1
        while qmax[hmax] <= q - window:
            hmax += 1
        while qmin[hmin] <= q - window:
            hmin += 1
        if t >= window and stop_trial < 0:
            hi = trace[qmax[hmax]]
            low = trace[qmin[hmin]]
            if cur == -np.inf:
                inside = hi == -np.inf
            else:
                inside = hi - cur <= log_tol and cur - low <= log_tol
            if inside:
                stop_trial = t
                if stop_at_first:
                    return ref, scaled, fails, t, stop_trial
    return ref, scaled, fails, t, stop_trial
