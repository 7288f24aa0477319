"""Window-extremum and until kernels used by the robustness evaluators.

Every public function dispatches to a numba kernel (``*_nb``) or a
vectorized numpy kernel (``*_np``) according to :func:`stltube._accel.use_numba`.
Both paths return bitwise-identical results: they only select and compare
existing values, never do arithmetic on them.
"""

import numpy as np

from .._accel import njit, use_numba

# ---------------------------------------------------------------------------
# range extremum over a 1-D array, arbitrary [lo, hi) queries


def _sparse_table_np(vals, is_max):
    op = np.maximum if is_max else np.minimum
    levels = [vals]
    width = 1
    while 2 * width <= len(vals):
        prev = levels[-1]
        levels.append(op(prev[:-width], prev[width:]))
        width *= 2
    return levels


def range_extremum_np(vals, lo, hi, is_max):
    vals = np.asarray(vals, dtype=float)
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    ident = -np.inf if is_max else np.inf
    out = np.full(lo.shape, ident)
    length = hi - lo
    ok = length > 0
    if not ok.any() or len(vals) == 0:
        return out
    op = np.maximum if is_max else np.minimum
    levels = _sparse_table_np(vals, is_max)
    L = length[ok]
    p = np.floor(np.log2(L)).astype(np.int64)
    # guard against log2 rounding at exact powers of two
    p = np.where((1 << (p + 1)) <= L, p + 1, p)
    p = np.where((1 << p) > L, p - 1, p)
    a = lo[ok]
    b = hi[ok] - (np.int64(1) << p)
    res = np.empty(len(a))
    for level in np.unique(p):
        sel = p == level
        tab = levels[level]
        res[sel] = op(tab[a[sel]], tab[b[sel]])
    out[ok] = res
    return out


@njit
def range_extremum_nb(vals, lo, hi, is_max):
    m = vals.shape[0]
    q = lo.shape[0]
    ident = -np.inf if is_max else np.inf
    out = np.full(q, ident)
    if m == 0:
        return out
    nlev = 1
    while (1 << nlev) <= m:
        nlev += 1
    table = np.empty((nlev, m))
    table[0, :] = vals
    for p in range(1, nlev):
        half = 1 << (p - 1)
        for j in range(m - (1 << p) + 1):
            x = table[p - 1, j]
            y = table[p - 1, j + half]
            if is_max:
                table[p, j] = x if x >= y else y
            else:
                table[p, j] = x if x <= y else y
    for k in range(q):
        length = hi[k] - lo[k]
        if length <= 0:
            continue
        p = 0
        while (1 << (p + 1)) <= length:
            p += 1
        x = table[p, lo[k]]
        y = table[p, hi[k] - (1 << p)]
        if is_max:
            out[k] = x if x >= y else y
        else:
            out[k] = x if x <= y else y
    return out


def range_extremum(vals, lo, hi, is_max):
    """``out[k] = max/min(vals[lo[k]:hi[k]])``; empty ranges give -inf/+inf."""
    if use_numba():
        return range_extremum_nb(
            np.ascontiguousarray(vals, dtype=np.float64),
            np.ascontiguousarray(lo, dtype=np.int64),
            np.ascontiguousarray(hi, dtype=np.int64),
            bool(is_max),
        )
    return range_extremum_np(vals, lo, hi, is_max)


# ---------------------------------------------------------------------------
# row-wise sliding windows on a uniform grid: out[s, k] = ext X[s, k+ia : k+ib+1]


def window_extremum_np(X, ia, ib, is_max):
    X = np.asarray(X, dtype=float)
    S, T = X.shape
    ident = -np.inf if is_max else np.inf
    op = np.maximum if is_max else np.minimum
    W = ib - ia + 1
    # m[j] = ext X[j : j + width], truncated at T
    m = X.copy()
    width = 1
    while 2 * width <= W:
        shifted = np.full_like(m, ident)
        shifted[:, : T - width] = m[:, width:]
        m = op(m, shifted)
        width *= 2
    tail = np.full_like(m, ident)
    off = W - width
    if off > 0:
        tail[:, : T - off] = m[:, off:]
    full = op(m, tail)
    out = np.full_like(X, ident)
    if ia < T:
        out[:, : T - ia] = full[:, ia:]
    return out


@njit
def window_extremum_nb(X, ia, ib, is_max):
    S, T = X.shape
    ident = -np.inf if is_max else np.inf
    W = ib - ia + 1
    out = np.full((S, T), ident)
    dq = np.empty(T, dtype=np.int64)
    m = np.empty(T)
    for s in range(S):
        head = 0
        tail = 0
        for j in range(T - 1, -1, -1):
            x = X[s, j]
            if is_max:
                while tail > head and X[s, dq[tail - 1]] <= x:
                    tail -= 1
            else:
                while tail > head and X[s, dq[tail - 1]] >= x:
                    tail -= 1
            dq[tail] = j
            tail += 1
            while dq[head] > j + W - 1:
                head += 1
            m[j] = X[s, dq[head]]
        for k in range(T - ia):
            out[s, k] = m[k + ia]
    return out


def window_extremum(X, ia, ib, is_max):
    if use_numba():
        return window_extremum_nb(np.ascontiguousarray(X, dtype=np.float64), int(ia), int(ib), bool(is_max))
    return window_extremum_np(X, ia, ib, is_max)


# ---------------------------------------------------------------------------
# until on a uniform grid:
# out[s, k] = max_{j in [k+ia, k+ib]} min(R1[s, j], min_{m in [k+ia, j]} R2[s, m])


def until_rows_np(R1, R2, ia, ib):
    R1 = np.asarray(R1, dtype=float)
    R2 = np.asarray(R2, dtype=float)
    S, T = R1.shape
    out = np.full((S, T), -np.inf)
    nk = T - ia
    if nk <= 0:
        return out
    run2 = np.full((S, nk), np.inf)
    acc = np.full((S, nk), -np.inf)
    for off in range(ib - ia + 1):
        start = ia + off
        if start >= T:
            break
        cnt = min(nk, T - start)
        run2[:, :cnt] = np.minimum(run2[:, :cnt], R2[:, start : start + cnt])
        acc[:, :cnt] = np.maximum(acc[:, :cnt], np.minimum(R1[:, start : start + cnt], run2[:, :cnt]))
    out[:, :nk] = acc
    return out


@njit
def until_rows_nb(R1, R2, ia, ib):
    S, T = R1.shape
    out = np.full((S, T), -np.inf)
    for s in range(S):
        for k in range(T - ia):
            run2 = np.inf
            acc = -np.inf
            hi = k + ib
            if hi > T - 1:
                hi = T - 1
            for j in range(k + ia, hi + 1):
                r2 = R2[s, j]
                if r2 < run2:
                    run2 = r2
                r1 = R1[s, j]
                v = r1 if r1 < run2 else run2
                if v > acc:
                    acc = v
            out[s, k] = acc
    return out


def until_rows(R1, R2, ia, ib):
    if use_numba():
        return until_rows_nb(
            np.ascontiguousarray(R1, dtype=np.float64), np.ascontiguousarray(R2, dtype=np.float64), int(ia), int(ib)
        )
    return until_rows_np(R1, R2, ia, ib)


# ---------------------------------------------------------------------------
# until on an arbitrary grid with explicit window endpoints.  For query k the
# ordered evaluation points are  t+a,  grid[lo[k]:hi[k]],  t+b.


def until_points_np(g1, g2, lo, hi, a1, a2, b1, b2):
    lo = np.asarray(lo, dtype=np.int64)
    hi = np.asarray(hi, dtype=np.int64)
    run2 = np.asarray(a2, dtype=float).copy()
    acc = np.minimum(a1, run2)
    span = hi - lo
    for off in range(int(span.max(initial=0))):
        live = off < span
        idx = np.where(live, lo + off, 0)
        r2 = np.where(live, g2[idx] if len(g2) else np.inf, np.inf)
        r1 = np.where(live, g1[idx] if len(g1) else -np.inf, -np.inf)
        run2 = np.minimum(run2, r2)
        acc = np.maximum(acc, np.minimum(r1, run2))
    run2 = np.minimum(run2, b2)
    acc = np.maximum(acc, np.minimum(b1, run2))
    return acc


@njit
def until_points_nb(g1, g2, lo, hi, a1, a2, b1, b2):
    q = lo.shape[0]
    out = np.empty(q)
    for k in range(q):
        run2 = a2[k]
        acc = a1[k] if a1[k] < run2 else run2
        for j in range(lo[k], hi[k]):
            if g2[j] < run2:
                run2 = g2[j]
            v = g1[j] if g1[j] < run2 else run2
            if v > acc:
                acc = v
        if b2[k] < run2:
            run2 = b2[k]
        v = b1[k] if b1[k] < run2 else run2
        if v > acc:
            acc = v
        out[k] = acc
    return out


def until_points(g1, g2, lo, hi, a1, a2, b1, b2):
    if use_numba():
        c = np.ascontiguousarray
        return until_points_nb(
            c(g1, dtype=np.float64), c(g2, dtype=np.float64), c(lo, dtype=np.int64), c(hi, dtype=np.int64),
            c(a1, dtype=np.float64), c(a2, dtype=np.float64), c(b1, dtype=np.float64), c(b2, dtype=np.float64),
        )
    return until_points_np(g1, g2, lo, hi, a1, a2, b1, b2)


# ---------------------------------------------------------------------------
# hyperrectangle predicate h(x) = min_i (hw_i - |x_i - c_i|) over the last axis


def box_h_np(X, center, half_width):
    X = np.asarray(X, dtype=float)
    out = half_width[0] - np.abs(X[..., 0] - center[0])
    for i in range(1, X.shape[-1]):
        out = np.minimum(out, half_width[i] - np.abs(X[..., i] - center[i]))
    return out


@njit
def box_h_nb(X2, center, half_width):
    m, n = X2.shape
    out = np.empty(m)
    for k in range(m):
        v = half_width[0] - abs(X2[k, 0] - center[0])
        for i in range(1, n):
            w = half_width[i] - abs(X2[k, i] - center[i])
            if w < v:
                v = w
        out[k] = v
    return out


def box_h(X, center, half_width):
    X = np.asarray(X, dtype=float)
    center = np.asarray(center, dtype=float)
    half_width = np.asarray(half_width, dtype=float)
    if use_numba() and X.ndim >= 2 and X.size >= 64:
        flat = np.ascontiguousarray(X.reshape(-1, X.shape[-1]))
        return box_h_nb(flat, center, half_width).reshape(X.shape[:-1])
    return box_h_np(X, center, half_width)
