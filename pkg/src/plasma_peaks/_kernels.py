"""Hot inner loops, each with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``PLASMA_PEAKS_NUMBA`` is not
``0``.  Both paths return identical results; ``tests/test_kernels.py`` runs
them side by side and ``benchmarks/bench_kernels.py`` times them.
"""

import os
import warnings

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

_use_numba = HAVE_NUMBA and os.environ.get("PLASMA_PEAKS_NUMBA", "1") != "0"


def using_numba():
    return _use_numba


def set_backend(name):
    """Select ``"numba"`` or ``"numpy"`` kernels at runtime."""
    global _use_numba
    if name == "numba":
        if not HAVE_NUMBA:
            raise RuntimeError("numba is not installed")
        _use_numba = True
    elif name == "numpy":
        _use_numba = False
    else:
        raise ValueError(f"unknown kernel backend {name!r}")


def set_threads(n):
    """Cap numba's thread pool; a no-op for one thread or without numba."""
    if n is None or int(n) <= 1 or not HAVE_NUMBA:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # threading-layer probing is noisy
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def _jit(fn):
    if HAVE_NUMBA:
        return njit(cache=True)(fn)
    return fn


# ---------------------------------------------------------------------------
# Bessel power series, |x| <= 12
# ---------------------------------------------------------------------------

_SERIES_TERMS = 40


def _bessel_series_numpy(x, order):
    half = 0.5 * x
    q = -half * half
    term = np.ones_like(x) if order == 0 else half.copy()
    total = term.copy()
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * (k + order))
        total += term
    return total


@_jit
def _bessel_series_loop(x, order, out):
    for i in range(x.shape[0]):
        half = 0.5 * x[i]
        q = -half * half
        term = 1.0 if order == 0 else half
        total = term
        for k in range(1, 40):
            term = term * q / (k * (k + order))
            total += term
        out[i] = total


def bessel_series(x, order):
    """Power series of J0 (order 0) or J1 (order 1) on a float array."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    flat = x.ravel()
    if _use_numba:
        out = np.empty_like(flat)
        _bessel_series_loop(flat, order, out)
    else:
        out = _bessel_series_numpy(flat, order)
    return out.reshape(x.shape)


# ---------------------------------------------------------------------------
# Connected components, 4-neighbour
# ---------------------------------------------------------------------------


@_jit
def _label_bfs(mask, labels):
    ny, nx = mask.shape
    stack = np.empty(ny * nx, dtype=np.int64)
    count = 0
    for r0 in range(ny):
        for c0 in range(nx):
            if not mask[r0, c0] or labels[r0, c0] != 0:
                continue
            count += 1
            labels[r0, c0] = count
            top = 0
            stack[0] = r0 * nx + c0
            top = 1
            while top > 0:
                top -= 1
                idx = stack[top]
                r = idx // nx
                c = idx - r * nx
                for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                    rr = r + dr
                    cc = c + dc
                    if rr < 0 or rr >= ny or cc < 0 or cc >= nx:
                        continue
                    if mask[rr, cc] and labels[rr, cc] == 0:
                        labels[rr, cc] = count
                        stack[top] = rr * nx + cc
                        top += 1
    return count


def _label_numpy(mask):
    ny, nx = mask.shape
    big = ny * nx + 1
    lab = np.where(mask, np.arange(ny * nx).reshape(ny, nx), big)
    while True:
        prev = lab
        padded = np.pad(lab, 1, constant_values=big)
        nb = np.minimum.reduce([padded[1:-1, 1:-1], padded[:-2, 1:-1], padded[2:, 1:-1],
                                padded[1:-1, :-2], padded[1:-1, 2:]])
        lab = np.where(mask, nb, big)
        # pointer jumping keeps the iteration count logarithmic in practice
        flat = lab.ravel()
        inside = flat < big
        flat_j = flat.copy()
        flat_j[inside] = flat[flat[inside]]
        lab = np.minimum(lab, flat_j.reshape(ny, nx))
        if np.array_equal(lab, prev):
            break
    roots = np.unique(lab[mask])
    labels = np.zeros((ny, nx), dtype=np.int64)
    if roots.size:
        labels[mask] = np.searchsorted(roots, lab[mask]) + 1
    return labels, int(roots.size)


def label_components(mask):
    """Label 4-connected components of a boolean array (labels start at 1)."""
    mask = np.ascontiguousarray(mask, dtype=np.bool_)
    if _use_numba:
        labels = np.zeros(mask.shape, dtype=np.int64)
        count = _label_bfs(mask, labels)
        return labels, int(count)
    labels, count = _label_numpy(mask)
    # renumber in scan order so both backends agree label-for-label
    if count:
        uniq, first_idx = np.unique(labels[mask], return_index=True)
        remap = np.zeros(count + 1, dtype=np.int64)
        remap[uniq[np.argsort(first_idx)]] = np.arange(1, count + 1)
        labels = remap[labels]
    return labels, count


# ---------------------------------------------------------------------------
# Marching squares
# ---------------------------------------------------------------------------

# Edge pairs per case; corners ordered (r,c), (r,c+1), (r+1,c+1), (r+1,c).
# Edges: 0 bottom, 1 right, 2 top, 3 left.  Saddles 5 and 10 handled apart.
_CASE_EDGES = np.array([
    [-1, -1], [3, 0], [0, 1], [3, 1], [1, 2], [-1, -1], [0, 2], [3, 2],
    [2, 3], [0, 2], [-1, -1], [1, 2], [1, 3], [0, 1], [3, 0], [-1, -1],
], dtype=np.int64)


@_jit
def _edge_point(a, r, c, e, level):
    if e == 0:
        v0 = a[r, c]
        v1 = a[r, c + 1]
        return float(r), c + (level - v0) / (v1 - v0), 2 * (r * a.shape[1] + c)
    if e == 1:
        v0 = a[r, c + 1]
        v1 = a[r + 1, c + 1]
        return r + (level - v0) / (v1 - v0), float(c + 1), 2 * (r * a.shape[1] + c + 1) + 1
    if e == 2:
        v0 = a[r + 1, c]
        v1 = a[r + 1, c + 1]
        return float(r + 1), c + (level - v0) / (v1 - v0), 2 * ((r + 1) * a.shape[1] + c)
    v0 = a[r, c]
    v1 = a[r + 1, c]
    return r + (level - v0) / (v1 - v0), float(c), 2 * (r * a.shape[1] + c) + 1


@_jit
def _march_loop(a, level, table, seg, ids):
    ny, nx = a.shape
    n = 0
    for r in range(ny - 1):
        for c in range(nx - 1):
            case = 0
            if a[r, c] > level:
                case |= 1
            if a[r, c + 1] > level:
                case |= 2
            if a[r + 1, c + 1] > level:
                case |= 4
            if a[r + 1, c] > level:
                case |= 8
            if case == 0 or case == 15:
                continue
            if case == 5 or case == 10:
                center = 0.25 * (a[r, c] + a[r, c + 1] + a[r + 1, c + 1] + a[r + 1, c])
                up = center > level
                if (case == 5 and up) or (case == 10 and not up):
                    pairs = ((0, 1), (2, 3))
                else:
                    pairs = ((3, 0), (1, 2))
                for p in range(2):
                    ra, ca, ia = _edge_point(a, r, c, pairs[p][0], level)
                    rb, cb, ib = _edge_point(a, r, c, pairs[p][1], level)
                    seg[n, 0] = ra
                    seg[n, 1] = ca
                    seg[n, 2] = rb
                    seg[n, 3] = cb
                    ids[n, 0] = ia
                    ids[n, 1] = ib
                    n += 1
            else:
                ra, ca, ia = _edge_point(a, r, c, table[case, 0], level)
                rb, cb, ib = _edge_point(a, r, c, table[case, 1], level)
                seg[n, 0] = ra
                seg[n, 1] = ca
                seg[n, 2] = rb
                seg[n, 3] = cb
                ids[n, 0] = ia
                ids[n, 1] = ib
                n += 1
    return n


def _march_numpy(a, level):
    ny, nx = a.shape
    above = a > level
    case = (above[:-1, :-1] * 1 + above[:-1, 1:] * 2 + above[1:, 1:] * 4
            + above[1:, :-1] * 8)
    center = 0.25 * (a[:-1, :-1] + a[:-1, 1:] + a[1:, 1:] + a[1:, :-1]) > level

    def edge(r, c, e):
        e = np.asarray(e)
        rr = np.empty(r.shape)
        cc = np.empty(r.shape)
        ii = np.empty(r.shape, dtype=np.int64)
        for k in range(4):
            m = e == k
            if not m.any():
                continue
            rk, ck = r[m], c[m]
            if k == 0:
                v0, v1 = a[rk, ck], a[rk, ck + 1]
                rr[m], cc[m], ii[m] = rk, ck + (level - v0) / (v1 - v0), 2 * (rk * nx + ck)
            elif k == 1:
                v0, v1 = a[rk, ck + 1], a[rk + 1, ck + 1]
                rr[m], cc[m], ii[m] = rk + (level - v0) / (v1 - v0), ck + 1, 2 * (rk * nx + ck + 1) + 1
            elif k == 2:
                v0, v1 = a[rk + 1, ck], a[rk + 1, ck + 1]
                rr[m], cc[m], ii[m] = rk + 1, ck + (level - v0) / (v1 - v0), 2 * ((rk + 1) * nx + ck)
            else:
                v0, v1 = a[rk, ck], a[rk + 1, ck]
                rr[m], cc[m], ii[m] = rk + (level - v0) / (v1 - v0), ck, 2 * (rk * nx + ck) + 1
        return rr, cc, ii

    r_all, c_all = np.nonzero((case != 0) & (case != 15))
    cs = case[r_all, c_all]
    ctr = center[r_all, c_all]
    rows = []
    # cells in scan order; saddles emit two segments
    saddle = (cs == 5) | (cs == 10)
    first_pair = np.where(saddle[:, None],
                          np.where(((cs == 5) & ctr | (cs == 10) & ~ctr)[:, None],
                                   np.array([0, 1]), np.array([3, 0])),
                          _CASE_EDGES[cs])
    second_pair = np.where(((cs == 5) & ctr | (cs == 10) & ~ctr)[:, None],
                           np.array([2, 3]), np.array([1, 2]))
    order = np.arange(cs.size)
    ra, ca, ia = edge(r_all, c_all, first_pair[:, 0])
    rb, cb, ib = edge(r_all, c_all, first_pair[:, 1])
    rows.append((order * 2, ra, ca, rb, cb, ia, ib))
    if saddle.any():
        rs, cs_, = r_all[saddle], c_all[saddle]
        sp = second_pair[saddle]
        ra2, ca2, ia2 = edge(rs, cs_, sp[:, 0])
        rb2, cb2, ib2 = edge(rs, cs_, sp[:, 1])
        rows.append((order[saddle] * 2 + 1, ra2, ca2, rb2, cb2, ia2, ib2))
    key = np.concatenate([r[0] for r in rows])
    perm = np.argsort(key, kind="stable")
    seg = np.stack([np.concatenate([r[k] for r in rows]) for k in (1, 2, 3, 4)], axis=1)[perm]
    ids = np.stack([np.concatenate([r[k] for r in rows]) for k in (5, 6)], axis=1)[perm]
    return seg, ids.astype(np.int64)


def march_segments(values, level):
    """Marching-squares segments of ``values`` at ``level``.

    Returns ``(seg, ids)``: ``seg[k] = (r0, c0, r1, c1)`` in fractional index
    coordinates and ``ids[k]`` the two grid-edge identifiers the segment joins,
    which are shared exactly between neighbouring cells.
    """
    a = np.ascontiguousarray(values, dtype=np.float64)
    if _use_numba:
        cap = 2 * (a.shape[0] - 1) * (a.shape[1] - 1)
        seg = np.empty((cap, 4))
        ids = np.empty((cap, 2), dtype=np.int64)
        n = _march_loop(a, float(level), _CASE_EDGES, seg, ids)
        return seg[:n].copy(), ids[:n].copy()
    return _march_numpy(a, float(level))


# ---------------------------------------------------------------------------
# Bilinear interpolation on a uniform grid
# ---------------------------------------------------------------------------


@_jit
def _bilinear_loop(a, x0, y0, h, px, py, out):
    ny, nx = a.shape
    for i in range(px.shape[0]):
        fx = (px[i] - x0) / h
        fy = (py[i] - y0) / h
        c = int(np.floor(fx))
        r = int(np.floor(fy))
        if c < 0:
            c = 0
        if c > nx - 2:
            c = nx - 2
        if r < 0:
            r = 0
        if r > ny - 2:
            r = ny - 2
        tx = fx - c
        ty = fy - r
        out[i] = ((1 - tx) * (1 - ty) * a[r, c] + tx * (1 - ty) * a[r, c + 1]
                  + tx * ty * a[r + 1, c + 1] + (1 - tx) * ty * a[r + 1, c])


def _bilinear_numpy(a, x0, y0, h, px, py):
    ny, nx = a.shape
    fx = (px - x0) / h
    fy = (py - y0) / h
    c = np.clip(np.floor(fx).astype(np.int64), 0, nx - 2)
    r = np.clip(np.floor(fy).astype(np.int64), 0, ny - 2)
    tx = fx - c
    ty = fy - r
    return ((1 - tx) * (1 - ty) * a[r, c] + tx * (1 - ty) * a[r, c + 1]
            + tx * ty * a[r + 1, c + 1] + (1 - tx) * ty * a[r + 1, c])


def bilinear(values, x0, y0, h, px, py):
    """Bilinear interpolation of node values at points ``(px, py)``."""
    a = np.ascontiguousarray(values, dtype=np.float64)
    px = np.ascontiguousarray(px, dtype=np.float64)
    py = np.ascontiguousarray(py, dtype=np.float64)
    shape = px.shape
    if _use_numba:
        out = np.empty(px.size)
        _bilinear_loop(a, float(x0), float(y0), float(h), px.ravel(), py.ravel(), out)
        return out.reshape(shape)
    return _bilinear_numpy(a, x0, y0, h, px.ravel(), py.ravel()).reshape(shape)
