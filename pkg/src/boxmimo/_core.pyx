# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tree-search kernels.

Each function mirrors a pure-Python kernel in ``detectors``/``boxdec``:
same visiting order, same floating-point operation order, same counters.
Paths are returned as flat grid indices in natural layer order.
"""

import numpy as np

from libc.math cimport floor, fabs, INFINITY
from libc.stdlib cimport malloc, free, qsort

cdef enum:
    NONE = 0
    SCP = 1
    ICP = 2
    SICP = 3


cdef struct Ctx:
    int n
    int side
    int a
    int w
    int b
    double scale
    double dq
    double v
    double *xr
    double *xi
    double *rr
    double *ri
    double *lv
    long visited
    long evals
    long cmps


cdef struct IncF:
    double v
    int f


cdef int _cmp_incf(const void *p, const void *q) noexcept nogil:
    cdef const IncF *x = <const IncF *> p
    cdef const IncF *y = <const IncF *> q
    if x.v < y.v:
        return -1
    if x.v > y.v:
        return 1
    return x.f - y.f


cdef void _setup(Ctx *c, double complex[::1] x, double complex[:, ::1] r, int side, double scale):
    cdef int n = x.shape[0]
    cdef int i, j
    c.n = n
    c.side = side
    c.a = side * side
    c.scale = scale
    c.dq = 2.0 * scale
    c.v = (side - 1) * scale
    c.xr = <double *> malloc(n * sizeof(double))
    c.xi = <double *> malloc(n * sizeof(double))
    c.rr = <double *> malloc(n * n * sizeof(double))
    c.ri = <double *> malloc(n * n * sizeof(double))
    c.lv = <double *> malloc(side * sizeof(double))
    if c.xr == NULL or c.xi == NULL or c.rr == NULL or c.ri == NULL or c.lv == NULL:
        _teardown(c)
        raise MemoryError()
    for i in range(n):
        c.xr[i] = x[i].real
        c.xi[i] = x[i].imag
        for j in range(n):
            c.rr[i * n + j] = r[i, j].real
            c.ri[i * n + j] = r[i, j].imag
    for i in range(side):
        c.lv[i] = (2 * i - (side - 1)) * scale
    c.visited = 0
    c.evals = 0
    c.cmps = 0


cdef void _teardown(Ctx *c):
    free(c.xr)
    free(c.xi)
    free(c.rr)
    free(c.ri)
    free(c.lv)
    c.xr = c.xi = c.rr = c.ri = c.lv = NULL


cdef inline void _cancel(Ctx *c, int k, const long *path, double *outr, double *outi) noexcept nogil:
    # path is row-indexed: path[j] is the flat symbol index of row j
    cdef double zr = c.xr[k]
    cdef double zi = c.xi[k]
    cdef double ar, ai, sr, si
    cdef long f
    cdef int j
    for j in range(k + 1, c.n):
        f = path[j]
        sr = c.lv[f // c.side]
        si = c.lv[f % c.side]
        ar = c.rr[k * c.n + j]
        ai = c.ri[k * c.n + j]
        zr = zr - (ar * sr - ai * si)
        zi = zi - (ar * si + ai * sr)
    outr[0] = zr
    outi[0] = zi


cdef inline double _inc(Ctx *c, int k, double zr, double zi, long f) noexcept nogil:
    cdef double ar = c.rr[k * c.n + k]
    cdef double ai = c.ri[k * c.n + k]
    cdef double sr = c.lv[f // c.side]
    cdef double si = c.lv[f % c.side]
    cdef double er = zr - (ar * sr - ai * si)
    cdef double ei = zi - (ar * si + ai * sr)
    return er * er + ei * ei


cdef inline void _divide(Ctx *c, int k, double zr, double zi, double *ar_out, double *ai_out) noexcept nogil:
    # same algorithm as CPython complex division
    cdef double br = c.rr[k * c.n + k]
    cdef double bi = c.ri[k * c.n + k]
    cdef double ratio, denom
    if bi == 0.0:
        ar_out[0] = zr / br
        ai_out[0] = zi / br
    elif fabs(br) >= fabs(bi):
        ratio = bi / br
        denom = br + bi * ratio
        ar_out[0] = (zr + zi * ratio) / denom
        ai_out[0] = (zi - zr * ratio) / denom
    else:
        ratio = br / bi
        denom = br * ratio + bi
        ar_out[0] = (zr * ratio + zi) / denom
        ai_out[0] = (zi * ratio - zr) / denom


cdef inline int _clamp(double u, int lo, int hi) noexcept nogil:
    if u < lo:
        return lo
    if u > hi:
        return hi
    return <int> u


cdef struct Window:
    int base_re
    int base_im
    int start_re
    int start_im
    double d_re
    double d_im


cdef inline void _window(Ctx *c, double ar, double ai, Window *wd) noexcept nogil:
    wd.base_re = _clamp(floor((ar + c.v) / c.dq), 0, c.side - 2)
    wd.base_im = _clamp(floor((ai + c.v) / c.dq), 0, c.side - 2)
    wd.start_re = _clamp(wd.base_re - c.w // 2 + 1, 0, c.side - c.w)
    wd.start_im = _clamp(wd.base_im - c.w // 2 + 1, 0, c.side - c.w)
    wd.d_re = ar - c.lv[wd.base_re]
    wd.d_im = ai - c.lv[wd.base_im]


cdef inline long _pos_flat(Ctx *c, Window *wd, int pos) noexcept nogil:
    return (wd.start_re + pos // c.w) * c.side + wd.start_im + pos % c.w


cdef inline int _core_pos(Ctx *c, Window *wd, int idx) noexcept nogil:
    cdef int dr = wd.base_re - wd.start_re + (idx - 1) // 2
    cdef int di = wd.base_im - wd.start_im + (idx - 1) % 2
    return dr * c.w + di


cdef inline int _metric1(double d_re, double d_im, double dq) noexcept nogil:
    cdef int upper = (dq - 2.0 * d_im) < 0.0
    cdef int right = (dq - 2.0 * d_re) < 0.0
    return 1 + upper + 2 * right


cdef inline void _metric2(double d_re, double d_im, double dq, int *order) noexcept nogil:
    cdef double col = dq - 2.0 * d_im
    cdef double row = dq - 2.0 * d_re
    cdef double anti = d_im - d_re
    cdef double diag = dq - d_re - d_im
    # sgn[lo][hi] = sign(d_hi - d_lo), 1-based
    cdef double sgn[5][5]
    sgn[1][2] = col
    sgn[1][3] = row
    sgn[1][4] = diag
    sgn[2][3] = anti
    sgn[2][4] = row
    sgn[3][4] = col
    cdef int m = 1
    cdef int cnd, pos, t
    order[0] = 1
    for cnd in range(2, 5):
        pos = m
        while pos > 0 and sgn[order[pos - 1]][cnd] < 0.0:
            pos -= 1
        t = m
        while t > pos:
            order[t] = order[t - 1]
            t -= 1
        order[pos] = cnd
        m += 1


def metric1_many(double[::1] d_re, double[::1] d_im, double[::1] dq):
    cdef Py_ssize_t m = d_re.shape[0], i
    out = np.empty(m, dtype=np.int64)
    cdef long[::1] o = out
    for i in range(m):
        o[i] = _metric1(d_re[i], d_im[i], dq[i])
    return out


def metric2_many(double[::1] d_re, double[::1] d_im, double[::1] dq):
    cdef Py_ssize_t m = d_re.shape[0], i
    cdef int order[4]
    cdef int t
    out = np.empty((m, 4), dtype=np.int64)
    cdef long[:, ::1] o = out
    for i in range(m):
        _metric2(d_re[i], d_im[i], dq[i], order)
        for t in range(4):
            o[i, t] = order[t]
    return out


cdef inline bint _key_less(const long *p, const long *q, int n) noexcept nogil:
    # lexicographic from the last layer (row n-1) down to row 0
    cdef int j
    for j in range(n - 1, -1, -1):
        if p[j] != q[j]:
            return p[j] < q[j]
    return False


# ---------------------------------------------------------------------------
# box search

cdef struct DfsBest:
    double ped
    long *path


cdef void _box_none(Ctx *c, int k, long *path, double ped, DfsBest *best) noexcept nogil:
    cdef double zr, zi, ar, ai, d
    cdef Window wd
    cdef int pos, t
    cdef long f
    _cancel(c, k, path, &zr, &zi)
    _divide(c, k, zr, zi, &ar, &ai)
    _window(c, ar, ai, &wd)
    for pos in range(c.b):
        f = _pos_flat(c, &wd, pos)
        d = ped + _inc(c, k, zr, zi, f)
        c.evals += 1
        path[k] = f
        if k == 0:
            c.visited += 1
            c.cmps += 1
            if d < best.ped:
                best.ped = d
                for t in range(c.n):
                    best.path[t] = path[t]
        else:
            _box_none(c, k - 1, path, d, best)


def box_search(double complex[::1] x, double complex[:, ::1] r, int side, double scale,
               int w, int mode, int n_icp, int k_surv):
    cdef Ctx c
    _setup(&c, x, r, side, scale)
    c.w = w
    c.b = w * w
    cdef int n = c.n, b = c.b
    cdef int cap = b if b > k_surv else k_surv
    cdef long *paths = <long *> malloc(cap * n * sizeof(long))
    cdef long *npaths = <long *> malloc(cap * n * sizeof(long))
    cdef double *peds = <double *> malloc(cap * sizeof(double))
    cdef double *npeds = <double *> malloc(cap * sizeof(double))
    cdef int *orders = <int *> malloc(cap * b * sizeof(int))
    cdef double *heads = <double *> malloc(cap * sizeof(double))
    cdef double *cz = <double *> malloc(2 * cap * sizeof(double))
    cdef Window *wds = <Window *> malloc(cap * sizeof(Window))
    cdef double *incs = <double *> malloc(b * sizeof(double))
    cdef int *ptr = <int *> malloc(cap * sizeof(int))
    cdef DfsBest best
    best.path = <long *> malloc(n * sizeof(long))
    cdef long *tmp
    cdef double *tmpd
    cdef double zr, zi, ar, ai, d, v
    cdef Window wd
    cdef int pos, nsurv, nnext, layer, row, ci, j, bi, emitted, t, idx, m
    cdef int o4[4]
    cdef long f
    try:
        if (paths == NULL or npaths == NULL or peds == NULL or npeds == NULL or orders == NULL
                or heads == NULL or cz == NULL or wds == NULL or incs == NULL or ptr == NULL
                or best.path == NULL):
            raise MemoryError()
        for j in range(n):
            paths[j] = 0
        if mode == NONE:
            best.ped = INFINITY
            _box_none(&c, n - 1, paths, 0.0, &best)
            out = np.empty(n, dtype=np.int64)
            for j in range(n):
                out[j] = best.path[j]
            return out, best.ped, c.visited, c.evals, c.cmps

        # root layer: all window points survive
        _cancel(&c, n - 1, paths, &zr, &zi)
        _divide(&c, n - 1, zr, zi, &ar, &ai)
        _window(&c, ar, ai, &wd)
        for pos in range(b):
            for j in range(n):
                paths[pos * n + j] = 0
            f = _pos_flat(&c, &wd, pos)
            paths[pos * n + n - 1] = f
            peds[pos] = 0.0 + _inc(&c, n - 1, zr, zi, f)
        nsurv = b
        c.visited += b
        c.evals += b

        layer = 0
        for row in range(n - 2, -1, -1):
            for ci in range(nsurv):
                _cancel(&c, row, paths + ci * n, &cz[2 * ci], &cz[2 * ci + 1])
                _divide(&c, row, cz[2 * ci], cz[2 * ci + 1], &ar, &ai)
                _window(&c, ar, ai, &wds[ci])
            if row > 0 and layer < n_icp:
                # order every cluster
                for ci in range(nsurv):
                    if b == 4:
                        _metric2(wds[ci].d_re, wds[ci].d_im, c.dq, o4)
                        for t in range(4):
                            orders[ci * b + t] = _core_pos(&c, &wds[ci], o4[t])
                        c.cmps += 5
                    else:
                        for pos in range(b):
                            incs[pos] = peds[ci] + _inc(&c, row, cz[2 * ci], cz[2 * ci + 1], _pos_flat(&c, &wds[ci], pos))
                        c.evals += b
                        m = 0
                        for pos in range(b):
                            t = m
                            while t > 0:
                                c.cmps += 1
                                if incs[pos] < incs[orders[ci * b + t - 1]]:
                                    t -= 1
                                else:
                                    break
                            idx = m
                            while idx > t:
                                orders[ci * b + idx] = orders[ci * b + idx - 1]
                                idx -= 1
                            orders[ci * b + t] = pos
                            m += 1
                for ci in range(nsurv):
                    ptr[ci] = 0
                    heads[ci] = peds[ci] + _inc(&c, row, cz[2 * ci], cz[2 * ci + 1],
                                                _pos_flat(&c, &wds[ci], orders[ci * b]))
                c.visited += nsurv
                c.evals += nsurv
                emitted = 0
                while emitted < k_surv:
                    bi = -1
                    for ci in range(nsurv):
                        if ptr[ci] >= b:
                            continue
                        if bi < 0:
                            bi = ci
                            continue
                        c.cmps += 1
                        if heads[ci] < heads[bi]:
                            bi = ci
                    if bi < 0:
                        break
                    for j in range(n):
                        npaths[emitted * n + j] = paths[bi * n + j]
                    npaths[emitted * n + row] = _pos_flat(&c, &wds[bi], orders[bi * b + ptr[bi]])
                    npeds[emitted] = heads[bi]
                    emitted += 1
                    ptr[bi] += 1
                    if ptr[bi] < b and emitted < k_surv:
                        heads[bi] = peds[bi] + _inc(&c, row, cz[2 * bi], cz[2 * bi + 1],
                                                    _pos_flat(&c, &wds[bi], orders[bi * b + ptr[bi]]))
                        c.visited += 1
                        c.evals += 1
                nnext = emitted
            else:
                for ci in range(nsurv):
                    pos = _core_pos(&c, &wds[ci], _metric1(wds[ci].d_re, wds[ci].d_im, c.dq))
                    f = _pos_flat(&c, &wds[ci], pos)
                    for j in range(n):
                        npaths[ci * n + j] = paths[ci * n + j]
                    npaths[ci * n + row] = f
                    npeds[ci] = peds[ci] + _inc(&c, row, cz[2 * ci], cz[2 * ci + 1], f)
                c.visited += nsurv
                c.evals += nsurv
                c.cmps += 2 * nsurv
                nnext = nsurv
            tmp = paths
            paths = npaths
            npaths = tmp
            tmpd = peds
            peds = npeds
            npeds = tmpd
            nsurv = nnext
            layer += 1

        bi = 0
        for ci in range(1, nsurv):
            c.cmps += 1
            if peds[ci] < peds[bi] or (peds[ci] == peds[bi] and _key_less(paths + ci * n, paths + bi * n, n)):
                bi = ci
        out = np.empty(n, dtype=np.int64)
        for j in range(n):
            out[j] = paths[bi * n + j]
        return out, peds[bi], c.visited, c.evals, c.cmps
    finally:
        free(paths)
        free(npaths)
        free(peds)
        free(npeds)
        free(orders)
        free(heads)
        free(cz)
        free(wds)
        free(incs)
        free(ptr)
        free(best.path)
        _teardown(&c)


# ---------------------------------------------------------------------------
# K-Best

def kbest_search(double complex[::1] x, double complex[:, ::1] r, int side, double scale, int k):
    cdef Ctx c
    _setup(&c, x, r, side, scale)
    cdef int n = c.n, a = c.a
    cdef int cap = k if k > 1 else 1
    cdef long *paths = <long *> malloc(cap * n * sizeof(long))
    cdef long *npaths = <long *> malloc(cap * n * sizeof(long))
    cdef double *peds = <double *> malloc(cap * sizeof(double))
    cdef double *tp = <double *> malloc(cap * sizeof(double))
    cdef int *tpar = <int *> malloc(cap * sizeof(int))
    cdef int *tf = <int *> malloc(cap * sizeof(int))
    cdef long *tmp
    cdef int nsurv, row, pi, f, m, pos, t, j
    cdef double zr, zi, d
    try:
        if paths == NULL or npaths == NULL or peds == NULL or tp == NULL or tpar == NULL or tf == NULL:
            raise MemoryError()
        for j in range(n):
            paths[j] = 0
        peds[0] = 0.0
        nsurv = 1
        for row in range(n - 1, -1, -1):
            m = 0
            for pi in range(nsurv):
                _cancel(&c, row, paths + pi * n, &zr, &zi)
                for f in range(a):
                    d = peds[pi] + _inc(&c, row, zr, zi, f)
                    c.visited += 1
                    if m == k:
                        c.cmps += 1
                        if not d < tp[m - 1]:
                            continue
                        m -= 1
                    pos = m
                    while pos > 0:
                        c.cmps += 1
                        if d < tp[pos - 1]:
                            pos -= 1
                        else:
                            break
                    t = m
                    while t > pos:
                        tp[t] = tp[t - 1]
                        tpar[t] = tpar[t - 1]
                        tf[t] = tf[t - 1]
                        t -= 1
                    tp[pos] = d
                    tpar[pos] = pi
                    tf[pos] = f
                    m += 1
            for t in range(m):
                for j in range(n):
                    npaths[t * n + j] = paths[tpar[t] * n + j]
                npaths[t * n + row] = tf[t]
                peds[t] = tp[t]
            tmp = paths
            paths = npaths
            npaths = tmp
            nsurv = m
        out = np.empty(n, dtype=np.int64)
        for j in range(n):
            out[j] = paths[j]
        return out, peds[0], c.visited, c.visited, c.cmps
    finally:
        free(paths)
        free(npaths)
        free(peds)
        free(tp)
        free(tpar)
        free(tf)
        _teardown(&c)


# ---------------------------------------------------------------------------
# sphere decoder and exhaustive ML

cdef struct SdState:
    double best
    long *best_path
    long *path
    IncF *buf
    bint found


cdef void _sphere(Ctx *c, int k, double ped, SdState *st) noexcept nogil:
    cdef double zr, zi, d
    cdef int f, t
    cdef IncF *items = st.buf + k * c.a
    _cancel(c, k, st.path, &zr, &zi)
    for f in range(c.a):
        items[f].v = _inc(c, k, zr, zi, f)
        items[f].f = f
    c.evals += c.a
    qsort(items, c.a, sizeof(IncF), _cmp_incf)
    for t in range(c.a):
        d = ped + items[t].v
        c.visited += 1
        c.cmps += 1
        if d > st.best:
            break
        st.path[k] = items[t].f
        if k == 0:
            c.cmps += 1
            if d < st.best or _key_less(st.path, st.best_path, c.n):
                st.best = d
                for f in range(c.n):
                    st.best_path[f] = st.path[f]
        else:
            _sphere(c, k - 1, d, st)


def sphere_search(double complex[::1] x, double complex[:, ::1] r, int side, double scale):
    cdef Ctx c
    _setup(&c, x, r, side, scale)
    cdef SdState st
    cdef int j
    st.best = INFINITY
    st.best_path = <long *> malloc(c.n * sizeof(long))
    st.path = <long *> malloc(c.n * sizeof(long))
    st.buf = <IncF *> malloc(c.n * c.a * sizeof(IncF))
    try:
        if st.best_path == NULL or st.path == NULL or st.buf == NULL:
            raise MemoryError()
        for j in range(c.n):
            st.path[j] = 0
            st.best_path[j] = 0
        _sphere(&c, c.n - 1, 0.0, &st)
        out = np.empty(c.n, dtype=np.int64)
        for j in range(c.n):
            out[j] = st.best_path[j]
        return out, st.best, c.visited, c.evals, c.cmps
    finally:
        free(st.best_path)
        free(st.path)
        free(st.buf)
        _teardown(&c)


cdef void _ml(Ctx *c, int k, long *path, double ped, DfsBest *best) noexcept nogil:
    cdef double zr, zi, d
    cdef int f, t
    _cancel(c, k, path, &zr, &zi)
    for f in range(c.a):
        d = ped + _inc(c, k, zr, zi, f)
        c.evals += 1
        path[k] = f
        if k == 0:
            c.visited += 1
            c.cmps += 1
            if d < best.ped:
                best.ped = d
                for t in range(c.n):
                    best.path[t] = path[t]
        else:
            _ml(c, k - 1, path, d, best)


def ml_search(double complex[::1] x, double complex[:, ::1] r, int side, double scale):
    cdef Ctx c
    _setup(&c, x, r, side, scale)
    cdef DfsBest best
    cdef long *path = <long *> malloc(c.n * sizeof(long))
    cdef int j
    best.ped = INFINITY
    best.path = <long *> malloc(c.n * sizeof(long))
    try:
        if path == NULL or best.path == NULL:
            raise MemoryError()
        for j in range(c.n):
            path[j] = 0
        _ml(&c, c.n - 1, path, 0.0, &best)
        out = np.empty(c.n, dtype=np.int64)
        for j in range(c.n):
            out[j] = best.path[j]
        return out, best.ped, c.visited, c.evals, c.cmps
    finally:
        free(path)
        free(best.path)
        _teardown(&c)
