# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; see ``_pure.py`` for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY, NAN
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef uint64_t _GOLDEN = 0x9E3779B97F4A7C15ULL
cdef uint64_t _M1 = 0xBF58476D1CE4E5B9ULL
cdef uint64_t _M2 = 0x94D049BB133111EBULL
cdef double _INV53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = z + _GOLDEN
    z = (z ^ (z >> 30)) * _M1
    z = (z ^ (z >> 27)) * _M2
    return z ^ (z >> 31)


def hash_uniform(seed, tag, domain, a, b):
    cdef uint64_t s0 = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t tg = <uint64_t>(int(tag) & 0xFFFFFFFFFFFFFFFF)
    cdef uint64_t dm = <uint64_t>(int(domain) & 0xFFFFFFFFFFFFFFFF)
    aa, bb = np.broadcast_arrays(np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64))
    shape = aa.shape
    cdef const int64_t[::1] av = np.ascontiguousarray(aa).ravel()
    cdef const int64_t[::1] bv = np.ascontiguousarray(bb).ravel()
    cdef Py_ssize_t n = av.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef uint64_t base, h
    with nogil:
        base = _mix(_mix(s0 ^ dm) ^ tg)
        for i in range(n):
            h = _mix(base ^ <uint64_t>av[i])
            h = _mix(h ^ <uint64_t>bv[i])
            ov[i] = <double>(h >> 11) * _INV53
    return out.reshape(shape)


def solve_scale_segments(seg_ptr, pi_e, w2_e, target, saturate):
    cdef const int64_t[::1] ptr = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    cdef const double[::1] pi = np.ascontiguousarray(pi_e, dtype=np.float64)
    cdef Py_ssize_t nseg = ptr.shape[0] - 1
    w2_arr = np.ones(pi.shape[0]) if w2_e is None else np.ascontiguousarray(w2_e, dtype=np.float64)
    cdef const double[::1] w2 = w2_arr
    cdef const double[::1] tgt = np.ascontiguousarray(
        np.broadcast_to(np.asarray(target, dtype=np.float64), (nseg,)))
    cdef const cnp.npy_bool[::1] sat_flag = np.ascontiguousarray(
        np.broadcast_to(np.asarray(saturate, dtype=bool), (nseg,))).view(np.uint8)
    c_arr = np.zeros(nseg)
    it_arr = np.zeros(nseg, dtype=np.int64)
    res_arr = np.zeros(nseg)
    cdef double[::1] c = c_arr
    cdef int64_t[::1] iters = it_arr
    cdef double[::1] res = res_arr
    cdef Py_ssize_t j, e, lo, hi, rounds
    cdef double cj, v, lhs, new_c, minpi, x, T
    cdef int64_t nsat, nsat_used
    with nogil:
        for j in range(nseg):
            lo = ptr[j]
            hi = ptr[j + 1]
            if hi == lo:
                c[j] = NAN
                continue
            if sat_flag[j]:
                minpi = INFINITY
                for e in range(lo, hi):
                    if pi[e] < minpi:
                        minpi = pi[e]
                c[j] = 1.0 / minpi
                continue
            T = tgt[j]
            cj = 0.0
            for e in range(lo, hi):
                cj += w2[e] / pi[e]
            cj = cj / T
            v = 0.0
            nsat_used = 0
            for rounds in range(hi - lo + 2):
                lhs = 0.0
                for e in range(lo, hi):
                    x = cj * pi[e]
                    lhs += w2[e] / (x if x < 1.0 else 1.0)
                new_c = cj / (T - v) * (lhs - v)
                if new_c > cj:
                    cj = new_c
                iters[j] += 1
                nsat = 0
                v = 0.0
                for e in range(lo, hi):
                    if cj * pi[e] >= 1.0:
                        nsat += 1
                        v += w2[e]
                if nsat == nsat_used:
                    break
                nsat_used = nsat
            lhs = 0.0
            for e in range(lo, hi):
                x = cj * pi[e]
                lhs += w2[e] / (x if x < 1.0 else 1.0)
            c[j] = cj
            res[j] = fabs(lhs - T)
    return c_arr, it_arr, res_arr


def scatter_max(index, values, size):
    cdef const int64_t[::1] idx = np.ascontiguousarray(index, dtype=np.int64)
    cdef const double[::1] val = np.ascontiguousarray(values, dtype=np.float64)
    out = np.full(size, -INFINITY)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, n = idx.shape[0]
    cdef double a, b
    with nogil:
        for i in range(n):
            # branch-free so random data does not stall on mispredictions
            j = idx[i]
            a = val[i]
            b = ov[j]
            ov[j] = a if a > b else b
    return out


cdef inline bint _less(double ka, int64_t ia, double kb, int64_t ib) nogil:
    return ka < kb or (ka == kb and ia < ib)


cdef void _quickselect(double* keys, int64_t* ids, int64_t* pos, Py_ssize_t n, Py_ssize_t m) nogil:
    # rearranges so the m smallest (key, id) pairs occupy [0, m)
    cdef Py_ssize_t lo = 0, hi = n - 1, i, j, mid
    cdef double pk, tk
    cdef int64_t pid, ti, tp
    while lo < hi:
        mid = lo + (hi - lo) // 2
        pk = keys[mid]
        pid = ids[mid]
        i = lo
        j = hi
        while i <= j:
            while _less(keys[i], ids[i], pk, pid):
                i += 1
            while _less(pk, pid, keys[j], ids[j]):
                j -= 1
            if i <= j:
                tk = keys[i]; keys[i] = keys[j]; keys[j] = tk
                ti = ids[i]; ids[i] = ids[j]; ids[j] = ti
                tp = pos[i]; pos[i] = pos[j]; pos[j] = tp
                i += 1
                j -= 1
        if m - 1 <= j:
            hi = j
        elif m - 1 >= i:
            lo = i
        else:
            break


def bottom_k_segments(seg_ptr, keys, ids, counts):
    cdef const int64_t[::1] ptr = np.ascontiguousarray(seg_ptr, dtype=np.int64)
    cdef const double[::1] kv = np.ascontiguousarray(keys, dtype=np.float64)
    cdef const int64_t[::1] iv = np.ascontiguousarray(ids, dtype=np.int64)
    cdef const int64_t[::1] cnt = np.ascontiguousarray(counts, dtype=np.int64)
    cdef Py_ssize_t nseg = ptr.shape[0] - 1, n = kv.shape[0]
    mask = np.zeros(n, dtype=bool)
    cdef cnp.npy_bool[::1] mv = mask.view(np.uint8)
    scratch_k = np.empty(n)
    scratch_i = np.empty(n, dtype=np.int64)
    scratch_p = np.empty(n, dtype=np.int64)
    cdef double[::1] sk = scratch_k
    cdef int64_t[::1] si = scratch_i
    cdef int64_t[::1] sp = scratch_p
    cdef Py_ssize_t j, e, lo, hi, d, m
    with nogil:
        for j in range(nseg):
            lo = ptr[j]
            hi = ptr[j + 1]
            d = hi - lo
            m = cnt[j]
            if m >= d:
                for e in range(lo, hi):
                    mv[e] = 1
                continue
            if m <= 0:
                continue
            for e in range(lo, hi):
                sk[e] = kv[e]
                si[e] = iv[e]
                sp[e] = e
            _quickselect(&sk[lo], &si[lo], &sp[lo], d, m)
            for e in range(lo, lo + m):
                mv[sp[e]] = 1
    return mask
