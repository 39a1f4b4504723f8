# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""
import numpy as np

from libc.math cimport cos, log, sqrt, M_PI
from libc.stdint cimport uint64_t

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double INV_2_53 = 1.0 / 9007199254740992.0


cdef inline uint64_t _mix(uint64_t z) nogil:
    z = z + GOLDEN
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def standard_normals(seed, episodes, Py_ssize_t n_stages, Py_ssize_t n_agents):
    cdef uint64_t[::1] ep = np.ascontiguousarray(episodes, dtype=np.uint64).ravel()
    cdef Py_ssize_t n_ep = ep.shape[0]
    out = np.empty((n_ep, n_stages, n_agents), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef uint64_t base = _mix(<uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    cdef uint64_t ke, ks, k, b1, b2
    cdef double two_pi = 2.0 * M_PI
    cdef double u1, u2
    cdef Py_ssize_t e, s, a
    with nogil:
        for e in range(n_ep):
            ke = _mix(base ^ ep[e])
            for s in range(n_stages):
                ks = _mix(ke ^ <uint64_t>s)
                for a in range(n_agents):
                    k = _mix(ks ^ <uint64_t>a)
                    b1 = _mix(k + GOLDEN)
                    b2 = _mix(k + GOLDEN + GOLDEN)
                    u1 = <double>((b1 >> 11) + 1) * INV_2_53
                    u2 = <double>(b2 >> 11) * INV_2_53
                    o[e, s, a] = sqrt(-2.0 * log(u1)) * cos(two_pi * u2)
    return out


def grid_argmax(H, f, double c, lo, step, counts):
    cdef double[:, ::1] h = np.ascontiguousarray(H, dtype=np.float64)
    cdef double[::1] g = np.ascontiguousarray(f, dtype=np.float64)
    cdef double[::1] low = np.ascontiguousarray(lo, dtype=np.float64)
    cdef double[::1] st = np.ascontiguousarray(step, dtype=np.float64)
    cdef long[::1] cnt = np.ascontiguousarray(counts, dtype=np.int64).astype(np.int_)
    cdef Py_ssize_t n = g.shape[0]
    k_arr = np.zeros(n, dtype=np.int_)
    best_arr = np.zeros(n, dtype=np.int64)
    z_arr = np.empty(n, dtype=np.float64)
    cdef long[::1] k = k_arr
    cdef long long[::1] best = best_arr
    cdef double[::1] z = z_arr
    cdef Py_ssize_t i, j
    cdef double val, acc, best_val = -np.inf
    cdef bint done = n == 0
    for i in range(n):
        if cnt[i] <= 0:
            raise ValueError("empty grid")
    with nogil:
        for i in range(n):
            z[i] = low[i]
        while True:
            val = c
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc = acc + h[i, j] * z[j]
                val = val + z[i] * (0.5 * acc + g[i])
            if val > best_val:
                best_val = val
                for i in range(n):
                    best[i] = k[i]
            if done:
                break
            # odometer increment, last coordinate fastest
            i = n - 1
            while i >= 0:
                k[i] += 1
                if k[i] < cnt[i]:
                    z[i] = low[i] + k[i] * st[i]
                    break
                k[i] = 0
                z[i] = low[i]
                i -= 1
            if i < 0:
                break
    return best_arr, best_val
