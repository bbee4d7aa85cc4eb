# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops: inscribed-polygon sweep and area-functional assembly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil



cdef inline unsigned long long _rotl(unsigned long long m, int n, unsigned long long full) nogil:
    return ((m << 1) | (m >> (n - 1))) & full


cdef inline unsigned long long _rotr(unsigned long long m, int n, unsigned long long full) nogil:
    return ((m >> 1) | (m << (n - 1))) & full


cdef inline unsigned long long _swap(unsigned long long m, int n, int offset,
                                     unsigned long long full, unsigned long long even) nogil:
    cdef unsigned long long s
    if offset:
        m = _rotr(m, n, full)
    s = ((m & even) << 1) | ((m & (even << 1)) >> 1)
    if offset:
        s = _rotl(s, n, full)
    return s


cdef double _margin(unsigned long long mask, int n, int offset, double[:, ::1] L) nogil:
    cdef int first = -1, prev = -1, i
    cdef double total = 0.0
    for i in range(n):
        if (mask >> i) & 1:
            if prev >= 0:
                if i - prev == 1 and ((prev - offset) % 2 + 2) % 2 == 0:
                    total -= L[prev, i]
                else:
                    total += L[prev, i]
            else:
                first = i
            prev = i
    # closing edge prev -> first
    if (first - prev + n) % n == 1 and ((prev - offset) % 2 + 2) % 2 == 0:
        total -= L[prev, first]
    else:
        total += L[prev, first]
    return total


def scan_inscribed(int n, int a_offset, double[:, ::1] lengths):
    """Sweep every vertex subset of an ideal 2k-gon; see ``_fallback.scan_inscribed``."""
    cdef unsigned long long full = (1ULL << n) - 1
    cdef unsigned long long even = 0, m, lonely
    cdef long long n_enum = 0, n_shared = 0
    cdef int j, off_b = 1 - a_offset
    for j in range(0, n, 2):
        even |= 1ULL << j
    masks = []
    sides = []
    with nogil:
        m = 1
        while m < full:
            if __builtin_popcountll(m) >= 3:
                n_enum += 1
                lonely = m & ~_rotl(m, n, full) & ~_rotr(m, n, full)
                if lonely:
                    n_shared += 1
                if _swap(m, n, a_offset, full, even) == m:
                    with gil:
                        masks.append(m)
                        sides.append(0)
                if _swap(m, n, off_b, full, even) == m:
                    with gil:
                        masks.append(m)
                        sides.append(1)
            m += 1
    cdef Py_ssize_t t, count = len(masks)
    out_m = np.asarray(masks, dtype=np.int64)
    out_s = np.asarray(sides, dtype=np.int8)
    margins = np.empty(count)
    cdef double[::1] mv = margins
    for t in range(count):
        mv[t] = _margin(<unsigned long long>masks[t], n,
                        a_offset if sides[t] == 0 else off_b, lengths)
    return out_m, out_s, margins, n_enum, n_shared


def assemble(double[::1] u, long long[:, ::1] tri, double[:, ::1] gx, double[:, ::1] gy,
             double[::1] area, double[:, ::1] lam, double[::1] weights, bint hessian=True):
    """Energy, nodal gradient, per-triangle Hessian blocks and flux vectors."""
    cdef Py_ssize_t M = tri.shape[0], Q = weights.shape[0], N = u.shape[0]
    cdef Py_ssize_t t, q, a, b
    cdef double g0, g1, g2, s, lq, k1, k3, c, d, energy = 0.0, e
    cdef double px[3]
    grad = np.zeros(N)
    flux = np.empty((M, 2))
    cdef double[::1] gv = grad
    cdef double[:, ::1] fv = flux
    cdef double[:, :, ::1] hv
    if hessian:
        hess = np.empty((M, 3, 3))
        hv = hess
    else:
        hess = None
    with nogil:
        for t in range(M):
            g0 = gx[t, 0] * u[tri[t, 0]] + gx[t, 1] * u[tri[t, 1]] + gx[t, 2] * u[tri[t, 2]]
            g1 = gy[t, 0] * u[tri[t, 0]] + gy[t, 1] * u[tri[t, 1]] + gy[t, 2] * u[tri[t, 2]]
            g2 = g0 * g0 + g1 * g1
            k1 = 0.0
            k3 = 0.0
            e = 0.0
            for q in range(Q):
                lq = lam[t, q]
                s = sqrt(lq * lq + g2)
                e += weights[q] * lq * s
                k1 += weights[q] * lq / s
                k3 += weights[q] * lq / (s * s * s)
            energy += area[t] * e
            fv[t, 0] = k1 * g0
            fv[t, 1] = k1 * g1
            c = area[t] * k1
            for a in range(3):
                px[a] = g0 * gx[t, a] + g1 * gy[t, a]
                gv[tri[t, a]] += c * px[a]
            if hessian:
                d = area[t] * k3
                for a in range(3):
                    for b in range(3):
                        hv[t, a, b] = (c * (gx[t, a] * gx[t, b] + gy[t, a] * gy[t, b])
                                       - d * px[a] * px[b])
    return energy, grad, hess, flux
