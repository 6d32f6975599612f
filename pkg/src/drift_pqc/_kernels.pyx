# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled local-superoperator kernels on batched density matrices.

``rho`` has shape ``(B, D, D)`` and is updated in place. ``S`` has shape
``(1, d*d, d*d)`` (shared) or ``(B, d*d, d*d)`` and acts on the row-major
vectorisation of the local block, first listed qubit most significant.

Arithmetic runs on float64 views with explicit real/imaginary parts: C99
complex multiplication goes through a NaN-checking library call that is
several times slower than the four multiplies it needs. The two-qubit kernel
keeps four independent accumulators per output row so the adds do not
serialize.
"""

import numpy as np


cdef void _apply1(double[:, :, ::1] rho, double[:, :, ::1] S, Py_ssize_t bit) noexcept nogil:
    cdef Py_ssize_t B = rho.shape[0], D = rho.shape[1]
    cdef bint shared = S.shape[0] == 1
    cdef Py_ssize_t b, sb, i, j, o, t, r, c
    cdef double st_r[16]
    cdef double st_i[16]
    cdef double vr[4]
    cdef double vi[4]
    cdef double ar[4]
    cdef double ai[4]
    cdef double yr, yi
    cdef Py_ssize_t row[2]
    cdef Py_ssize_t cc[2]
    for b in range(B):
        if b == 0 or not shared:
            # transposed copy, st[t, o] = S[o, t]
            sb = 0 if shared else b
            for o in range(4):
                for t in range(4):
                    st_r[t * 4 + o] = S[sb, o, 2 * t]
                    st_i[t * 4 + o] = S[sb, o, 2 * t + 1]
        for i in range(D):
            if i & bit:
                continue
            row[0] = i
            row[1] = i | bit
            for j in range(D):
                if j & bit:
                    continue
                cc[0] = 2 * j
                cc[1] = 2 * (j | bit)
                for r in range(2):
                    for c in range(2):
                        vr[r * 2 + c] = rho[b, row[r], cc[c]]
                        vi[r * 2 + c] = rho[b, row[r], cc[c] + 1]
                for o in range(4):
                    ar[o] = 0.0
                    ai[o] = 0.0
                for t in range(4):
                    yr = vr[t]
                    yi = vi[t]
                    for o in range(4):
                        ar[o] += st_r[t * 4 + o] * yr - st_i[t * 4 + o] * yi
                        ai[o] += st_r[t * 4 + o] * yi + st_i[t * 4 + o] * yr
                for r in range(2):
                    for c in range(2):
                        rho[b, row[r], cc[c]] = ar[r * 2 + c]
                        rho[b, row[r], cc[c] + 1] = ai[r * 2 + c]


cdef void _apply2(double[:, :, ::1] rho, double[:, :, ::1] S, Py_ssize_t ba, Py_ssize_t bb) noexcept nogil:
    cdef Py_ssize_t B = rho.shape[0], D = rho.shape[1]
    cdef Py_ssize_t mask = ba | bb
    cdef bint shared = S.shape[0] == 1
    cdef Py_ssize_t b, sb, i, j, o, t, r, c
    cdef double sr[256]
    cdef double si[256]
    cdef double vr[16]
    cdef double vi[16]
    cdef double a0r, a0i, a1r, a1i, a2r, a2i, a3r, a3i, yr, yi, xr, xi
    cdef Py_ssize_t off[4]
    cdef Py_ssize_t row[4]
    cdef Py_ssize_t cc[4]
    # local index 2*bit(qa) + bit(qb)
    off[0] = 0
    off[1] = bb
    off[2] = ba
    off[3] = ba | bb
    for b in range(B):
        if b == 0 or not shared:
            sb = 0 if shared else b
            for o in range(16):
                for t in range(16):
                    sr[o * 16 + t] = S[sb, o, 2 * t]
                    si[o * 16 + t] = S[sb, o, 2 * t + 1]
        for i in range(D):
            if i & mask:
                continue
            for r in range(4):
                row[r] = i | off[r]
            for j in range(D):
                if j & mask:
                    continue
                for c in range(4):
                    cc[c] = 2 * (j | off[c])
                for r in range(4):
                    for c in range(4):
                        vr[r * 4 + c] = rho[b, row[r], cc[c]]
                        vi[r * 4 + c] = rho[b, row[r], cc[c] + 1]
                for r in range(4):
                    # outputs 4r..4r+3 fill row r of the local block
                    a0r = a0i = a1r = a1i = a2r = a2i = a3r = a3i = 0.0
                    o = 4 * r
                    for t in range(16):
                        yr = vr[t]
                        yi = vi[t]
                        xr = sr[o * 16 + t]
                        xi = si[o * 16 + t]
                        a0r += xr * yr - xi * yi
                        a0i += xr * yi + xi * yr
                        xr = sr[(o + 1) * 16 + t]
                        xi = si[(o + 1) * 16 + t]
                        a1r += xr * yr - xi * yi
                        a1i += xr * yi + xi * yr
                        xr = sr[(o + 2) * 16 + t]
                        xi = si[(o + 2) * 16 + t]
                        a2r += xr * yr - xi * yi
                        a2i += xr * yi + xi * yr
                        xr = sr[(o + 3) * 16 + t]
                        xi = si[(o + 3) * 16 + t]
                        a3r += xr * yr - xi * yi
                        a3i += xr * yi + xi * yr
                    rho[b, row[r], cc[0]] = a0r
                    rho[b, row[r], cc[0] + 1] = a0i
                    rho[b, row[r], cc[1]] = a1r
                    rho[b, row[r], cc[1] + 1] = a1i
                    rho[b, row[r], cc[2]] = a2r
                    rho[b, row[r], cc[2] + 1] = a2i
                    rho[b, row[r], cc[3]] = a3r
                    rho[b, row[r], cc[3] + 1] = a3i


def _as_real(a, Py_ssize_t local=0):
    a = np.asarray(a)
    if a.dtype != np.complex128 or not a.flags.c_contiguous or a.ndim != 3:
        raise ValueError("kernels need C-contiguous complex128 arrays of rank 3")
    if local and a.shape[1:] != (local, local):
        raise ValueError(f"superoperator must be {local}x{local}, got {a.shape[1:]}")
    return a.view(np.float64)


def apply_1q(rho, S, int q):
    _apply1(_as_real(rho), _as_real(S, 4), 1 << q)
    return rho


def apply_2q(rho, S, int qa, int qb):
    _apply2(_as_real(rho), _as_real(S, 16), 1 << qa, 1 << qb)
    return rho
