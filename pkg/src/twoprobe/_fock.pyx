# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Fock-space kernels; same contract as ``_fock_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def enumerate_states(int num_sites, int num_particles, int n_max, cnp.int64_t[:, ::1] counts):
    cdef Py_ssize_t dim = counts[num_sites, num_particles]
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] out = np.zeros((dim, num_sites), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] states = out
    cdef Py_ssize_t s, i
    cdef long long idx, block
    cdef int r, v, top
    for s in range(dim):
        idx = s
        r = num_particles
        for i in range(num_sites):
            top = n_max if n_max < r else r
            for v in range(top, -1, -1):
                block = counts[num_sites - i - 1, r - v]
                if idx < block:
                    break
                idx -= block
            states[s, i] = v
            r -= v
    return out


cdef inline long long _rank(cnp.uint8_t[::1] row, cnp.int64_t[:, :, ::1] offsets, int total) nogil:
    cdef long long rank = 0
    cdef int r = total
    cdef Py_ssize_t i
    cdef int v
    for i in range(row.shape[0]):
        v = row[i]
        rank += offsets[i, r, v]
        r -= v
    return rank


def rank_states(states, cnp.int64_t[:, :, ::1] offsets):
    cdef cnp.uint8_t[:, ::1] st = np.ascontiguousarray(states, dtype=np.uint8)
    cdef Py_ssize_t n = st.shape[0], m = st.shape[1], s, i
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(n, dtype=np.int64)
    cdef int total
    for s in range(n):
        total = 0
        for i in range(m):
            total += st[s, i]
        out[s] = _rank(st[s], offsets, total)
    return out


def hopping_elements(states, bonds, int n_max, cnp.int64_t[:, :, ::1] offsets):
    cdef cnp.uint8_t[:, ::1] st = np.ascontiguousarray(states, dtype=np.uint8)
    cdef cnp.int64_t[:, ::1] bd = np.ascontiguousarray(np.asarray(bonds, dtype=np.int64).reshape(-1, 2))
    cdef Py_ssize_t n = st.shape[0], m = st.shape[1], nb = bd.shape[0]
    cdef Py_ssize_t cap = n * nb * 2
    cdef cnp.ndarray[cnp.int64_t, ndim=1] rows = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cols = np.empty(cap, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.empty(cap, dtype=np.float64)
    cdef cnp.uint8_t[::1] work = np.empty(m, dtype=np.uint8)
    cdef Py_ssize_t s, b, d, k, count = 0
    cdef int i, j, ni, nj, total
    cdef long long src
    for b in range(nb):
        for d in range(2):
            if d == 0:
                i = <int>bd[b, 0]; j = <int>bd[b, 1]
            else:
                i = <int>bd[b, 1]; j = <int>bd[b, 0]
            for s in range(n):
                ni = st[s, i]
                nj = st[s, j]
                if nj == 0 or ni >= n_max:
                    continue
                total = 0
                for k in range(m):
                    work[k] = st[s, k]
                    total += st[s, k]
                src = _rank(work, offsets, total)
                work[i] += 1
                work[j] -= 1
                rows[count] = _rank(work, offsets, total)
                cols[count] = src
                vals[count] = sqrt(<double>((ni + 1) * nj))
                count += 1
    return rows[:count].copy(), cols[:count].copy(), vals[:count].copy()
