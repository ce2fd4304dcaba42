# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops for high-throughput categorical sampling.

Both entry points consume pre-generated uniforms and perform the exact same
IEEE-754 arithmetic as the numpy fallback in ``_kernels_py``, so the two
backends produce bit-identical sample streams for the same seed.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def alias_pick(const double[::1] accept, const cnp.int64_t[::1] alias,
               const double[::1] u_cell, const double[::1] u_acc):
    """Walker alias-table lookup for each (u_cell, u_acc) pair."""
    cdef Py_ssize_t m = u_cell.shape[0]
    cdef cnp.int64_t k = <cnp.int64_t>accept.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    cdef Py_ssize_t t
    cdef cnp.int64_t cell
    for t in range(m):
        cell = <cnp.int64_t>(u_cell[t] * k)
        if cell > k - 1:  # u*k can round up to k at the float boundary
            cell = k - 1
        if u_acc[t] < accept[cell]:
            ov[t] = cell
        else:
            ov[t] = alias[cell]
    return out


def flattened_pick(const double[::1] accept, const cnp.int64_t[::1] alias,
                   const cnp.int64_t[::1] offsets, const cnp.int64_t[::1] width,
                   const double[::1] u_cell, const double[::1] u_acc,
                   const double[::1] u_slot):
    """Alias draw of a base element followed by a uniform slot within it.

    ``offsets[i]`` is the first flat index of element i's slot range and
    ``width[i]`` the number of slots; the result is a flat slot index.
    """
    cdef Py_ssize_t m = u_cell.shape[0]
    cdef cnp.int64_t k = <cnp.int64_t>accept.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] ov = out
    cdef Py_ssize_t t
    cdef cnp.int64_t cell, slot, w
    for t in range(m):
        cell = <cnp.int64_t>(u_cell[t] * k)
        if cell > k - 1:
            cell = k - 1
        if u_acc[t] >= accept[cell]:
            cell = alias[cell]
        w = width[cell]
        slot = <cnp.int64_t>(u_slot[t] * w)
        if slot > w - 1:
            slot = w - 1
        ov[t] = offsets[cell] + slot
    return out
