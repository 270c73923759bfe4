# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stencil and ball-sum kernels.

Each routine mirrors one function in :mod:`meanfield._kernels_py`; the two
must agree to rounding. Loops run in a fixed order so results are
reproducible from run to run.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def weighted_laplacian(const double[:, ::1] rho, const double[:, ::1] v, double h):
    """Return -div(rho grad v) on the periodic grid (staggered fluxes)."""
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, j, ip, im, jp, jm
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double fe, fw, fn, fs
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        im = i - 1 if i > 0 else n - 1
        for j in range(n):
            jp = j + 1 if j + 1 < n else 0
            jm = j - 1 if j > 0 else n - 1
            fe = 0.5 * (rho[i, j] + rho[ip, j]) * (v[ip, j] - v[i, j])
            fw = 0.5 * (rho[im, j] + rho[i, j]) * (v[i, j] - v[im, j])
            fn = 0.5 * (rho[i, j] + rho[i, jp]) * (v[i, jp] - v[i, j])
            fs = 0.5 * (rho[i, jm] + rho[i, j]) * (v[i, j] - v[i, jm])
            o[i, j] = -inv_h2 * ((fe - fw) + (fn - fs))
    return out


def dirichlet_energy(const double[:, ::1] rho, const double[:, ::1] v):
    """Sum over faces of rho_face * (jump of v)**2."""
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, j, ip, jp
    cdef double dx, dy, row, total = 0.0
    for i in range(n):
        ip = i + 1 if i + 1 < n else 0
        row = 0.0
        for j in range(n):
            jp = j + 1 if j + 1 < n else 0
            dx = v[ip, j] - v[i, j]
            dy = v[i, jp] - v[i, j]
            row += 0.5 * (rho[i, j] + rho[ip, j]) * dx * dx
            row += 0.5 * (rho[i, j] + rho[i, jp]) * dy * dy
        total += row
    return total


def ball_sums(const double[:, ::1] w, const long[:, ::1] offsets):
    """For every node c, sum w over c + offsets (periodic wrap).

    Offsets are accumulated one at a time, in the given order, matching the
    fallback's summation order exactly.
    """
    cdef Py_ssize_t n = w.shape[0]
    cdef Py_ssize_t m = offsets.shape[0]
    cdef Py_ssize_t i, j, k, a, b, ia
    out = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    for k in range(m):
        a = offsets[k, 0] % n
        b = offsets[k, 1] % n
        if a < 0:
            a += n
        if b < 0:
            b += n
        for i in range(n):
            ia = i + a if i + a < n else i + a - n
            for j in range(n - b):
                o[i, j] += w[ia, j + b]
            for j in range(n - b, n):
                o[i, j] += w[ia, j + b - n]
    return out
