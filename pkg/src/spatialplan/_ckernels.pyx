# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled raster kernels; see ``_kernels_py`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, log1p, INFINITY

cnp.import_array()


def assign(points, sites, weights, period=None):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef double[:, ::1] st = np.ascontiguousarray(sites, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], n_sites = st.shape[0]
    cdef Py_ssize_t a, l, best
    cdef double dx, dy, score, best_score, px = 0.0, py = 0.0
    cdef bint wrap = period is not None
    if wrap:
        px = float(period[0])
        py = float(period[1])
    out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t[::1] labels = out
    with nogil:
        for a in range(n):
            best = 0
            best_score = INFINITY
            for l in range(n_sites):
                dx = fabs(pts[a, 0] - st[l, 0])
                dy = fabs(pts[a, 1] - st[l, 1])
                if wrap:
                    if px - dx < dx:
                        dx = px - dx
                    if py - dy < dy:
                        dy = py - dy
                score = sqrt(dx * dx + dy * dy) - w[l]
                if score < best_score:
                    best_score = score
                    best = l
            labels[a] = best
    return out


def cell_moments(labels, mass, points, Py_ssize_t n_cells):
    cdef Py_ssize_t[::1] lab = np.ascontiguousarray(labels, dtype=np.intp)
    cdef double[::1] ms = np.ascontiguousarray(mass, dtype=np.float64)
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    m_arr = np.zeros(n_cells)
    mx_arr = np.zeros(n_cells)
    my_arr = np.zeros(n_cells)
    cdef double[::1] m = m_arr, mx = mx_arr, my = my_arr
    cdef Py_ssize_t a, l
    with nogil:
        for a in range(lab.shape[0]):
            l = lab[a]
            m[l] += ms[a]
            mx[l] += ms[a] * pts[a, 0]
            my[l] += ms[a] * pts[a, 1]
    return m_arr, mx_arr, my_arr


def sir_field(labels, gain, power, alpha):
    cdef Py_ssize_t[::1] lab = np.ascontiguousarray(labels, dtype=np.intp)
    cdef double[:, ::1] g = np.ascontiguousarray(gain, dtype=np.float64)
    cdef double[::1] p = np.ascontiguousarray(power, dtype=np.float64)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef Py_ssize_t n_cells = g.shape[0], n = g.shape[1], a, l
    sig_arr = np.empty(n)
    intf_arr = np.zeros(n)
    cdef double[::1] sig = sig_arr, intf = intf_arr
    cdef double q
    with nogil:
        for a in range(n):
            sig[a] = p[lab[a]] * g[lab[a], a]
        for l in range(n_cells):
            q = p[l] * al[l]
            if q == 0.0:
                continue
            for a in range(n):
                if lab[a] != l:
                    intf[a] += q * g[l, a]
    return sig_arr, intf_arr


def load_sums(labels, mass, signal, interference, Py_ssize_t n_cells, double sir_cap):
    cdef Py_ssize_t[::1] lab = np.ascontiguousarray(labels, dtype=np.intp)
    cdef double[::1] ms = np.ascontiguousarray(mass, dtype=np.float64)
    cdef double[::1] sig = np.ascontiguousarray(signal, dtype=np.float64)
    cdef double[::1] intf = np.ascontiguousarray(interference, dtype=np.float64)
    out = np.zeros(n_cells)
    cdef double[::1] acc = out
    cdef Py_ssize_t a
    cdef double sir, term
    with nogil:
        for a in range(lab.shape[0]):
            if intf[a] > 0.0:
                sir = sig[a] / intf[a]
            else:
                sir = INFINITY
            if sir > sir_cap:
                sir = sir_cap
            if ms[a] > 0.0:
                term = ms[a] / log1p(sir)
            else:
                term = 0.0
            acc[lab[a]] += term
    return out
