# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels.

Same signatures and results as :mod:`krflab._kernels_py`: the backward-Euler
residual, the Newton direction (tridiagonal Thomas solve fused with the
Jacobian assembly) and the lattice Dijkstra, which releases the GIL so
several sources can run on separate threads.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, fabs, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()

BACKEND = "compiled"


cdef int _terms(const double[::1] phi, double h, int m, double* G,
                double* gl, double* gr) noexcept nogil:
    """Fill flux and partials on every cell; return 0 on non-monotone input."""
    cdef Py_ssize_t k, n = phi.shape[0] - 1
    cdef double diff, mean, c
    for k in range(n):
        diff = phi[k + 1] - phi[k]
        mean = 0.5 * (phi[k + 1] + phi[k])
        if not (diff > 0.0) or not (mean > 0.0):
            return 0
        G[k] = (m - 1) * log(mean) + log(diff / h)
        c = (m - 1) / (2.0 * mean)
        gl[k] = c - 1.0 / diff
        gr[k] = c + 1.0 / diff
    return 1


def be_residual(const double[::1] phi, const double[::1] phi_old, double h, double dt, int m):
    """Backward-Euler residual on interior nodes, or None if non-monotone."""
    cdef Py_ssize_t N = phi.shape[0], i
    cdef double* G = <double*> malloc((N - 1) * 3 * sizeof(double))
    if G == NULL:
        raise MemoryError()
    cdef double* gl = G + (N - 1)
    cdef double* gr = G + 2 * (N - 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(N - 2)
    cdef double[::1] o = out
    cdef int ok
    try:
        with nogil:
            ok = _terms(phi, h, m, G, gl, gr)
            if ok:
                for i in range(1, N - 1):
                    o[i - 1] = phi[i] - phi_old[i] - dt * ((G[i] - G[i - 1]) / h - m)
    finally:
        free(G)
    return out if ok else None


def be_newton_direction(const double[::1] phi, const double[::1] phi_old, double h, double dt, int m):
    """Newton update for the interior nodes and the residual max-norm.

    Returns ``(delta, res_inf)``; ``delta`` is None when ``phi`` is not
    strictly increasing.
    """
    cdef Py_ssize_t N = phi.shape[0], n = N - 2, i
    cdef double* buf = <double*> malloc(((N - 1) * 3 + n * 2) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* G = buf
    cdef double* gl = buf + (N - 1)
    cdef double* gr = buf + 2 * (N - 1)
    cdef double* cp = buf + 3 * (N - 1)
    cdef double* dp = cp + n
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n)
    cdef double[::1] x = out
    cdef double c = dt / h, res_inf = 0.0, r, lo, di, up, denom
    cdef int ok
    try:
        with nogil:
            ok = _terms(phi, h, m, G, gl, gr)
            if ok:
                # forward sweep; row i couples interior nodes i-1, i, i+1
                for i in range(n):
                    r = phi[i + 1] - phi_old[i + 1] - dt * ((G[i + 1] - G[i]) / h - m)
                    if fabs(r) > res_inf:
                        res_inf = fabs(r)
                    lo = c * gl[i]
                    di = 1.0 - c * (gl[i + 1] - gr[i])
                    up = -c * gr[i + 1]
                    if i == 0:
                        denom = di
                        dp[i] = -r / denom
                    else:
                        denom = di - lo * cp[i - 1]
                        dp[i] = (-r - lo * dp[i - 1]) / denom
                    cp[i] = up / denom
                x[n - 1] = dp[n - 1]
                for i in range(n - 2, -1, -1):
                    x[i] = dp[i] - cp[i] * x[i + 1]
    finally:
        free(buf)
    if not ok:
        return None, float("inf")
    return out, res_inf


# ---------------------------------------------------------------- Dijkstra

cdef inline void _heap_push(double* key, Py_ssize_t* node, Py_ssize_t* size,
                            double k, Py_ssize_t v) noexcept nogil:
    cdef Py_ssize_t i = size[0], parent
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if key[parent] <= k:
            break
        key[i] = key[parent]
        node[i] = node[parent]
        i = parent
    key[i] = k
    node[i] = v


cdef inline void _heap_pop(double* key, Py_ssize_t* node, Py_ssize_t* size) noexcept nogil:
    cdef Py_ssize_t n = size[0] - 1, i = 0, child
    cdef double k = key[n]
    cdef Py_ssize_t v = node[n]
    size[0] = n
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and key[child + 1] < key[child]:
            child += 1
        if key[child] >= k:
            break
        key[i] = key[child]
        node[i] = node[child]
        i = child
    if n > 0:
        key[i] = k
        node[i] = v


cdef void _single_source(const double[:, ::1] w, const double[::1] hopf,
                         const Py_ssize_t* odi, const Py_ssize_t* odj, Py_ssize_t n_off,
                         Py_ssize_t n_rho, Py_ssize_t n_theta, Py_ssize_t src,
                         double* dist, double* hkey, Py_ssize_t* hnode) noexcept nogil:
    cdef Py_ssize_t n = n_rho * n_theta, size = 0, u, v, i, j, ti, tj, k
    cdef double du, nd
    for u in range(n):
        dist[u] = INFINITY
    dist[src] = 0.0
    _heap_push(hkey, hnode, &size, 0.0, src)
    while size > 0:
        du = hkey[0]
        u = hnode[0]
        _heap_pop(hkey, hnode, &size)
        if du > dist[u]:
            continue
        i = u // n_theta
        j = u - i * n_theta
        for k in range(n_off):
            ti = i + odi[k]
            tj = j + odj[k]
            if ti < 0 or ti >= n_rho or tj < 0 or tj >= n_theta:
                continue
            v = ti * n_theta + tj
            nd = du + w[i, k]
            if nd < dist[v]:
                dist[v] = nd
                _heap_push(hkey, hnode, &size, nd, v)
        tj = n_theta - 1 - j
        if tj != j:
            v = i * n_theta + tj
            nd = du + hopf[i]
            if nd < dist[v]:
                dist[v] = nd
                _heap_push(hkey, hnode, &size, nd, v)


def grid_dijkstra(weights, hopf, offsets, Py_ssize_t n_theta, sources):
    """Single-source shortest paths on the ``(rho, theta)`` lattice.

    See :func:`krflab._kernels_py.grid_dijkstra`; the loop over sources runs
    without the GIL.
    """
    cdef const double[:, ::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef const double[::1] hp = np.ascontiguousarray(hopf, dtype=np.float64)
    cdef cnp.int64_t[::1] src = np.ascontiguousarray(sources, dtype=np.int64)
    cdef Py_ssize_t n_rho = w.shape[0], n_off = len(offsets), n = n_rho * n_theta
    cdef Py_ssize_t nsrc = src.shape[0], s, k
    if w.shape[1] != n_off:
        raise ValueError("weights do not match the offsets")
    for s in range(nsrc):
        if src[s] < 0 or src[s] >= n:
            raise ValueError("source index out of range")
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out = np.empty((nsrc, n_rho, n_theta))
    cdef double* dist = <double*> cnp.PyArray_DATA(out)
    # every relaxation pushes at most once, so the heap holds < edges + 1 entries
    cdef Py_ssize_t cap = n * (n_off + 1) + 1
    cdef double* hkey = <double*> malloc(cap * sizeof(double))
    cdef Py_ssize_t* hnode = <Py_ssize_t*> malloc(cap * sizeof(Py_ssize_t))
    cdef Py_ssize_t* odi = <Py_ssize_t*> malloc(n_off * sizeof(Py_ssize_t))
    cdef Py_ssize_t* odj = <Py_ssize_t*> malloc(n_off * sizeof(Py_ssize_t))
    if hkey == NULL or hnode == NULL or odi == NULL or odj == NULL:
        free(hkey); free(hnode); free(odi); free(odj)
        raise MemoryError()
    for k in range(n_off):
        odi[k] = offsets[k][0]
        odj[k] = offsets[k][1]
    try:
        with nogil:
            for s in range(nsrc):
                _single_source(w, hp, odi, odj, n_off, n_rho, n_theta, src[s],
                               dist + s * n, hkey, hnode)
    finally:
        free(hkey); free(hnode); free(odi); free(odj)
    return out
