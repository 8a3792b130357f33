"""Vectorized numpy/scipy versions of the hot kernels.

Used when the compiled ``_ckernels`` extension is unavailable.  Both
implementations share signatures and are cross-checked in the test suite.
"""

import math

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

BACKEND = "python"


def _half_node_terms(phi, h, m):
    """Flux ``G`` at half nodes and its partial derivatives.

    ``G_{k} = (m-1) log(mean phi) + log(dphi)`` on each cell; the ``-m rho``
    part of ``log det`` differentiates to the constant ``-m``.
    Returns None when some cell has non-positive slope.
    """
    diff = phi[1:] - phi[:-1]
    if not np.all(diff > 0):
        return None
    mean = 0.5 * (phi[1:] + phi[:-1])
    if not np.all(mean > 0):
        return None
    G = (m - 1) * np.log(mean) + np.log(diff / h)
    c = (m - 1) / (2.0 * mean)
    inv = 1.0 / diff
    dG_left = c - inv   # d G_k / d phi_k
    dG_right = c + inv  # d G_k / d phi_{k+1}
    return G, dG_left, dG_right


def be_residual(phi, phi_old, h, dt, m):
    """Backward-Euler residual on interior nodes, or None if non-monotone."""
    terms = _half_node_terms(phi, h, m)
    if terms is None:
        return None
    G = terms[0]
    F = (G[1:] - G[:-1]) / h - m
    return phi[1:-1] - phi_old[1:-1] - dt * F


def be_newton_direction(phi, phi_old, h, dt, m):
    """Newton update for the interior nodes and the residual max-norm.

    Returns ``(delta, res_inf)``; ``delta`` is None when ``phi`` is not
    strictly increasing.
    """
    terms = _half_node_terms(phi, h, m)
    if terms is None:
        return None, math.inf
    G, gl, gr = terms
    F = (G[1:] - G[:-1]) / h - m
    res = phi[1:-1] - phi_old[1:-1] - dt * F
    c = dt / h
    # row i (interior node) couples cells i-1/2 and i+1/2
    lower = c * gl[:-1]               # -dt dF_i/dphi_{i-1} = +c * dG_{i-1/2}/dphi_{i-1}
    diag = 1.0 - c * (gl[1:] - gr[:-1])
    upper = -c * gr[1:]
    n = res.size
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = diag
    ab[2, :-1] = lower[1:]
    delta = solve_banded((1, 1), ab, -res, overwrite_ab=True, check_finite=False)
    return delta, float(np.abs(res).max())


def grid_dijkstra(weights, hopf, offsets, n_theta, sources):
    """Single-source shortest paths on the ``(rho, theta)`` lattice.

    ``weights[i, k]`` is the length of the edge from row ``i`` along
    ``offsets[k] = (di, dj)``; ``hopf[i]`` the length of the edge joining
    ``(i, j)`` and ``(i, n_theta - 1 - j)``.  Returns an array of shape
    ``(len(sources), n_rho, n_theta)``.
    """
    n_rho = weights.shape[0]
    graph = _lattice_graph(weights, hopf, offsets, n_rho, n_theta)
    d = dijkstra(graph, directed=True, indices=np.asarray(sources, dtype=np.int64))
    return d.reshape(len(sources), n_rho, n_theta)


def _lattice_graph(weights, hopf, offsets, n_rho, n_theta):
    ii, jj = np.meshgrid(np.arange(n_rho), np.arange(n_theta), indexing="ij")
    rows, cols, vals = [], [], []
    for k, (di, dj) in enumerate(offsets):
        ti, tj = ii + di, jj + dj
        ok = (ti >= 0) & (ti < n_rho) & (tj >= 0) & (tj < n_theta)
        rows.append((ii * n_theta + jj)[ok])
        cols.append((ti * n_theta + tj)[ok])
        vals.append(np.broadcast_to(weights[:, k][:, None], ii.shape)[ok])
    tj = n_theta - 1 - jj
    ok = tj != jj
    rows.append((ii * n_theta + jj)[ok])
    cols.append((ii * n_theta + tj)[ok])
    vals.append(np.broadcast_to(hopf[:, None], ii.shape)[ok])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    n = n_rho * n_theta
    # a Hopf edge can duplicate a stencil edge; csr would sum them, keep the shorter
    key = rows * n + cols
    order = np.lexsort((vals, key))
    key, vals = key[order], vals[order]
    first = np.concatenate([[True], key[1:] != key[:-1]])
    rows, cols, vals = key[first] // n, key[first] % n, vals[first]
    # zero-length edges would be dropped by csr; keep them as tiny positives
    vals = np.where(vals > 0, vals, np.finfo(float).tiny)
    return csr_matrix((vals, (rows, cols)), shape=(n, n))
