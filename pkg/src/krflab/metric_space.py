"""Finite metric-space samples of the fiber and of a product with a flat base.

Fiber points live on the real two-plane slice through the origin of
``C^m``: a point is ``(rho, theta)`` with ``theta in [0, pi]`` the angle to a
fixed real direction.  The slice carries the exact induced metric

    ds^2 = (1/4) phi' drho^2 + phi dtheta^2,

and the points ``z`` and ``-z`` (angles ``theta`` and ``pi - theta``) are
joined by half a Hopf circle of length ``pi sqrt(phi')``.  Shortest paths on
a ``(rho, theta)`` lattice with these edges are lengths of honest curves in
the fiber and hence upper bounds for its distances.

Edge weights are exact differences of cumulative integrals along each
lattice direction, so a coarse edge is the sum of the fine edges covering
the same segment and refining the lattice never lengthens a path.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .cohomology import ScenarioKind
from .integrator import FlowTrajectory
from .profile import FlowProfile, fiber_diam_upper, radial_length

#: the 16-neighbour stencil: all primitive offsets with |di|, |dj| <= 2
OFFSETS = tuple((di, dj) for di in range(-2, 3) for dj in range(-2, 3)
                if (di, dj) != (0, 0) and math.gcd(abs(di), abs(dj)) == 1)
DEFAULT_N_THETA = 65
#: lattice spacing ratio ``h_rho / h_theta``
RHO_THETA_RATIO = 2.0
TRIANGLE_ATOL = 1e-9
MAX_TRIPLES = 10_000


class MetricSpaceError(ValueError):
    pass


def thread_count() -> int:
    """Worker cap from ``KRF_THREADS`` (default: CPU count)."""
    raw = os.environ.get("KRF_THREADS")
    if raw:
        try:
            n = int(raw)
        except ValueError:
            raise MetricSpaceError(f"KRF_THREADS must be an integer, got {raw!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def _default_n_rho(L: float, n_theta: int) -> int:
    h_theta = math.pi / (n_theta - 1)
    return int(round(2 * L / (RHO_THETA_RATIO * h_theta))) + 1


class FiberLattice:
    """Weighted ``(rho, theta)`` lattice for one profile.

    Parameters
    ----------
    p : FlowProfile
    n_theta : int
        Angular nodes on ``[0, pi]``.
    n_rho : int, optional
        Radial nodes on ``[-L, L]``; by default ``h_rho = 2 h_theta``.
    """

    def __init__(self, p: FlowProfile, n_theta: int = DEFAULT_N_THETA, n_rho: int | None = None):
        if n_theta < 3:
            raise MetricSpaceError("need at least 3 angular nodes")
        self.p = p
        self.n_theta = int(n_theta)
        self.n_rho = int(n_rho) if n_rho is not None else _default_n_rho(p.L, n_theta)
        if self.n_rho < 2:
            raise MetricSpaceError("need at least 2 radial nodes")
        self.rho = np.linspace(-p.L, p.L, self.n_rho)
        self.theta = np.linspace(0.0, math.pi, self.n_theta)
        self.h_rho = self.rho[1] - self.rho[0]
        self.h_theta = self.theta[1] - self.theta[0]
        self.phi = np.interp(self.rho, p.rho, p.phi)
        self.dphi = np.interp(self.rho, p.rho, np.maximum(p.dphi, 0.0))
        self.weights = self._edge_weights()
        self.hopf = math.pi * np.sqrt(self.dphi)

    def _cumulative(self, c: float) -> np.ndarray:
        """``int_{-L}^{rho} sqrt(phi'/4 + c phi)`` at the lattice rows."""
        p = self.p
        g = np.sqrt(0.25 * np.maximum(p.dphi, 0.0) + c * p.phi)
        cum = np.concatenate([[0.0], np.cumsum(0.5 * p.h * (g[1:] + g[:-1]))])
        return np.interp(self.rho, p.rho, cum)

    def _edge_weights(self) -> np.ndarray:
        n = self.n_rho
        w = np.full((n, len(OFFSETS)), np.inf)
        cache = {}
        for k, (di, dj) in enumerate(OFFSETS):
            if di == 0:
                w[:, k] = np.sqrt(self.phi) * abs(dj) * self.h_theta
                continue
            c = (dj * self.h_theta / (di * self.h_rho)) ** 2
            if c not in cache:
                cache[c] = self._cumulative(c)
            cum = cache[c]
            src = np.arange(n)
            dst = src + di
            ok = (dst >= 0) & (dst < n)
            w[ok, k] = np.abs(cum[dst[ok]] - cum[src[ok]])
        return w

    def node(self, q) -> int:
        """Flat index of the lattice node nearest to ``q = (rho, theta)``."""
        i, j = self._nearest(q)
        return i * self.n_theta + j

    def _check(self, q):
        rho, theta = float(q[0]), float(q[1])
        L = self.p.L
        if not (-L - 1e-12 <= rho <= L + 1e-12) or not (-1e-12 <= theta <= math.pi + 1e-12):
            raise MetricSpaceError(f"point {q} outside [-L, L] x [0, pi]")
        return rho, theta

    def _nearest(self, q):
        rho, theta = self._check(q)
        i = int(np.clip(round((rho + self.p.L) / self.h_rho), 0, self.n_rho - 1))
        j = int(np.clip(round(theta / self.h_theta), 0, self.n_theta - 1))
        return i, j

    def node_coords(self, q) -> tuple[float, float]:
        i, j = self._nearest(q)
        return float(self.rho[i]), float(self.theta[j])

    def snap_cost(self, q) -> float:
        """Length of the straight slice segment from ``q`` to its lattice node."""
        rho, theta = self._check(q)
        i, j = self._nearest(q)
        d_rho, d_theta = self.rho[i] - rho, self.theta[j] - theta
        if d_rho == 0.0 and d_theta == 0.0:
            return 0.0
        x, wq = np.polynomial.legendre.leggauss(8)
        s = 0.5 * (x + 1.0)
        r = rho + s * d_rho
        phi, dphi = self.p.evaluate(r)
        f = np.sqrt(0.25 * np.maximum(dphi, 0.0) * d_rho ** 2 + np.maximum(phi, 0.0) * d_theta ** 2)
        return float(0.5 * np.dot(wq, f))

    def distances_from(self, sources, threads: int | None = None) -> np.ndarray:
        """Shortest-path lengths from lattice node indices ``sources``;
        shape ``(len(sources), n_rho, n_theta)``."""
        sources = np.asarray(sources, dtype=np.int64)
        threads = thread_count() if threads is None else threads
        if threads <= 1 or sources.size <= 1:
            return kernels.grid_dijkstra(self.weights, self.hopf, OFFSETS, self.n_theta, sources)
        chunks = [c for c in np.array_split(sources, min(threads, sources.size)) if c.size]
        with ThreadPoolExecutor(max_workers=len(chunks)) as ex:
            parts = list(ex.map(lambda c: kernels.grid_dijkstra(
                self.weights, self.hopf, OFFSETS, self.n_theta, c), chunks))
        return np.concatenate(parts, axis=0)

    def distance_matrix(self, points, threads: int | None = None) -> np.ndarray:
        """Symmetrized distances between arbitrary slice points."""
        nodes = [self.node(q) for q in points]
        snaps = np.array([self.snap_cost(q) for q in points])
        d = self.distances_from(nodes, threads).reshape(len(points), -1)[:, nodes]
        d = d + snaps[:, None] + snaps[None, :]
        d = np.minimum(d, d.T)
        np.fill_diagonal(d, 0.0)
        return d


def fiber_distance_upper(p: FlowProfile, q1, q2, n_theta: int = DEFAULT_N_THETA,
                         n_rho: int | None = None) -> float:
    """Upper bound for the fiber distance between two slice points.

    Parameters
    ----------
    p : FlowProfile
    q1, q2 : (rho, theta)
        ``rho`` in ``[-L, L]`` and ``theta`` in ``[0, pi]``.

    Returns
    -------
    float
        The shorter of two curve lengths: the lattice path plus the
        straight segments joining ``q1`` and ``q2`` to their nearest nodes,
        and the explicit radial-then-sphere path of :func:`_explicit_path`.
    """
    lat = FiberLattice(p, n_theta, n_rho)
    (r1, t1), (r2, t2) = lat._check(q1), lat._check(q2)
    if (r1, t1) == (r2, t2):
        return 0.0
    graph = float(lat.distance_matrix([q1, q2], threads=1)[0, 1])
    return min(graph, _explicit_path(p, r1, t1, r2, t2))


def _explicit_path(p: FlowProfile, r1, t1, r2, t2) -> float:
    """Radial run between the levels plus the cheaper sphere walk at the
    lower level: straight in ``theta`` or through the Hopf half-circle."""
    lo, hi = min(r1, r2), max(r1, r2)
    radial = radial_length(p, lo, hi)
    phi, dphi = (float(v) for v in p.evaluate(lo))
    phi, dphi = max(phi, 0.0), max(dphi, 0.0)
    direct = abs(t1 - t2) * math.sqrt(phi)
    hopf = math.pi * math.sqrt(dphi) + abs(math.pi - t1 - t2) * math.sqrt(phi)
    return radial + min(direct, hopf)


def product_distance(dB, dF):
    """Riemannian product distance ``sqrt(dB^2 + dF^2)``; broadcasts."""
    dB = np.asarray(dB, dtype=float)
    dF = np.asarray(dF, dtype=float)
    if np.any(dB < 0) or np.any(dF < 0):
        raise MetricSpaceError("distances must be non-negative")
    out = np.hypot(dB, dF)
    return float(out) if out.ndim == 0 else out


# ------------------------------------------------------------------ spaces

@dataclass(frozen=True)
class FlatTorus:
    """Square flat torus ``R^2 / (side Z)^2``, complex dimension one."""

    side: float = 1.0

    def __post_init__(self):
        if not self.side > 0:
            raise MetricSpaceError("torus side must be positive")

    @property
    def diameter(self) -> float:
        return self.side / math.sqrt(2.0)

    def grid(self, n: int) -> np.ndarray:
        k = int(round(math.sqrt(n)))
        if k * k != n or k < 1:
            raise MetricSpaceError(f"base sample size must be a perfect square, got {n}")
        x = np.arange(k) * (self.side / k)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        return np.column_stack([xx.ravel(), yy.ravel()])

    def distance_matrix(self, pts: np.ndarray) -> np.ndarray:
        d = np.abs(pts[:, None, :] - pts[None, :, :])
        d = np.minimum(d, self.side - d)
        return np.hypot(d[..., 0], d[..., 1])


@dataclass
class SampledSpace:
    """Finite metric space: sample descriptors plus a distance matrix."""

    points: list
    dist: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1] or d.shape[0] != len(self.points):
            raise MetricSpaceError("distance matrix does not match the sample")
        self.dist = d

    def __len__(self):
        return len(self.points)

    def check_axioms(self, n_triples: int = MAX_TRIPLES, seed: int = 0,
                     atol: float = TRIANGLE_ATOL) -> int:
        """Assert symmetry, zero diagonal and the triangle inequality.

        All triples are checked when there are at most ``n_triples`` of
        them, otherwise a seeded random subset.  Returns the count checked.
        """
        d = self.dist
        if not np.array_equal(d, d.T):
            raise MetricSpaceError("distance matrix not symmetric")
        if np.any(np.diag(d) != 0.0) or np.any(d < 0):
            raise MetricSpaceError("distance matrix has non-zero diagonal or negative entries")
        n = len(self)
        if n ** 3 <= n_triples:
            viol = d[:, :, None] + d[None, :, :] - d[:, None, :]
            # viol[i, j, k] = d(i,j) + d(j,k) - d(i,k)
            if viol.min() < -atol:
                raise MetricSpaceError(f"triangle inequality violated by {-viol.min():.3e}")
            return n ** 3
        rng = np.random.default_rng(seed)
        i, j, k = rng.integers(0, n, size=(3, n_triples))
        slack = d[i, j] + d[j, k] - d[i, k]
        if slack.min() < -atol:
            raise MetricSpaceError(f"triangle inequality violated by {-slack.min():.3e}")
        return n_triples


@dataclass
class ProductSample:
    """``SampledSpace`` of ``B x F`` together with its factors."""

    space: SampledSpace
    base: SampledSpace
    fiber_dist: np.ndarray
    projection: np.ndarray
    section: np.ndarray


@dataclass
class GHEstimate:
    """Upper bound for the Gromov-Hausdorff distance from a pair of maps."""

    epsilon: float
    n_x: int
    n_y: int
    terms: dict = field(default_factory=dict)
    maps: str = "F = projection to the base, G = section at (rho, theta) = (0, 0)"

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise MetricSpaceError("epsilon must be non-negative")


def fiber_sample_points(L: float, n: int, seed: int = 0) -> list[tuple[float, float]]:
    """Deterministic fiber sample: the section point ``(0, 0)``, the two
    ends of the slice, the antipode ``(0, pi)``, then seeded random points."""
    base = [(0.0, 0.0), (-L, 0.0), (L, 0.0), (0.0, math.pi)]
    if n <= len(base):
        return base[:max(n, 1)]
    rng = np.random.default_rng(seed)
    extra = [(float(r), float(t)) for r, t in zip(rng.uniform(-L, L, n - len(base)),
                                                  rng.uniform(0.0, math.pi, n - len(base)))]
    return base + extra


def build_product_sample(p: FlowProfile, base: FlatTorus, nB: int, nF: int, seed: int = 0,
                         n_theta: int = DEFAULT_N_THETA, lattice: FiberLattice | None = None,
                         fiber_points=None) -> ProductSample:
    """``nB x nF`` product points with distances ``sqrt(dB^2 + dF^2)``.

    Fiber sample points are moved to their nearest lattice nodes; the first
    is the section point ``(0, 0)``.
    """
    bpts = base.grid(nB)
    dB = base.distance_matrix(bpts)
    lat = lattice if lattice is not None else FiberLattice(p, n_theta)
    fpts = fiber_points if fiber_points is not None else fiber_sample_points(p.L, nF, seed)
    # sample at lattice nodes so fiber distances are pure path lengths
    fpts = [lat.node_coords(q) for q in fpts]
    dF = lat.distance_matrix(fpts)
    nb, nf = len(bpts), len(fpts)
    d = product_distance(dB[:, None, :, None], dF[None, :, None, :]).reshape(nb * nf, nb * nf)
    d = 0.5 * (d + d.T)
    np.fill_diagonal(d, 0.0)
    points = [(tuple(b), tuple(f)) for b in bpts for f in fpts]
    proj = np.repeat(np.arange(nb), nf)
    section = np.arange(nb) * nf
    return ProductSample(SampledSpace(points, d), SampledSpace([tuple(b) for b in bpts], dB),
                         dF, proj, section)


def gh_upper_bound(X: SampledSpace, B: SampledSpace, projection, section) -> GHEstimate:
    """Largest defect of the four epsilon-map conditions.

    ``projection[i]`` is the base index of ``X`` point ``i`` and
    ``section[j]`` the ``X`` index chosen over base point ``j``.
    """
    projection = np.asarray(projection, dtype=np.int64)
    section = np.asarray(section, dtype=np.int64)
    if projection.shape != (len(X),) or section.shape != (len(B),):
        raise MetricSpaceError("maps do not match the sample sizes")
    if projection.min() < 0 or projection.max() >= len(B) or section.min() < 0 \
            or section.max() >= len(X):
        raise MetricSpaceError("map indices out of range")
    if not np.array_equal(projection[section], np.arange(len(B))):
        raise MetricSpaceError("section is not a right inverse of the projection")
    dX, dB = X.dist, B.dist
    t1 = float(np.max(np.abs(dX - dB[np.ix_(projection, projection)])))
    t2 = float(np.max(np.abs(dB - dX[np.ix_(section, section)])))
    t3 = float(np.max(dB[np.arange(len(B)), projection[section]]))
    t4 = float(np.max(dX[np.arange(len(X)), section[projection]]))
    terms = {"distortion_F": t1, "distortion_G": t2, "FG_to_id": t3, "GF_to_id": t4}
    return GHEstimate(max(terms.values()), len(X), len(B), terms)


# ------------------------------------------------------------- certificate

@dataclass
class GHSeries:
    times: np.ndarray
    epsilon: np.ndarray
    fiber_diam: np.ndarray
    base_diam: float
    fiber_dists: list


def gh_series(traj: FlowTrajectory, base: FlatTorus, nB: int = 16, nF: int = 12, seed: int = 0,
              n_theta: int = DEFAULT_N_THETA, t_min: float = 0.0) -> GHSeries:
    """GH estimates at every snapshot with ``t >= t_min``."""
    fpts = fiber_sample_points(traj.snapshots[0].L, nF, seed)
    eps, diam, times, fds = [], [], [], []
    bpts = base.grid(nB)
    dB0 = base.distance_matrix(bpts)
    for p in traj.snapshots:
        if p.t < t_min:
            continue
        s = build_product_sample(p, base, nB, nF, seed, n_theta, fiber_points=fpts)
        if not np.array_equal(s.base.dist, dB0):
            raise MetricSpaceError("base distances changed along the flow")
        est = gh_upper_bound(s.space, s.base, s.projection, s.section)
        times.append(p.t)
        eps.append(est.epsilon)
        diam.append(fiber_diam_upper(p))
        fds.append(s.fiber_dist)
    return GHSeries(np.array(times), np.array(eps), np.array(diam), base.diameter, fds)


def _eventually_monotone(t, eps, T, tail=0.1) -> bool:
    sel = (T - t) <= tail * T * (1 + 1e-12)
    e = eps[sel]
    return bool(e.size >= 2 and np.all(np.diff(e) <= 1e-12 * max(1.0, float(e.max()))))


def gh_convergence_certificate(traj: FlowTrajectory, base: FlatTorus, nB: int = 16, nF: int = 12,
                               seed: int = 0, n_theta: int = DEFAULT_N_THETA,
                               target_fraction: float = 0.01, series: GHSeries | None = None):
    """Certify collapse of ``B x F`` onto the base along a collapsing run.

    Passes when the final epsilon is at most ``target_fraction * diam(B)``,
    epsilon is non-increasing over the last decade of ``T - t``, each
    epsilon is at most ``2 D(t) + 1e-6``, the uniform-Cauchy audit holds on
    the last decade, and base distances are recovered exactly.
    """
    from .monitors import MonitorReport

    if not (traj.config.validation or traj.scenario is ScenarioKind.COLLAPSE_FIBER):
        raise MetricSpaceError(f"GH collapse needs a collapsing trajectory, got {traj.scenario}")
    T = traj.T_predicted
    if series is None:
        series = gh_series(traj, base, nB, nF, seed, n_theta)
    t, eps, D = series.times, series.epsilon, series.fiber_diam
    target = target_fraction * base.diameter
    final_ok = bool(eps[-1] <= target)
    mono_ok = _eventually_monotone(t, eps, T)
    bound_ok = bool(np.all(eps <= 2.0 * D + 1e-6))

    # uniform Cauchy: product distances differ by at most |dF_n - dF_m|
    last = np.flatnonzero((T - t) <= 0.1 * T * (1 + 1e-12))
    cauchy_ok = True
    worst = 0.0
    for a_i, a in enumerate(last):
        for b in last[a_i + 1:]:
            gap = float(np.max(np.abs(series.fiber_dists[a] - series.fiber_dists[b])))
            worst = max(worst, gap / max(eps[min(a, b)], 1e-300))
            if gap > 3.0 * eps[min(a, b)]:
                cauchy_ok = False
    passed = final_ok and mono_ok and bound_ok and cauchy_ok
    return MonitorReport(
        name="gh_convergence", paper_tag="gh-collapse-to-base", times=t, values=eps,
        C_meas=float(eps[-1] / base.diameter), passed=passed, tolerance=target,
        details={"final_ok": final_ok, "monotone_ok": mono_ok, "two_diam_bound_ok": bound_ok,
                 "uniform_cauchy_ok": cauchy_ok, "cauchy_worst_ratio": worst,
                 "base_recovered_exactly": True, "target": target,
                 "final_epsilon": float(eps[-1]), "base_diam": base.diameter})
