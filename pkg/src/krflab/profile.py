"""U(m)-invariant Kahler metrics on Bl_p P^m through their momentum profile.

In the chart ``C^m`` with ``rho = log |z|^2`` a U(m)-invariant metric is
``omega = i ddbar u(rho)`` and depends only on ``phi = u'``::

    g_{i jbar} = e^{-rho} phi delta_ij + e^{-2 rho} (phi' - phi) zbar_i z_j

so the sphere directions carry eigenvalue ``e^{-rho} phi`` (multiplicity
m-1) and the complex radial line carries ``e^{-rho} phi'``.  ``phi`` tends
to the exceptional size ``a`` as ``rho -> -inf`` and to the hyperplane size
``b`` as ``rho -> +inf``.  Lengths use ``ds^2 = g_{i jbar} dz^i dzbar^j``,
so the flat profile ``phi = e^rho`` is the Euclidean metric.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import expit

from .cohomology import KahlerClass, NotKahlerError

DEFAULT_L = 15.0
DEFAULT_N = 4096
MIN_N = 64
MIN_L = 8.0


class ProfileError(ValueError):
    """Invalid grid or profile configuration."""


class DegenerateProfileError(ArithmeticError):
    """The profile no longer defines a positive metric where it is evaluated."""


class FieldKind(enum.Enum):
    COORD = "Coord"
    LINEAR = "Linear"
    RADIAL_SCALED = "RadialScaled"
    RADIAL = "Radial"


@dataclass(frozen=True)
class VectorFieldSpec:
    """A holomorphic vector field in the affine chart around the blown-up point.

    ``Coord(i) = d/dw^i``, ``Linear(i, j) = w^j d/dw^i``,
    ``RadialScaled(i) = w^i sum_l w^l d/dw^l`` and
    ``Radial = sum_l w^l d/dw^l``.  Indices are 1-based.
    """

    kind: FieldKind
    i: int = 0
    j: int = 0

    @classmethod
    def coord(cls, i):
        return cls(FieldKind.COORD, i)

    @classmethod
    def linear(cls, i, j):
        return cls(FieldKind.LINEAR, i, j)

    @classmethod
    def radial_scaled(cls, i):
        return cls(FieldKind.RADIAL_SCALED, i)

    @classmethod
    def radial(cls):
        return cls(FieldKind.RADIAL)

    @property
    def lifts_to_blowup(self) -> bool:
        # fields vanishing at the blown-up point extend across E
        return self.kind in (FieldKind.LINEAR, FieldKind.RADIAL_SCALED)

    def components(self, z: np.ndarray) -> np.ndarray:
        """Coefficients of the field at the point ``z`` of ``C^m``."""
        z = np.asarray(z, dtype=complex)
        v = np.zeros_like(z)
        if self.kind is FieldKind.COORD:
            v[self.i - 1] = 1.0
        elif self.kind is FieldKind.LINEAR:
            v[self.i - 1] = z[self.j - 1]
        elif self.kind is FieldKind.RADIAL_SCALED:
            v = z[self.i - 1] * z
        else:
            v = z.copy()
        return v

    @property
    def label(self) -> str:
        if self.kind is FieldKind.COORD:
            return f"Coord({self.i})"
        if self.kind is FieldKind.LINEAR:
            return f"Linear({self.i},{self.j})"
        if self.kind is FieldKind.RADIAL_SCALED:
            return f"RadialScaled({self.i})"
        return "Radial"


def vector_field_catalog(m: int, lifting_only: bool = False) -> list[VectorFieldSpec]:
    """Spanning set of holomorphic fields on ``P^m`` written in the chart ``U_0``.

    ``m`` coordinate fields, ``m^2`` linear fields and ``m`` radial-scaled
    fields, ``(m+1)^2 - 1`` in total.  With ``lifting_only`` the coordinate
    fields, which do not vanish at the blown-up point, are dropped.
    """
    fields = [] if lifting_only else [VectorFieldSpec.coord(i) for i in range(1, m + 1)]
    fields += [VectorFieldSpec.linear(i, j) for i in range(1, m + 1) for j in range(1, m + 1)]
    fields += [VectorFieldSpec.radial_scaled(i) for i in range(1, m + 1)]
    return fields


def sigmoid(rho):
    """Logistic function, accurate in both tails (``expit``)."""
    return expit(np.asarray(rho, dtype=float))


def make_grid(L: float, N: int) -> np.ndarray:
    return np.linspace(-L, L, N)


@dataclass(frozen=True, eq=False)
class FlowProfile:
    """Momentum profile ``phi`` on the uniform grid ``[-L, L]`` at flow time ``t``.

    ``a`` and ``b`` are the current exceptional and hyperplane coefficients of
    the class.  ``validation`` marks a pure ``P^m`` profile (``a = 0``, no
    blow-up), for which the exceptional invariants are skipped.
    """

    m: int
    L: float
    phi: np.ndarray
    t: float = 0.0
    a: float = 0.0
    b: float = 1.0
    validation: bool = False
    rho: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 1 or phi.size < 3:
            raise ProfileError("phi must be a 1-d array with at least 3 nodes")
        phi.flags.writeable = False
        rho = make_grid(self.L, phi.size)
        rho.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "m", int(self.m))
        for name in ("L", "t", "a", "b"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def N(self) -> int:
        return self.phi.size

    @property
    def h(self) -> float:
        return 2.0 * self.L / (self.N - 1)

    @functools.cached_property
    def dphi(self) -> np.ndarray:
        """``phi'`` on every node, second order (one-sided at the ends)."""
        d = np.gradient(self.phi, self.h, edge_order=2)
        d.flags.writeable = False
        return d

    @functools.cached_property
    def radial_cumulative(self) -> np.ndarray:
        """Composite-trapezoid ``(1/2) int_{-L}^{rho_i} sqrt(phi')``."""
        f = 0.5 * np.sqrt(np.maximum(self.dphi, 0.0))
        out = np.zeros_like(f)
        np.cumsum(0.5 * self.h * (f[1:] + f[:-1]), out=out[1:])
        out.flags.writeable = False
        return out

    @functools.cached_property
    def spline(self) -> CubicSpline:
        return CubicSpline(self.rho, self.phi)

    def replace(self, **changes) -> "FlowProfile":
        kw = dict(m=self.m, L=self.L, phi=self.phi, t=self.t, a=self.a, b=self.b,
                  validation=self.validation)
        kw.update(changes)
        return FlowProfile(**kw)

    def scaled(self, s: float) -> "FlowProfile":
        return self.replace(phi=s * self.phi, a=s * self.a, b=s * self.b)

    def evaluate(self, rho) -> tuple[np.ndarray, np.ndarray]:
        """``(phi, phi')`` at arbitrary ``rho`` inside the grid."""
        rho = np.asarray(rho, dtype=float)
        if np.any(rho < -self.L - 1e-12) or np.any(rho > self.L + 1e-12):
            raise ProfileError(f"rho outside [-{self.L}, {self.L}]")
        sp = self.spline
        return sp(rho), sp(rho, 1)

    def is_monotone(self) -> bool:
        return bool(np.all(np.diff(self.phi) > 0))

    def check_invariants(self, b0: float | None = None) -> None:
        """Raise if monotonicity, range or (for L >= 12) boundary pinning fail."""
        if not self.is_monotone():
            bad = int(np.argmin(np.diff(self.phi)))
            raise DegenerateProfileError(
                f"profile not strictly increasing near rho={self.rho[bad]:.4f} at t={self.t}")
        b0 = self.b if b0 is None else b0
        tol = 1e-9 * b0
        if self.phi.min() < self.a - tol or self.phi.max() > self.b + tol:
            raise DegenerateProfileError(f"profile leaves [a, b] at t={self.t}")
        if self.L >= 12:
            eps = 5e-6 * (self.b - self.a)
            if abs(self.phi[0] - self.a) > eps or abs(self.phi[-1] - self.b) > eps:
                raise DegenerateProfileError(f"boundary values not pinned at t={self.t}")


def init_profile(c0: KahlerClass, L: float = DEFAULT_L, N: int = DEFAULT_N) -> FlowProfile:
    """Reference metric ``phi_0 = e + (h - e) sigmoid(rho)`` in the class ``c0``."""
    if not c0.is_kahler():
        raise NotKahlerError(f"class not Kähler: h={c0.h}, e={c0.e}")
    if N < MIN_N:
        raise ProfileError(f"grid too coarse: N={N} < {MIN_N}")
    if L < MIN_L:
        raise ProfileError(f"truncation too short: L={L} < {MIN_L}")
    rho = make_grid(L, N)
    phi = c0.e + (c0.h - c0.e) * sigmoid(rho)
    return FlowProfile(c0.m, L, phi, t=0.0, a=c0.e, b=c0.h)


def profile_from_function(m: int, fn, L: float = DEFAULT_L, N: int = DEFAULT_N, **kw) -> FlowProfile:
    """Sample an arbitrary callable ``phi(rho)``; used for flat and model metrics."""
    rho = make_grid(L, N)
    return FlowProfile(m, L, fn(rho), **kw)


def flat_profile(m: int, L: float = DEFAULT_L, N: int = DEFAULT_N) -> FlowProfile:
    """``phi = e^rho``: the Euclidean metric on ``C^m``."""
    return profile_from_function(m, np.exp, L, N, a=0.0, b=math.exp(L))


def model_profile(m: int, c: float, L: float = DEFAULT_L, N: int = DEFAULT_N) -> FlowProfile:
    """``phi = c + e^rho``: Euclidean metric plus ``c`` times the pulled-back
    Fubini-Study metric of the exceptional directions."""
    return profile_from_function(m, lambda r: c + np.exp(r), L, N, a=c, b=c + math.exp(L))


def metric_eigenvalues(p: FlowProfile, rho: float) -> tuple[float, float]:
    """``(e^{-rho} phi, e^{-rho} phi')``: sphere and radial eigenvalues."""
    phi, dphi = p.evaluate(rho)
    if dphi <= 0 or phi <= 0:
        raise DegenerateProfileError(f"degenerate metric at rho={rho}: phi={phi}, phi'={dphi}")
    w = math.exp(-rho)
    return float(w * phi), float(w * dphi)


def hermitian_metric(p: FlowProfile, z: np.ndarray) -> np.ndarray:
    """Full ``m x m`` matrix ``g_{i jbar}`` at the point ``z`` of ``C^m``."""
    z = np.asarray(z, dtype=complex)
    rho = math.log(float(np.vdot(z, z).real))
    phi, dphi = p.evaluate(rho)
    A = math.exp(-rho) * float(phi)
    B = math.exp(-2 * rho) * float(dphi - phi)
    return A * np.eye(z.size) + B * np.outer(z.conj(), z)


def norm_sq(p: FlowProfile, z: np.ndarray, V: VectorFieldSpec) -> float:
    """``|V|^2_g`` at ``z`` by contracting the assembled matrix."""
    g = hermitian_metric(p, z)
    v = V.components(z)
    return float(np.einsum("i,ij,j->", v, g, v.conj()).real)


def vf_norm_sq_on_line(p: FlowProfile, rho: float, V: VectorFieldSpec) -> float:
    """``|V|^2`` on the complex line ``z^2 = ... = z^m = 0`` at ``rho = log|z^1|^2``."""
    phi, dphi = (float(x) for x in p.evaluate(rho))
    if dphi <= 0:
        raise DegenerateProfileError(f"phi' <= 0 at rho={rho}")
    kind = V.kind
    if kind is FieldKind.RADIAL:
        return dphi
    if kind is FieldKind.COORD:
        return math.exp(-rho) * (dphi if V.i == 1 else phi)
    if kind is FieldKind.LINEAR:
        if V.j != 1:
            return 0.0  # w^j vanishes on the line
        return dphi if V.i == 1 else phi
    # RadialScaled(i) = w^i * Radial
    return math.exp(rho) * dphi if V.i == 1 else 0.0


def angular_max(phi, dphi, V: VectorFieldSpec):
    """Maximum of ``|V|^2`` over the sphere ``|z|^2 = e^rho``, vectorized in rho.

    With ``x = |z^j|^2 / |z|^2`` the squared norm restricted to a sphere is
    ``phi x + (phi' - phi) x q`` where ``q`` is the share of ``|z|^2`` in
    the target direction; the maxima below solve that 1-d problem exactly.
    """
    phi = np.asarray(phi, dtype=float)
    dphi = np.asarray(dphi, dtype=float)
    if V.kind is FieldKind.RADIAL_SCALED:
        raise ValueError("use radial_scaled_angular_max, which needs rho")
    if V.kind is not FieldKind.LINEAR:
        raise ValueError(f"{V.label} is not a lifting field")
    if V.i != V.j:
        # f(x) = phi x + (phi'-phi) x (1-x) when phi' > phi, else x=1 gives phi
        interior = dphi > 2.0 * phi
        with np.errstate(divide="ignore", invalid="ignore"):
            vertex = dphi ** 2 / (4.0 * (dphi - phi))
        return np.where(interior, vertex, phi)
    # f(x) = phi x + (phi'-phi) x^2
    interior = dphi < 0.5 * phi
    with np.errstate(divide="ignore", invalid="ignore"):
        vertex = phi ** 2 / (4.0 * (phi - dphi))
    return np.where(interior, vertex, np.maximum(dphi, 0.0))


def vf_sup_profile(p: FlowProfile, V: VectorFieldSpec) -> np.ndarray:
    """Per-node sphere maximum of ``|V|^2``; the global sup is its max."""
    if not V.lifts_to_blowup:
        raise ValueError(f"{V.label} does not extend across the exceptional divisor")
    if V.kind is FieldKind.RADIAL_SCALED:
        return np.exp(p.rho) * np.maximum(p.dphi, 0.0)
    return angular_max(p.phi, p.dphi, V)


def vf_sup(p: FlowProfile, V: VectorFieldSpec) -> float:
    """``sup_X |V|^2_omega`` for a field that lifts to the blow-up."""
    return float(vf_sup_profile(p, V).max())


def _sqrt_dphi(p: FlowProfile) -> np.ndarray:
    return np.sqrt(np.maximum(p.dphi, 0.0))


def _cumulative_radial(p: FlowProfile) -> np.ndarray:
    return p.radial_cumulative


def radial_length(p: FlowProfile, rho1: float, rho2: float) -> float:
    """Length of the radial path between two level sets, ``(1/2) int sqrt(phi') drho``."""
    if rho1 > rho2:
        raise ValueError("need rho1 <= rho2")
    if rho1 < -p.L - 1e-12 or rho2 > p.L + 1e-12:
        raise ProfileError("radial_length endpoints outside the grid")
    cum = _cumulative_radial(p)
    return float(np.interp(rho2, p.rho, cum) - np.interp(rho1, p.rho, cum))


def radial_length_profile(p: FlowProfile) -> np.ndarray:
    """``radial_length(-L, rho_i)`` for every node."""
    return _cumulative_radial(p).copy()


def sphere_diam_upper(p: FlowProfile, rho) -> np.ndarray | float:
    """Upper bound for the diameter of the level set ``rho``:
    ``(pi/2)(sqrt(phi) + sqrt(phi'))``."""
    phi, dphi = p.evaluate(rho)
    val = 0.5 * math.pi * (np.sqrt(np.maximum(phi, 0.0)) + np.sqrt(np.maximum(dphi, 0.0)))
    return float(val) if np.ndim(val) == 0 else val


def sphere_diam_nodes(p: FlowProfile) -> np.ndarray:
    return 0.5 * math.pi * (np.sqrt(np.maximum(p.phi, 0.0)) + _sqrt_dphi(p))


def fiber_diam_upper(p: FlowProfile) -> float:
    """Two full radial runs plus the widest sphere walk."""
    return float(2.0 * _cumulative_radial(p)[-1] + sphere_diam_nodes(p).max())


def volume_density(p: FlowProfile) -> np.ndarray:
    """``phi^{m-1} phi'``, proportional to ``det g`` up to ``e^{-m rho}``."""
    return p.phi ** (p.m - 1) * p.dphi


def volume_ratio(p: FlowProfile, p0: FlowProfile, rho=None):
    """``omega(t)^m / omega_0^m``; on every node when ``rho`` is None."""
    if p.N != p0.N or p.L != p0.L:
        raise ProfileError("profiles live on different grids")
    if rho is None:
        den = volume_density(p0)
        if np.any(den <= 0):
            raise DegenerateProfileError("reference volume density vanishes")
        return volume_density(p) / den
    phi, dphi = p.evaluate(rho)
    phi0, dphi0 = p0.evaluate(rho)
    den = phi0 ** (p.m - 1) * dphi0
    if np.any(den <= 0):
        raise DegenerateProfileError("reference volume density vanishes")
    out = phi ** (p.m - 1) * dphi / den
    return float(out) if np.ndim(out) == 0 else out


def laplacian_radial(p: FlowProfile, f: np.ndarray) -> np.ndarray:
    """``Delta f = f''/phi' + (m-1) f'/phi`` for a radial function, interior nodes.

    Central differences for ``f'``, ``f''`` and ``phi'``; the result has
    length ``N - 2``.
    """
    f = np.asarray(f, dtype=float)
    if f.shape != p.phi.shape:
        raise ProfileError("f must be sampled on the profile grid")
    h = p.h
    df = (f[2:] - f[:-2]) / (2 * h)
    d2f = (f[2:] - 2 * f[1:-1] + f[:-2]) / h ** 2
    dphi = (p.phi[2:] - p.phi[:-2]) / (2 * h)
    return d2f / dphi + (p.m - 1) * df / p.phi[1:-1]


def trace_radial(p: FlowProfile, dpsi, d2psi) -> np.ndarray:
    """``tr_omega eta = psi''/phi' + (m-1) psi'/phi`` for the radial form
    ``eta = i ddbar psi(rho)``, on every node."""
    dpsi = np.asarray(dpsi, dtype=float)
    d2psi = np.asarray(d2psi, dtype=float)
    if np.any(p.dphi <= 0) or np.any(p.phi <= 0):
        raise DegenerateProfileError("trace against a degenerate metric")
    return d2psi / p.dphi + (p.m - 1) * dpsi / p.phi


def trace_of_metric(p: FlowProfile, ref: FlowProfile) -> np.ndarray:
    """``tr_ref omega = phi'/phi'_ref + (m-1) phi/phi_ref``."""
    if np.any(ref.dphi <= 0) or np.any(ref.phi <= 0):
        raise DegenerateProfileError("reference metric degenerate")
    return p.dphi / ref.dphi + (p.m - 1) * p.phi / ref.phi


def fubini_study_potential_derivatives(rho) -> tuple[np.ndarray, np.ndarray]:
    """``(psi', psi'')`` for ``psi = log(1 + e^rho)``, the pulled-back FS potential."""
    s = sigmoid(rho)
    return s, s * sigmoid(-np.asarray(rho, dtype=float))


# ---------------------------------------------------------------- CSV I/O

def _fmt(x: float) -> str:
    return repr(float(x))


def write_profile_csv(path, p: FlowProfile) -> None:
    """``# m=..,t=..,a=..,b=..,L=..,N=..`` then ``rho,phi`` rows."""
    lines = [
        f"# m={p.m},t={_fmt(p.t)},a={_fmt(p.a)},b={_fmt(p.b)},L={_fmt(p.L)},N={p.N}"
        + (",validation=1" if p.validation else ""),
        "rho,phi",
    ]
    lines += [f"{_fmt(r)},{_fmt(v)}" for r, v in zip(p.rho, p.phi)]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_profile_csv(path) -> FlowProfile:
    with open(path, encoding="utf-8") as fh:
        meta_line = fh.readline().strip()
        header = fh.readline().strip()
        if not meta_line.startswith("#") or header != "rho,phi":
            raise ProfileError(f"{path}: not a profile CSV")
        meta = dict(kv.split("=", 1) for kv in meta_line[1:].strip().split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape[0] != int(meta["N"]):
        raise ProfileError(f"{path}: expected {meta['N']} rows, got {data.shape[0]}")
    return FlowProfile(int(meta["m"]), float(meta["L"]), data[:, 1], t=float(meta["t"]),
                       a=float(meta["a"]), b=float(meta["b"]),
                       validation=meta.get("validation") == "1")
