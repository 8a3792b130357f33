"""Runtime checks of the flow's a-priori estimates over a trajectory.

Every monitor is a pure function of a :class:`FlowTrajectory` and returns a
:class:`MonitorReport`.  Unknown constants are measured rather than assumed;
inequalities are checked one-sidedly with a discretization slack whose
constant ``C_disc`` was calibrated once on the exact shrinking ``P^m``
solution (see :func:`calibrate_c_disc`).

Pointwise parabolic checks difference in time across snapshots with the
non-uniform three-point formula and apply :func:`laplacian_radial` in
space.  They are restricted to the nodes where the metric is resolved,
``phi' >= KAPPA * phi`` at the three snapshots involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cohomology import CurveClass, ScenarioKind, class_at, curve_area
from .integrator import FlowTrajectory
from .profile import (FieldKind, FlowProfile, VectorFieldSpec, fiber_diam_upper,
                      fubini_study_potential_derivatives, laplacian_radial,
                      radial_length_profile, sigmoid, sphere_diam_upper, vector_field_catalog,
                      vf_sup, volume_ratio)

#: resolution window: pointwise checks need ``phi' >= KAPPA phi``
KAPPA = 1e-3
#: nodes dropped next to each end of the grid
EDGE_NODES = 2
#: width in rho of the pinned-boundary layers left out of pointwise checks
BOUNDARY_MARGIN = 1.0
#: calibrated on the exact ``P^m`` run (m=2, N=4096, L=15) with safety factor 2;
#: ``tests/test_monitors.py`` recomputes it
DEFAULT_C_DISC = 0.11
CALIBRATION_SAFETY = 2.0
#: allowed drift of a measured constant under grid doubling
REFINEMENT_DRIFT = 0.2
#: exceptional-volume tolerance and the hard growth cap
VOLUME_TOL = 1e-3
VOLUME_GROWTH_CAP = 10.0
#: singular-value guard for the Schwarz trace
S_FLOOR = 1e-12
#: nodes whose estimated roundoff in ``Delta f`` exceeds this share of the
#: residual scale are not trusted
NOISE_FRAC = 1e-3


class InsufficientDataError(ValueError):
    """Too few snapshots for a time derivative."""


class ScenarioError(ValueError):
    """The monitor does not apply to this trajectory's scenario."""


@dataclass
class MonitorReport:
    """Outcome of one monitor.

    ``values`` holds one number per entry of ``times``: a supremum for
    sup-type monitors, the worst normalized residual for pointwise ones.
    """

    name: str
    paper_tag: str
    times: np.ndarray
    values: np.ndarray
    C_meas: float
    passed: bool
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "paper_tag": self.paper_tag,
            "times": [float(t) for t in self.times],
            "values": [_json_float(v) for v in self.values],
            "C_meas": _json_float(self.C_meas),
            "verdict": self.verdict,
            "tolerance": float(self.tolerance),
            "details": _jsonable(self.details),
        }


def _json_float(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_float(obj)
    return obj


# ------------------------------------------------------------------ helpers

def _stable(c, c_ref, rel=REFINEMENT_DRIFT) -> bool:
    """Relative drift below ``rel``."""
    if not (math.isfinite(c) and math.isfinite(c_ref)):
        return False
    return abs(c - c_ref) <= max(rel * max(abs(c), abs(c_ref)), 1e-12)


def _time_weights(t0, t1, t2):
    h1, h2 = t1 - t0, t2 - t1
    return (-h2 / (h1 * (h1 + h2)), (h2 - h1) / (h1 * h2), h1 / (h2 * (h1 + h2)))


def _window(snaps) -> np.ndarray:
    """Interior nodes resolved at every snapshot in ``snaps``."""
    ok = np.ones(snaps[0].N - 2, dtype=bool)
    for q in snaps:
        ok &= q.dphi[1:-1] >= KAPPA * q.phi[1:-1]
    ok[:EDGE_NODES] = False
    ok[-EDGE_NODES:] = False
    p = snaps[1]
    ok &= np.abs(p.rho[1:-1]) <= p.L - BOUNDARY_MARGIN
    return ok


def _heat_residual(snaps, fvals, m):
    """``(d_t - Delta) f`` at the middle snapshot, plus its size scale.

    ``fvals`` are the three samples of ``f``; returns interior arrays
    ``(R, scale)`` where ``scale = |d_t f| + |f''/phi'| + (m-1)|f'/phi|``.
    """
    w = _time_weights(*(q.t for q in snaps))
    ft = (w[0] * fvals[0] + w[1] * fvals[1] + w[2] * fvals[2])[1:-1]
    p = snaps[1]
    f = fvals[1]
    h = p.h
    lap = laplacian_radial(p, f)
    dphi = (p.phi[2:] - p.phi[:-2]) / (2 * h)
    d2f = (f[2:] - 2 * f[1:-1] + f[:-2]) / h ** 2
    df = (f[2:] - f[:-2]) / (2 * h)
    scale = np.abs(ft) + np.abs(d2f / dphi) + (m - 1) * np.abs(df / p.phi[1:-1])
    return ft - lap, scale


def _roundoff(p: FlowProfile) -> np.ndarray:
    """Rough size of the rounding error in ``Delta f`` for ``f`` built from
    ``phi'``: a relative error ``eps phi / (h phi')`` in the slope, amplified by
    ``4 / (h^2 phi')`` in the second difference."""
    phi, dphi = p.phi[1:-1], p.dphi[1:-1]
    with np.errstate(divide="ignore"):
        return 16.0 * np.finfo(float).eps * phi / (p.h ** 3 * dphi ** 2)


def _trusted(trio, scale) -> np.ndarray:
    return _window(trio) & (_roundoff(trio[1]) <= NOISE_FRAC * scale)


def _finite(snaps) -> bool:
    """Non-finite samples would otherwise vanish from the trusted window."""
    return all(bool(np.all(np.isfinite(q.phi))) for q in snaps)


def _tau(traj: FlowTrajectory, n: int) -> float:
    """Snapshot spacing around ``n`` relative to the remaining time."""
    t = traj.times
    return (t[n + 1] - t[n - 1]) / (traj.T_predicted - t[n])


def eps_disc(traj: FlowTrajectory, n: int, c_disc: float = DEFAULT_C_DISC) -> float:
    """Relative slack ``C_disc (h^2 + tau)`` at interior snapshot ``n``."""
    return c_disc * (traj.snapshots[n].h ** 2 + _tau(traj, n))


def _require_snapshots(traj: FlowTrajectory, k: int = 3) -> None:
    if len(traj.snapshots) < k:
        raise InsufficientDataError(f"need at least {k} snapshots, got {len(traj.snapshots)}")


def _log_dphi(p: FlowProfile) -> np.ndarray:
    return np.log(np.maximum(p.dphi, np.finfo(float).tiny))


def _schwarz_trace(p: FlowProfile) -> np.ndarray:
    d1, d2 = fubini_study_potential_derivatives(p.rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        return d2 / p.dphi + (p.m - 1) * d1 / p.phi


def _aubin_yau_traces(p: FlowProfile, p0: FlowProfile):
    """``(tr_{omega_0} omega, tr_omega omega_0)`` on every node."""
    with np.errstate(divide="ignore", invalid="ignore"):
        q = p.dphi / p0.dphi + (p.m - 1) * p.phi / p0.phi
        inv = p0.dphi / p.dphi + (p.m - 1) * p0.phi / p.phi
    return q, inv


# --------------------------------------------------------------- calibration

def _exact_pointwise_residuals(p: FlowProfile, h_class: float = 1.0):
    """Closed-form ``(d_t - Delta) log`` of ``phi'``, ``S`` and ``Q`` on ``P^m``.

    For ``phi = s sigma`` with ``s = h - (m+1) t``: the first is
    ``-(m-1)(1-sigma)/(s sigma)``, ``S = m/s`` gives ``(m+1)/s`` and
    ``Q = m s/h`` gives ``-(m+1)/s``.
    """
    m = p.m
    s = p.b
    sig = p.phi[1:-1] / s
    r_dphi = -(m - 1) * (1 - sig) / (s * sig)
    const = np.full_like(sig, (m + 1) / s)
    return r_dphi, const, -const


def calibrate_c_disc(traj: FlowTrajectory, safety: float = CALIBRATION_SAFETY) -> float:
    """Largest normalized deviation from the exact residuals, times ``safety``.

    ``traj`` must be a validation-mode ``P^m`` run started from the exact
    profile.  Deviations are measured in units of ``scale * (h^2 + tau)``.
    """
    if not traj.config.validation:
        raise ScenarioError("calibration needs the exact P^m trajectory")
    _require_snapshots(traj)
    snaps = traj.snapshots
    p0 = snaps[0]
    worst = 0.0
    for n in range(1, len(snaps) - 1):
        trio = snaps[n - 1:n + 2]
        exact = _exact_pointwise_residuals(snaps[n])
        fields = (
            [_log_dphi(q) for q in trio],
            [np.log(_schwarz_trace(q)) for q in trio],
            [np.log(_aubin_yau_traces(q, p0)[0]) for q in trio],
        )
        unit = snaps[n].h ** 2 + _tau(traj, n)
        for fv, ex in zip(fields, exact):
            R, scale = _heat_residual(trio, fv, traj.m)
            win = _trusted(trio, scale)
            dev = np.abs(R - ex)[win] / (scale[win] * unit)
            if dev.size:
                worst = max(worst, float(dev.max()))
    return safety * worst


# ------------------------------------------------------------------ monitors

def monitor_vf_max_principle(traj: FlowTrajectory, V: VectorFieldSpec) -> MonitorReport:
    """``sup |V|^2`` must not increase between consecutive snapshots.

    The allowed relative increase is ``1e-6 + 10 (dt + h^2)`` with ``dt``
    the last integrator step before the later snapshot.
    """
    if not V.lifts_to_blowup:
        raise ValueError(f"{V.label} does not extend across the exceptional divisor")
    vals = np.array([vf_sup(p, V) for p in traj.snapshots])
    ratios = []
    ok = True
    worst = None
    for n in range(1, len(vals)):
        p = traj.snapshots[n]
        tol = 1e-6 + 10.0 * (traj.dt_last[n] + p.h ** 2)
        ratios.append(vals[n] / vals[n - 1] if vals[n - 1] > 0 else math.inf)
        if not vals[n] <= vals[n - 1] + tol * abs(vals[n - 1]):  # NaN fails too
            ok = False
            if worst is None:
                worst = float(p.t)
    C = float(max(ratios)) if ratios else 1.0
    return MonitorReport(
        name=f"vf_max_principle[{V.label}]", paper_tag="max-principle:holomorphic-field",
        times=traj.times, values=vals, C_meas=C, passed=ok,
        tolerance=1e-6, details={"first_violation_t": worst, "max_step_ratio": C})


def monitor_radial_pointwise(traj: FlowTrajectory, c_disc: float = DEFAULT_C_DISC) -> MonitorReport:
    """``(d_t - Delta) log phi' <= eps_disc`` on resolved interior nodes.

    ``values[n]`` is the worst ``R / scale`` at snapshot ``n``; the verdict
    compares it with ``C_disc (h^2 + tau)``.
    """
    _require_snapshots(traj)
    snaps = traj.snapshots
    times, vals, slack = [], [], []
    ok = True
    where = None
    for n in range(1, len(snaps) - 1):
        trio = snaps[n - 1:n + 2]
        if not _finite(trio):
            times.append(snaps[n].t)
            vals.append(math.nan)
            slack.append(eps_disc(traj, n, c_disc))
            ok = False
            where = where or (float(snaps[n].t), math.nan)
            continue
        R, scale = _heat_residual(trio, [_log_dphi(q) for q in trio], traj.m)
        win = _trusted(trio, scale)
        if not win.any():
            continue
        r = (R / scale)[win]
        eps = eps_disc(traj, n, c_disc)
        k = int(np.argmax(r))
        times.append(snaps[n].t)
        vals.append(float(r[k]))
        slack.append(eps)
        if r[k] > eps:
            ok = False
            if where is None:
                where = (float(snaps[n].t), float(snaps[n].rho[1:-1][win][k]))
    vals = np.array(vals)
    C = float(np.max(vals / np.array(slack))) if vals.size else 0.0
    return MonitorReport(
        name="radial_pointwise", paper_tag="max-principle:radial-field",
        times=np.array(times), values=vals, C_meas=C, passed=ok and vals.size > 0,
        tolerance=c_disc, details={"first_violation": where, "slack": slack})


def _trace_constant(traj, trace_fn, denom_fn, c_disc, floor=None):
    """Smallest ``C`` with ``(d_t - Delta) log q <= C denom + eps`` per snapshot.

    ``trace_fn(p)`` returns a tuple whose first entry is ``q``; ``denom_fn``
    maps that tuple to the right-hand side density.  With ``floor``, nodes
    where ``q < floor`` at any of the three snapshots are dropped and counted.
    """
    _require_snapshots(traj)
    snaps = traj.snapshots
    times, consts = [], []
    excluded = 0
    for n in range(1, len(snaps) - 1):
        trio = snaps[n - 1:n + 2]
        if not _finite(trio):
            times.append(snaps[n].t)
            consts.append(math.nan)
            continue
        qs = [trace_fn(q) for q in trio]
        positive = np.ones(trio[0].N - 2, dtype=bool)
        if floor is not None:
            for q in qs:
                positive &= q[0][1:-1] >= floor
            excluded += int(np.count_nonzero(~positive & _window(trio)))
        with np.errstate(divide="ignore", invalid="ignore"):
            R, scale = _heat_residual(trio, [np.log(q[0]) for q in qs], traj.m)
        win = _trusted(trio, scale) & positive
        if not win.any():
            continue
        eps = eps_disc(traj, n, c_disc) * scale
        den = denom_fn(qs[1])[1:-1]
        c = ((R - eps) / den)[win]
        times.append(snaps[n].t)
        consts.append(float(np.max(c)))
    return np.array(times), np.array(consts), excluded


def _nanmax(x) -> float:
    """Maximum that propagates NaN; NaN for an empty array."""
    return float(np.max(x)) if x.size else math.nan


def _refinement_verdict(C, C_ref):
    finite = math.isfinite(C)
    if C_ref is None:
        return finite, None
    return finite and _stable(C, C_ref), abs(C - C_ref) / max(abs(C), abs(C_ref), 1e-300)


def monitor_schwarz(traj: FlowTrajectory, refined: FlowTrajectory | None = None,
                    c_disc: float = DEFAULT_C_DISC) -> MonitorReport:
    """Parabolic Schwarz inequality for the blow-down map to ``(P^m, FS)``.

    ``S = tr_omega pi^* omega_FS``; reports ``C_meas`` with
    ``(d_t - Delta) log S <= C_meas S + eps_disc``.  Nodes with
    ``S < 1e-12`` are excluded and counted.  With ``refined`` the verdict
    also requires the constant to move by less than 20%.
    """
    def fn(p):
        return (_schwarz_trace(p),)

    times, consts, excl = _trace_constant(traj, fn, lambda q: q[0], c_disc, floor=S_FLOOR)
    C = _nanmax(consts)
    C_ref = None
    if refined is not None:
        _, cr, _ = _trace_constant(refined, fn, lambda q: q[0], c_disc, floor=S_FLOOR)
        C_ref = _nanmax(cr)
    ok, drift = _refinement_verdict(C, C_ref)
    return MonitorReport(
        name="schwarz", paper_tag="parabolic-schwarz", times=times, values=consts,
        C_meas=C, passed=ok, tolerance=REFINEMENT_DRIFT,
        details={"excluded_nodes": excl, "C_refined": C_ref, "drift": drift})


def monitor_trace_aubin_yau(traj: FlowTrajectory, refined: FlowTrajectory | None = None,
                            c_disc: float = DEFAULT_C_DISC) -> MonitorReport:
    """``(d_t - Delta) log tr_{omega_0} omega <= C_meas tr_omega omega_0 + eps``."""
    def make(t):
        p0 = t.snapshots[0]
        return lambda p: _aubin_yau_traces(p, p0)

    times, consts, _ = _trace_constant(traj, make(traj), lambda q: q[1], c_disc)
    C = _nanmax(consts)
    C_ref = None
    if refined is not None:
        _, cr, _ = _trace_constant(refined, make(refined), lambda q: q[1], c_disc)
        C_ref = _nanmax(cr)
    ok, drift = _refinement_verdict(C, C_ref)
    return MonitorReport(
        name="trace_aubin_yau", paper_tag="aubin-yau-trace", times=times, values=consts,
        C_meas=C, passed=ok, tolerance=REFINEMENT_DRIFT,
        details={"C_refined": C_ref, "drift": drift})


def monitor_volume_bound(traj: FlowTrajectory) -> MonitorReport:
    """``omega^m <= C omega_0^m`` with the measured ``C``.

    Passes when the supremum stays below ``1 + 1e-3``; growth beyond ten
    times the initial supremum is flagged separately.
    """
    p0 = traj.snapshots[0]
    vals = np.array([float(np.max(volume_ratio(p, p0))) for p in traj.snapshots])
    C = float(vals.max())
    runaway = C > VOLUME_GROWTH_CAP * vals[0]
    ok = C <= 1.0 + VOLUME_TOL and not runaway
    return MonitorReport(
        name="volume_bound", paper_tag="volume-form-bound", times=traj.times, values=vals,
        C_meas=C, passed=ok, tolerance=VOLUME_TOL, details={"runaway": runaway})


def _length_constant(traj: FlowTrajectory) -> np.ndarray:
    out = []
    for p in traj.snapshots:
        out.append(float(np.max(radial_length_profile(p) * np.exp(-p.rho / 4.0))))
    return np.array(out)


def monitor_metric_bounds(traj: FlowTrajectory, refined: FlowTrajectory | None = None) -> MonitorReport:
    """Three metric bounds near the exceptional divisor.

    (i) ``sup phi <= b(0) (1 + 1e-9)``; (ii) ``sup (phi')^2 e^{-rho}`` is
    non-increasing within 0.1%; (iii) ``length(-L -> rho) <= C e^{rho/4}``
    with a finite, refinement-stable ``C``.
    """
    snaps = traj.snapshots
    b0 = snaps[0].b
    sup_phi = np.array([float(p.phi.max()) for p in snaps])
    ok_i = bool(np.all(sup_phi <= b0 * (1 + 1e-9)))
    q = np.array([float(np.max(p.dphi ** 2 * np.exp(-p.rho))) for p in snaps])
    ok_ii = bool(np.all(q[1:] <= q[:-1] * (1 + 1e-3)))
    lc = _length_constant(traj)
    C = float(lc.max())
    C_ref = float(_length_constant(refined).max()) if refined is not None else None
    ok_iii, drift = _refinement_verdict(C, C_ref)
    return MonitorReport(
        name="metric_bounds", paper_tag="metric-bounds-near-divisor", times=traj.times,
        values=lc, C_meas=C, passed=ok_i and ok_ii and ok_iii, tolerance=1e-3,
        details={"sup_phi_ok": ok_i, "dphi_sq_decreasing_ok": ok_ii, "length_ok": ok_iii,
                 "sup_phi": sup_phi, "sup_dphi_sq_weighted": q, "C_refined": C_ref,
                 "drift": drift})


def _fit_exponent(t, y, T) -> float:
    x = np.log(T - t)
    A = np.vstack([x, np.ones_like(x)]).T
    slope, _ = np.linalg.lstsq(A, np.log(y), rcond=None)[0]
    return float(slope)


def monitor_diam_rate(traj: FlowTrajectory, refined: FlowTrajectory | None = None,
                      fit_window=(0.99, 0.999)) -> MonitorReport:
    """Fiber-diameter decay on a collapsing trajectory.

    Checks that ``sup D/(T-t)^{1/5}`` over ``[0.9T, t_stop]`` is finite (and
    refinement-stable when ``refined`` is given), that the exponent fitted
    over ``fit_window`` is at least 0.2, that the exceptional sphere shrinks
    with fitted exponent at least ``1/3 - 0.02``, and that the collapsing
    curve area is exactly linear in ``T - t``.
    """
    scen = traj.scenario
    if not (traj.config.validation or scen is ScenarioKind.COLLAPSE_FIBER):
        raise ScenarioError(f"diameter rate needs a collapsing trajectory, got {scen}")
    T = traj.T_predicted

    def ratios(tr):
        t = tr.times
        sel = t >= 0.9 * T - 1e-12
        D = np.array([fiber_diam_upper(p) for p, s in zip(tr.snapshots, sel) if s])
        return t[sel], D, D / (T - t[sel]) ** 0.2

    t, D, r = ratios(traj)
    C = float(r.max())
    C_ref = float(ratios(refined)[2].max()) if refined is not None else None
    ok_c, drift = _refinement_verdict(C, C_ref)

    lo, hi = fit_window[0] * T, fit_window[1] * T
    fit = (t >= lo - 1e-12 * T) & (t <= hi + 1e-12 * T)
    if np.count_nonzero(fit) < 2:
        raise ValueError("fewer than two snapshots in the fit window")
    alpha = _fit_exponent(t[fit], D[fit], T)
    exc = np.array([sphere_diam_upper(p, -p.L) for p, s in zip(traj.snapshots, traj.times >= 0.9 * T - 1e-12) if s])
    beta = _fit_exponent(t[fit], exc[fit], T)

    if traj.config.validation:
        area = np.array([p.b for p in traj.snapshots])
        area_exact = (traj.m + 1.0) * (T - traj.times)
    else:
        area = np.array([curve_area(class_at(traj.c0, s), CurveClass.PROPER_TRANSFORM_LINE)
                         for s in traj.times])
        area_exact = 2.0 * (T - traj.times)
    area_ok = bool(np.allclose(area, area_exact, rtol=0, atol=1e-12 * max(1.0, traj.c0.h)))
    ok = ok_c and alpha >= 0.2 and beta >= 1.0 / 3.0 - 0.02 and area_ok
    return MonitorReport(
        name="diam_rate", paper_tag="fiber-diameter-rate", times=t, values=D, C_meas=C,
        passed=ok, tolerance=0.2,
        details={"alpha_hat": alpha, "exceptional_exponent": beta, "area_ok": area_ok,
                 "C_refined": C_ref, "drift": drift})


def monitor_class_boundary(traj: FlowTrajectory, rtol: float = 1e-6) -> MonitorReport:
    """End values of ``phi`` against the cohomological curve areas.

    ``phi(-L)`` must equal the exceptional-line area and ``phi(L)`` the
    line area of ``class_at(c0, t)`` within ``rtol * b(0)``.
    """
    b0 = traj.snapshots[0].b
    errs = []
    for p in traj.snapshots:
        if traj.config.validation:
            s = traj.c0.h - (traj.m + 1) * p.t
            lo, hi = s * sigmoid(np.array([-p.L, p.L]))
        else:
            c = class_at(traj.c0, p.t)
            lo, hi = curve_area(c, CurveClass.EXC_LINE), curve_area(c, CurveClass.LINE)
        errs.append(max(abs(p.phi[0] - lo), abs(p.phi[-1] - hi)))
    errs = np.array(errs)
    C = float(errs.max())
    return MonitorReport(
        name="class_boundary", paper_tag="class-arithmetic-cross-check", times=traj.times,
        values=errs, C_meas=C, passed=C <= rtol * b0, tolerance=rtol * b0)


# ------------------------------------------------------------------- suites

def lifting_fields(m: int) -> list[VectorFieldSpec]:
    """All Linear and RadialScaled fields of the catalog."""
    return [V for V in vector_field_catalog(m, lifting_only=True)
            if V.kind in (FieldKind.LINEAR, FieldKind.RADIAL_SCALED)]


SUITE_NAMES = ("class_boundary", "vf_max_principle", "radial_pointwise", "schwarz",
               "trace_aubin_yau", "volume_bound", "metric_bounds", "diam_rate")


def run_suite(traj: FlowTrajectory, names=SUITE_NAMES, refined: FlowTrajectory | None = None,
              c_disc: float = DEFAULT_C_DISC, executor=None) -> list[MonitorReport]:
    """Evaluate the named monitors; ``diam_rate`` is skipped off-scenario.

    With an ``executor`` (``concurrent.futures``) the monitors run
    concurrently; report order always follows ``names``.
    """
    jobs = []
    for name in names:
        if name not in SUITE_NAMES:
            raise KeyError(f"unknown monitor {name!r}")
        if name == "vf_max_principle":
            jobs += [(monitor_vf_max_principle, (traj, V)) for V in lifting_fields(traj.m)]
        elif name == "radial_pointwise":
            jobs.append((monitor_radial_pointwise, (traj, c_disc)))
        elif name == "schwarz":
            jobs.append((monitor_schwarz, (traj, refined, c_disc)))
        elif name == "trace_aubin_yau":
            jobs.append((monitor_trace_aubin_yau, (traj, refined, c_disc)))
        elif name == "volume_bound":
            jobs.append((monitor_volume_bound, (traj,)))
        elif name == "metric_bounds":
            jobs.append((monitor_metric_bounds, (traj, refined)))
        elif name == "diam_rate":
            if traj.config.validation or traj.scenario is ScenarioKind.COLLAPSE_FIBER:
                jobs.append((monitor_diam_rate, (traj, refined)))
        elif name == "class_boundary":
            jobs.append((monitor_class_boundary, (traj,)))
    if executor is None:
        return [fn(*args) for fn, args in jobs]
    futures = [executor.submit(fn, *args) for fn, args in jobs]
    return [f.result() for f in futures]
