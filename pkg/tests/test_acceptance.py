"""Acceptance criteria at their stated tolerances.

Every criterion records a one-line PASS/FAIL verdict that is printed in the
``acceptance criteria`` section of the pytest terminal summary.
"""

import contextlib
import math

import numpy as np
import pytest

from krflab.cohomology import CurveClass, KahlerClass, class_at, curve_area, first_singular_time
from krflab.integrator import max_error_vs_exact
from krflab.metric_space import FlatTorus, gh_convergence_certificate, gh_series
from krflab.monitors import (lifting_fields, monitor_class_boundary, monitor_diam_rate,
                             monitor_metric_bounds, monitor_radial_pointwise, monitor_schwarz,
                             monitor_trace_aubin_yau, monitor_vf_max_principle,
                             monitor_volume_bound)
from krflab.profile import model_profile, radial_length

from corruption import dphi_spike, corrupt, grown_snapshot, mid, nan_snapshot, steepening_sigmoid


@contextlib.contextmanager
def criterion(log, number, title):
    """Record PASS only if the body finishes without an assertion failure."""
    notes = []
    ok = False
    try:
        yield notes
        ok = True
    finally:
        extra = f"  [{'; '.join(notes)}]" if notes else ""
        log.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {title}{extra}")


def test_criterion_1_exact_projective_space(trajectory, acceptance_log):
    with criterion(acceptance_log, 1, "validation runs track the exact P^m solution") as notes:
        for m in (2, 3):
            errs = []
            for refined in (False, True):
                traj = trajectory(f"pm{m}", refined)
                assert traj.config.N == (4096 if not refined else 8192) and traj.config.L == 15.0
                keep = traj.times <= 0.8 / (m + 1) * (1 + 1e-12)
                assert traj.times[-1] > 0.8 / (m + 1) and keep.sum() >= 10
                errs.append(float(max_error_vs_exact(traj)[keep].max()))
            ratio = errs[0] / errs[1]
            notes.append(f"m={m}: err={errs[0]:.2e}, ratio={ratio:.2f}")
            assert errs[0] <= 1e-3
            assert ratio >= 3.5


def test_criterion_2_singular_time(trajectory, acceptance_log):
    with criterion(acceptance_log, 2, "sup phi extrapolates to zero at the singular time") as notes:
        c0 = KahlerClass(2, 3.0, 1.0)
        T = first_singular_time(c0)
        assert T == min(c0.e / (c0.m - 1), (c0.h - c0.e) / 2) == 1.0
        traj = trajectory("collapse")
        t = traj.times
        sup_phi = np.array([p.phi.max() for p in traj.snapshots])
        late = t >= 0.9 * T
        slope, icpt = np.polyfit(t[late], sup_phi[late], 1)
        t_zero = -icpt / slope
        notes.append(f"t_zero={t_zero:.6f}")
        assert abs(t_zero - 1.0) <= 0.01


def test_criterion_3_class_cross_check(trajectory, acceptance_log):
    with criterion(acceptance_log, 3, "phi(-L) equals the exceptional-line area") as notes:
        worst = 0.0
        for name in ("collapse", "contract"):
            for refined in (False, True):
                traj = trajectory(name, refined)
                b0 = traj.snapshots[0].b
                for p in traj.snapshots:
                    area = curve_area(class_at(traj.c0, p.t), CurveClass.EXC_LINE)
                    assert area == pytest.approx(traj.c0.e - (traj.m - 1) * p.t, abs=1e-12)
                    err = abs(p.phi[0] - area)
                    worst = max(worst, err / b0)
                    assert err <= 1e-6 * b0
                assert monitor_class_boundary(traj).passed
        for m in (2, 3):
            assert monitor_class_boundary(trajectory(f"pm{m}")).passed
        notes.append(f"worst relative error {worst:.1e}")


def test_criterion_4_maximum_principle_suite(trajectory, acceptance_log):
    with criterion(acceptance_log, 4, "maximum-principle monitors pass and catch corruption"):
        for name in ("contract", "collapse"):
            traj = trajectory(name)
            fields = lifting_fields(traj.m)
            assert {V.kind.value for V in fields} == {"Linear", "RadialScaled"}
            for V in fields:
                assert monitor_vf_max_principle(traj, V).passed, (name, V.label)
            assert monitor_radial_pointwise(traj).passed, name
        traj = trajectory("collapse")
        for V in lifting_fields(2):
            assert not monitor_vf_max_principle(grown_snapshot(traj), V).passed
        assert not monitor_radial_pointwise(steepening_sigmoid()).passed


def test_criterion_5_trace_inequalities(trajectory, acceptance_log):
    with criterion(acceptance_log, 5, "trace-inequality suite") as notes:
        for m in (2, 3):
            rep = monitor_schwarz(trajectory(f"pm{m}"), trajectory(f"pm{m}", True))
            notes.append(f"schwarz m={m}: {rep.C_meas:.4f} vs {(m + 1) / m:.4f}")
            assert rep.passed
            assert rep.C_meas == pytest.approx((m + 1) / m, rel=0.02)
        for name in ("collapse", "contract"):
            rep = monitor_schwarz(trajectory(name), trajectory(name, True))
            notes.append(f"schwarz {name}: {rep.C_meas:.3f} (drift {rep.details['drift']:.1%})")
            assert rep.passed and math.isfinite(rep.C_meas)
        for name in ("pm2", "pm3", "collapse", "contract"):
            traj, ref = trajectory(name), trajectory(name, True)
            assert monitor_trace_aubin_yau(traj, ref).passed, name
            assert monitor_volume_bound(traj).passed, name
        assert not monitor_schwarz(trajectory("collapse"), nan_snapshot(trajectory("collapse"))).passed


def test_criterion_6_diameter_rate(trajectory, acceptance_log):
    with criterion(acceptance_log, 6, "fiber diameter rate") as notes:
        rep = monitor_diam_rate(trajectory("collapse"), trajectory("collapse", True))
        notes.append(f"collapse alpha={rep.details['alpha_hat']:.3f}, "
                     f"sup D/(T-t)^0.2={rep.C_meas:.3f}, drift {rep.details['drift']:.1%}")
        assert rep.passed
        assert math.isfinite(rep.C_meas) and rep.details["alpha_hat"] >= 0.2
        exact = monitor_diam_rate(trajectory("pm2"))
        notes.append(f"P^2 alpha={exact.details['alpha_hat']:.3f}")
        assert exact.details["alpha_hat"] == pytest.approx(0.5, abs=0.02)


@pytest.mark.xfail(strict=True, reason="final epsilon at T - t = 1e-3 T is about 0.1 for a unit "
                   "torus; the 0.01 diam(B) target is not reachable there (see the decision log)")
def test_criterion_7_gh_collapse(trajectory, acceptance_log):
    with criterion(acceptance_log, 7, "GH collapse certificate, unit torus") as notes:
        traj = trajectory("collapse")
        base = FlatTorus(1.0)
        series = gh_series(traj, base)
        rep = gh_convergence_certificate(traj, base, series=series)
        d = rep.details
        notes.append(f"final eps={d['final_epsilon']:.4f} vs target {d['target']:.5f}, "
                     f"T-t={traj.T_predicted - traj.times[-1]:.1e}")
        assert traj.T_predicted - traj.times[-1] == pytest.approx(1e-3 * traj.T_predicted)
        assert np.all(series.epsilon <= 2 * series.fiber_diam + 1e-6)
        assert d["base_recovered_exactly"]
        assert rep.passed


def test_criterion_8_metric_bounds(trajectory, acceptance_log):
    with criterion(acceptance_log, 8, "metric bounds near the divisor") as notes:
        for name in ("collapse", "contract"):
            rep = monitor_metric_bounds(trajectory(name), trajectory(name, True))
            assert rep.passed, (name, rep.details)
        p = model_profile(2, c=1.0)
        worst = 0.0
        for r in (0.01, 0.1, 1.0, 10.0, 1000.0):
            got = radial_length(p, -p.L, 2 * math.log(r)) + math.exp(-p.L / 2)
            worst = max(worst, abs(got - r) / r)
        notes.append(f"model radial length worst rel. error {worst:.1e}")
        assert worst <= 0.01
        traj = trajectory("contract")
        assert not monitor_metric_bounds(corrupt(traj, mid(traj), dphi_spike)).passed
