import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from krflab.cohomology import KahlerClass, NotKahlerError
from krflab.profile import (DegenerateProfileError, FieldKind, FlowProfile, ProfileError,
                            VectorFieldSpec, angular_max, fiber_diam_upper, flat_profile,
                            fubini_study_potential_derivatives, hermitian_metric, init_profile,
                            laplacian_radial, metric_eigenvalues, model_profile, norm_sq,
                            radial_length, radial_length_profile, read_profile_csv, sigmoid, sphere_diam_upper,
                            trace_of_metric, trace_radial, vector_field_catalog, vf_norm_sq_on_line,
                            vf_sup, vf_sup_profile, volume_ratio, write_profile_csv)


def fs_profile(m, N=1025, L=12.0, s=1.0):
    return FlowProfile(m, L, s * sigmoid(np.linspace(-L, L, N)), a=0.0, b=s, validation=True)


def sphere_points(m, rho, n, rng):
    z = rng.normal(size=(n, m)) + 1j * rng.normal(size=(n, m))
    z /= np.linalg.norm(z, axis=1)[:, None]
    return z * math.exp(rho / 2)


def test_catalog_counts():
    for m in (2, 3, 4):
        cat = vector_field_catalog(m)
        assert len(cat) == (m + 1) ** 2 - 1
        lifting = vector_field_catalog(m, lifting_only=True)
        assert len(lifting) == m * m + m
        assert all(V.lifts_to_blowup for V in lifting)
    assert VectorFieldSpec.linear(1, 2).label == "Linear(1,2)"
    assert not VectorFieldSpec.coord(1).lifts_to_blowup


def test_sigmoid_tails_are_accurate():
    r = np.array([-40.0, 0.0, 40.0])
    s = sigmoid(r)
    assert s[0] == pytest.approx(math.exp(-40.0), rel=1e-14)
    assert s[1] == 0.5
    assert 1.0 - s[2] == pytest.approx(0.0, abs=1e-16)


def test_init_profile_and_invariants():
    p = init_profile(KahlerClass(2, 3.0, 1.0), L=15.0, N=513)
    assert p.phi[0] == pytest.approx(1.0, abs=1e-5)
    assert p.phi[-1] == pytest.approx(3.0, abs=1e-5)
    p.check_invariants()
    with pytest.raises(NotKahlerError):
        init_profile(KahlerClass(2, 1.0, 2.0))
    with pytest.raises(ProfileError):
        init_profile(KahlerClass(2, 3.0, 1.0), N=10)
    bad = p.replace(phi=p.phi[::-1].copy())
    with pytest.raises(DegenerateProfileError):
        bad.check_invariants()


def test_profile_arrays_are_frozen():
    p = fs_profile(2)
    with pytest.raises(ValueError):
        p.phi[3] = 0.0


@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("rho", [-3.0, 0.0, 2.5])
def test_hermitian_metric_eigenvalues(m, rho):
    p = fs_profile(m)
    z = sphere_points(m, rho, 1, np.random.default_rng(0))[0]
    ev = np.sort(np.linalg.eigvalsh(hermitian_metric(p, z)))
    sphere, radial = metric_eigenvalues(p, rho)
    expected = np.sort([radial] + [sphere] * (m - 1))
    np.testing.assert_allclose(ev, expected, rtol=1e-9)


@pytest.mark.parametrize("m", [2, 3])
@pytest.mark.parametrize("rho", [-4.0, -0.5, 0.0, 1.0, 5.0])
def test_angular_max_against_monte_carlo(m, rho):
    """Closed-form sphere maxima against sampled full-matrix norms."""
    rng = np.random.default_rng(1)
    p = fs_profile(m)
    phi, dphi = (float(x) for x in p.evaluate(rho))
    pts = sphere_points(m, rho, 20_000, rng)
    fields = [V for V in vector_field_catalog(m, lifting_only=True) if V.kind is FieldKind.LINEAR]
    for V in fields:
        sampled = max(norm_sq(p, z, V) for z in pts[:2000])
        exact = float(angular_max(phi, dphi, V))
        assert sampled <= exact * (1 + 1e-9)
        assert sampled >= exact * 0.97


@pytest.mark.parametrize("i,j", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_norm_on_line_matches_matrix(i, j):
    p = fs_profile(2)
    V = VectorFieldSpec.linear(i, j)
    for rho in (-2.0, 0.3, 3.0):
        z = np.array([math.exp(rho / 2), 0.0])
        expected = norm_sq(p, z, V)
        assert vf_norm_sq_on_line(p, rho, V) == pytest.approx(expected, rel=1e-9, abs=1e-14)
    W = VectorFieldSpec.radial_scaled(1)
    z = np.array([math.exp(0.25), 0.0])
    assert vf_norm_sq_on_line(p, 0.5, W) == pytest.approx(norm_sq(p, z, W), rel=1e-9)


def test_radial_scaled_sup_matches_matrix():
    rng = np.random.default_rng(2)
    p = fs_profile(2)
    V = VectorFieldSpec.radial_scaled(1)
    k = 700
    rho = float(p.rho[k])
    sampled = max(norm_sq(p, z, V) for z in sphere_points(2, rho, 3000, rng))
    assert sampled == pytest.approx(vf_sup_profile(p, V)[k], rel=2e-2)


def test_vf_sup_rejects_non_lifting():
    with pytest.raises(ValueError):
        vf_sup(fs_profile(2), VectorFieldSpec.coord(1))


def test_model_radial_length_closed_form():
    """On ``phi = c + e^rho`` the radial length to radius ``r = e^{rho/2}`` is ``r``."""
    p = model_profile(2, c=0.7, L=15.0, N=4096)
    for r1, r2 in [(0.01, 1.0), (0.5, 20.0), (1.0, 1000.0)]:
        got = radial_length(p, 2 * math.log(r1), 2 * math.log(r2))
        assert got == pytest.approx(r2 - r1, rel=1e-2)
    prof = radial_length_profile(p)
    np.testing.assert_allclose(prof[-1], math.exp(7.5) - math.exp(-7.5), rtol=1e-2)
    with pytest.raises(ValueError):
        radial_length(p, 1.0, 0.0)
    with pytest.raises(ProfileError):
        radial_length(p, -20.0, 0.0)


def test_radial_length_quadrature():
    p = fs_profile(2, N=4097)
    exact = quad(lambda r: 0.5 * math.sqrt(sigmoid(r) * sigmoid(-r)), -3.0, 4.0)[0]
    assert radial_length(p, -3.0, 4.0) == pytest.approx(exact, rel=1e-5)


def test_laplacian_of_norm_squared_on_flat_space():
    """``Delta |z|^2 = m`` for the Euclidean metric."""
    for m in (2, 3):
        p = flat_profile(m, L=8.0, N=2001)
        lap = laplacian_radial(p, np.exp(p.rho))
        np.testing.assert_allclose(lap, m, rtol=1e-4)


def test_laplacian_of_fs_potential_on_flat_space():
    """``Delta log(1 + |z|^2)`` for the Euclidean metric, by direct differentiation."""
    m = 2
    p = flat_profile(m, L=8.0, N=4001)
    f = np.log1p(np.exp(p.rho))
    lap = laplacian_radial(p, f)
    # sum_i d^2 f / dz_i dzbar_i with u = |z|^2
    u = np.exp(p.rho[1:-1])
    exact = m / (1 + u) - u / (1 + u) ** 2
    np.testing.assert_allclose(lap, exact, rtol=1e-4, atol=1e-7)


def test_traces_on_fubini_study():
    for m in (2, 3):
        p = fs_profile(m)
        np.testing.assert_allclose(trace_of_metric(p, p), m, rtol=1e-12)
        d1, d2 = fubini_study_potential_derivatives(p.rho)
        # trace of the FS form against the exact FS profile is m
        np.testing.assert_allclose(trace_radial(p, d1, d2)[5:-5], m, rtol=1e-4)


def test_volume_ratio():
    p = fs_profile(3)
    np.testing.assert_allclose(volume_ratio(p, p), 1.0)
    np.testing.assert_allclose(volume_ratio(p.scaled(0.5), p), 0.5 ** 3, rtol=1e-12)
    assert volume_ratio(p.scaled(0.5), p, rho=0.3) == pytest.approx(0.125, rel=1e-9)
    with pytest.raises(ProfileError):
        volume_ratio(p, fs_profile(3, N=513))


def test_diameter_bounds_scale_with_sqrt():
    p = fs_profile(2)
    assert fiber_diam_upper(p.scaled(0.25)) == pytest.approx(0.5 * fiber_diam_upper(p), rel=1e-12)
    assert sphere_diam_upper(p, 0.0) == pytest.approx(0.5 * math.pi * (math.sqrt(0.5) + 0.5),
                                                      rel=1e-6)


def test_csv_round_trip_is_bit_exact(tmp_path):
    p = init_profile(KahlerClass(2, 3.0, 1.0), L=10.0, N=257).replace(t=0.125)
    path = tmp_path / "p.csv"
    write_profile_csv(path, p)
    q = read_profile_csv(path)
    assert np.array_equal(p.phi, q.phi)
    assert (q.m, q.L, q.t, q.a, q.b, q.validation) == (p.m, p.L, p.t, p.a, p.b, p.validation)
    path.write_text("garbage\n")
    with pytest.raises(ProfileError):
        read_profile_csv(path)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.01, 10.0), st.floats(0.01, 10.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_angular_max_is_an_upper_bound(phi, dphi, x, q):
    """``phi x + (phi'-phi) x q`` for admissible shares never exceeds the maximum."""
    diag = VectorFieldSpec.linear(1, 1)
    off = VectorFieldSpec.linear(1, 2)
    assert phi * x + (dphi - phi) * x * x <= angular_max(phi, dphi, diag) * (1 + 1e-12) + 1e-12
    y = x * (1 - x)  # |w^2|^2 share times |w^1|^2 share with x + (1-x) = 1
    assert phi * x + (dphi - phi) * y <= angular_max(phi, dphi, off) * (1 + 1e-12) + 1e-12
