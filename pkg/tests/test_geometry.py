import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contour_dyson.errors import ContourError
from contour_dyson.geometry import ContourSpec, build_contour, frame_at

# 8 E(m = 3/4), complete elliptic integral of the second kind (mpmath, 30 digits)
ELLIPSE_2_1_PERIMETER = 9.688448220547676


def test_unit_circle_perimeter():
    c = build_contour(ContourSpec.circle(0, 1), grid_size=256)
    assert c.perimeter == pytest.approx(2 * np.pi, rel=1e-12)


def test_circle_radius_two_curvature():
    c = build_contour(ContourSpec.circle(0, 2))
    s = np.linspace(0, c.perimeter, 37, endpoint=False)
    assert np.allclose(frame_at(c, s).k, 0.5, atol=1e-12)


def test_ellipse_perimeter_matches_elliptic_integral(ellipse):
    assert ellipse.perimeter == pytest.approx(ELLIPSE_2_1_PERIMETER, rel=1e-12)


def test_unit_circle_frames(unit_circle):
    f = frame_at(unit_circle, 0.0)
    assert f.z == pytest.approx(1.0)
    assert f.tau == pytest.approx(1j)
    assert f.nu == pytest.approx(1.0)
    assert f.k == pytest.approx(1.0)
    f = frame_at(unit_circle, np.pi / 2)
    assert f.z == pytest.approx(1j, abs=1e-12)
    assert f.tau == pytest.approx(-1.0, abs=1e-12)
    assert f.nu == pytest.approx(1j, abs=1e-12)
    assert f.k == pytest.approx(1.0)


def test_ellipse_curvature_at_major_vertex(ellipse):
    f = frame_at(ellipse, 0.0)
    assert f.z == pytest.approx(2.0)
    assert f.k == pytest.approx(2.0, rel=1e-10)


def test_frame_periodic_in_s(ellipse):
    f0 = frame_at(ellipse, 1.3)
    f1 = frame_at(ellipse, 1.3 + 3 * ellipse.perimeter)
    assert f1.z == pytest.approx(f0.z, abs=1e-12)


@pytest.mark.parametrize("name", ["circle", "ellipse", "cardioidal", "trefoil"])
def test_frame_identities(contours, name):
    c = contours[name]
    s = np.linspace(0, c.perimeter, 200, endpoint=False)
    f = frame_at(c, s)
    assert np.allclose(np.abs(f.tau), 1, atol=1e-14)
    assert np.allclose(np.abs(f.nu), 1, atol=1e-14)
    assert np.allclose(f.tau, 1j * f.nu, atol=1e-15)
    assert np.max(np.abs((f.tau * np.conj(f.nu)).real)) < 1e-14


@pytest.mark.parametrize("name", ["circle", "ellipse", "cardioidal", "trefoil"])
def test_total_turning(contours, name):
    c = contours[name]
    n = 512
    s = c.perimeter * np.arange(n) / n
    total = frame_at(c, s).k.sum() * c.perimeter / n
    assert total == pytest.approx(2 * np.pi, rel=1e-10)


@pytest.mark.parametrize("name", ["circle", "ellipse", "cardioidal", "trefoil"])
def test_curvature_is_turning_rate(contours, name):
    c = contours[name]
    s = np.linspace(0, c.perimeter, 50, endpoint=False)
    h = 1e-5
    th_p = np.angle(frame_at(c, s + h).tau)
    th_m = np.angle(frame_at(c, s - h).tau)
    dtheta = np.angle(np.exp(1j * (th_p - th_m))) / (2 * h)
    assert np.allclose(dtheta, frame_at(c, s).k, rtol=1e-6, atol=1e-6)


@pytest.mark.parametrize("name", ["circle", "ellipse", "cardioidal", "trefoil"])
def test_second_order_displacement_has_cubic_remainder(contours, name):
    c = contours[name]
    s = np.linspace(0, c.perimeter, 16, endpoint=False)
    f = frame_at(c, s)
    rem = []
    hs = np.array([0.04, 0.02, 0.01, 0.005])
    for h in hs:
        z1 = frame_at(c, s + h).z
        rem.append(np.max(np.abs(z1 - f.z - f.tau * h + 0.5 * f.nu * f.k * h * h)))
    slopes = np.diff(np.log(rem)) / np.diff(np.log(hs))
    assert np.all(slopes > 2.8)
    assert np.max(np.array(rem) / hs**3) < 50


@pytest.mark.parametrize("name", ["ellipse", "cardioidal", "trefoil"])
def test_arclength_round_trip(contours, name):
    c = contours[name]
    u = np.linspace(0, 2 * np.pi, 1000, endpoint=False)
    assert np.max(np.abs(c.u_of_s(c.s_of_u(u)) - u)) * c.perimeter < 1e-10 * c.perimeter
    s = np.linspace(0, c.perimeter, 1000, endpoint=False)
    assert np.max(np.abs(c.s_of_u(c.u_of_s(s)) - s)) < 1e-10 * c.perimeter


def test_arclength_table_monotone(ellipse):
    u = np.linspace(0, 2 * np.pi, 4001)
    s = ellipse.s_of_u(u)
    assert s[0] == pytest.approx(0, abs=1e-14)
    assert s[-1] == pytest.approx(ellipse.perimeter, rel=1e-14)
    assert np.all(np.diff(s) > 0)


def test_clockwise_input_is_reoriented():
    spec = ContourSpec.fourier({-1: 1.0})
    assert spec.signed_area() > 0
    c = build_contour(spec)
    assert frame_at(c, 0.0).k == pytest.approx(1.0)


def test_self_intersection_is_reported_with_location():
    with pytest.raises(ContourError, match="self-intersecting near u ="):
        build_contour(ContourSpec.fourier({1: 1.0, 3: 0.6}))


def test_degenerate_parametrization_rejected():
    # z = e^{iu} + e^{2iu}/2 has z'(pi) = 0 (cusp)
    with pytest.raises(ContourError, match="u = 3.14"):
        build_contour(ContourSpec.fourier({1: 1.0, 2: 0.5}))


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        build_contour(ContourSpec.circle(0, 1), grid_size=32)


def test_preset_validation():
    with pytest.raises(ContourError):
        ContourSpec.circle(0, -1)
    with pytest.raises(ContourError):
        ContourSpec.ellipse(1, 0)


@settings(max_examples=25, deadline=None)
@given(radius=st.floats(0.2, 5.0), cx=st.floats(-3, 3), cy=st.floats(-3, 3))
def test_circle_family_perimeter_and_curvature(radius, cx, cy):
    c = build_contour(ContourSpec.circle(complex(cx, cy), radius), grid_size=128)
    assert c.perimeter == pytest.approx(2 * np.pi * radius, rel=1e-12)
    assert frame_at(c, 0.37 * c.perimeter).k == pytest.approx(1 / radius, rel=1e-10)


@settings(max_examples=20, deadline=None)
@given(eps=st.floats(-0.2, 0.2), mode=st.sampled_from([-3, -2, 2, 3, 4]), lam=st.floats(0.5, 3.0))
def test_scaling_covariance(eps, mode, lam):
    spec = ContourSpec.fourier({1: 1.0, mode: eps})
    c = build_contour(spec, grid_size=256)
    cs = build_contour(spec.scaled(lam), grid_size=256)
    assert cs.perimeter == pytest.approx(lam * c.perimeter, rel=1e-12)
    s = 0.21 * c.perimeter
    assert frame_at(cs, lam * s).k == pytest.approx(frame_at(c, s).k / lam, rel=1e-8)
