import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contour_dyson.conformal import (ConformalPair, cache_path, conjugate, dtn, eval_psi,
                                     fourier_eval, solve_maps)
from contour_dyson.errors import ContourError
from contour_dyson.geometry import ContourSpec, build_contour

ZOO_NAMES = ["circle", "ellipse", "cardioidal", "offset_circle", "trefoil"]


def test_spectral_helpers_on_modes():
    phi = 2 * np.pi * np.arange(64) / 64
    for m in (1, 3, 17):
        assert np.allclose(conjugate(np.cos(m * phi)), np.sin(m * phi), atol=1e-13)
        assert np.allclose(dtn(np.cos(m * phi)), m * np.cos(m * phi), atol=1e-12)
    v = np.cos(3 * phi) + 0.5 * np.sin(phi)
    assert fourier_eval(v, 0.123) == pytest.approx(np.cos(0.369) + 0.5 * np.sin(0.123), abs=1e-13)


@pytest.mark.parametrize("radius", [0.5, 1.0, 3.0])
def test_centered_circle(radius):
    c = build_contour(ContourSpec.circle(0, radius))
    pair = solve_maps(c, modes=64)
    assert pair.r == pytest.approx(radius, rel=1e-12)
    assert pair.w_int_derivative_at_zero == pytest.approx(1 / radius, rel=1e-12)
    assert np.allclose(pair.u_int, pair.phi, atol=1e-12)
    assert np.allclose(pair.u_ext, pair.phi, atol=1e-12)


def test_ellipse_conformal_radius(pairs):
    assert pairs["ellipse"].r == pytest.approx(1.5, rel=1e-12)


def test_ellipse_exterior_is_joukowski(pairs):
    # z = 1.5 w + 0.5 / w maps |w| > 1 onto the exterior of the (2, 1) ellipse
    pair = pairs["ellipse"]
    w = np.exp(1j * pair.phi)
    z = pair.contour.spec.z(pair.u_ext)
    assert np.max(np.abs(z - (1.5 * w + 0.5 / w))) < 1e-11


def test_polynomial_curve_interior_map(pairs):
    # the curve is the image of the circle under w + 0.1 w^2
    pair = pairs["cardioidal"]
    assert pair.w_int_derivative_at_zero == pytest.approx(1.0, abs=1e-8)
    a = pair.interior_series()
    assert a[1] == pytest.approx(1.0, abs=1e-12)
    assert a[2] == pytest.approx(0.1, abs=1e-12)
    assert np.allclose(pair.u_int, pair.phi, atol=1e-10)


def test_offset_circle_maps(pairs):
    c = 0.3 + 0.2j
    pair = pairs["offset_circle"]
    assert pair.r == pytest.approx(1.0, rel=1e-12)
    assert pair.w_int_derivative_at_zero == pytest.approx(1 / (1 - abs(c) ** 2), rel=1e-10)


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_correspondences_are_monotone(pairs, name):
    pair = pairs[name]
    assert np.all(pair.int_map.derivative > 0)
    assert np.all(pair.ext_map.derivative > 0)
    for u in (pair.u_int, pair.u_ext):
        assert np.all(np.diff(u) > 0)
        assert u[-1] - u[0] < 2 * np.pi


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_maps_land_on_unit_circle(pairs, name):
    pair = pairs[name]
    z = pair.contour.spec.z(pair.u_int)
    w = np.exp(1j * pair.phi)
    assert np.max(np.abs(pair.interior_inverse(w) - z)) < 1e-10
    ze = pair.contour.spec.z(pair.u_ext)
    assert np.max(np.abs(pair.exterior_inverse(w) - ze)) < 1e-10
    # points strictly inside the disk land inside the contour
    inner = pair.interior_inverse(0.5 * w)
    assert np.all(np.abs(inner) < np.abs(pair.interior_inverse(w)))


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_correspondence_inverse(pairs, name):
    pair = pairs[name]
    u = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    assert np.allclose(pair.int_map(pair.arg_w_int(u)), u, atol=1e-12)
    assert np.allclose(pair.ext_map(pair.arg_w_ext(u)), u, atol=1e-12)


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_psi_mean_values(pairs, name):
    psi = eval_psi(pairs[name])
    # psi is harmonic, so its uniformized boundary mean is its value at the centre
    assert psi.psi_int.mean() == pytest.approx(psi.psi_int_at_zero, abs=1e-10)
    assert psi.psi_ext.mean() == pytest.approx(psi.psi_ext_at_infinity, abs=1e-10)


@pytest.mark.parametrize("name", ZOO_NAMES)
def test_psi_ext_from_series_derivative(pairs, name):
    # psi_ext = -log|g'(w)| on |w| = 1 with g the inverse exterior map
    pair = pairs[name]
    psi = eval_psi(pair)
    phi = pair.phi[::16]
    w = np.exp(1j * phi)
    h = 1e-5
    gp = (pair.exterior_inverse(w * np.exp(1j * h)) - pair.exterior_inverse(w * np.exp(-1j * h))) / (2j * h * w)
    assert np.allclose(psi.psi_ext[::16], -np.log(np.abs(gp)), atol=1e-7)
    a = pair.interior_series()
    m = np.arange(1, pair.n // 2)
    fp = np.polynomial.polynomial.polyval(w, m * a[1:pair.n // 2])
    assert np.allclose(psi.psi_int[::16], -np.log(np.abs(fp)), atol=1e-9)


def test_psi_constant_on_circle(pairs):
    psi = eval_psi(pairs["circle"])
    assert np.allclose(psi.psi_int, 0, atol=1e-12)
    assert np.allclose(psi.dn_psi_int, 0, atol=1e-10)


def test_mode_doubling_for_ellipse(pairs):
    pair = pairs["ellipse"]
    assert pair.n > pair.defects["requested_modes"]
    assert pair.defects["interior_tail"] <= 1e-13


def test_cache_round_trip(tmp_path, pairs, ellipse):
    pair = pairs["ellipse"]
    path = cache_path(tmp_path, ellipse, pair.defects["requested_modes"])
    pair.save(path)
    back = ConformalPair.load(path, ellipse)
    assert np.array_equal(back.u_int, pair.u_int)
    assert np.array_equal(back.u_ext, pair.u_ext)
    assert back.r == pair.r
    assert back.log_lead_int == pair.log_lead_int


def test_cache_rejects_other_contour(tmp_path, pairs, contours):
    path = tmp_path / "maps.json"
    pairs["ellipse"].save(path)
    with pytest.raises(ValueError, match="different contour"):
        ConformalPair.load(path, contours["trefoil"])


def test_non_star_shaped_curve_is_rejected():
    c = build_contour(ContourSpec.fourier({0: 0.4 + 0.3j, 1: 1.0, 2: 0.45}))
    with pytest.raises(ContourError, match="star-shaped"):
        solve_maps(c)


def test_origin_outside_is_rejected():
    c = build_contour(ContourSpec.circle(3, 1))
    with pytest.raises(ContourError):
        solve_maps(c, modes=64)


@settings(max_examples=10, deadline=None)
@given(eps=st.floats(-0.12, 0.12), mode=st.sampled_from([2, 3]), lam=st.floats(0.5, 2.0))
def test_scaling_covariance(eps, mode, lam):
    spec = ContourSpec.fourier({1: 1.0, mode: eps})
    a = solve_maps(build_contour(spec, grid_size=256), modes=128)
    b = solve_maps(build_contour(spec.scaled(lam), grid_size=256), modes=128)
    assert b.r == pytest.approx(lam * a.r, rel=1e-10)
    assert b.w_int_derivative_at_zero == pytest.approx(a.w_int_derivative_at_zero / lam, rel=1e-10)
    assert np.allclose(a.u_int, b.u_int, atol=1e-10)


def test_mode_doubling_is_scale_invariant():
    spec = ContourSpec.fourier({1: 1.0, 3: 0.068359375})
    a = solve_maps(build_contour(spec, grid_size=256), modes=128)
    for lam in (0.5, 2.0):
        b = solve_maps(build_contour(spec.scaled(lam), grid_size=256), modes=128)
        assert b.n == a.n
