import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbifold_yamabe.geometry import (
    Coordinate,
    DomainError,
    Endpoint,
    Kind,
    RadialGeometry,
    coord_transform,
    delta_t_closed_form,
    metric_coeffs,
    numeric_scalar_curvature,
    radial_laplacian,
    scalar_curvature,
    volume_density,
)


def test_lebrun_ale_coefficients():
    m = metric_coeffs(RadialGeometry.lebrun_ale(2), 1.0)
    assert m.coeff_radial == pytest.approx(2 / 3, rel=1e-15)
    assert m.coeff_s12 == pytest.approx(2.0, rel=1e-15)
    assert m.coeff_s3 == pytest.approx(1.5, rel=1e-15)
    m = metric_coeffs(RadialGeometry.lebrun_ale(1), 1.0)
    assert (m.coeff_radial, m.coeff_s12, m.coeff_s3) == pytest.approx((1.0, 2.0, 1.0), rel=1e-15)


def test_compact_s_coefficient():
    m = metric_coeffs(RadialGeometry.lebrun_compact(2, "s"), 1.0)
    assert m.coeff_radial == pytest.approx(2 / 27, rel=1e-14)


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_conformal_relation(n):
    r = np.geomspace(0.05, 40, 30)
    ale = metric_coeffs(RadialGeometry.lebrun_ale(n), r)
    cpt = metric_coeffs(RadialGeometry.lebrun_compact(n, "hat_r"), r)
    w = (n + r * r) ** 2
    for a, b in [(ale.coeff_radial, cpt.coeff_radial), (ale.coeff_s12, cpt.coeff_s12), (ale.coeff_s3, cpt.coeff_s3)]:
        np.testing.assert_allclose(a, w * b, rtol=1e-14)


def test_coefficients_positive_in_every_coordinate():
    for kind in (Kind.LEBRUN_ALE, Kind.LEBRUN_COMPACT):
        for c in ("hat_r", "s", "t"):
            hi = 30.0 if c == "t" else 1e3
            m = metric_coeffs(RadialGeometry(kind, 3, Coordinate(c)), np.geomspace(1e-3, hi, 50))
            assert np.all(m.coeff_radial > 0) and np.all(m.coeff_s12 > 0) and np.all(m.coeff_s3 > 0)


def test_coord_transform_examples():
    assert coord_transform(RadialGeometry.lebrun_compact(2), 1.0, "s", "t") == pytest.approx(math.log(3), rel=1e-15)
    assert coord_transform(RadialGeometry.lebrun_compact(5), 0.0, "s", "t") == 0.0
    assert coord_transform(RadialGeometry.lebrun_compact(3), math.log(4), "t", "s") == pytest.approx(1.0, rel=1e-14)
    assert coord_transform(RadialGeometry.lebrun_compact(3), 2.5, "s", "s") == 2.5


@pytest.mark.parametrize("n", [1, 2, 7])
def test_round_trips(n):
    g = RadialGeometry.lebrun_ale(n)
    vals = np.geomspace(1e-6, 1e6, 1000)
    for a, b in [("s", "t"), ("hat_r", "t"), ("hat_r", "s")]:
        back = coord_transform(g, coord_transform(g, vals, a, b), b, a)
        np.testing.assert_allclose(back, vals, rtol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-8, 1e8), st.integers(1, 12))
def test_round_trip_property(x, n):
    g = RadialGeometry.lebrun_compact(n)
    t = coord_transform(g, x, "s", "t")
    assert coord_transform(g, t, "t", "s") == pytest.approx(x, rel=1e-12)


def test_transform_rejects_negative_and_football():
    with pytest.raises(DomainError):
        coord_transform(RadialGeometry.lebrun_ale(2), -1.0, "s", "t")
    with pytest.raises(ValueError):
        coord_transform(RadialGeometry.football(), 1.0, "theta", "s")


def test_domain_errors_name_endpoint():
    with pytest.raises(DomainError, match="orbifold-point"):
        metric_coeffs(RadialGeometry.lebrun_compact(2, "s"), 0.0)
    with pytest.raises(DomainError, match="regular-center"):
        metric_coeffs(RadialGeometry.lebrun_ale(2), 0.0)
    with pytest.raises(DomainError):
        metric_coeffs(RadialGeometry.football(), math.pi)


def test_endpoints():
    assert RadialGeometry.lebrun_compact(3, "s").endpoints == (Endpoint.ORBIFOLD_POINT, Endpoint.REGULAR_CENTER)
    assert RadialGeometry.lebrun_ale(3).endpoints == (Endpoint.REGULAR_CENTER, Endpoint.ALE_END)


def test_invalid_geometry():
    with pytest.raises(ValueError):
        RadialGeometry(Kind.LEBRUN_ALE, 0)
    with pytest.raises(ValueError):
        RadialGeometry(Kind.FOOTBALL, 2, Coordinate.S)


def test_scalar_curvature_examples():
    assert scalar_curvature(RadialGeometry.lebrun_compact(1, "hat_r"), 0.0) == pytest.approx(24.0)
    assert scalar_curvature(RadialGeometry.football(), 0.7) == 12.0
    for r in [0.1, 1.0, 7.0, 50.0]:
        assert abs(scalar_curvature(RadialGeometry.lebrun_ale(3), r)) < 1e-6


@pytest.mark.parametrize("n", [1, 2, 3, 5])
@pytest.mark.parametrize("coord", ["hat_r", "s", "t"])
def test_numeric_curvature_matches_closed_form(n, coord):
    g = RadialGeometry.lebrun_compact(n, coord)
    # the t chart compresses the regular center into e^-t sized coefficients
    pts = np.geomspace(0.01, 8.0 if coord == "t" else 100.0, 50)
    for x in pts:
        exact = scalar_curvature(g, x)
        assert numeric_scalar_curvature(g, x) == pytest.approx(exact, rel=1e-6)


def test_numeric_curvature_examples():
    g = RadialGeometry.lebrun_compact(2, "hat_r")
    assert numeric_scalar_curvature(g, 1.0, 1e-4) == pytest.approx(scalar_curvature(g, 1.0), rel=1e-6)
    assert abs(numeric_scalar_curvature(RadialGeometry.lebrun_ale(3), 2.0, 1e-4)) < 1e-6
    assert numeric_scalar_curvature(RadialGeometry.football(), math.pi / 2, 1e-4) == pytest.approx(12.0, abs=1e-6)


def test_numeric_curvature_step_validation():
    with pytest.raises(ValueError):
        numeric_scalar_curvature(RadialGeometry.football(), 1.0, 0.5)


def test_volume_density():
    th = np.linspace(0.1, 3.0, 7)
    np.testing.assert_allclose(volume_density(RadialGeometry.football(), th), np.sin(th) ** 3, rtol=1e-14)
    r = 1e4
    assert volume_density(RadialGeometry.lebrun_ale(3), r) / r**3 == pytest.approx(1.0, abs=1e-6)
    s = 1e-4
    assert volume_density(RadialGeometry.lebrun_compact(3, "s"), s) / s**3 == pytest.approx(1.0, abs=1e-6)


def test_radial_laplacian_examples():
    g = RadialGeometry.lebrun_ale(2, "t")
    assert abs(radial_laplacian(g, lambda t: t, 1.3)) < 1e-8
    f = RadialGeometry.football()
    assert radial_laplacian(f, math.cos, 1.0) == pytest.approx(-4 * math.cos(1.0), rel=1e-8)
    assert radial_laplacian(RadialGeometry.lebrun_ale(1), lambda r: r * r, 1.0) == pytest.approx(6.0, rel=1e-8)


@pytest.mark.parametrize("n", [1, 2, 4])
def test_laplacian_in_t_matches_closed_form(n):
    g = RadialGeometry.lebrun_ale(n, "t")
    for t in [0.3, 1.0, 2.5]:
        lap = radial_laplacian(g, lambda x: math.sin(x) + x * x, t)
        closed = delta_t_closed_form(n, t) * (-math.sin(t) + 2.0)
        assert lap == pytest.approx(closed, rel=1e-7)


def test_radial_laplacian_on_samples():
    f = RadialGeometry.football()
    grid = np.linspace(0.5, 1.5, 201)
    assert radial_laplacian(f, (grid, np.cos(grid)), 1.0) == pytest.approx(-4 * math.cos(1.0), rel=1e-7)
    with pytest.raises(DomainError):
        radial_laplacian(f, (grid, np.cos(grid)), 0.5)
