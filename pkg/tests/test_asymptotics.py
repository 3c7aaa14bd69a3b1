import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from orbifold_yamabe.asymptotics import (
    MassFitError,
    RadialMetricField,
    adm_mass,
    cartesian_metric_components,
    conformal_blowup,
    euclidean_field,
    extrapolate_flux,
    green_function_radial,
    lebrun_ale_field,
    mass_flux,
    mass_regular_term_check,
    s3_quadrature,
)
from orbifold_yamabe.geometry import RadialGeometry, metric_coeffs


def exact_flux(n, r):
    """Closed-form flux of the LeBrun metric at radius r (hand expansion of the divergence)."""
    r2 = r * r
    return -3 * (n - 1) * r2 / (n + r2) + 2 - (n - 1) * r2 / (1 + r2) + 2 * (n - 1) * r2 * r2 / (1 + r2) ** 2


def test_quadrature_weights_and_moments():
    pts, w = s3_quadrature(16)
    assert w.sum() == pytest.approx(2 * math.pi**2, rel=1e-13)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, rtol=1e-14)
    # int x_i x_j = delta_ij Vol/4
    M = np.einsum("n,ni,nj->ij", w, pts, pts)
    np.testing.assert_allclose(M, np.eye(4) * math.pi**2 / 2, atol=1e-12)


def test_euclidean_components_identity():
    z = np.array([[3.0, -1.0, 2.0, 0.5], [0.0, 0.0, 0.0, 7.0]])
    np.testing.assert_allclose(cartesian_metric_components(euclidean_field(), z), np.broadcast_to(np.eye(4), (2, 4, 4)),
                               atol=1e-14)


def test_lebrun_components():
    g1 = cartesian_metric_components(lebrun_ale_field(1), np.array([1e3, 0, 0, 0]))
    assert np.max(np.abs(g1 - np.eye(4))) < 5e-6
    rng = np.random.default_rng(1)
    z = rng.normal(size=4)
    z *= 10 / np.linalg.norm(z)
    g = cartesian_metric_components(RadialGeometry.lebrun_ale(3), z)
    np.testing.assert_allclose(g, g.T, atol=1e-15)
    assert np.all(np.linalg.eigvalsh(g) > 0)
    assert np.linalg.norm(g - np.eye(4), 2) <= 0.1


def test_components_reproduce_radial_form():
    n, r = 3, 8.0
    z = np.array([1.0, 2.0, -2.0, 4.0])
    z *= r / np.linalg.norm(z)
    g = cartesian_metric_components(lebrun_ale_field(n), z)
    m = metric_coeffs(RadialGeometry.lebrun_ale(n), r)
    nu = z / r
    hopf = np.array([-nu[1], nu[0], -nu[3], nu[2]])
    assert nu @ g @ nu == pytest.approx(m.coeff_radial, rel=1e-14)
    assert hopf @ g @ hopf == pytest.approx(m.coeff_s3 / r**2, rel=1e-14)


def test_chart_radius_enforced():
    with pytest.raises(ValueError):
        cartesian_metric_components(lebrun_ale_field(2), np.array([1.0, 0, 0, 0]))


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_flux_matches_closed_form(n):
    for r in [20.0, 60.0]:
        assert mass_flux(lebrun_ale_field(n), r, nodes=16) == pytest.approx(exact_flux(n, r), abs=1e-8)


def test_euclidean_flux_zero():
    est = adm_mass(euclidean_field(), radii=[10, 20, 40], nodes=8)
    assert max(abs(f) for f in est.flux) < 1e-10
    assert abs(est.extrapolated) < 1e-10


@pytest.fixture(scope="module")
def masses():
    return {n: adm_mass(RadialGeometry.lebrun_ale(n), nodes=16) for n in (1, 2, 3, 4)}


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_mass_values(masses, n):
    est = masses[n]
    expected = -2.0 * (n - 2)
    assert est.extrapolated == pytest.approx(expected, abs=max(0.01 * abs(expected), 0.02 if n == 2 else 0))
    assert est.converged
    assert est.secondary_extrapolated == pytest.approx(expected, abs=1e-3)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_convergence_order(masses, n):
    assert 1.7 <= masses[n].convergence_order() <= 2.3


def test_rotation_invariance():
    rot = Rotation.random(random_state=3).as_matrix()
    R4 = np.eye(4)
    R4[1:, 1:] = rot
    a = mass_flux(lebrun_ale_field(3), 40.0, nodes=16)
    b = mass_flux(lebrun_ale_field(3), 40.0, nodes=16, rotation=R4)
    assert a == pytest.approx(b, abs=1e-9)


def test_mass_serialization(masses, tmp_path):
    est = masses[3]
    text = est.to_csv(tmp_path / "m.csv")
    assert text.splitlines()[0] == "r,flux,residual"
    assert len(text.splitlines()) == len(est.radii) + 1
    assert (tmp_path / "m.csv").read_bytes().count(b"\r") == 0
    assert '"extrapolated"' in est.to_json()


def test_bad_fit_reported():
    noisy = RadialMetricField(lambda r: (1 + np.sin(r) / r, r * r, r * r), 5.0, "noisy")
    est = adm_mass(noisy, radii=[10, 20, 30, 40], nodes=8, tolerance=1e-6)
    assert not est.converged
    with pytest.raises(MassFitError):
        adm_mass(noisy, radii=[10, 20, 30, 40], nodes=8, tolerance=1e-6, strict=True)


def test_extrapolation_recovers_model():
    r = np.array([10.0, 20.0, 40.0, 80.0])
    m, c, resid, second = extrapolate_flux(r, 3.0 - 5.0 / r**2)
    assert (m, c) == pytest.approx((3.0, -5.0), rel=1e-12)
    assert resid < 1e-12


@pytest.fixture(scope="module")
def greens():
    return {n: green_function_radial(RadialGeometry.lebrun_compact(n)) for n in (1, 2, 3, 5)}


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_green_function_exact(greens, n):
    g = greens[n]
    s = np.geomspace(0.01, 100, 400)
    exact = s**-2 + n
    np.testing.assert_allclose(g(s), exact, rtol=1e-8)
    assert g.regular_term_s == pytest.approx(n, abs=1e-8)
    assert g.leading_coefficient == pytest.approx(1.0, abs=1e-8)
    assert np.all(g.samples > 0)


def test_green_examples(greens):
    assert greens[2](1.0) == pytest.approx(3.0, abs=1e-8)
    assert greens[1].regular_term_s == pytest.approx(1.0, abs=1e-8)


def test_green_rejects_ale():
    with pytest.raises(ValueError):
        green_function_radial(RadialGeometry.lebrun_ale(2))


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_blowup_reproduces_ale(greens, n):
    field = conformal_blowup(RadialGeometry.lebrun_compact(n), greens[n])
    r = np.geomspace(0.1, 50, 40)
    A, B, C = field.coeffs(r)
    m = metric_coeffs(RadialGeometry.lebrun_ale(n), r)
    np.testing.assert_allclose(A, m.coeff_radial, rtol=1e-8)
    np.testing.assert_allclose(B, m.coeff_s12, rtol=1e-8)
    np.testing.assert_allclose(C, m.coeff_s3, rtol=1e-8)


def test_blowup_of_flat_cone_is_euclidean():
    # flat metric in s around the point: ds^2 + s^2 g_S3, psi = s^-2
    flat = lambda s: (np.ones_like(s), s * s, s * s)  # noqa: E731
    field = conformal_blowup(flat, lambda s: s**-2.0)
    r = np.geomspace(0.5, 50, 10)
    A, B, C = field.coeffs(r)
    np.testing.assert_allclose(A, 1.0, rtol=1e-14)
    np.testing.assert_allclose(B, r * r, rtol=1e-14)
    np.testing.assert_allclose(C, r * r, rtol=1e-14)


def test_mass_regular_term_check_n1():
    chk = mass_regular_term_check(RadialGeometry.lebrun_compact(1), nodes=16)
    assert chk.mass == pytest.approx(2.0, rel=0.02)
    assert chk.implied_A == pytest.approx(1 / 6, rel=0.02)
    # the s-coordinate constant term is not A
    assert chk.regular_term_s == pytest.approx(1.0, abs=1e-8)
