import math

import numpy as np
import pytest

from orbifold_yamabe import solver as sv
from orbifold_yamabe.geometry import Coordinate, Kind, RadialGeometry
from orbifold_yamabe.kfamily import bump, constant, make_K_minus, rational_decay


@pytest.fixture(scope="module")
def n1_solution():
    return sv.solve_bvp(RadialGeometry.lebrun_compact(1), constant(1.0), 3.0)


def test_wall_classification():
    assert sv.classify_wall(constant(1.0), 1).label is sv.WallLabel.PLUS
    assert sv.classify_wall(constant(1.0), 2).label is sv.WallLabel.ZERO
    w = sv.classify_wall(constant(1.0), 3)
    assert w.label is sv.WallLabel.MINUS and w.margin == -1.0
    # K_a = 1 + a exp(-s^2): K''(0)/K(0) = -2a/(1+a)
    a = -0.5
    assert sv.classify_wall(bump(a), 3).margin == pytest.approx(-2 * a / (1 + a) - 1)


def test_weight_and_u_from_v():
    t = np.array([0.5, 1.0, 3.0])
    e = np.exp(-t)
    np.testing.assert_allclose(sv.lebrun_weight(2, t), e * (1 + e) / (4 * (1 - e) ** 3), rtol=1e-14)
    s = sv.s_of_t(3, t)
    np.testing.assert_allclose(np.log1p(3 * s * s), t, rtol=1e-14)
    # u = v (n + s^-2)
    np.testing.assert_allclose(sv.u_from_v(3, t, 1.0), 3 + s**-2, rtol=1e-13)


def test_rhs_validation():
    geom = RadialGeometry.lebrun_compact(2, "t")
    with pytest.raises(ValueError):
        sv.ode_rhs(geom, constant(), 3.5, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        sv.ode_rhs(geom, constant(), 3.0, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        sv.ode_rhs(RadialGeometry.lebrun_ale(2), constant(), 2.5, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        sv.ode_rhs(RadialGeometry.football(1), constant(), 3.0, math.pi, 1.0, 0.0)


def test_football_constant_solution():
    sol = sv.solve_bvp(RadialGeometry.football(1), constant(2.0), 3.0)
    assert sol.accepted
    np.testing.assert_allclose(sol.u_values, 1.0, atol=1e-12)
    assert sol.residual_sup <= 1e-9
    assert sol.coordinate is Coordinate.THETA


@pytest.mark.parametrize("c,p", [(1.0, 2.0), (4.0, 3.0), (0.5, 2.5)])
def test_football_constant_scaling(c, p):
    sol = sv.solve_bvp(RadialGeometry.football(1), constant(c), p)
    np.testing.assert_allclose(sol.u_values, (2.0 / c) ** (1.0 / (p - 1.0)), rtol=1e-8)


def test_n1_constant_solution(n1_solution):
    sol = n1_solution
    assert sol.accepted
    # R/6 = 4 for n = 1, so u = 2 solves -Delta u + 4u = u^3
    np.testing.assert_allclose(sol.u_values, 2.0, rtol=1e-8)
    assert sol.shooting_parameter == pytest.approx(2.0, rel=1e-8)
    assert sol.seam_jump < 1e-6
    assert np.all(sol.u_values > 0)


def test_solution_accessors(n1_solution, tmp_path):
    sol = n1_solution
    s = np.array([0.0, 0.1, 1.0, 10.0])
    np.testing.assert_allclose(sol.u_of_s(s), 2.0, rtol=1e-8)
    np.testing.assert_allclose(sol.du_of_s(s[1:]), 0.0, atol=1e-6)
    with pytest.raises(ValueError):
        sol.u(sol.grid[-1] + 1.0)
    text = sol.to_csv(tmp_path / "sol.csv")
    assert text.splitlines()[0] == "coordinate,t,s,u,v,residual"
    assert len(text.splitlines()) == len(sol.grid) + 1
    meta = sol.metadata()
    assert meta["classification"] == "accepted" and meta["p"] == 3.0


def test_ale_geometry_uses_compact_form():
    sol = sv.solve_bvp(RadialGeometry.lebrun_ale(1), constant(1.0), 3.0)
    assert sol.geom.kind is Kind.LEBRUN_COMPACT
    assert sol.max_u == pytest.approx(2.0, rel=1e-8)


def test_subcritical_n1_constant():
    p = 2.0
    sol = sv.solve_bvp(RadialGeometry.lebrun_compact(1), constant(1.0), p)
    np.testing.assert_allclose(sol.u_values, 4.0 ** (1 / (p - 1)), rtol=1e-8)


@pytest.mark.parametrize("K", [constant(1.0), make_K_minus(3, rational_decay(1.0)),
                               make_K_minus(3, bump(0.5))], ids=["const", "kminus-decay", "kminus-bump"])
def test_n3_nonexistence_scan(K):
    geom = RadialGeometry.lebrun_compact(3)
    sc = sv.scan(geom, K, 3.0, sv.default_parameters(geom))
    assert len(sc.parameters) == 200
    assert sc.brackets == []
    assert set(sc.terminations()) <= {"zero-crossing", "divergence"}
    with pytest.raises(sv.NotFound) as info:
        sv.solve_bvp(geom, K, 3.0)
    assert info.value.scan is not None


def test_on_wall_family_has_no_confirmed_bracket():
    # constant inner family: margin exactly 0, the terminal slope decays to roundoff at large slopes
    geom = RadialGeometry.lebrun_compact(3)
    K = make_K_minus(3, constant(1.0))
    assert sv.classify_wall(K, 3).label is sv.WallLabel.ZERO
    sc = sv.scan(geom, K, 3.0, sv.default_parameters(geom))
    assert sc.brackets == []
    assert set(sc.terminations()) <= {"zero-crossing", "divergence", "undetermined"}


def test_shoot_matches_scan():
    geom = RadialGeometry.lebrun_compact(1)
    sc = sv.scan(geom, constant(1.0), 3.0, [0.5, 5.0])
    for i, a in enumerate([0.5, 5.0]):
        shot = sv.shoot(geom, constant(1.0), 3.0, a)
        assert shot.shooting_function == pytest.approx(sc.shooting_function[i], rel=1e-6, abs=1e-12)
    # below the constant solution the slope stays positive, above it u crosses zero
    assert sc.shooting_function[0] > 0 and sc.crossed[1]


def test_scan_rejects_bad_parameters():
    with pytest.raises(ValueError):
        sv.scan(RadialGeometry.lebrun_compact(1), constant(), 3.0, [-1.0, 1.0])
    with pytest.raises(ValueError):
        sv.multi_start_count(RadialGeometry.lebrun_compact(1), constant(), 3.0, np.geomspace(0.1, 10, 50))


def test_multi_start_count_plus_side():
    geom = RadialGeometry.lebrun_compact(3)
    count, sols, sc = sv.multi_start_count(geom, bump(-0.6), 3.0)
    assert sv.classify_wall(bump(-0.6), 3).margin > 0
    assert count >= 1
    assert all(s.accepted for s in sols)


def test_football_bump_obstruction():
    # Kazdan-Warner type obstruction for a monotone rotationally symmetric K at the critical exponent
    with pytest.raises(sv.NotFound):
        sv.solve_bvp(RadialGeometry.football(1), bump(0.5, base=1.0, width=1.0), 3.0)


def test_continuation_n1():
    cont = sv.continuation_in_p(RadialGeometry.lebrun_compact(1), constant(1.0), np.linspace(2.0, 3.0, 6))
    assert not cont.failures
    assert cont.classification == "compact"
    np.testing.assert_allclose(cont.max_u, [4.0 ** (1 / (p - 1)) for p in cont.p_values], rtol=1e-7)
    assert cont.to_dict()["classification"] == "compact"


def test_continuation_rejects_bad_grid():
    with pytest.raises(ValueError):
        sv.continuation_in_p(RadialGeometry.lebrun_compact(1), constant(), [3.0, 2.0])
    with pytest.raises(ValueError):
        sv.continuation_in_p(RadialGeometry.lebrun_compact(1), constant(), [2.0, 3.5])


def test_continuation_classification_rules():
    grow = sv.ContinuationResult([2.0, 2.5, 2.9], [None] * 3, [1.0, 5.0, 20.0], [0.0] * 3, [])
    assert grow.monotone and grow.classification == "blow-up evidence"
    flat = sv.ContinuationResult([2.0, 2.5], [None] * 2, [2.0, 3.0], [0.0] * 2, [])
    assert flat.classification == "compact"
    broken = sv.ContinuationResult([2.0, 2.5], [None] * 2, [2.0, math.nan], [0.0, math.nan], [2.5])
    assert broken.classification == "inconclusive"


def test_transform_forms_agree():
    rng = np.random.default_rng(0)
    t = np.linspace(0.05, 8.0, 200)
    for n in (1, 3, 5):
        w = rng.uniform(0.1, 1.0) * np.tanh(t)
        w2 = -2 * np.tanh(t) / np.cosh(t) ** 2 * (w[-1] / np.tanh(t[-1]))
        kn = 1.0 + 0.3 * np.exp(-t)
        r1 = sv.residual_on_form(n, t, w, w2, kn)
        r2 = sv.residual_o2_form(t, w, w2, sv.k2_from_kn(n, t, kn))
        r3 = sv.residual_split_form(n, t, w, w2, kn)
        np.testing.assert_allclose(r2, r1, rtol=1e-12)
        np.testing.assert_allclose(r3, r1, rtol=1e-12)


def test_transform_solution():
    K = bump(0.5)
    sol = sv.solve_bvp(RadialGeometry.lebrun_compact(1), K, 3.0)
    tr = sv.transform_n_to_2(sol, K)
    assert tr.residual_in <= sv.RESIDUAL_TOL * sol.residual_scale
    assert tr.residual_out == pytest.approx(tr.residual_in, rel=1e-6, abs=1e-14)
    # K_2 at the orbifold point: (n/2) K_n(0)
    assert tr.k2(0.0) == pytest.approx(0.5 * K.at_zero)
    with pytest.raises(ValueError):
        sv.transform_n_to_2(sv.solve_bvp(RadialGeometry.football(1), constant(2.0), 3.0), K)
