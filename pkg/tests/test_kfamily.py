import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orbifold_yamabe.kfamily import KFamily, KFamilyError, bump, constant, make_K_minus, rational_decay


def _num_d2(K, h=1e-4):
    return (K.value(2 * h) - 2 * K.value(h) + K.value(0.0)) / h**2 - 0.0


@pytest.mark.parametrize("K", [bump(0.7, width=1.3), rational_decay(-0.4, base=2.0, width=0.6), constant(3.0),
                               make_K_minus(3, rational_decay(1.0)), make_K_minus(5, bump(0.5))])
def test_second_derivative_exact(K):
    h = 1e-3
    fd = (K.value(h) - 2 * K.value(0.0) + K.value(-h)) / h**2
    assert K.d2_at_zero == pytest.approx(fd, rel=1e-5, abs=1e-6)
    assert K.d1_at_zero == 0.0


@pytest.mark.parametrize("K", [bump(0.7, width=1.3), rational_decay(-0.4, base=2.0, width=0.6),
                               make_K_minus(4, rational_decay(1.0, width=2.0))])
def test_derivative(K):
    s = np.linspace(0.1, 3.0, 9)
    h = 1e-6
    np.testing.assert_allclose(K.derivative(s), (K.value(s + h) - K.value(s - h)) / (2 * h), rtol=1e-6, atol=1e-9)


def test_make_K_minus_examples():
    K = make_K_minus(2, constant(1.7))
    np.testing.assert_allclose(K.value(np.linspace(0, 5, 11)), 1.7, rtol=1e-15)
    with pytest.raises(KFamilyError, match="positive"):
        make_K_minus(3, rational_decay(1.0, base=0.0))
    K = make_K_minus(3, rational_decay(1.0))
    assert K.at_zero == pytest.approx(4 / 3)
    K = make_K_minus(5, constant(1.0))
    assert K.at_zero == pytest.approx(2 / 5)
    assert K.at_infinity == pytest.approx(1.0)
    assert K.value(np.inf) == pytest.approx(1.0)


def test_make_K_minus_rejects_non_monotone():
    with pytest.raises(KFamilyError, match="nonincreasing"):
        make_K_minus(3, bump(-0.5))


def test_positivity_guard():
    with pytest.raises(KFamilyError):
        bump(-1.0)
    with pytest.raises(KFamilyError):
        constant(0.0)
    with pytest.raises(KFamilyError):
        rational_decay(1.0, width=0.0)


def test_round_trip_dict():
    K = make_K_minus(3, bump(0.5, base=2.0))
    K2 = KFamily.from_dict(K.to_dict())
    s = np.linspace(0, 4, 9)
    np.testing.assert_array_equal(K.value(s), K2.value(s))
    assert KFamily.from_dict({"kind": "Bump", "params": {"amplitude": 0.3}}).params["width"] == 1.0
    with pytest.raises(KFamilyError):
        KFamily.from_dict({"kind": "Bump", "params": {}})


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.9, 5.0), st.floats(0.1, 10.0))
def test_scaled_preserves_shape(a, c):
    K = bump(a)
    Kc = K.scaled(c)
    s = np.linspace(0, 3, 7)
    np.testing.assert_allclose(Kc.value(s), c * K.value(s), rtol=1e-14)
    assert Kc.d2_at_zero / Kc.at_zero == pytest.approx(K.d2_at_zero / K.at_zero, rel=1e-12)
