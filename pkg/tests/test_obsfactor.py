import numpy as np
import pytest

from pnlab.channel import PROAKIS_C
from pnlab.gaussian import RealGaussian
from pnlab.obsfactor import (circular_factor, msg_to_state, msg_to_theta, state_messages,
                             state_precision, theta_messages, tikhonov_oracle, tikhonov_param)


def theta_msg_for_r(r, theta_hat):
    # scalar channel, unit state, unit noise: r = 2 y^*
    return msg_to_theta(np.conj(r) / 2, [1.0], 1.0, [1.0], theta_hat)


def test_tikhonov_param():
    r = tikhonov_param(np.array([1 + 1j]), [0.5, 0.5], 0.5, np.array([[1.0, 2.0]]))
    assert r[0] == pytest.approx(2 / 0.5 * (1 - 1j) * 1.5)


def test_real_r_at_zero():
    m = theta_msg_for_r(2.0, 0.0)
    assert m.precision == pytest.approx(2.0)
    assert m.mean == pytest.approx(0.0)
    assert m.variance == pytest.approx(0.5)


def test_message_centred_on_estimate():
    th = 0.37
    m = theta_msg_for_r(5.0 * np.exp(-1j * th), th)
    assert m.precision == pytest.approx(5.0)
    assert m.mean == pytest.approx(th)


def test_negative_curvature_is_vacuous():
    m = theta_msg_for_r(-1.0, 0.0)
    assert m.precision == 0.0
    _, _, clamped = theta_messages(np.array([-0.5]), [1.0], 1.0, np.ones((1, 1)), [0.0])
    assert clamped[0]


def test_consistency_noiseless():
    rng = np.random.default_rng(0)
    K = 40
    s = (rng.choice([-1, 1], (K, 5)) + 1j * rng.choice([-1, 1], (K, 5))) / np.sqrt(2)
    theta = rng.normal(0, 0.3, K)
    y = np.exp(1j * theta) * (s @ PROAKIS_C[::-1])
    m, p, _ = theta_messages(y, PROAKIS_C, 0.1, s, theta)
    np.testing.assert_allclose(m, theta, atol=1e-6)


def test_scalar_state_message():
    msg = msg_to_state(2 + 0j, [1.0], 1.0, RealGaussian.from_moments(0.0, 0.0))
    np.testing.assert_allclose(msg.W, [[1.0]])
    np.testing.assert_allclose(msg.b, [2.0], rtol=1e-12)


def test_circular_factor():
    assert circular_factor(0.01) == pytest.approx(0.995)
    assert circular_factor(0.01, "exact") == pytest.approx(np.exp(-0.005))
    assert circular_factor(3.0) == 0.0
    assert circular_factor(1e12) == 0.0
    with pytest.raises(ValueError):
        circular_factor(0.1, "bogus")


def test_state_precision_rank_one_trace():
    nv = 0.2
    W = state_precision(PROAKIS_C, nv)
    assert np.linalg.matrix_rank(W) == 1
    assert np.trace(W).real == pytest.approx(np.sum(PROAKIS_C ** 2) / nv)


def test_precomputed_equals_per_k():
    rng = np.random.default_rng(1)
    y = rng.normal(size=6) + 1j * rng.normal(size=6)
    tm, tv = rng.normal(size=6), rng.uniform(0, 0.1, 6)
    b = state_messages(y, PROAKIS_C, 0.3, tm, tv)
    for k in range(6):
        msg = msg_to_state(y[k], PROAKIS_C, 0.3, RealGaussian.from_moments(tm[k], tv[k]))
        np.testing.assert_allclose(msg.W, state_precision(PROAKIS_C, 0.3))
        np.testing.assert_allclose(msg.b, b[k])


def test_complex_taps_conjugation():
    # W must reproduce |h^T s|^2 as s^H W s
    rng = np.random.default_rng(2)
    taps = rng.normal(size=3) + 1j * rng.normal(size=3)
    s = rng.normal(size=3) + 1j * rng.normal(size=3)
    W = state_precision(taps, 1.0)
    assert (s.conj() @ W @ s).real == pytest.approx(abs(taps[::-1] @ s) ** 2)


def test_oracle_high_concentration():
    m, v = tikhonov_oracle(100.0)
    assert m == pytest.approx(0.0, abs=1e-9)
    assert v == pytest.approx(1 / 100, rel=0.02)


def test_oracle_flat():
    _, v = tikhonov_oracle(0.0)
    assert v == pytest.approx(np.pi ** 2 / 3, rel=1e-6)


def test_oracle_rotated():
    m, _ = tikhonov_oracle(50 * np.exp(-0.3j))
    assert m == pytest.approx(0.3, abs=1e-6)


def test_oracle_grid_guard():
    with pytest.raises(ValueError):
        tikhonov_oracle(1.0, grid_size=100)


def test_taylor_close_to_quadrature():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = rng.uniform(20, 200) * np.exp(1j * rng.uniform(-np.pi, np.pi))
        g = theta_msg_for_r(r, -np.angle(r))
        om, ov = tikhonov_oracle(r)
        assert abs(g.mean - om) < 0.02
        assert abs(g.variance - ov) / ov < 0.1
