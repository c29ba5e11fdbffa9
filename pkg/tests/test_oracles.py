import numpy as np
import pytest

from pnlab.channel import ChannelSpec, observe
from pnlab.oracles import dense_gaussian_oracle, grid_pn_oracle, wiener_system


def test_two_variable_chain():
    # theta_0 ~ N(0, 1), theta_1 = theta_0 + N(0, q), one observation N(1, var r) on theta_1
    q, r = 0.5, 0.25
    P, h = wiener_system([0.0, 1.0], [0.0, 1 / r], q, theta0_prec=1.0)
    mean, var = dense_gaussian_oracle(P, h)
    # by hand: prior var of theta_1 is 1.5, posterior var 1/(1/1.5 + 4)
    v1 = 1 / (1 / 1.5 + 4)
    assert var[1] == pytest.approx(v1)
    assert mean[1] == pytest.approx(v1 * 4)
    assert mean[0] == pytest.approx(mean[1] * 1 / 1.5)


def test_no_observations_all_zero():
    P, h = wiener_system(np.zeros(10), np.zeros(10), 1e-4, 1e12)
    mean, _ = dense_gaussian_oracle(P, h)
    np.testing.assert_allclose(mean, 0)


def test_dense_limits():
    with pytest.raises(ValueError):
        dense_gaussian_oracle(np.eye(513), np.zeros(513))
    with pytest.raises(ValueError):
        dense_gaussian_oracle(np.zeros((3, 3)), np.zeros(3))


def _tiny(rng, theta, nv, taps=(1.0,)):
    M = 3
    x = (rng.choice([-1, 1], M) + 1j * rng.choice([-1, 1], M)) / np.sqrt(2)
    spec = ChannelSpec(taps=list(taps), noise_var=nv)
    L = len(taps)
    y = observe(x, np.full(M + L - 1, theta), spec, rng)
    pad = np.concatenate([np.zeros(L - 1), x, np.zeros(L - 1)])
    states = np.array([pad[k:k + L] for k in range(M + L - 1)])
    return y, states


def test_single_strong_observation_ml_phase():
    rng = np.random.default_rng(0)
    y, s = _tiny(rng, 0.4, 1e-3)
    post = grid_pn_oracle(y[:1], s[:1], [1.0], 1e-3, 0.0, theta0="uniform")
    assert post.mean[0] == pytest.approx(np.angle(y[0] / s[0, 0]), abs=2e-3)
    np.testing.assert_allclose(post.marginals.sum(1), 1.0)


def test_flat_likelihood_recovers_prior():
    rng = np.random.default_rng(1)
    y, s = _tiny(rng, 0.0, 1.0)
    post = grid_pn_oracle(y, s, [1.0], 1e8, 1e-2, theta0="delta")
    # prior chain from a delta at zero: var grows by q per step
    np.testing.assert_allclose(post.variance, 1e-2 * np.arange(y.size), atol=2e-3)
    np.testing.assert_allclose(post.mean, 0.0, atol=1e-6)


def test_under_resolution_flag():
    rng = np.random.default_rng(2)
    y, s = _tiny(rng, 0.1, 1e-9)
    post = grid_pn_oracle(y, s, [1.0], 1e-9, 0.0, n_grid=512, theta0="uniform")
    assert post.under_resolved.all()


def test_grid_size_guard():
    with pytest.raises(ValueError):
        grid_pn_oracle(np.zeros(20, complex), np.zeros((20, 1)), [1.0], 1.0, 1e-4)
