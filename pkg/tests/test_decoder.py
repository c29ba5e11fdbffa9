import numpy as np
import pytest

from pnlab.decoder import Trellis, bcjr, hard_decide
from pnlab.oracles import exhaustive_map
from pnlab.tx import conv_encode


@pytest.fixture(scope="module")
def trellis():
    return Trellis.from_code()


def test_trellis_shape(trellis):
    assert trellis.n_states == 16
    assert trellis.next_state.shape == (16, 2)
    # every state is entered by exactly two branches
    assert np.all(np.bincount(trellis.next_state.ravel(), minlength=16) == 2)


def test_trellis_reproduces_encoder(trellis):
    bits = np.random.default_rng(0).integers(0, 2, 30)
    c = conv_encode(bits)
    s, out = 0, []
    for u in list(bits) + [0] * 4:
        out.extend(trellis.outputs[s, u])
        s = trellis.next_state[s, u]
    assert s == 0
    np.testing.assert_array_equal(out, c)


def test_all_zero_strong(trellis):
    info, _ = bcjr(np.full(2 * 24, 20.0), trellis, 20)
    assert np.all(info >= 20)


def test_zero_input_zero_extrinsic(trellis):
    info, ext = bcjr(np.zeros(2 * 14), trellis)
    np.testing.assert_allclose(ext, 0, atol=1e-12)
    np.testing.assert_allclose(info, 0, atol=1e-12)


def test_matches_exhaustive(trellis):
    rng = np.random.default_rng(1)
    for _ in range(20):
        llr = rng.normal(0, 3, 24)
        info, ext = bcjr(llr, trellis, 8)
        ref_info, ref_coded = exhaustive_map(llr, 8)
        np.testing.assert_allclose(info, ref_info, atol=1e-6)
        np.testing.assert_allclose(ext + llr, ref_coded, atol=1e-6)


def test_extrinsic_independent_of_own_intrinsic(trellis):
    rng = np.random.default_rng(2)
    llr = rng.normal(0, 2, 24)
    _, e1 = bcjr(llr, trellis, 8)
    llr2 = llr.copy()
    llr2[7] += 5.0
    _, e2 = bcjr(llr2, trellis, 8)
    assert e2[7] == pytest.approx(e1[7], abs=1e-9)


def test_complement_symmetry(trellis):
    rng = np.random.default_rng(3)
    llr = rng.normal(0, 2, 24)
    a = rng.integers(0, 2, 8)
    ca = conv_encode(a)
    flipped = np.where(ca == 1, -llr, llr)
    info, _ = bcjr(llr, trellis, 8)
    info_f, _ = bcjr(flipped, trellis, 8)
    np.testing.assert_allclose(info_f, np.where(a == 1, -info, info), atol=1e-9)


def test_termination(trellis):
    c = conv_encode(np.random.default_rng(4).integers(0, 2, 12))
    llr = 10.0 * (1 - 2 * c)
    _, _, alpha = bcjr(llr, trellis, 12, return_final_alpha=True)
    assert np.argmax(alpha) == 0
    assert np.all(alpha[1:] < alpha[0] - 10)


def test_rejects_bad_input(trellis):
    with pytest.raises(ValueError):
        bcjr(np.array([np.nan] * 24), trellis)
    with pytest.raises(ValueError):
        bcjr(np.zeros(23), trellis)
    with pytest.raises(ValueError):
        bcjr(np.zeros(24), trellis, n_info=9)


def test_hard_decisions():
    np.testing.assert_array_equal(hard_decide([3.0, -3.0, 0.0]), [0, 1, 0])
