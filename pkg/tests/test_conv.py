import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from etdm.conv import concat_channels, conv2d, pixel_shuffle, pixel_unshuffle, residual_block
from oracles import conv2d_loops, shuffle_index_oracle


def test_identity_1x1_kernel():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(1, 5, 7))
    w = np.ones((1, 1, 1, 1))
    assert np.array_equal(conv2d(x, w), x)


def test_constant_input_normalized_kernel_reflect():
    rng = np.random.default_rng(1)
    w = rng.normal(size=(1, 1, 3, 3))
    w /= w.sum()
    x = np.full((1, 6, 6), 0.37)
    out = conv2d(x, w, padding="reflect")
    assert np.allclose(out, 0.37, atol=1e-12)


def test_hand_computed_2x2_allones_zero_pad():
    x = np.array([[[1.0, 2.0], [3.0, 4.0]]])
    w = np.ones((1, 1, 3, 3))
    expected = np.array([[[10.0, 10.0], [10.0, 10.0]]])
    assert np.array_equal(conv2d(x, w, padding="zero"), expected)
    assert np.allclose(conv2d_loops(x, w, padding="zero"), expected)


@pytest.mark.parametrize("padding", ["zero", "reflect"])
@pytest.mark.parametrize("dilation", [1, 2])
def test_matches_triple_loop_oracle(padding, dilation):
    rng = np.random.default_rng(42)
    for _ in range(6):
        cin = int(rng.integers(1, 9))
        cout = int(rng.integers(1, 9))
        h, w = rng.integers(4, 17, 2)
        k = int(rng.choice([1, 3]))
        x = rng.normal(size=(cin, int(h), int(w)))
        wt = rng.normal(size=(cout, cin, k, k))
        b = rng.normal(size=cout)
        got = conv2d(x, wt, b, dilation=dilation, padding=padding)
        want = conv2d_loops(x, wt, b, dilation=dilation, padding=padding)
        assert np.abs(got - want).max() < 1e-6


def test_linearity_zero_bias():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(3, 8, 8))
    y = rng.normal(size=(3, 8, 8))
    w = rng.normal(size=(4, 3, 3, 3))
    lhs = conv2d(2.5 * x + 0.3 * y, w)
    rhs = 2.5 * conv2d(x, w) + 0.3 * conv2d(y, w)
    assert np.abs(lhs - rhs).max() / np.abs(rhs).max() < 1e-6


def test_determinism():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(4, 10, 10))
    w = rng.normal(size=(4, 4, 3, 3))
    b = rng.normal(size=4)
    a = conv2d(x, w, b, padding="reflect")
    assert np.array_equal(a, conv2d(x, w, b, padding="reflect"))


def test_conv_errors():
    x = np.zeros((2, 4, 4))
    with pytest.raises(ValueError, match="channels"):
        conv2d(x, np.zeros((1, 3, 3, 3)))
    with pytest.raises(ValueError, match="odd"):
        conv2d(x, np.zeros((1, 2, 2, 2)))
    with pytest.raises(ValueError, match="padding"):
        conv2d(x, np.zeros((1, 2, 3, 3)), padding="wrap")
    with pytest.raises(ValueError, match="dilation"):
        conv2d(x, np.zeros((1, 2, 3, 3)), dilation=0)
    with pytest.raises(ValueError, match="bias"):
        conv2d(x, np.zeros((3, 2, 3, 3)), np.zeros(2))


def test_residual_block_zero_weights_is_identity():
    rng = np.random.default_rng(5)
    x = rng.normal(size=(3, 6, 6))
    wz = np.zeros((3, 3, 3, 3))
    bz = np.zeros(3)
    assert np.array_equal(residual_block(x, wz, bz, wz, bz), x)


def test_residual_block_identity_convs_double_nonnegative_input():
    rng = np.random.default_rng(6)
    x = np.abs(rng.normal(size=(2, 5, 5)))
    eye = np.eye(2).reshape(2, 2, 1, 1)
    out = residual_block(x, eye, None, eye, None)
    assert np.allclose(out, 2.0 * x, atol=1e-12)


def test_residual_block_hand_expansion_1x1x1():
    # x=2: conv1 -> 0.5*2+0.25 = 1.25, relu keeps it, conv2 -> -0.3*1.25+0.1
    # = -0.275, skip -> 1.725
    x = np.full((1, 1, 1), 2.0)
    wa = np.full((1, 1, 1, 1), 0.5)
    ba = np.full(1, 0.25)
    wb = np.full((1, 1, 1, 1), -0.3)
    bb = np.full(1, 0.1)
    out = residual_block(x, wa, ba, wb, bb)
    assert np.allclose(out, 1.725, atol=1e-15)


def test_residual_block_seeded_vs_hand_expansion():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(1, 1, 1))
    wa, ba = rng.normal(size=(1, 1, 1, 1)), rng.normal(size=1)
    wb, bb = rng.normal(size=(1, 1, 1, 1)), rng.normal(size=1)
    inner = max(wa[0, 0, 0, 0] * x[0, 0, 0] + ba[0], 0.0)
    expected = x[0, 0, 0] + wb[0, 0, 0, 0] * inner + bb[0]
    assert np.allclose(residual_block(x, wa, ba, wb, bb), expected, atol=1e-12)


def test_residual_block_skip_shape_error():
    x = np.zeros((3, 4, 4))
    with pytest.raises(ValueError, match="skip"):
        residual_block(x, np.zeros((2, 3, 3, 3)), None, np.zeros((2, 2, 3, 3)), None)


def test_pixel_shuffle_shape_contract():
    x = np.zeros((48, 16, 16))
    assert pixel_shuffle(x, 4).shape == (3, 64, 64)
    assert pixel_unshuffle(np.zeros((3, 64, 64)), 4).shape == (48, 16, 16)


def test_pixel_shuffle_2x2_block_layout():
    a, b, c, d = 1.0, 2.0, 3.0, 4.0
    x = np.array([a, b, c, d]).reshape(4, 1, 1)
    assert np.array_equal(pixel_shuffle(x, 2)[0], np.array([[a, b], [c, d]]))


def test_pixel_shuffle_matches_index_oracle():
    rng = np.random.default_rng(8)
    for r in (2, 3, 4):
        x = rng.normal(size=(2 * r * r, 3, 2))
        assert np.array_equal(pixel_shuffle(x, r), shuffle_index_oracle(x, r))


@settings(max_examples=25, deadline=None)
@given(
    r=st.integers(min_value=1, max_value=4),
    c=st.integers(min_value=1, max_value=3),
    h=st.integers(min_value=1, max_value=5),
    w=st.integers(min_value=1, max_value=5),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_shuffle_unshuffle_roundtrip(r, c, h, w, seed):
    x = np.random.default_rng(seed).normal(size=(c * r * r, h, w))
    assert np.array_equal(pixel_unshuffle(pixel_shuffle(x, r), r), x)
    y = np.random.default_rng(seed + 1).normal(size=(c, h * r, w * r))
    assert np.array_equal(pixel_shuffle(pixel_unshuffle(y, r), r), y)


def test_pixel_shuffle_divisibility_errors():
    with pytest.raises(ValueError, match="divisible"):
        pixel_shuffle(np.zeros((3, 4, 4)), 2)
    with pytest.raises(ValueError, match="divisible"):
        pixel_unshuffle(np.zeros((3, 5, 4)), 2)


def test_concat_single_input_identity():
    x = np.random.default_rng(9).normal(size=(2, 3, 3))
    assert np.array_equal(concat_channels([x]), x)


def test_concat_ordering():
    a = np.ones((2, 3, 3))
    b = np.zeros((3, 3, 3))
    out = concat_channels([a, b])
    assert out.shape == (5, 3, 3)
    assert np.array_equal(out[:2], a)
    assert np.array_equal(out[2:], b)


def test_concat_spatial_mismatch():
    with pytest.raises(ValueError, match="spatial"):
        concat_channels([np.zeros((1, 3, 3)), np.zeros((1, 4, 3))])


def test_concat_with_zeros_then_masked_conv_equals_plain_conv():
    # a conv whose weights ignore the zero block sees only x
    rng = np.random.default_rng(10)
    x = rng.normal(size=(2, 6, 6))
    z = np.zeros((3, 6, 6))
    w_x = rng.normal(size=(4, 2, 3, 3))
    w_full = np.concatenate([w_x, rng.normal(size=(4, 3, 3, 3))], axis=1)
    got = conv2d(concat_channels([x, z]), w_full)
    want = conv2d_loops(x, w_x)
    assert np.abs(got - want).max() < 1e-6
