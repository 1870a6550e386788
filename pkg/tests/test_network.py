import numpy as np
import pytest

from conftest import quantized_frame
from etdm.conv import pixel_shuffle, pixel_unshuffle
from etdm.image import HR, LR, Frame
from etdm.network import (
    ResidualTriple,
    branch_step,
    oracle_heads,
    reconstruct,
    refine,
    run_heads,
    zero_hidden,
)
from etdm.pipeline import upsample
from etdm.weights import NetworkConfig, init_weights, zero_weights
from oracles import conv2d_loops

TINY = NetworkConfig(
    branch_channels=4,
    branch_blocks=1,
    trunk_blocks=1,
    refine_channels=4,
    refine_blocks=1,
    hv_dilation=2,
    scale=2,
    buffer_size=2,
)


def region(rng, hw=6):
    return quantized_frame(rng, (3, hw, hw), LR)


def test_branch_zero_weights_zero_output(rng):
    w = zero_weights(TINY)
    h = branch_step(zero_hidden(TINY, 6, 6), region(rng), region(rng), region(rng), w, TINY, "lv")
    assert not h.any()
    assert h.shape == (4, 6, 6)


def test_branch_channel_mismatch_error(rng):
    w = zero_weights(TINY)
    bad_hidden = np.zeros((7, 6, 6))
    with pytest.raises(ValueError, match="channels"):
        branch_step(bad_hidden, region(rng), region(rng), region(rng), w, TINY, "lv")
    with pytest.raises(ValueError, match="branch"):
        branch_step(zero_hidden(TINY, 6, 6), region(rng), region(rng), region(rng), w, TINY, "mid")


def test_branch_linear_stack_matches_conv_oracle(rng):
    # zero residual blocks turn the branch into its input conv alone
    w = zero_weights(TINY)
    w["lv.in"].weight = rng.normal(size=w["lv.in"].weight.shape)
    w["lv.in"].bias = rng.normal(size=w["lv.in"].bias.shape)
    ref, prev, nxt = region(rng), region(rng), region(rng)
    got = branch_step(zero_hidden(TINY, 6, 6), ref, prev, nxt, w, TINY, "lv")
    x = np.concatenate(
        [np.zeros((4, 6, 6))]
        + [f.planes.astype(np.float64) for f in (prev, ref, nxt)],
        axis=0,
    )
    want = conv2d_loops(x, w["lv.in"].weight, w["lv.in"].bias)
    assert np.abs(got - want).max() < 1e-6


def test_hv_dilation_widens_impulse_footprint(rng):
    # one active tap at the kernel corner; the hv branch reaches twice as far
    w = zero_weights(TINY)
    for branch in ("lv", "hv"):
        # concat layout: hidden(4) | prev(3) | ref(3) | next(3)
        w[f"{branch}.in"].weight[0, 7, 0, 0] = 1.0  # first ref-frame channel
    ref = Frame(np.zeros((3, 9, 9), dtype=np.float32), LR)
    ref.planes[0, 4, 4] = 1.0
    zero = Frame(np.zeros((3, 9, 9), dtype=np.float32), LR)
    h0 = zero_hidden(TINY, 9, 9)
    out_lv = branch_step(h0, ref, zero, zero, w, TINY, "lv")
    out_hv = branch_step(h0, ref, zero, zero, w, TINY, "hv")
    assert out_lv[0, 5, 5] != 0.0 and out_lv[0, 6, 6] == 0.0
    assert out_hv[0, 6, 6] != 0.0 and out_hv[0, 5, 5] == 0.0


def test_align_hook_is_applied(rng):
    w = zero_weights(TINY)
    w["lv.in"].weight[0, 0, 1, 1] = 1.0  # pass hidden channel 0 through
    h = rng.normal(size=(4, 6, 6))
    zero = Frame(np.zeros((3, 6, 6), dtype=np.float32), LR)
    doubled = branch_step(h, zero, zero, zero, w, TINY, "lv", align_hook=lambda x: 2.0 * x)
    plain = branch_step(h, zero, zero, zero, w, TINY, "lv")
    assert np.allclose(doubled, 2.0 * plain)


def test_heads_zero_weights_zero_triple(rng):
    w = zero_weights(TINY)
    triple = run_heads(rng.normal(size=(4, 6, 6)), rng.normal(size=(4, 6, 6)), w, TINY)
    for t in (triple.s, triple.p, triple.f):
        assert t.shape == (12, 6, 6)
        assert not t.any()


def test_heads_shape_contract_default_scale(rng):
    cfg = NetworkConfig(
        branch_channels=4, branch_blocks=1, trunk_blocks=1,
        refine_channels=4, refine_blocks=1, scale=4, buffer_size=1,
    )
    w = zero_weights(cfg)
    triple = run_heads(np.zeros((4, 5, 7)), np.zeros((4, 5, 7)), w, cfg)
    assert triple.s.shape == (48, 5, 7)


def test_heads_toy_config_matches_conv_oracle(rng):
    w = zero_weights(TINY)
    w["trunk.fuse"].weight = rng.normal(size=w["trunk.fuse"].weight.shape)
    w["trunk.fuse"].bias = rng.normal(size=w["trunk.fuse"].bias.shape)
    w["head.spatial"].weight = rng.normal(size=w["head.spatial"].weight.shape)
    h_lv = rng.normal(size=(4, 5, 5))
    h_hv = rng.normal(size=(4, 5, 5))
    got = run_heads(h_lv, h_hv, w, TINY)
    fused = conv2d_loops(np.concatenate([h_lv, h_hv]), w["trunk.fuse"].weight, w["trunk.fuse"].bias)
    want = conv2d_loops(fused, w["head.spatial"].weight, w["head.spatial"].bias)
    assert np.abs(got.s - want).max() < 1e-6
    assert not got.p.any()


def test_heads_branch_shape_mismatch(rng):
    w = zero_weights(TINY)
    with pytest.raises(ValueError, match="shape"):
        run_heads(np.zeros((4, 5, 5)), np.zeros((4, 6, 5)), w, TINY)


# -- oracle heads ------------------------------------------------------------


def hr_up_sequence(rng, steps=3, hw=8, r=2):
    hrs = [quantized_frame(rng, (3, hw, hw), HR) for _ in range(steps)]
    ups = [upsample(quantized_frame(rng, (3, hw // r, hw // r), LR), r) for _ in range(steps)]
    return hrs, ups


def test_oracle_heads_identical_frames_zero_triple(rng):
    hrs, _ = hr_up_sequence(rng)
    same = hrs[0]
    triple = oracle_heads(same, same, same, same, same, same, 2)
    assert not triple.s.any() and not triple.p.any() and not triple.f.any()


def test_oracle_heads_static_video(rng):
    hr = quantized_frame(rng, (3, 8, 8), HR)
    up = upsample(quantized_frame(rng, (3, 4, 4), LR), 2)
    triple = oracle_heads(hr, hr, hr, up, up, up, 2)
    assert not triple.f.any() and not triple.p.any()
    expected = pixel_unshuffle(hr.planes.astype(np.float64) - up.planes.astype(np.float64), 2)
    assert np.array_equal(triple.s, expected)


def test_oracle_heads_future_is_negated_next_past(rng):
    hrs, ups = hr_up_sequence(rng, steps=4)
    t1 = oracle_heads(hrs[0], hrs[1], hrs[2], ups[0], ups[1], ups[2], 2)
    t2 = oracle_heads(hrs[1], hrs[2], hrs[3], ups[1], ups[2], ups[3], 2)
    assert np.array_equal(t1.f, -t2.p)
    # both equal the difference of consecutive spatial residuals
    assert np.abs((t1.s - t2.s) - t1.f).max() < 1e-12


def test_oracle_heads_size_mismatch(rng):
    hrs, ups = hr_up_sequence(rng)
    bad = quantized_frame(rng, (3, 6, 6), HR)
    with pytest.raises(ValueError, match="shape"):
        oracle_heads(hrs[0], bad, hrs[2], *ups, 2)


# -- refinement and reconstruction -------------------------------------------


def entries(rng, count, shape=(12, 6, 6)):
    return [rng.normal(size=shape) for _ in range(count)]


def test_refine_zero_weights_is_passthrough(rng):
    w = zero_weights(TINY)
    s = rng.normal(size=(12, 6, 6))
    out = refine(s, entries(rng, 2), entries(rng, 2), w, TINY)
    assert np.array_equal(out, s)


def test_refine_shape_contract_and_count_error(rng):
    w = zero_weights(TINY)
    s = rng.normal(size=(12, 6, 6))
    assert refine(s, entries(rng, 2), entries(rng, 2), w, TINY).shape == s.shape
    with pytest.raises(ValueError, match="entries"):
        refine(s, entries(rng, 1), entries(rng, 2), w, TINY)


def test_refine_toy_matches_conv_oracle(rng):
    w = zero_weights(TINY)
    w["refine.in"].weight = rng.normal(size=w["refine.in"].weight.shape)
    w["refine.out"].weight = rng.normal(size=w["refine.out"].weight.shape)
    s = rng.normal(size=(12, 4, 4))
    past = entries(rng, 2, (12, 4, 4))
    future = entries(rng, 2, (12, 4, 4))
    got = refine(s, past, future, w, TINY)
    x = np.concatenate([past[1], past[0], s, future[0], future[1]])
    inner = conv2d_loops(x, w["refine.in"].weight, w["refine.in"].bias)
    want = s + conv2d_loops(inner, w["refine.out"].weight, w["refine.out"].bias)
    assert np.abs(got - want).max() < 1e-6


def test_reconstruct_zero_residual_is_clamped_upsample(rng):
    up = upsample(quantized_frame(rng, (3, 4, 4), LR), 2)
    out = reconstruct(np.zeros((12, 4, 4)), up, 2)
    assert out.tier == HR
    assert np.array_equal(out.planes, np.clip(up.planes, 0.0, 1.0))


def test_reconstruct_exact_inverse_of_ground_truth(rng):
    hr = quantized_frame(rng, (3, 8, 8), HR)
    up = upsample(quantized_frame(rng, (3, 4, 4), LR), 2)
    s = pixel_unshuffle(hr.planes.astype(np.float64) - up.planes.astype(np.float64), 2)
    out = reconstruct(s, up, 2)
    assert np.array_equal(out.planes, hr.planes)


def test_reconstruct_recomposition_preclamp(rng):
    # small residual on a mid-range upsample: the clamp never engages, so
    # output minus upsample is exactly the shuffled residual
    up = Frame(rng.uniform(0.3, 0.7, (3, 8, 8)).astype(np.float32), "up")
    s = 0.01 * rng.normal(size=(12, 4, 4))
    out = reconstruct(s, up, 2)
    expected = (up.planes.astype(np.float64) + pixel_shuffle(s, 2)).astype(np.float32)
    assert np.array_equal(out.planes, expected)


def test_reconstruct_size_mismatch(rng):
    up = upsample(quantized_frame(rng, (3, 4, 4), LR), 2)
    with pytest.raises(ValueError, match="match"):
        reconstruct(np.zeros((12, 5, 4)), up, 2)


def test_zero_input_fixed_point(rng):
    # zero frames, zero hidden state, zero biases -> all outputs zero
    w = init_weights(TINY, 5)
    for layer in w.values():
        layer.bias = np.zeros_like(layer.bias)
    zero = Frame(np.zeros((3, 6, 6), dtype=np.float32), LR)
    h = branch_step(zero_hidden(TINY, 6, 6), zero, zero, zero, w, TINY, "lv")
    assert not h.any()
    triple = run_heads(h, h, w, TINY)
    assert not triple.s.any()
    refined = refine(triple.s, [np.zeros((12, 6, 6))] * 2, [np.zeros((12, 6, 6))] * 2, w, TINY)
    assert not refined.any()


def test_shape_stability_one_full_step(rng):
    w = init_weights(TINY, 8)
    h, wdt = 10, 6
    hidden = zero_hidden(TINY, h, wdt)
    ref = quantized_frame(rng, (3, h, wdt), LR)
    out = branch_step(hidden, ref, ref, ref, w, TINY, "lv")
    assert out.shape == hidden.shape
    triple = run_heads(out, out, w, TINY)
    assert triple.s.shape == (3 * TINY.scale**2, h, wdt)
    assert np.isfinite(triple.s).all()


def test_residual_triple_shape_validation(rng):
    with pytest.raises(ValueError, match="shapes"):
        ResidualTriple(np.zeros((2, 2, 2)), np.zeros((2, 2, 2)), np.zeros((2, 2, 3)))
