import numpy as np
import pytest

from fairdenoise import tensor as T
from fairdenoise.attention import (
    AttentionConfig, ChannelAttention, MultiscaleSharedAttention,
    NgramWindowAttention, PlainWindowAttention, RectWindowAttention, ShiftConv,
    SparseDenseAttention, make_attention, relative_position_index, sa_complexity,
    window_partition, window_reverse,
)
from fairdenoise.gradcheck import grad_check
from fairdenoise.modules import Init
from fairdenoise.tensor import Tensor

RNG = np.random.default_rng(77)


def x64(*shape):
    return Tensor(RNG.standard_normal(shape), requires_grad=False)


def init64(seed=5):
    return Init(seed, dtype=np.float64)


# ---------------------------------------------------------------------------
# complexity (Eq-style closed forms)

def test_complexity_local_spatial_hand_value():
    c = sa_complexity("local_spatial", 64, 64, 16, M=8)
    assert (c.projection_flops, c.attention_flops) == (4_194_304, 8_388_608)
    assert c.total == 12_582_912


def test_complexity_channel_hand_value():
    c = sa_complexity("channel", 64, 64, 16, L=4)
    assert (c.projection_flops, c.attention_flops) == (4_194_304, 524_288)
    assert c.total == 4_718_592


def test_complexity_degenerate_ones():
    assert sa_complexity("local_spatial", 1, 1, 1, 1, 1).total == 6
    assert sa_complexity("channel", 1, 1, 1, 1, 1).total == 6


def test_complexity_crossover():
    # local > channel iff M^2 > C/L
    big_m = sa_complexity("local_spatial", 32, 32, 64, M=16, L=4)
    ch = sa_complexity("channel", 32, 32, 64, M=16, L=4)
    assert big_m.total > ch.total
    small_m = sa_complexity("local_spatial", 32, 32, 64, M=2, L=4)
    assert small_m.total < ch.total


def test_complexity_validation():
    with pytest.raises(ValueError):
        sa_complexity("local_spatial", 0, 4, 4)
    with pytest.raises(ValueError):
        sa_complexity("channel", 4, 4, 6, L=4)


# ---------------------------------------------------------------------------
# window partition

def test_window_partition_whole_image():
    x = x64(3, 4, 4)
    w = window_partition(x, 4, 4)
    assert w.shape == (1, 3, 4, 4)
    assert np.array_equal(w.data[0], x.data)


def test_window_partition_unrolled():
    x = x64(2, 4, 4)
    w = window_partition(x, 2, 2)
    assert w.shape == (4, 2, 2, 2)
    assert np.array_equal(w.data[0], x.data[:, :2, :2])
    assert np.array_equal(w.data[1], x.data[:, :2, 2:])
    assert np.array_equal(w.data[3], x.data[:, 2:, 2:])


def test_window_roundtrip_exact():
    x = x64(3, 8, 8)
    back = window_reverse(window_partition(x, 4, 4), 4, 4, 8, 8)
    assert np.array_equal(back.data, x.data)


def test_window_roundtrip_with_padding():
    x = x64(2, 7, 5)
    back = window_reverse(window_partition(x, 4, 4), 4, 4, 7, 5)
    assert np.array_equal(back.data, x.data)


# ---------------------------------------------------------------------------
# plain window attention

def plain_cfg(C=4, heads=2, M=4):
    return AttentionConfig("plain_window", C, heads, M)


def test_plain_shape_preserved():
    layer = PlainWindowAttention(plain_cfg(), init64())
    x = x64(4, 8, 8)
    assert layer(x).shape == (4, 8, 8)
    xb = x64(2, 4, 8, 8)
    assert layer(xb).shape == (2, 4, 8, 8)


def test_plain_zero_qk_uniform_attention():
    layer = PlainWindowAttention(plain_cfg(), init64())
    layer.wq.weight.data[:] = 0
    layer.wk.weight.data[:] = 0
    layer.bias_table.data[:] = 0
    x = x64(4, 8, 8)
    probe = {}
    y = layer(x, probe=probe)
    T_ = 16
    assert np.allclose(probe["attn"], 1.0 / T_, atol=1e-12)
    # output equals out-projection of per-window mean of V
    from fairdenoise.attention import maps_to_tokens, tokens_to_maps, window_partition as wp
    wins = wp(x, 4, 4)
    tok = maps_to_tokens(wins)
    v = T.linear(tok, layer.wv.weight, layer.wv.bias)
    vm = np.repeat(v.data.mean(axis=1, keepdims=True), T_, axis=1)
    expect = T.linear(Tensor(vm), layer.wo.weight, layer.wo.bias)
    got = maps_to_tokens(wp(y, 4, 4))
    assert np.allclose(got.data, expect.data, atol=1e-10)


def test_plain_translation_equivariance_by_window():
    layer = PlainWindowAttention(plain_cfg(), init64())
    x = x64(4, 8, 8)
    shifted = Tensor(np.roll(x.data, (4, 4), axis=(1, 2)))
    y = layer(x)
    ys = layer(shifted)
    assert np.allclose(np.roll(y.data, (4, 4), axis=(1, 2)), ys.data, atol=1e-10)


def test_plain_softmax_rows_normalized():
    layer = PlainWindowAttention(plain_cfg(), init64())
    probe = {}
    layer(x64(4, 8, 8), probe=probe)
    assert np.allclose(probe["attn"].sum(axis=-1), 1.0, atol=1e-6)
    assert probe["attn"].min() >= 0


def test_plain_gradcheck():
    layer = PlainWindowAttention(plain_cfg(), init64())
    rep = grad_check(lambda v: T.mean_all(T.mul(layer(v), layer(v))), x64(4, 8, 8))
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# channel attention

def chan_cfg(C=8, heads=2):
    return AttentionConfig("channel", C, heads, window=1)


def test_channel_spatial_permutation_equivariance():
    layer = ChannelAttention(chan_cfg(), init64())
    x = x64(8, 4, 4)
    perm = RNG.permutation(16)
    xp = Tensor(x.data.reshape(8, 16)[:, perm].reshape(8, 4, 4))
    y = layer(x).data.reshape(8, 16)
    yp = layer(xp).data.reshape(8, 16)
    assert np.allclose(y[:, perm], yp, atol=1e-10)


def test_channel_single_pixel():
    layer = ChannelAttention(chan_cfg(), init64())
    x = x64(8, 1, 1)
    assert layer(x).shape == (8, 1, 1)


def test_channel_attention_matrix_shape_and_rows():
    layer = ChannelAttention(chan_cfg(C=8, heads=2), init64())
    probe = {}
    layer(x64(8, 6, 6), probe=probe)
    assert probe["attn"].shape == (1, 2, 4, 4)  # L heads of (C/L)x(C/L)
    assert np.allclose(probe["attn"].sum(axis=-1), 1.0, atol=1e-6)


def test_channel_gradcheck():
    layer = ChannelAttention(chan_cfg(), init64())
    rep = grad_check(lambda v: T.mean_all(T.absolute(layer(v))), x64(8, 4, 4))
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# multiscale shared attention

def ms_cfg(qk_shared=True, score_shared=True, C=8, heads=2):
    return AttentionConfig("multiscale_window", C, heads, window=[2, 4],
                           qk_shared=qk_shared, score_shared=score_shared)


def test_multiscale_qk_shared_scores_symmetric():
    layer = MultiscaleSharedAttention(ms_cfg(), init64())
    probe = {}
    out, scores = layer(x64(8, 8, 8), probe=probe)
    assert out.shape == (8, 8, 8)
    for g in range(2):
        s = probe[f"g{g}_pre_softmax"]
        assert np.abs(s - s.swapaxes(-1, -2)).max() < 1e-6


def test_multiscale_score_share_bit_identical():
    layer_a = MultiscaleSharedAttention(ms_cfg(), init64(1))
    layer_b = MultiscaleSharedAttention(ms_cfg(), init64(2))
    x = x64(8, 8, 8)
    _, scores = layer_a(x)
    probe = {}
    _, scores_b = layer_b(x, incoming_scores=scores, probe=probe)
    for g in range(2):
        assert scores_b[g] is scores[g]
        assert np.array_equal(probe[f"g{g}_attn"], scores[g].data)


def test_multiscale_param_arithmetic():
    shared = MultiscaleSharedAttention(ms_cfg(True, True), init64())
    unshared = MultiscaleSharedAttention(ms_cfg(False, False), init64())
    C = 8
    assert unshared.param_count() - shared.param_count() == C * C + C


def test_multiscale_incoming_shape_mismatch():
    layer = MultiscaleSharedAttention(ms_cfg(), init64())
    bad = [Tensor(np.zeros((1, 1, 4, 4))), Tensor(np.zeros((1, 1, 16, 16)))]
    with pytest.raises(T.ShapeError):
        layer(x64(8, 8, 8), incoming_scores=bad)


def test_multiscale_gradcheck():
    layer = MultiscaleSharedAttention(ms_cfg(), init64())
    rep = grad_check(lambda v: T.mean_all(T.absolute(layer(v)[0])), x64(8, 4, 4))
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# rect window attention

def rect_cfg(mh=2, mw=8):
    return AttentionConfig("rect_window", 4, 2, window=(mh, mw))


def test_rect_square_matches_plain():
    pl = PlainWindowAttention(plain_cfg(M=4), init64(9))
    rc = RectWindowAttention(AttentionConfig("rect_window", 4, 2, (4, 4)), init64(9))
    x = x64(4, 8, 8)
    assert np.allclose(pl(x).data, rc(x).data, atol=1e-12)


def test_rect_partition_bounds():
    x = x64(4, 8, 8)
    layer = RectWindowAttention(rect_cfg(), init64())
    wins = window_partition(x, 2, 8)
    assert wins.shape == (4, 4, 2, 8)
    assert layer(x).shape == (4, 8, 8)
    flipped = RectWindowAttention(rect_cfg(), init64(), flipped=True)
    assert (flipped.mh, flipped.mw) == (8, 2)


def test_rect_gradcheck():
    layer = RectWindowAttention(rect_cfg(), init64())
    rep = grad_check(lambda v: T.mean_all(T.absolute(layer(v))), x64(4, 8, 8))
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# sparse/dense attention

def sd_cfg(dilation=2, M=4):
    return AttentionConfig("sparse_dense_window", 4, 2, window=M, dilation=dilation)


def test_sparse_dilation_one_equals_dense():
    dense = SparseDenseAttention(sd_cfg(dilation=1), init64(3), sparse=False)
    sparse = SparseDenseAttention(sd_cfg(dilation=1), init64(3), sparse=True)
    x = x64(4, 8, 8)
    assert np.allclose(dense(x).data, sparse(x).data, atol=1e-12)


def test_sparse_gather_geometry():
    # dilation=2 on 8x8 with M=4: each window sees one phase grid
    x = Tensor(np.arange(64, dtype=np.float64).reshape(1, 8, 8))
    xp = T.reshape(x, (1, 1, 8, 8))
    t = T.reshape(xp, (1, 1, 4, 2, 4, 2))
    sub = T.reshape(T.transpose(t, (0, 3, 5, 1, 2, 4)), (4, 1, 4, 4))
    assert np.array_equal(sub.data[0, 0], x.data[0][0::2, 0::2])
    assert np.array_equal(sub.data[1, 0], x.data[0][0::2, 1::2])
    assert np.array_equal(sub.data[3, 0], x.data[0][1::2, 1::2])


def test_sparse_roundtrip_identity_without_attention():
    x = x64(3, 8, 8)
    xb = T.reshape(x, (1, 3, 8, 8))
    t = T.reshape(xb, (1, 3, 4, 2, 4, 2))
    sub = T.reshape(T.transpose(t, (0, 3, 5, 1, 2, 4)), (4, 3, 4, 4))
    back = T.reshape(T.transpose(T.reshape(sub, (1, 2, 2, 3, 4, 4)), (0, 3, 4, 1, 5, 2)), (1, 3, 8, 8))
    assert np.array_equal(back.data[0], x.data)


def test_sparse_shape_and_gradcheck():
    layer = SparseDenseAttention(sd_cfg(), init64(), sparse=True)
    x = x64(4, 8, 8)
    assert layer(x).shape == (4, 8, 8)
    rep = grad_check(lambda v: T.mean_all(T.absolute(layer(v))), x)
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# ngram window attention

def ng_cfg(ngram=2, M=4):
    return AttentionConfig("ngram_window", 4, 2, window=M, ngram=ngram)


def test_ngram_zero_is_plain():
    ng = NgramWindowAttention(ng_cfg(ngram=0), init64(11))
    pl = PlainWindowAttention(plain_cfg(M=4), init64(11))
    x = x64(4, 8, 8)
    assert np.allclose(ng(x).data, pl(x).data, atol=1e-12)


def test_ngram_constant_input_matches_plain():
    ng = NgramWindowAttention(ng_cfg(ngram=2), init64(12))
    pl = PlainWindowAttention(plain_cfg(M=4), init64(12))
    x = Tensor(np.full((4, 8, 8), 0.75))
    assert np.allclose(ng(x).data, pl(x).data, atol=1e-10)


def test_ngram_context_changes_output():
    ng = NgramWindowAttention(ng_cfg(ngram=2), init64(13))
    as_plain = NgramWindowAttention(ng_cfg(ngram=0), init64(13))
    # boost projections so the neighbourhood term is visible above init scale
    for layer in (ng, as_plain):
        layer.wq.weight.data *= 40.0
        layer.wk.weight.data *= 40.0
    x = x64(4, 8, 8)
    diff = np.abs(ng(x).data - as_plain(x).data).max()
    assert diff > 1e-6


def test_ngram_gradcheck():
    layer = NgramWindowAttention(ng_cfg(), init64())
    rep = grad_check(lambda v: T.mean_all(T.absolute(layer(v))), x64(4, 8, 8))
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# shift-conv

def test_shift_conv_param_count():
    sc = ShiftConv(10, init64())
    assert sc.param_count() == 10 * 10 + 10


def test_shift_conv_zero_input():
    sc = ShiftConv(5, init64())
    y = sc(Tensor(np.zeros((5, 6, 6))))
    assert np.allclose(y.data, 0.0)


def test_shift_conv_four_neighbour_gather():
    C = 5
    sc = ShiftConv(C, init64())
    sc.proj.weight.data[:] = np.eye(C)
    sc.proj.bias.data[:] = 0
    x = Tensor(RNG.standard_normal((C, 6, 6)))
    y = sc(x).data
    # interior pixels: group 0 shifted up sees x[h+1], group 1 down sees x[h-1], etc.
    assert np.allclose(y[0, 2, 2], x.data[0, 3, 2])
    assert np.allclose(y[1, 2, 2], x.data[1, 1, 2])
    assert np.allclose(y[2, 2, 2], x.data[2, 2, 3])
    assert np.allclose(y[3, 2, 2], x.data[3, 2, 1])
    assert np.allclose(y[4, 2, 2], x.data[4, 2, 2])


def test_shift_conv_rejects_small_channels():
    with pytest.raises(ValueError):
        ShiftConv(4, init64())


def test_shift_conv_gradcheck():
    sc = ShiftConv(5, init64())
    rep = grad_check(lambda v: T.mean_all(T.absolute(sc(v))), x64(5, 5, 5))
    assert rep.passed, str(rep)


# ---------------------------------------------------------------------------
# config validation and factory

def test_config_validation():
    with pytest.raises(ValueError):
        AttentionConfig("plain_window", 7, 2, 8)  # heads must divide channels
    with pytest.raises(ValueError):
        AttentionConfig("nope", 8, 2, 8)
    with pytest.raises(ValueError):
        AttentionConfig("plain_window", 8, 2, 8, dilation=0)
    with pytest.raises(ValueError):
        AttentionConfig("multiscale_window", 9, 3, [2, 4])


def test_factory_alternation():
    rc0 = make_attention(rect_cfg(), init64(), block_index=0)
    rc1 = make_attention(rect_cfg(), init64(), block_index=1)
    assert not rc0.flipped and rc1.flipped
    sd0 = make_attention(sd_cfg(), init64(), block_index=0)
    sd1 = make_attention(sd_cfg(), init64(), block_index=1)
    assert not sd0.sparse and sd1.sparse


def test_relative_position_index_range():
    idx = relative_position_index(3, 5)
    assert idx.shape == (15, 15)
    assert idx.min() == 0 and idx.max() == 5 * 9 - 1
    assert np.array_equal(np.diag(idx), np.full(15, idx[0, 0]))
