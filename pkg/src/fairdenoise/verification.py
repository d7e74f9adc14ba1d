"""Finite-difference gradient suite over every primitive and the seven
bodies' attention cores, at float64 on small documented shapes."""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .attention import AttentionConfig, make_attention
from .gradcheck import GradCheckReport, grad_check
from .modules import Init
from .tensor import Tensor

# attention core of each body kind, at gradient-check scale
BODY_CORES = {
    "swinir_light": (AttentionConfig("plain_window", 4, 2, window=4), (4, 8, 8)),
    "elan_light": (AttentionConfig("multiscale_window", 4, 2, window=[2, 4],
                                   qk_shared=True, score_shared=True), (4, 8, 8)),
    "ngswin": (AttentionConfig("ngram_window", 4, 2, window=4, ngram=1), (4, 8, 8)),
    "restormer_light": (AttentionConfig("channel", 8, 2, window=1), (8, 4, 4)),
    "uformer_light": (AttentionConfig("plain_window", 4, 4, window=2), (4, 8, 8)),
    "cat_light": (AttentionConfig("rect_window", 4, 2, window=(2, 8)), (4, 8, 8)),
    "art_light": (AttentionConfig("sparse_dense_window", 4, 2, window=2, dilation=2), (4, 8, 8)),
}


def _rand(rng, *shape) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def primitive_checks(rng) -> list[tuple[str, callable, Tensor]]:
    w_lin = Tensor(rng.standard_normal((6, 3)), requires_grad=True)
    b_lin = Tensor(rng.standard_normal(3), requires_grad=True)
    w_conv = Tensor(rng.standard_normal((4, 3, 3, 3)), requires_grad=True)
    w_dw = Tensor(rng.standard_normal((4, 1, 3, 3)), requires_grad=True)
    w_ct = Tensor(rng.standard_normal((3, 2, 2, 2)), requires_grad=True)
    gamma = Tensor(rng.standard_normal(5), requires_grad=True)
    beta = Tensor(rng.standard_normal(5), requires_grad=True)
    bias = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
    temp = Tensor(rng.standard_normal(3), requires_grad=True)
    table = Tensor(rng.standard_normal((9, 2)), requires_grad=True)
    idx = rng.integers(0, 9, size=(4, 4))
    m_mat = Tensor(rng.standard_normal((2, 4, 3)))
    m_sm = Tensor(rng.standard_normal((3, 6)))
    m_ps = Tensor(rng.standard_normal((2, 6, 6)))
    m_tab = Tensor(rng.standard_normal((4, 4, 2)))

    def mm(x):
        return T.mean_all(T.mul(x, x))

    return [
        ("add/sub/mul", lambda x: T.mean_all(T.mul(T.add(x, x), T.sub(x, x))), _rand(rng, 3, 4)),
        ("scale/add_scalar", lambda x: T.mean_all(T.scale(T.add_scalar(x, 0.5), -2.0)), _rand(rng, 5)),
        ("absolute", lambda x: T.mean_all(T.absolute(x)), Tensor(rng.standard_normal((4, 4)) + 0.3)),
        ("relu", lambda x: T.mean_all(T.relu(x)), Tensor(rng.standard_normal((4, 4)) + 0.3)),
        ("gelu", lambda x: T.mean_all(T.gelu(x)), _rand(rng, 4, 4)),
        ("linear", lambda x: T.mean_all(T.linear(x, w_lin, b_lin)), _rand(rng, 5, 6)),
        ("matmul", lambda x: T.mean_all(T.matmul(x, m_mat)), _rand(rng, 2, 5, 4)),
        ("conv2d", lambda x: mm(T.conv2d(x, w_conv, stride=2, padding=1)), _rand(rng, 2, 3, 6, 5)),
        ("conv2d_depthwise", lambda x: mm(T.conv2d(x, w_dw, padding=1, groups=4)), _rand(rng, 4, 6, 6)),
        ("conv_transpose2d", lambda x: mm(T.conv_transpose2d(x, w_ct, stride=2)), _rand(rng, 3, 4, 4)),
        ("layer_norm", lambda x: mm(T.layer_norm(x, gamma, beta, 1e-5)), _rand(rng, 3, 5)),
        ("softmax", lambda x: T.mean_all(T.mul(T.softmax(x, 1), m_sm)), _rand(rng, 3, 6)),
        ("l2_normalize", lambda x: mm(T.l2_normalize(x, -1)), _rand(rng, 4, 5)),
        ("add_bias", lambda x: T.mean_all(T.add_bias(x, bias)), _rand(rng, 5, 3, 4)),
        ("scale_channels", lambda x: T.mean_all(T.scale_channels(x, temp, 1)), _rand(rng, 2, 3, 4)),
        ("embedding_lookup", lambda x: T.mean_all(T.mul(T.embedding_lookup(x, idx), m_tab)),
         Tensor(table.data.copy())),
        ("box_sum2d", lambda x: mm(T.box_sum2d(x, 3, stride=2, padding=1)), _rand(rng, 2, 5, 5)),
        ("pad_reflect", lambda x: mm(T.pad2d(x, 1, 2, 2, 1, "reflect")), _rand(rng, 1, 4, 5)),
        ("pad_zero/crop", lambda x: mm(T.crop2d(T.pad2d(x, 1, 1, 1, 1), 0, 0, 4, 4)), _rand(rng, 1, 3, 3)),
        ("reshape/transpose", lambda x: mm(T.transpose(T.reshape(x, (3, 8)), (1, 0))), _rand(rng, 3, 2, 4)),
        ("concat/narrow", lambda x: mm(T.narrow(T.concat([x, x], 1), 1, 1, 4)), _rand(rng, 2, 3)),
        ("expand_axis", lambda x: mm(T.expand_axis(x, 1, 4)), _rand(rng, 3, 2)),
        ("pixel_shuffle", lambda x: T.mean_all(T.mul(T.pixel_shuffle(x, 2), m_ps)), _rand(rng, 8, 3, 3)),
    ]


def gradient_suite(tol: float = 1e-4, eps: float = 1e-5):
    """Yield (name, GradCheckReport) for primitives and body attention cores."""
    rng = np.random.default_rng(2024)
    for name, fn, x in primitive_checks(rng):
        yield f"primitive:{name}", grad_check(fn, x, eps=eps, tol=tol)
    for body, (cfg, shape) in BODY_CORES.items():
        layer = make_attention(cfg, Init(91, dtype=np.float64),
                               block_index=1 if cfg.kind == "sparse_dense_window" else 0)
        x = Tensor(rng.standard_normal(shape))

        if cfg.kind == "multiscale_window":
            def fn(v, layer=layer):
                return T.mean_all(T.absolute(layer(v)[0]))
        else:
            def fn(v, layer=layer):
                return T.mean_all(T.absolute(layer(v)))
        yield f"body:{body}", grad_check(fn, x, eps=eps, tol=tol)
