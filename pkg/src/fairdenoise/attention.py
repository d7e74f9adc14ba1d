"""Self-attention cores of the seven bodies, plus shift-conv and the
complexity calculator.

Every core preserves the input (channels, height, width) shape.  Windowed
kinds pad to window multiples with reflection and crop on the way back.
All cores accept an optional ``probe`` dict; when given, pre-softmax
scores and attention maps are stored into it as detached numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .modules import Init, Linear, Module, ModuleList
from .tensor import ShapeError, Tensor

WINDOW_KINDS = ("plain_window", "multiscale_window", "ngram_window",
                "rect_window", "sparse_dense_window")
KINDS = WINDOW_KINDS + ("channel",)


@dataclass
class AttentionConfig:
    kind: str
    channels: int
    heads: int
    window: int | tuple[int, int] | list[int] = 8
    dilation: int = 1
    ngram: int = 0
    qk_shared: bool = False
    score_shared: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown attention kind {self.kind!r}")
        if self.channels % self.heads:
            raise ValueError(f"channels {self.channels} not divisible by heads {self.heads}")
        if self.dilation < 1:
            raise ValueError("dilation must be >= 1")
        if self.kind == "rect_window":
            mh, mw = self.window
            if mh < 1 or mw < 1:
                raise ValueError("window sides must be >= 1")
        elif self.kind == "multiscale_window":
            sizes = list(self.window)
            if not sizes or any(m < 1 for m in sizes):
                raise ValueError("multiscale windows must be a non-empty list of sizes >= 1")
            if self.channels % len(sizes):
                raise ValueError(f"channels {self.channels} not divisible by {len(sizes)} window groups")
            if self.heads % len(sizes):
                raise ValueError(f"heads {self.heads} not divisible by {len(sizes)} window groups")
        else:
            if int(self.window) < 1:
                raise ValueError("window must be >= 1")

    def scaled(self, channels: int, heads: int) -> "AttentionConfig":
        return AttentionConfig(self.kind, channels, heads, self.window,
                               self.dilation, self.ngram, self.qk_shared, self.score_shared)


@dataclass
class ComplexityBreakdown:
    projection_flops: int
    attention_flops: int

    @property
    def total(self) -> int:
        return self.projection_flops + self.attention_flops


def sa_complexity(kind: str, H: int, W: int, C: int, M: int = 1, L: int = 1) -> ComplexityBreakdown:
    """Projection + attention term flop counts for one block (exact integers)."""
    if min(H, W, C, M, L) <= 0:
        raise ValueError("all arguments must be positive")
    proj = 4 * H * W * C * C
    if kind == "local_spatial":
        attn = 2 * M * M * H * W * C
    elif kind == "channel":
        if C % L:
            raise ValueError(f"channels {C} not divisible by heads {L}")
        attn = 2 * H * W * C * (C // L)
    else:
        raise ValueError(f"unknown complexity kind {kind!r}")
    return ComplexityBreakdown(proj, attn)


# ---------------------------------------------------------------------------
# window plumbing

def _as_batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.data.ndim == 3:
        return T.reshape(x, (1, *x.shape)), True
    if x.data.ndim == 4:
        return x, False
    raise ShapeError(f"expected (C,H,W) or (N,C,H,W), got {x.shape}")


def pad_to_multiple(x: Tensor, mh: int, mw: int) -> Tensor:
    """Reflect-pad bottom/right so H and W become multiples of (mh, mw)."""
    H, W = x.shape[-2], x.shape[-1]
    ph = (-H) % mh
    pw = (-W) % mw
    if ph == 0 and pw == 0:
        return x
    return T.pad2d(x, 0, ph, 0, pw, mode="reflect")


def window_partition(x: Tensor, mh: int, mw: int) -> Tensor:
    """(N,C,H,W) or (C,H,W) -> (nWin, C, mh, mw), reflect-padding remainders."""
    xb, _ = _as_batched(x)
    xb = pad_to_multiple(xb, mh, mw)
    N, C, H, W = xb.shape
    nh, nw = H // mh, W // mw
    t = T.reshape(xb, (N, C, nh, mh, nw, mw))
    t = T.transpose(t, (0, 2, 4, 1, 3, 5))
    return T.reshape(t, (N * nh * nw, C, mh, mw))


def window_reverse(windows: Tensor, mh: int, mw: int, height: int, width: int,
                   batch: int | None = None) -> Tensor:
    """Inverse of window_partition, cropping any padding back off."""
    Hp, Wp = height + (-height) % mh, width + (-width) % mw
    nh, nw = Hp // mh, Wp // mw
    nwin, C = windows.shape[0], windows.shape[1]
    single = batch is None
    N = 1 if single else batch
    if nwin != N * nh * nw:
        raise ShapeError(f"window count {nwin} does not match {N}x{nh}x{nw}")
    t = T.reshape(windows, (N, nh, nw, C, mh, mw))
    t = T.transpose(t, (0, 3, 1, 4, 2, 5))
    x = T.reshape(t, (N, C, Hp, Wp))
    if Hp != height or Wp != width:
        x = T.crop2d(x, 0, 0, height, width)
    return T.reshape(x, (C, height, width)) if single else x


def maps_to_tokens(x: Tensor) -> Tensor:
    B, C, h, w = x.shape
    return T.transpose(T.reshape(x, (B, C, h * w)), (0, 2, 1))


def tokens_to_maps(t: Tensor, h: int, w: int) -> Tensor:
    B, _, C = t.shape
    return T.reshape(T.transpose(t, (0, 2, 1)), (B, C, h, w))


def relative_position_index(mh: int, mw: int, table_mh: int | None = None,
                            table_mw: int | None = None) -> np.ndarray:
    """(T,T) lookup into a bias table built for (table_mh, table_mw) windows.

    The table geometry defaults to the window itself; passing a larger
    table size supports windows capped to small feature maps.
    """
    tmh = mh if table_mh is None else table_mh
    tmw = mw if table_mw is None else table_mw
    ys, xs = np.meshgrid(np.arange(mh), np.arange(mw), indexing="ij")
    flat = np.stack([ys.ravel(), xs.ravel()])
    rel = flat[:, :, None] - flat[:, None, :]
    return ((rel[0] + tmh - 1) * (2 * tmw - 1) + (rel[1] + tmw - 1)).astype(np.int64)


def _heads_split(tok: Tensor, heads: int) -> Tensor:
    B, Tn, C = tok.shape
    return T.transpose(T.reshape(tok, (B, Tn, heads, C // heads)), (0, 2, 1, 3))


def _heads_merge(x: Tensor) -> Tensor:
    B, L, Tn, D = x.shape
    return T.reshape(T.transpose(x, (0, 2, 1, 3)), (B, Tn, L * D))


def _probe_store(probe, key, tensor):
    if probe is not None:
        probe[key] = tensor.data.copy()


def _window_mha(q_tok, k_tok, v_tok, heads, bias_table, bias_index, probe, tag=""):
    """Per-window multi-head attention over token tensors (B,T,C)."""
    D = q_tok.shape[-1] // heads
    q = _heads_split(q_tok, heads)
    k = _heads_split(k_tok, heads)
    v = _heads_split(v_tok, heads)
    scores = T.scale(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(D))
    if bias_table is not None:
        bias = T.transpose(T.embedding_lookup(bias_table, bias_index), (2, 0, 1))
        scores = T.add_bias(scores, bias)
    _probe_store(probe, f"{tag}pre_softmax", scores)
    attn = T.softmax(scores, -1)
    _probe_store(probe, f"{tag}attn", attn)
    return _heads_merge(T.matmul(attn, v)), attn


class _WindowedBase(Module):
    """Shared q/k/v/o projections and bias table for windowed variants.

    Windows are capped to the feature-map extent at forward time, so the
    deepest pyramid levels (maps smaller than the configured window)
    attend over the whole map instead of requiring impossible padding.
    """

    def __init__(self, cfg: AttentionConfig, init: Init, mh: int, mw: int):
        super().__init__()
        self.cfg = cfg
        self.mh, self.mw = mh, mw
        C = cfg.channels
        self.wq = Linear(C, C, init)
        self.wk = Linear(C, C, init)
        self.wv = Linear(C, C, init)
        self.wo = Linear(C, C, init)
        self.bias_table = Tensor(init.trunc_normal((2 * mh - 1) * (2 * mw - 1), cfg.heads),
                                 requires_grad=True)
        self.bias_index = relative_position_index(mh, mw)
        self._index_cache: dict[tuple[int, int], np.ndarray] = {}

    def _effective(self, H: int, W: int) -> tuple[int, int]:
        return min(self.mh, H), min(self.mw, W)

    def _bias_index_for(self, mh: int, mw: int) -> np.ndarray:
        if (mh, mw) == (self.mh, self.mw):
            return self.bias_index
        key = (mh, mw)
        if key not in self._index_cache:
            self._index_cache[key] = relative_position_index(mh, mw, self.mh, self.mw)
        return self._index_cache[key]

    def _attend_windows(self, wins: Tensor, mh: int, mw: int, probe, tag="") -> Tensor:
        tok = maps_to_tokens(wins)
        out, _ = _window_mha(self.wq(tok), self.wk(tok), self.wv(tok), self.cfg.heads,
                             self.bias_table, self._bias_index_for(mh, mw), probe, tag)
        return tokens_to_maps(self.wo(out), mh, mw)


class PlainWindowAttention(_WindowedBase):
    """Non-overlapping square-window multi-head attention with relative bias."""

    def __init__(self, cfg: AttentionConfig, init: Init):
        m = int(cfg.window)
        super().__init__(cfg, init, m, m)

    def forward(self, x: Tensor, probe=None) -> Tensor:
        xb, single = _as_batched(x)
        N, C, H, W = xb.shape
        mh, mw = self._effective(H, W)
        wins = window_partition(xb, mh, mw)
        out = self._attend_windows(wins, mh, mw, probe)
        return window_reverse(out, mh, mw, H, W, batch=None if single else N)


class RectWindowAttention(_WindowedBase):
    """Rectangle windows; alternating blocks swap the (Mh, Mw) orientation."""

    def __init__(self, cfg: AttentionConfig, init: Init, flipped: bool = False):
        mh, mw = cfg.window
        if flipped:
            mh, mw = mw, mh
        super().__init__(cfg, init, mh, mw)
        self.flipped = flipped

    forward = PlainWindowAttention.forward


class SparseDenseAttention(_WindowedBase):
    """Dense blocks use contiguous windows; sparse blocks attend over
    interleaved grids gathered at stride ``dilation``."""

    def __init__(self, cfg: AttentionConfig, init: Init, sparse: bool = False):
        m = int(cfg.window)
        super().__init__(cfg, init, m, m)
        self.sparse = sparse and cfg.dilation > 1

    def forward(self, x: Tensor, probe=None) -> Tensor:
        if not self.sparse:
            return PlainWindowAttention.forward(self, x, probe)
        d = self.cfg.dilation
        xb, single = _as_batched(x)
        N, C, H, W = xb.shape
        mh = min(self.mh, -(-H // d))
        mw = min(self.mw, -(-W // d))
        xp = pad_to_multiple(xb, d * mh, d * mw)
        Hp, Wp = xp.shape[-2], xp.shape[-1]
        hs, ws = Hp // d, Wp // d
        # phase decomposition: subgrid (py, px) holds pixels (py::d, px::d)
        t = T.reshape(xp, (N, C, hs, d, ws, d))
        sub = T.reshape(T.transpose(t, (0, 3, 5, 1, 2, 4)), (N * d * d, C, hs, ws))
        wins = window_partition(sub, mh, mw)
        out = self._attend_windows(wins, mh, mw, probe)
        sub_out = window_reverse(out, mh, mw, hs, ws, batch=N * d * d)
        t = T.reshape(sub_out, (N, d, d, C, hs, ws))
        merged = T.reshape(T.transpose(t, (0, 3, 4, 1, 5, 2)), (N, C, Hp, Wp))
        y = T.crop2d(merged, 0, 0, H, W) if (Hp, Wp) != (H, W) else merged
        return T.reshape(y, (C, H, W)) if single else y


class NgramWindowAttention(_WindowedBase):
    """Plain window attention whose Q/K inputs are augmented with the mean
    of a zero-padded ring of ``ngram`` pixels around each window."""

    def __init__(self, cfg: AttentionConfig, init: Init):
        m = int(cfg.window)
        super().__init__(cfg, init, m, m)

    def _ring_context(self, xp: Tensor, m: int) -> Tensor:
        """(N,C,Hp,Wp) -> per-window ring means (N,C,nh,nw)."""
        g = self.cfg.ngram
        big = T.box_sum2d(xp, m + 2 * g, stride=m, padding=g)
        small = T.box_sum2d(xp, m, stride=m, padding=0)
        ring_area = (m + 2 * g) ** 2 - m * m
        return T.scale(T.sub(big, small), 1.0 / ring_area)

    def forward(self, x: Tensor, probe=None) -> Tensor:
        if self.cfg.ngram == 0:
            return PlainWindowAttention.forward(self, x, probe)
        xb, single = _as_batched(x)
        N, C, H, W = xb.shape
        m = min(self.mh, H, W)
        xp = pad_to_multiple(xb, m, m)
        nh, nw = xp.shape[-2] // m, xp.shape[-1] // m
        ctx = self._ring_context(xp, m)                   # (N, C, nh, nw)
        ctx_tok = T.reshape(maps_to_tokens(ctx), (N * nh * nw, C))
        ctx_tok = T.expand_axis(ctx_tok, 1, m * m)        # one context vector per window
        wins = window_partition(xb, m, m)
        tok = maps_to_tokens(wins)
        qk_in = T.add(tok, ctx_tok)
        out, _ = _window_mha(self.wq(qk_in), self.wk(qk_in), self.wv(tok), self.cfg.heads,
                             self.bias_table, self._bias_index_for(m, m), probe)
        maps = tokens_to_maps(self.wo(out), m, m)
        return window_reverse(maps, m, m, H, W, batch=None if single else N)


class ChannelAttention(Module):
    """Global channel self-attention: L heads of (C/L)x(C/L) scores over
    pixel-flattened, L2-normalized queries/keys with a learned temperature."""

    def __init__(self, cfg: AttentionConfig, init: Init):
        super().__init__()
        self.cfg = cfg
        C = cfg.channels
        self.wq = Linear(C, C, init)
        self.wk = Linear(C, C, init)
        self.wv = Linear(C, C, init)
        self.wo = Linear(C, C, init)
        self.temperature = Tensor(init.ones(cfg.heads), requires_grad=True)

    def forward(self, x: Tensor, probe=None) -> Tensor:
        xb, single = _as_batched(x)
        N, C, H, W = xb.shape
        L = self.cfg.heads
        tok = maps_to_tokens(xb)                           # (N, HW, C)

        def channel_heads(t):                              # -> (N, L, D, HW)
            return T.transpose(_heads_split(t, L), (0, 1, 3, 2))

        q = T.l2_normalize(channel_heads(self.wq(tok)), axis=-1)
        k = T.l2_normalize(channel_heads(self.wk(tok)), axis=-1)
        v = channel_heads(self.wv(tok))
        scores = T.matmul(q, T.transpose(k, (0, 1, 3, 2)))  # (N, L, D, D)
        scores = T.scale_channels(scores, self.temperature, axis=1)
        _probe_store(probe, "pre_softmax", scores)
        attn = T.softmax(scores, -1)
        _probe_store(probe, "attn", attn)
        out = T.matmul(attn, v)                             # (N, L, D, HW)
        out = _heads_merge(T.transpose(out, (0, 1, 3, 2)))
        y = tokens_to_maps(self.wo(out), H, W)
        return T.reshape(y, (C, H, W)) if single else y


class MultiscaleSharedAttention(Module):
    """Channel groups attend at different window sizes, with optional Q=K
    projection sharing and verbatim reuse of a provider block's attention.

    The separate K projection always exists as a parameter so that
    toggling ``qk_shared`` changes the count by exactly one K projection;
    when sharing is on the K weights are simply never used.  No relative
    position bias: with Q == K the pre-softmax scores stay symmetric.
    """

    def __init__(self, cfg: AttentionConfig, init: Init):
        super().__init__()
        self.cfg = cfg
        C = cfg.channels
        self.windows = [int(m) for m in cfg.window]
        self.wq = Linear(C, C, init)
        self.wk = None if cfg.qk_shared else Linear(C, C, init)
        self.wv = Linear(C, C, init)
        self.wo = Linear(C, C, init)

    def forward(self, x: Tensor, incoming_scores=None, probe=None):
        cfg = self.cfg
        xb, single = _as_batched(x)
        N, C, H, W = xb.shape
        G = len(self.windows)
        Cg, Lg = C // G, cfg.heads // G
        tok = maps_to_tokens(xb)
        v_map = tokens_to_maps(self.wv(tok), H, W)
        reuse = cfg.score_shared and incoming_scores is not None
        if reuse:
            if len(incoming_scores) != G:
                raise ShapeError(f"expected {G} score groups, got {len(incoming_scores)}")
            q_map = k_map = None
        else:
            q_map = tokens_to_maps(self.wq(tok), H, W)
            k_map = q_map if cfg.qk_shared else tokens_to_maps(self.wk(tok), H, W)

        outs, scores_out = [], []
        for g, m_cfg in enumerate(self.windows):
            m = min(m_cfg, H, W)
            vg = window_partition(T.narrow(v_map, 1, g * Cg, Cg), m, m)
            v = _heads_split(maps_to_tokens(vg), Lg)
            if reuse:
                attn = incoming_scores[g]
                if attn.shape != (v.shape[0], Lg, m * m, m * m):
                    raise ShapeError(
                        f"incoming scores group {g} has shape {attn.shape}, "
                        f"expected {(v.shape[0], Lg, m * m, m * m)}")
            else:
                qg = _heads_split(maps_to_tokens(window_partition(T.narrow(q_map, 1, g * Cg, Cg), m, m)), Lg)
                kg = qg if cfg.qk_shared else _heads_split(
                    maps_to_tokens(window_partition(T.narrow(k_map, 1, g * Cg, Cg), m, m)), Lg)
                D = Cg // Lg
                pre = T.scale(T.matmul(qg, T.transpose(kg, (0, 1, 3, 2))), 1.0 / math.sqrt(D))
                _probe_store(probe, f"g{g}_pre_softmax", pre)
                attn = T.softmax(pre, -1)
            _probe_store(probe, f"g{g}_attn", attn)
            scores_out.append(attn)
            og = _heads_merge(T.matmul(attn, v))
            outs.append(window_reverse(tokens_to_maps(og, m, m), m, m, H, W, batch=N))
        merged = T.concat(outs, axis=1)
        y = tokens_to_maps(self.wo(maps_to_tokens(merged)), H, W)
        if single:
            y = T.reshape(y, (C, H, W))
        return y, scores_out


class ShiftConv(Module):
    """Five channel groups shifted one pixel (up/down/left/right/none,
    zero fill) followed by a 1x1 projection; C*C + C parameters."""

    def __init__(self, channels: int, init: Init):
        super().__init__()
        if channels < 5:
            raise ValueError(f"shift_conv needs at least 5 channels, got {channels}")
        self.channels = channels
        g = channels // 5
        self.group_sizes = [g, g, g, g, channels - 4 * g]
        self.proj = Linear(channels, channels, init)  # applied as a 1x1 conv

    @staticmethod
    def _shift(x: Tensor, direction: str) -> Tensor:
        H, W = x.shape[-2], x.shape[-1]
        if direction == "up":
            return T.crop2d(T.pad2d(x, 0, 1, 0, 0), 1, 0, H, W)
        if direction == "down":
            return T.crop2d(T.pad2d(x, 1, 0, 0, 0), 0, 0, H, W)
        if direction == "left":
            return T.crop2d(T.pad2d(x, 0, 0, 0, 1), 0, 1, H, W)
        if direction == "right":
            return T.crop2d(T.pad2d(x, 0, 0, 1, 0), 0, 0, H, W)
        return x

    def forward(self, x: Tensor) -> Tensor:
        xb, single = _as_batched(x)
        N, C, H, W = xb.shape
        parts, start = [], 0
        for size, direction in zip(self.group_sizes, ("up", "down", "left", "right", "none")):
            if size:
                parts.append(self._shift(T.narrow(xb, 1, start, size), direction))
            start += size
        shifted = T.concat(parts, axis=1)
        y = tokens_to_maps(self.proj(maps_to_tokens(shifted)), H, W)
        return T.reshape(y, (C, H, W)) if single else y


def make_attention(cfg: AttentionConfig, init: Init, block_index: int = 0) -> Module:
    """Instantiate the core for ``cfg.kind``; alternating behavior (rect
    orientation, sparse phase) follows the block index parity."""
    if cfg.kind == "plain_window":
        return PlainWindowAttention(cfg, init)
    if cfg.kind == "rect_window":
        return RectWindowAttention(cfg, init, flipped=bool(block_index % 2))
    if cfg.kind == "sparse_dense_window":
        return SparseDenseAttention(cfg, init, sparse=bool(block_index % 2))
    if cfg.kind == "ngram_window":
        return NgramWindowAttention(cfg, init)
    if cfg.kind == "channel":
        return ChannelAttention(cfg, init)
    if cfg.kind == "multiscale_window":
        return MultiscaleSharedAttention(cfg, init)
    raise ValueError(f"unknown attention kind {cfg.kind!r}")
