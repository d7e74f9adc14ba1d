"""Denoiser assembly: a shared conv head and tail around one of seven
transformer bodies, plus the hierarchical options (dense encoder
connections, multi-scale SCDP bottleneck, asymmetric decoder).

The residual contract: the final tail conv is zero-initialized, so a
freshly built model maps any input to itself bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import tensor as T
from .attention import (AttentionConfig, MultiscaleSharedAttention, ShiftConv,
                        make_attention, maps_to_tokens, tokens_to_maps)
from .modules import Conv2d, ConvTranspose2d, Init, LayerNorm, Linear, Module, ModuleList
from .snapshot import checkpoint_bytes, checkpoint_from_bytes
from .tensor import Tensor

HIERARCHIES = ("none", "symmetric", "asymmetric")


@dataclass(frozen=True)
class BodyStyle:
    """Construction idiom of one body kind (Table-level granularity)."""
    ffn: str = "plain"          # plain | dwconv | gated_dw | none
    norm: str = "pre"           # pre | post
    group_conv: bool = False    # non-hier: residual groups closed by a 3x3 conv
    resample: str = "strided"   # strided | shuffle | uformer
    decoder_width: str = "reduce"   # reduce | concat
    pre_dwconv: bool = False    # depthwise 3x3 on the attention branch input
    elan: bool = False          # shift-conv blocks without FFN


BODY_STYLES = {
    "swinir_light": BodyStyle(ffn="plain", group_conv=True),
    "elan_light": BodyStyle(ffn="none", elan=True),
    "ngswin": BodyStyle(ffn="plain", norm="post", resample="strided"),
    "restormer_light": BodyStyle(ffn="gated_dw", resample="shuffle", pre_dwconv=True),
    "uformer_light": BodyStyle(ffn="dwconv", resample="uformer", decoder_width="concat"),
    "cat_light": BodyStyle(ffn="plain", resample="shuffle"),
    "art_light": BodyStyle(ffn="plain", group_conv=True),
}


@dataclass
class ModelConfig:
    body: str
    depths: list[int]
    channels: int
    ffn_hidden: int
    attention: AttentionConfig
    hierarchy: str = "none"
    encoder_connection: str = "none"
    bottleneck: str = "plain"
    tail_layers: int = 2
    tail_kernel: int = 3
    in_channels: int = 3

    def __post_init__(self):
        if self.body not in BODY_STYLES:
            raise ValueError(f"unknown body kind {self.body!r}")
        if not self.depths:
            raise ValueError("depths must be non-empty")
        if self.tail_kernel % 2 == 0 or self.tail_kernel < 1:
            raise ValueError(f"tail_kernel must be odd, got {self.tail_kernel}")
        if self.tail_layers < 2:
            raise ValueError("tail needs at least 2 layers")
        if self.ffn_hidden < self.channels:
            raise ValueError(f"ffn_hidden {self.ffn_hidden} smaller than channels {self.channels}")
        if self.hierarchy not in HIERARCHIES:
            raise ValueError(f"unknown hierarchy {self.hierarchy!r}")
        if self.encoder_connection not in ("none", "dense"):
            raise ValueError(f"unknown encoder connection {self.encoder_connection!r}")
        if self.bottleneck not in ("plain", "scdp"):
            raise ValueError(f"unknown bottleneck {self.bottleneck!r}")
        if self.hierarchy == "none" and (self.encoder_connection != "none" or self.bottleneck != "plain"):
            raise ValueError("non-hierarchical bodies take no encoder connection or scdp bottleneck")
        if self.hierarchy == "asymmetric" and self.bottleneck != "scdp":
            raise ValueError("asymmetric decoders consume the scdp bottleneck output")
        if self.in_channels not in (1, 3):
            raise ValueError("in_channels must be 1 or 3")
        if self.attention.channels != self.channels:
            raise ValueError("attention.channels must equal model channels")
        if self.hierarchy != "none":
            k = len(self._split_depths()[0])
            if self.channels % (2 ** max(k - 1, 0)):
                raise ValueError(f"channels {self.channels} must divide by 2^{k - 1} for {k} levels")

    def _split_depths(self) -> tuple[list[int], int, list[int], int | None]:
        """(encoder depths, bottleneck depth, decoder depths, refinement depth)."""
        d = self.depths
        if self.hierarchy == "none":
            return d, 0, [], None
        if self.hierarchy == "asymmetric":
            if len(d) < 3:
                raise ValueError(f"asymmetric depths need >= 3 entries, got {d}")
            return d[:-2], d[-2], [d[-1]], None
        if len(d) % 2 == 1:
            if len(d) < 3:
                raise ValueError(f"symmetric depths need >= 3 entries, got {d}")
            k = len(d) // 2
            return d[:k], d[k], d[k + 1:], None
        if len(d) < 4:
            raise ValueError(f"symmetric depths with refinement need >= 4 entries, got {d}")
        k = (len(d) - 2) // 2
        return d[:k], d[k], d[k + 1:-1], d[-1]

    def to_dict(self) -> dict:
        a = self.attention
        return {
            "body": self.body, "depths": list(self.depths), "channels": self.channels,
            "ffn_hidden": self.ffn_hidden,
            "attention": {
                "kind": a.kind, "channels": a.channels, "heads": a.heads,
                "window": list(a.window) if isinstance(a.window, (tuple, list)) else a.window,
                "dilation": a.dilation, "ngram": a.ngram,
                "qk_shared": a.qk_shared, "score_shared": a.score_shared,
            },
            "hierarchy": self.hierarchy, "encoder_connection": self.encoder_connection,
            "bottleneck": self.bottleneck, "tail_layers": self.tail_layers,
            "tail_kernel": self.tail_kernel, "in_channels": self.in_channels,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        a = dict(d["attention"])
        if a["kind"] == "rect_window":
            a["window"] = tuple(a["window"])
        att = AttentionConfig(**a)
        return cls(body=d["body"], depths=list(d["depths"]), channels=d["channels"],
                   ffn_hidden=d["ffn_hidden"], attention=att,
                   hierarchy=d.get("hierarchy", "none"),
                   encoder_connection=d.get("encoder_connection", "none"),
                   bottleneck=d.get("bottleneck", "plain"),
                   tail_layers=d.get("tail_layers", 2),
                   tail_kernel=d.get("tail_kernel", 3),
                   in_channels=d.get("in_channels", 3))


# ---------------------------------------------------------------------------
# blocks

def _norm_map(norm: LayerNorm, x: Tensor) -> Tensor:
    N, C, H, W = x.shape
    return tokens_to_maps(norm(maps_to_tokens(x)), H, W)


class FeedForward(Module):
    def __init__(self, c: int, hidden: int, style: str, init: Init):
        super().__init__()
        self.style = style
        if style == "gated_dw":
            self.fc1 = Linear(c, 2 * hidden, init)
            self.dw = Conv2d(2 * hidden, 2 * hidden, 3, init, groups=2 * hidden)
        else:
            self.fc1 = Linear(c, hidden, init)
            self.dw = Conv2d(hidden, hidden, 3, init, groups=hidden) if style == "dwconv" else None
        self.fc2 = Linear(hidden, c, init)
        self.hidden = hidden

    def forward(self, x: Tensor) -> Tensor:  # (N,C,H,W)
        N, C, H, W = x.shape
        h = self.fc1(maps_to_tokens(x))
        if self.style == "gated_dw":
            h = maps_to_tokens(self.dw(tokens_to_maps(h, H, W)))
            gate = T.gelu(T.narrow(h, -1, 0, self.hidden))
            h = T.mul(gate, T.narrow(h, -1, self.hidden, self.hidden))
        else:
            h = T.gelu(h)
            if self.dw is not None:
                h = T.gelu(maps_to_tokens(self.dw(tokens_to_maps(h, H, W))))
        return tokens_to_maps(self.fc2(h), H, W)


class TransformerBlock(Module):
    """Attention + FFN with pre- or post-placed layer norm."""

    def __init__(self, attn_cfg: AttentionConfig, hidden: int, style: BodyStyle,
                 init: Init, block_index: int):
        super().__init__()
        c = attn_cfg.channels
        self.style = style
        self.norm1 = LayerNorm(c, init)
        self.pre_dw = Conv2d(c, c, 3, init, groups=c) if style.pre_dwconv else None
        self.attn = make_attention(attn_cfg, init, block_index)
        self.multiscale = isinstance(self.attn, MultiscaleSharedAttention)
        if style.ffn != "none":
            self.norm2 = LayerNorm(c, init)
            self.ffn = FeedForward(c, hidden, style.ffn, init)
        else:
            self.ffn = None

    def _attend(self, x, incoming_scores, probe):
        if self.pre_dw is not None:
            x = self.pre_dw(x)
        if self.multiscale:
            return self.attn(x, incoming_scores=incoming_scores, probe=probe)
        return self.attn(x, probe=probe), None

    def forward(self, x: Tensor, incoming_scores=None, probe=None):
        if self.style.norm == "pre":
            a, scores = self._attend(_norm_map(self.norm1, x), incoming_scores, probe)
            x = T.add(x, a)
            if self.ffn is not None:
                x = T.add(x, self.ffn(_norm_map(self.norm2, x)))
        else:
            a, scores = self._attend(x, incoming_scores, probe)
            x = _norm_map(self.norm1, T.add(x, a))
            if self.ffn is not None:
                x = _norm_map(self.norm2, T.add(x, self.ffn(x)))
        return x, scores


class ElanBlock(Module):
    """Two shift-convs (local branch) then shared multiscale attention."""

    def __init__(self, attn_cfg: AttentionConfig, init: Init):
        super().__init__()
        c = attn_cfg.channels
        self.sc1 = ShiftConv(c, init)
        self.sc2 = ShiftConv(c, init)
        self.attn = MultiscaleSharedAttention(attn_cfg, init)
        self.multiscale = True

    def forward(self, x: Tensor, incoming_scores=None, probe=None):
        x = T.add(x, self.sc2(T.relu(self.sc1(x))))
        out, scores = self.attn(x, incoming_scores=incoming_scores, probe=probe)
        return T.add(x, out), scores


class BlockSequence(Module):
    """Runs blocks in order; even-indexed multiscale blocks provide their
    attention maps to the following block when score sharing is on."""

    def __init__(self, blocks):
        super().__init__()
        self.blocks = ModuleList(blocks)

    def forward(self, x: Tensor, probe=None) -> Tensor:
        scores = None
        for i, blk in enumerate(self.blocks):
            x, out_scores = blk(x, incoming_scores=scores, probe=probe)
            share = getattr(blk, "multiscale", False) and blk.attn.cfg.score_shared
            scores = out_scores if (share and i % 2 == 0) else None
        return x


# ---------------------------------------------------------------------------
# hierarchy components

class DenseConnect(Module):
    """Concat [priors..., current] on channels, 1x1 back to current width."""

    def __init__(self, prior_channels: list[int], current_channels: int, init: Init):
        super().__init__()
        self.proj = Conv2d(sum(prior_channels) + current_channels, current_channels, 1, init)

    def forward(self, priors: list[Tensor], current: Tensor) -> Tensor:
        for p in priors:
            if p.shape[-2:] != current.shape[-2:]:
                raise T.ShapeError(
                    f"dense_connect: prior resolution {p.shape[-2:]} != current {current.shape[-2:]}")
        return self.proj(T.concat([*priors, current], axis=1) if priors else current)


def avg_pool(x: Tensor, s: int) -> Tensor:
    return T.scale(T.box_sum2d(x, s), 1.0 / (s * s)) if s > 1 else x


class SCDPBottleneck(Module):
    """pixel-Shuffle to full resolution, Concat, Depthwise 3x3, Pointwise 1x1.

    Features arrive fine-to-coarse: feats[i] has channels[i] at stride 2^i.
    """

    def __init__(self, feature_channels: list[int], target_channels: int, init: Init):
        super().__init__()
        merged = 0
        for i, ch in enumerate(feature_channels):
            r2 = 4 ** i
            if ch % r2:
                raise ValueError(f"scdp: level {i} channels {ch} not divisible by {r2}")
            merged += ch // r2
        self.merged = merged
        self.dw = Conv2d(merged, merged, 3, init, groups=merged)
        self.pw = Conv2d(merged, target_channels, 1, init)

    def forward(self, feats: list[Tensor]) -> Tensor:
        h0, w0 = feats[0].shape[-2], feats[0].shape[-1]
        ups = []
        for i, f in enumerate(feats):
            up = T.pixel_shuffle(f, 2 ** i)
            if up.shape[-2:] != (h0, w0):
                raise T.ShapeError(f"scdp: level {i} upscales to {up.shape[-2:]}, expected {(h0, w0)}")
            ups.append(up)
        return self.pw(self.dw(T.concat(ups, axis=1)))


class Identity(Module):
    def forward(self, x):
        return x


class Downsample(Module):
    def __init__(self, ch: int, style: BodyStyle, init: Init):
        super().__init__()
        if style.resample == "shuffle":
            self.conv = Conv2d(ch, ch // 2, 3, init)   # then unshuffle x2 -> 2ch
            self.mode = "shuffle"
        else:
            k = 5 if style.resample == "uformer" else 3
            self.conv = Conv2d(ch, 2 * ch, k, init, stride=2)
            self.mode = "strided"

    def forward(self, x):
        if self.mode == "shuffle":
            return T.pixel_unshuffle(self.conv(x), 2)
        return self.conv(x)


class Upsample(Module):
    def __init__(self, cin: int, cout: int, style: BodyStyle, init: Init):
        super().__init__()
        if style.resample == "uformer":
            self.conv = ConvTranspose2d(cin, cout, 2, init)
            self.mode = "deconv"
        else:
            self.conv = Conv2d(cin, 4 * cout, 3, init)  # then shuffle x2 -> cout
            self.mode = "shuffle"

    def forward(self, x):
        if self.mode == "deconv":
            return self.conv(x)
        return T.pixel_shuffle(self.conv(x), 2)


# ---------------------------------------------------------------------------
# bodies

class GroupedBody(Module):
    """Residual groups of blocks each closed by a 3x3 conv, plus a final
    conv and a body-level residual (non-hierarchical bodies)."""

    def __init__(self, cfg: ModelConfig, style: BodyStyle, init: Init):
        super().__init__()
        c = cfg.channels
        self.groups = ModuleList()
        self.group_convs = ModuleList()
        idx = 0
        for depth in cfg.depths:
            blocks = []
            for _ in range(depth):
                blocks.append(_make_block(cfg, style, c, cfg.ffn_hidden, cfg.attention, init, idx))
                idx += 1
            self.groups.append(BlockSequence(blocks))
            self.group_convs.append(Conv2d(c, c, 3, init))
        self.conv_after = Conv2d(c, c, 3, init)
        self.out_channels = c
        self.spatial_multiple = 1

    def forward(self, x: Tensor, probe=None) -> Tensor:
        z = x
        for seq, conv in zip(self.groups, self.group_convs):
            z = T.add(z, conv(seq(z, probe=probe)))
        return T.add(x, self.conv_after(z))


class FlatBody(Module):
    """Plain stack of blocks (ELAN style: no groups, no closing convs)."""

    def __init__(self, cfg: ModelConfig, style: BodyStyle, init: Init):
        super().__init__()
        blocks = []
        for idx in range(sum(cfg.depths)):
            blocks.append(_make_block(cfg, style, cfg.channels, cfg.ffn_hidden, cfg.attention, init, idx))
        self.seq = BlockSequence(blocks)
        self.out_channels = cfg.channels
        self.spatial_multiple = 1

    def forward(self, x: Tensor, probe=None) -> Tensor:
        return self.seq(x, probe=probe)


def _make_block(cfg: ModelConfig, style: BodyStyle, channels: int, hidden: int,
                attn_base: AttentionConfig, init: Init, block_index: int) -> Module:
    scale = channels // cfg.channels
    attn_cfg = attn_base.scaled(channels, attn_base.heads * scale)
    if style.elan:
        return ElanBlock(attn_cfg, init)
    return TransformerBlock(attn_cfg, hidden * scale, style, init, block_index)


class HierarchicalBody(Module):
    """U-shaped scaffold: encoder levels with optional dense connections,
    plain or SCDP bottleneck, symmetric or asymmetric (fused) decoder."""

    def __init__(self, cfg: ModelConfig, style: BodyStyle, init: Init):
        super().__init__()
        enc_depths, bott_depth, dec_depths, refine_depth = cfg._split_depths()
        k = len(enc_depths)
        C = cfg.channels
        scdp = cfg.bottleneck == "scdp"
        dense = cfg.encoder_connection == "dense"
        self.k = k
        self.scdp = scdp
        self.dense = dense
        self.asymmetric = cfg.hierarchy == "asymmetric"
        enc_ch = [C * 2 ** i for i in range(k)]

        def level(depth, ch, start_idx=0):
            blocks = [_make_block(cfg, style, ch, cfg.ffn_hidden, cfg.attention, init, start_idx + j)
                      for j in range(depth)]
            return BlockSequence(blocks)

        # encoder
        self.enc_levels = ModuleList([level(d, ch) for d, ch in zip(enc_depths, enc_ch)])
        self.downs = ModuleList([Downsample(enc_ch[i], style, init)
                                 for i in range(k - 1 if scdp else k)])
        if dense:
            # priors: body input (C at stride 1) plus all earlier level outputs
            self.dense_projs = ModuleList([
                DenseConnect([C] + enc_ch[:i], enc_ch[i], init) for i in range(1, k)
            ])

        # bottleneck
        bott_ch = enc_ch[-1] if scdp else C * 2 ** k
        self.bottleneck = level(bott_depth, bott_ch)
        self.scdp_merge = SCDPBottleneck(enc_ch, C, init) if scdp else None

        # decoder
        if self.asymmetric:
            self.dec_levels = ModuleList([level(dec_depths[0], C)])
            self.out_channels = C
        else:
            self.ups = ModuleList()
            self.fuses = ModuleList()
            self.dec_levels = ModuleList()
            cur = bott_ch
            for j in range(k - 1, -1, -1):
                skip = enc_ch[j]
                extra = C if (scdp and j == 0) else 0
                if scdp and j == k - 1:
                    self.ups.append(Identity())  # bottleneck already sits at this stride
                    width = cur + skip + extra
                else:
                    up_out = skip if style.decoder_width == "concat" else cur // 2
                    self.ups.append(Upsample(cur, up_out, style, init))
                    width = up_out + skip + extra
                if style.decoder_width == "concat":
                    self.fuses.append(Identity())
                elif j > 0:
                    self.fuses.append(Conv2d(width, skip, 1, init))
                    width = skip
                elif scdp:
                    self.fuses.append(Conv2d(width, 2 * C, 1, init))
                    width = 2 * C
                else:
                    self.fuses.append(Identity())  # finest level runs at concat width (2C)
                self.dec_levels.append(level(dec_depths[k - 1 - j], width))
                cur = width
            self.out_channels = cur
        if refine_depth is not None:
            self.refinement = level(refine_depth, self.out_channels)
        else:
            self.refinement = None
        self.spatial_multiple = 2 ** (k - 1 if scdp else k)

    def forward(self, x: Tensor, probe=None) -> Tensor:
        shallow = x
        skips = []
        for i, lvl in enumerate(self.enc_levels):
            if self.dense and i > 0:
                priors = [avg_pool(shallow, 2 ** i)] + [avg_pool(s, 2 ** (i - j)) for j, s in enumerate(skips)]
                x = self.dense_projs[i - 1](priors, x)
            x = lvl(x, probe=probe)
            skips.append(x)
            if i < len(self.downs):
                x = self.downs[i](x)
        x = self.bottleneck(x, probe=probe)
        scdp_out = None
        if self.scdp_merge is not None:
            feats = skips[:-1] + [x]   # deepest feature is the bottleneck output
            scdp_out = self.scdp_merge(feats)
        if self.asymmetric:
            return self.dec_levels[0](scdp_out, probe=probe)
        k = self.k
        for idx, j in enumerate(range(k - 1, -1, -1)):
            x = self.ups[idx](x)
            parts = [x, skips[j]]
            if self.scdp and j == 0:
                parts.append(scdp_out)
            x = self.fuses[idx](T.concat(parts, axis=1))
            x = self.dec_levels[idx](x, probe=probe)
        if self.refinement is not None:
            x = self.refinement(x, probe=probe)
        return x


# ---------------------------------------------------------------------------
# full model

class Denoiser(Module):
    def __init__(self, cfg: ModelConfig, init: Init):
        super().__init__()
        style = BODY_STYLES[cfg.body]
        self.cfg = cfg
        self.head = Conv2d(cfg.in_channels, cfg.channels, 3, init)
        if cfg.hierarchy != "none":
            self.body = HierarchicalBody(cfg, style, init)
        elif style.elan:
            self.body = FlatBody(cfg, style, init)
        else:
            self.body = GroupedBody(cfg, style, init)
        w = self.body.out_channels
        tail = []
        for _ in range(cfg.tail_layers - 1):
            tail.append(Conv2d(w, w, cfg.tail_kernel, init))
        tail.append(Conv2d(w, cfg.in_channels, cfg.tail_kernel, init, zero_init=True))
        self.tail = ModuleList(tail)
        self.spatial_multiple = self.body.spatial_multiple

    def forward(self, lq: Tensor, probe=None) -> Tensor:
        """Residual branch only: head -> body -> tail."""
        z = self.head(lq)
        r = self.body(z, probe=probe)
        for i, conv in enumerate(self.tail):
            if i:
                r = T.relu(r)
            r = conv(r)
        return r


class Model:
    """A built denoiser: config, parameters, and the forward contract."""

    def __init__(self, config: ModelConfig, init_seed: int, net: Denoiser):
        self.config = config
        self.init_seed = init_seed
        self.net = net

    @property
    def in_channels(self) -> int:
        return self.config.in_channels

    def forward(self, lq: Tensor, probe=None) -> Tensor:
        return forward_denoise(self, lq, probe=probe)

    def denoise_array(self, arr: np.ndarray) -> np.ndarray:
        dtype = next(iter(self.net.parameters())).data.dtype
        with T.no_grad():
            out = self.forward(Tensor(np.asarray(arr, dtype=dtype)))
        return out.data

    def named_parameters(self):
        return self.net.named_parameters()

    def param_count(self) -> int:
        return self.net.param_count()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.named_parameters()}

    def load_state(self, arrays: dict[str, np.ndarray]):
        for name, p in self.named_parameters():
            src = arrays[name]
            if src.shape != p.data.shape:
                raise ValueError(f"checkpoint tensor {name} has shape {src.shape}, expected {p.data.shape}")
            p.data = src.astype(p.data.dtype, copy=True)

    def checkpoint_bytes(self) -> bytes:
        return checkpoint_bytes(self.state_arrays())

    def save(self, path):
        path = Path(path)
        path.write_bytes(self.checkpoint_bytes())
        sidecar = {"config": self.config.to_dict(), "init_seed": self.init_seed}
        path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Model":
        path = Path(path)
        sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
        model = build_model(ModelConfig.from_dict(sidecar["config"]), sidecar["init_seed"])
        model.load_state(checkpoint_from_bytes(path.read_bytes()))
        return model


def build_model(config: ModelConfig, init_seed: int, dtype=np.float32) -> Model:
    """Deterministic build: (config, init_seed) fully determine parameters."""
    init = Init(init_seed, dtype=dtype)
    return Model(config, init_seed, Denoiser(config, init))


def forward_denoise(model: Model, lq: Tensor, probe=None) -> Tensor:
    """I_RC = I_LQ + tail(body(head(I_LQ))), padding/cropping odd sizes."""
    if lq.shape[-3] != model.config.in_channels:
        raise T.ShapeError(
            f"model expects {model.config.in_channels} channels, input has {lq.shape[-3]}")
    single = lq.data.ndim == 3
    x = T.reshape(lq, (1, *lq.shape)) if single else lq
    H, W = x.shape[-2], x.shape[-1]
    m = model.net.spatial_multiple
    ph, pw = (-H) % m, (-W) % m
    xp = T.pad2d(x, 0, ph, 0, pw, mode="reflect") if (ph or pw) else x
    res = model.net(xp, probe=probe)
    if ph or pw:
        res = T.crop2d(res, 0, 0, H, W)
    out = T.add(x, res)
    return T.reshape(out, out.shape[1:]) if single else out


def count_params(model: Model) -> int:
    return model.param_count()


def asymmetric_variant(config: ModelConfig) -> ModelConfig:
    """Fuse the decoder levels of a symmetric config into one and deepen
    the finest encoder level ([2,4,2,2,2,4,2] -> [4,4,2,2,8])."""
    if config.hierarchy != "symmetric":
        raise ValueError(f"asymmetric_variant needs a symmetric config, got {config.hierarchy!r}")
    enc, bott, dec, refine = config._split_depths()
    if refine is not None:
        raise ValueError("asymmetric_variant does not take refinement stages")
    depths = [enc[0] * 2] + enc[1:] + [bott] + [sum(dec)]
    return replace(config, depths=depths, hierarchy="asymmetric", bottleneck="scdp")


# ---------------------------------------------------------------------------
# shipped configs

def load_model_config(name_or_path: str) -> ModelConfig:
    """Load a packaged config by name (e.g. 'toy_uformer') or a JSON path."""
    p = Path(name_or_path)
    if p.suffix == ".json" and p.exists():
        return ModelConfig.from_dict(json.loads(p.read_text()))
    ref = resources.files("fairdenoise").joinpath(f"configs/{name_or_path}.json")
    if ref.is_file():
        return ModelConfig.from_dict(json.loads(ref.read_text()))
    raise FileNotFoundError(f"no model config named {name_or_path!r}")


def list_model_configs() -> list[str]:
    root = resources.files("fairdenoise").joinpath("configs")
    return sorted(f.name[:-5] for f in root.iterdir() if f.name.endswith(".json"))
