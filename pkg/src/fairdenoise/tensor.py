"""Dense tensors with a reverse-mode gradient tape.

Arrays are numpy float32/float64 buffers in row-major order, channels
first for images.  Ops record closures on a tape when any input has
``requires_grad`` and grad mode is on; ``backward`` walks the tape in
reverse topological order.  There is no implicit broadcasting between
tensors: shapes must match exactly except for the documented bias-style
additions (``linear``/``conv2d`` bias, ``add_bias``, ``scale_channels``).
The tape is single-threaded; read-only forwards under ``no_grad`` are
safe to run concurrently on disjoint inputs.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

_FLOAT_DTYPES = (np.float32, np.float64)


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible."""


_grad_enabled = True


@contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, dtype=None, requires_grad: bool = False):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in _FLOAT_DTYPES:
            arr = arr.astype(np.float32)
        self.data = np.ascontiguousarray(arr)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def zero_grad(self):
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype.name}, requires_grad={self.requires_grad})"

    # operator sugar; scalars are allowed, tensor operands must match shape
    def __add__(self, other):
        return add(self, other) if isinstance(other, Tensor) else add_scalar(self, other)

    def __radd__(self, other):
        return add_scalar(self, other)

    def __sub__(self, other):
        return sub(self, other) if isinstance(other, Tensor) else add_scalar(self, -other)

    def __mul__(self, other):
        return mul(self, other) if isinstance(other, Tensor) else scale(self, other)

    def __rmul__(self, other):
        return scale(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self):
        backward(self)


def _require_same_shape(a: Tensor, b: Tensor, op: str):
    if a.shape != b.shape:
        raise ShapeError(f"{op}: operand shapes {a.shape} and {b.shape} differ")


def _require_same_dtype(*ts: Tensor):
    dt = ts[0].data.dtype
    for t in ts[1:]:
        if t.data.dtype != dt:
            raise ShapeError(f"mixed dtypes {dt} and {t.data.dtype}")


def _make(data: np.ndarray, parents, backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    tracked = _grad_enabled and any(p.requires_grad for p in parents)
    out.requires_grad = tracked
    out._parents = tuple(parents) if tracked else ()
    out._backward = backward_fn if tracked else None
    return out


def _accum(t: Tensor, g: np.ndarray, fresh: bool = False):
    """Add a gradient contribution. ``fresh`` marks arrays the caller
    allocated exclusively for this call, which may be adopted without a
    defensive copy."""
    if not t.requires_grad:
        return
    if t.grad is None:
        if fresh and g.dtype == t.data.dtype and g.flags.c_contiguous:
            t.grad = g
        else:
            t.grad = g.astype(t.data.dtype, copy=True)
    else:
        t.grad += g


def backward(root: Tensor):
    """Reverse-mode sweep from a scalar root."""
    if root.data.size != 1:
        raise ShapeError(f"backward root must be scalar, got shape {root.shape}")
    topo, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
            node._backward = None  # release closure references


# ---------------------------------------------------------------------------
# elementwise and reductions

def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")
    _require_same_dtype(a, b)

    def bw(g):
        _accum(a, g, fresh=True)
        _accum(b, g)

    return _make(a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")
    _require_same_dtype(a, b)

    def bw(g):
        _accum(a, g, fresh=True)
        _accum(b, -g, fresh=True)

    return _make(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")
    _require_same_dtype(a, b)

    def bw(g):
        _accum(a, g * b.data, fresh=True)
        _accum(b, g * a.data, fresh=True)

    return _make(a.data * b.data, (a, b), bw)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def bw(g):
        _accum(a, g * s, fresh=True)

    return _make(a.data * a.data.dtype.type(s), (a,), bw)


def add_scalar(a: Tensor, s: float) -> Tensor:
    def bw(g):
        _accum(a, g, fresh=True)

    return _make(a.data + a.data.dtype.type(float(s)), (a,), bw)


def absolute(a: Tensor) -> Tensor:
    def bw(g):
        _accum(a, g * np.sign(a.data), fresh=True)

    return _make(np.abs(a.data), (a,), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bw(g):
        _accum(a, g * mask, fresh=True)

    return _make(a.data * mask, (a,), bw)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """Tanh-approximated GELU."""
    x = a.data
    x2 = x * x
    t = np.tanh(_GELU_C * (x + 0.044715 * (x2 * x)))

    def bw(g):
        d = 0.5 * (1.0 + t) + (0.5 * _GELU_C) * x * (1.0 - t * t) * (1.0 + (3 * 0.044715) * x2)
        _accum(a, g * d, fresh=True)

    return _make(0.5 * x * (1.0 + t), (a,), bw)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def bw(g):
        _accum(a, np.full_like(a.data, g / n), fresh=True)

    return _make(np.asarray(a.data.mean(), dtype=a.data.dtype), (a,), bw)


def sum_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    def bw(g):
        ge = np.expand_dims(g, axis) if not keepdims else g
        _accum(a, np.broadcast_to(ge, a.shape).copy(), fresh=True)

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), bw)


# ---------------------------------------------------------------------------
# shape plumbing

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)

    def bw(g):
        _accum(a, g.reshape(a.shape), fresh=True)

    return _make(np.ascontiguousarray(a.data.reshape(shape)), (a,), bw)


def transpose(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = np.argsort(axes)

    def bw(g):
        _accum(a, np.ascontiguousarray(g.transpose(inv)), fresh=True)

    return _make(np.ascontiguousarray(a.data.transpose(axes)), (a,), bw)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    _require_same_dtype(*tensors)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bw)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def bw(g):
        gx = np.zeros_like(a.data)
        gx[sl] = g
        _accum(a, gx, fresh=True)

    return _make(np.ascontiguousarray(a.data[sl]), (a,), bw)


def expand_axis(a: Tensor, axis: int, times: int) -> Tensor:
    """Insert a new axis of size ``times`` by repetition."""
    e = np.expand_dims(a.data, axis)
    shape = list(e.shape)
    shape[axis] = times

    def bw(g):
        _accum(a, g.sum(axis=axis), fresh=True)

    return _make(np.ascontiguousarray(np.broadcast_to(e, shape)), (a,), bw)


def pad2d(a: Tensor, top: int, bottom: int, left: int, right: int, mode: str = "zero") -> Tensor:
    """Pad the trailing two axes. Modes: zero, reflect (edge not repeated)."""
    H, W = a.shape[-2], a.shape[-1]
    spec = [(0, 0)] * (a.data.ndim - 2) + [(top, bottom), (left, right)]
    if mode == "zero":
        out = np.pad(a.data, spec)

        def bw(g):
            sl = (Ellipsis, slice(top, top + H), slice(left, left + W))
            _accum(a, g[sl])

    elif mode == "reflect":
        if top >= H or bottom >= H or left >= W or right >= W:
            raise ShapeError(f"reflect pad ({top},{bottom},{left},{right}) too large for {H}x{W}")
        out = np.pad(a.data, spec, mode="reflect")

        def bw(g):
            # undo the W axis, then the H axis (np.pad applies per axis)
            g = g.copy()
            core_w = g[..., left:left + W]
            if left:
                core_w[..., 1:left + 1] += g[..., :left][..., ::-1]
            if right:
                core_w[..., W - right - 1:W - 1] += g[..., left + W:][..., ::-1]
            core = core_w[..., top:top + H, :]
            if top:
                core[..., 1:top + 1, :] += core_w[..., :top, :][..., ::-1, :]
            if bottom:
                core[..., H - bottom - 1:H - 1, :] += core_w[..., top + H:, :][..., ::-1, :]
            _accum(a, core)

    else:
        raise ValueError(f"unknown pad mode {mode!r}")
    return _make(out, (a,), bw)


def crop2d(a: Tensor, top: int, left: int, height: int, width: int) -> Tensor:
    sl = (Ellipsis, slice(top, top + height), slice(left, left + width))

    def bw(g):
        gx = np.zeros_like(a.data)
        gx[sl] = g
        _accum(a, gx)

    return _make(np.ascontiguousarray(a.data[sl]), (a,), bw)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_dtype(a, b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError(f"matmul needs 2D+ operands, got {a.shape} and {b.shape}")
    if a.shape[:-2] != b.shape[:-2] or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not align")

    def bw(g):
        _accum(a, g @ b.data.swapaxes(-1, -2), fresh=True)
        _accum(b, a.data.swapaxes(-1, -2) @ g, fresh=True)

    return _make(a.data @ b.data, (a, b), bw)


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis: x[..., Cin] @ weight[Cin, Cout] + bias."""
    _require_same_dtype(*( (x, weight, bias) if bias is not None else (x, weight) ))
    if weight.data.ndim != 2 or x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear: input shape {x.shape} does not match weight shape {weight.shape}")
    if bias is not None and bias.shape != (weight.shape[1],):
        raise ShapeError(f"linear: bias shape {bias.shape} does not match weight shape {weight.shape}")
    y = x.data @ weight.data
    if bias is not None:
        y = y + bias.data

    def bw(g):
        _accum(x, g @ weight.data.T, fresh=True)
        gf = g.reshape(-1, weight.shape[1])
        xf = x.data.reshape(-1, weight.shape[0])
        _accum(weight, xf.T @ gf, fresh=True)
        if bias is not None:
            _accum(bias, gf.sum(axis=0), fresh=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(y, parents, bw)


def add_bias(x: Tensor, bias: Tensor) -> Tensor:
    """Add a bias whose shape equals a trailing suffix of x's shape."""
    nb = bias.data.ndim
    if x.shape[x.data.ndim - nb:] != bias.shape:
        raise ShapeError(f"add_bias: bias shape {bias.shape} is not a suffix of {x.shape}")
    lead = tuple(range(x.data.ndim - nb))

    def bw(g):
        _accum(x, g, fresh=True)
        _accum(bias, g.sum(axis=lead) if lead else g)

    return _make(x.data + bias.data, (x, bias), bw)


def scale_channels(x: Tensor, t: Tensor, axis: int) -> Tensor:
    """Multiply along one axis by a 1-D parameter of matching length."""
    if t.data.ndim != 1 or x.shape[axis] != t.shape[0]:
        raise ShapeError(f"scale_channels: {t.shape} does not match axis {axis} of {x.shape}")
    shape = [1] * x.data.ndim
    shape[axis] = t.shape[0]
    tb = t.data.reshape(shape)
    other = tuple(i for i in range(x.data.ndim) if i != axis % x.data.ndim)

    def bw(g):
        _accum(x, g * tb, fresh=True)
        _accum(t, (g * x.data).sum(axis=other), fresh=True)

    return _make(x.data * tb, (x, t), bw)


def embedding_lookup(table: Tensor, index: np.ndarray) -> Tensor:
    """Gather rows of a 2-D table by integer index array."""
    index = np.asarray(index)

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, index.reshape(-1), g.reshape(-1, table.shape[-1]))
        _accum(table, gt, fresh=True)

    return _make(table.data[index], (table,), bw)


def l2_normalize(x: Tensor, axis: int, eps: float = 1e-12) -> Tensor:
    """x / sqrt(sum(x^2, axis) + eps)."""
    n2 = (x.data**2).sum(axis=axis, keepdims=True) + x.data.dtype.type(eps)
    inv = 1.0 / np.sqrt(n2)
    y = x.data * inv

    def bw(g):
        s = (g * x.data).sum(axis=axis, keepdims=True)
        _accum(x, g * inv - x.data * s * inv**3, fresh=True)

    return _make(y.astype(x.data.dtype), (x,), bw)


def softmax(x: Tensor, axis: int) -> Tensor:
    """Max-stabilized softmax along one axis."""
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        s = (g * y).sum(axis=axis, keepdims=True)
        _accum(x, y * (g - s), fresh=True)

    return _make(y.astype(x.data.dtype), (x,), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    C = x.shape[-1]
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeError(f"layer_norm: affine shapes {gamma.shape}/{beta.shape} do not match channels {C}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = xhat * gamma.data + beta.data

    def bw(g):
        gx_hat = g * gamma.data
        gvar = (gx_hat * xc).sum(axis=-1, keepdims=True) * (-0.5) * inv**3
        gmu = -inv * gx_hat.sum(axis=-1, keepdims=True)
        gx = gx_hat * inv + gvar * (2.0 / C) * xc + gmu / C
        _accum(x, gx, fresh=True)
        lead = tuple(range(x.data.ndim - 1))
        _accum(gamma, (g * xhat).sum(axis=lead), fresh=True)
        _accum(beta, g.sum(axis=lead), fresh=True)

    return _make(y.astype(x.data.dtype), (x, gamma, beta), bw)


# ---------------------------------------------------------------------------
# convolution

def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """Cross-correlation over (C,H,W) or (N,C,H,W) inputs.

    weight is (C_out, C_in/groups, k, k) with k odd; groups == C_in with
    C_out == C_in gives a depthwise convolution.
    """
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    if xd.ndim != 4:
        raise ShapeError(f"conv2d: input must be (C,H,W) or (N,C,H,W), got {x.shape}")
    N, C, H, W = xd.shape
    Cout, Cg, k, k2 = weight.shape
    if k != k2 or k % 2 == 0:
        raise ShapeError(f"conv2d: kernel must be square and odd, got {weight.shape}")
    if C % groups or Cout % groups:
        raise ShapeError(f"conv2d: channels {C}->{Cout} not divisible by groups {groups}")
    if Cg != C // groups:
        raise ShapeError(f"conv2d: weight shape {weight.shape} does not match input channels {C} with groups {groups}")
    _require_same_dtype(*( (x, weight, bias) if bias is not None else (x, weight) ))
    s, p = stride, padding
    Ho = (H + 2 * p - k) // s + 1
    Wo = (W + 2 * p - k) // s + 1
    if Ho <= 0 or Wo <= 0:
        raise ShapeError(f"conv2d: output would be {Ho}x{Wo} for input {H}x{W}, kernel {k}, stride {s}, padding {p}")

    G, Og = groups, Cout // groups
    xp = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p))) if p else xd
    # im2col into (G, N, Cg*k*k, Ho*Wo), then one batched GEMM per call
    sw = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::s, ::s]
    cols = np.ascontiguousarray(
        sw.reshape(N, G, Cg, Ho, Wo, k, k).transpose(1, 0, 2, 5, 6, 3, 4)
    ).reshape(G, N, Cg * k * k, Ho * Wo)
    w2 = weight.data.reshape(G, Og, Cg * k * k)
    out = w2[:, None] @ cols                      # (G, N, Og, Ho*Wo)
    y = np.ascontiguousarray(out.transpose(1, 0, 2, 3)).reshape(N, Cout, Ho, Wo)
    if bias is not None:
        if bias.shape != (Cout,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} does not match out channels {Cout}")
        y = y + bias.data.reshape(1, Cout, 1, 1)
    if single:
        y = y[0]

    def bw(g):
        gd = g[None] if single else g
        gg = np.ascontiguousarray(
            gd.reshape(N, G, Og, Ho * Wo).transpose(1, 0, 2, 3))      # (G, N, Og, Ho*Wo)
        gw = (gg @ cols.swapaxes(-1, -2)).sum(axis=1)                 # (G, Og, Cg*k*k)
        gcols = w2.swapaxes(-1, -2)[:, None] @ gg                     # (G, N, Cg*k*k, Ho*Wo)
        gcols = gcols.reshape(G, N, Cg, k, k, Ho, Wo).transpose(1, 0, 2, 3, 4, 5, 6)
        gxp = np.zeros_like(xp)
        gxg = gxp.reshape(N, G, Cg, *xp.shape[2:])
        for di in range(k):
            for dj in range(k):
                gxg[:, :, :, di:di + (Ho - 1) * s + 1:s, dj:dj + (Wo - 1) * s + 1:s] += \
                    gcols[:, :, :, di, dj]
        gx = gxp[:, :, p:p + H, p:p + W] if p else gxp
        _accum(x, gx[0] if single else gx, fresh=True)
        _accum(weight, gw.reshape(weight.shape), fresh=True)
        if bias is not None:
            _accum(bias, gd.sum(axis=(0, 2, 3)), fresh=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(y, parents, bw)


def box_sum2d(x: Tensor, k: int, stride: int | None = None, padding: int = 0) -> Tensor:
    """Per-channel sum over k x k boxes (zero padded); stride defaults to k."""
    s = k if stride is None else stride
    p = padding
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    N, C, H, W = xd.shape
    Ho = (H + 2 * p - k) // s + 1
    Wo = (W + 2 * p - k) // s + 1
    if Ho <= 0 or Wo <= 0:
        raise ShapeError(f"box_sum2d: output would be {Ho}x{Wo}")
    xp = np.pad(xd, ((0, 0), (0, 0), (p, p), (p, p))) if p else xd
    out = np.zeros((N, C, Ho, Wo), dtype=xd.dtype)
    for di in range(k):
        for dj in range(k):
            out += xp[:, :, di:di + (Ho - 1) * s + 1:s, dj:dj + (Wo - 1) * s + 1:s]
    if single:
        out = out[0]

    def bw(g):
        gd = g[None] if single else g
        gxp = np.zeros_like(xp)
        for di in range(k):
            for dj in range(k):
                gxp[:, :, di:di + (Ho - 1) * s + 1:s, dj:dj + (Wo - 1) * s + 1:s] += gd
        gx = gxp[:, :, p:p + H, p:p + W] if p else gxp
        _accum(x, gx[0] if single else gx, fresh=True)

    return _make(out, (x,), bw)


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Tensor | None = None, stride: int = 2) -> Tensor:
    """Transposed convolution with kernel size == stride (non-overlapping).

    weight is (C_in, C_out, k, k) with k == stride, the shape used by the
    2x2/stride-2 upsampling layers.
    """
    single = x.data.ndim == 3
    xd = x.data[None] if single else x.data
    N, C, H, W = xd.shape
    Cin, Cout, k, k2 = weight.shape
    if Cin != C or k != k2 or k != stride:
        raise ShapeError(f"conv_transpose2d: weight {weight.shape} does not match input {x.shape} with stride {stride}")
    _require_same_dtype(*( (x, weight, bias) if bias is not None else (x, weight) ))
    # y[n,o,i*k+di,j*k+dj] = sum_c x[n,c,i,j] * w[c,o,di,dj]
    y6 = np.einsum("nchw,codk->nohdwk", xd, weight.data, optimize=True)
    y = np.ascontiguousarray(y6.reshape(N, Cout, H * k, W * k))
    if bias is not None:
        if bias.shape != (Cout,):
            raise ShapeError(f"conv_transpose2d: bias shape {bias.shape} does not match out channels {Cout}")
        y = y + bias.data.reshape(1, Cout, 1, 1)
    if single:
        y = y[0]

    def bw(g):
        gd = g[None] if single else g
        g6 = gd.reshape(N, Cout, H, k, W, k)
        _accum(x, np.einsum("nohdwk,codk->nchw", g6, weight.data, optimize=True), fresh=True)
        _accum(weight, np.einsum("nohdwk,nchw->codk", g6, xd, optimize=True), fresh=True)
        if bias is not None:
            _accum(bias, gd.sum(axis=(0, 2, 3)), fresh=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(y, parents, bw)


# ---------------------------------------------------------------------------
# sub-pixel rearrangement (compositions of reshape/transpose)

def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """(.., C*r^2, H, W) -> (.., C, H*r, W*r)."""
    if r == 1:
        return x
    *lead, C2, H, W = x.shape
    if C2 % (r * r):
        raise ShapeError(f"pixel_shuffle: channels {C2} not divisible by r^2={r * r}")
    C = C2 // (r * r)
    n = len(lead)
    t = reshape(x, (*lead, C, r, r, H, W))
    t = transpose(t, (*range(n), n, n + 3, n + 1, n + 4, n + 2))
    return reshape(t, (*lead, C, H * r, W * r))


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """(.., C, H*r, W*r) -> (.., C*r^2, H, W); exact inverse of pixel_shuffle."""
    if r == 1:
        return x
    *lead, C, Hr, Wr = x.shape
    if Hr % r or Wr % r:
        raise ShapeError(f"pixel_unshuffle: spatial dims {Hr}x{Wr} not divisible by r={r}")
    H, W = Hr // r, Wr // r
    n = len(lead)
    t = reshape(x, (*lead, C, H, r, W, r))
    t = transpose(t, (*range(n), n, n + 2, n + 4, n + 1, n + 3))
    return reshape(t, (*lead, C * r * r, H, W))
