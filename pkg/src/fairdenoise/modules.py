"""Tiny layer system: parameter registration plus deterministic init.

Layers register parameters and sub-layers by attribute assignment, so a
model's parameter list (and therefore its init draw order) is fixed by
construction order alone.  All weight randomness comes from a single
SplitMix64 stream owned by the Init helper.
"""

from __future__ import annotations

import numpy as np

from .rng import SplitMix64
from .tensor import Tensor, conv2d, conv_transpose2d, layer_norm, linear


class Init:
    """Deterministic weight initialization over one SplitMix64 stream."""

    def __init__(self, seed: int, dtype=np.float32):
        self.stream = SplitMix64(seed)
        self.dtype = dtype

    def zeros(self, *shape) -> np.ndarray:
        return np.zeros(shape, dtype=self.dtype)

    def ones(self, *shape) -> np.ndarray:
        return np.ones(shape, dtype=self.dtype)

    def trunc_normal(self, *shape, std: float = 0.02) -> np.ndarray:
        """Normal(0, std) with rejection to |z| <= 2 before scaling."""
        n = int(np.prod(shape))
        kept = []
        have = 0
        while have < n:
            z = self.stream.block_gauss(max(64, 2 * (n - have)))
            z = z[np.abs(z) <= 2.0]
            kept.append(z)
            have += z.size
        flat = np.concatenate(kept)[:n] * std
        return flat.astype(self.dtype).reshape(shape)

    def kaiming_uniform(self, *shape, fan_in: int) -> np.ndarray:
        """U(-1/sqrt(fan_in), 1/sqrt(fan_in)), the usual conv default."""
        bound = 1.0 / np.sqrt(fan_in)
        n = int(np.prod(shape))
        u = self.stream.block_unit(n) * 2.0 - 1.0
        return (u * bound).astype(self.dtype).reshape(shape)


class Module:
    """Base layer; Tensors assigned to attributes become parameters."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_children", {})

    def __setattr__(self, name, value):
        if isinstance(value, Tensor) and value.requires_grad:
            self._params[name] = value
        elif isinstance(value, Module):
            self._children[name] = value
        elif isinstance(value, (list, tuple)) and value and all(isinstance(v, Module) for v in value):
            self._children[name] = ModuleList(value)
            object.__setattr__(self, name, self._children[name])
            return
        object.__setattr__(self, name, value)

    def named_parameters(self, prefix: str = ""):
        for name, p in self._params.items():
            yield f"{prefix}{name}", p
        for name, child in self._children.items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def astype(self, dtype):
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class ModuleList(Module):
    def __init__(self, mods=()):
        super().__init__()
        self._items = []
        for m in mods:
            self.append(m)

    def append(self, mod: Module):
        self._children[str(len(self._items))] = mod
        self._items.append(mod)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


def _param(arr: np.ndarray) -> Tensor:
    return Tensor(arr, requires_grad=True)


class Linear(Module):
    def __init__(self, cin: int, cout: int, init: Init, bias: bool = True):
        super().__init__()
        self.weight = _param(init.trunc_normal(cin, cout))
        self.bias = _param(init.zeros(cout)) if bias else None

    def forward(self, x):
        return linear(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, cin: int, cout: int, k: int, init: Init, stride: int = 1,
                 padding: int | None = None, groups: int = 1, bias: bool = True,
                 zero_init: bool = False):
        super().__init__()
        self.stride = stride
        self.padding = k // 2 if padding is None else padding
        self.groups = groups
        fan_in = (cin // groups) * k * k
        w = init.zeros(cout, cin // groups, k, k) if zero_init \
            else init.kaiming_uniform(cout, cin // groups, k, k, fan_in=fan_in)
        self.weight = _param(w)
        self.bias = _param(init.zeros(cout)) if bias else None

    def forward(self, x):
        return conv2d(x, self.weight, self.bias, stride=self.stride,
                      padding=self.padding, groups=self.groups)


class ConvTranspose2d(Module):
    """Kernel == stride transposed conv, used for 2x upsampling."""

    def __init__(self, cin: int, cout: int, stride: int, init: Init, bias: bool = True):
        super().__init__()
        self.stride = stride
        self.weight = _param(init.kaiming_uniform(cin, cout, stride, stride,
                                                  fan_in=cin * stride * stride))
        self.bias = _param(init.zeros(cout)) if bias else None

    def forward(self, x):
        return conv_transpose2d(x, self.weight, self.bias, stride=self.stride)


class LayerNorm(Module):
    def __init__(self, c: int, init: Init, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = _param(init.ones(c))
        self.beta = _param(init.zeros(c))

    def forward(self, x):
        return layer_norm(x, self.gamma, self.beta, self.eps)
