"""L1 training loop with Adam, warmup + halving LR schedule, progressive
patch stages, and per-iteration batch digests.

The digest of every batch's (lq, hq) bytes is logged before the step, so
two runs that claim to consume the same stream can be checked byte for
byte.  Everything is a pure function of (data_seed, init_seed, config),
which makes reruns bit-identical including the final checkpoint.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import tensor as T
from .models import Model, ModelConfig, build_model
from .pipeline import (DatasetManifest, Schedule, StagePlan, build_schedule,
                       load_image, materialize_sample)
from .tensor import Tensor

DEFAULT_DECAYS = (0.5, 0.75, 0.875, 0.9375)


class TrainDivergence(RuntimeError):
    """Raised when the loss goes non-finite under the abort policy."""


@dataclass
class TrainConfig:
    epochs: int
    stage_plan: StagePlan
    data_seed: int
    init_seed: int
    base_lr: float = 4e-4
    warmup_fraction: float = 0.05
    decay_fractions: tuple = DEFAULT_DECAYS
    adam: tuple = (0.9, 0.999, 1e-8)
    clip_norm: float | None = None   # gradient clipping off by default

    def __post_init__(self):
        fr = list(self.decay_fractions)
        if any(b <= a for a, b in zip(fr, fr[1:])) or any(not 0 < f <= 1 for f in fr):
            raise ValueError(f"decay fractions must be strictly increasing in (0,1], got {fr}")
        if fr and self.warmup_fraction >= fr[0]:
            raise ValueError("warmup must end before the first decay")


def l1_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute difference; subgradient 0 at ties."""
    return T.mean_all(T.absolute(T.sub(pred, target)))


def lr_at(epoch: int, config: TrainConfig) -> float:
    """Linear warmup to base_lr, then one halving per passed decay boundary."""
    if not 0 <= epoch < config.epochs:
        raise ValueError(f"epoch {epoch} outside [0, {config.epochs})")
    warmup = round(config.warmup_fraction * config.epochs)
    if epoch < warmup:
        return config.base_lr * epoch / warmup
    halvings = sum(epoch >= int(f * config.epochs) for f in config.decay_fractions)
    return config.base_lr * 0.5**halvings


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self):
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(params: dict[str, Tensor], state: AdamState, lr: float,
              betas=(0.9, 0.999), eps: float = 1e-8):
    """Standard bias-corrected Adam; parameters update in place."""
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, p in params.items():
        g = p.grad
        if g is None:
            g = np.zeros_like(p.data)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * (g * g)
        update = (m / c1) / (np.sqrt(v / c2) + eps)
        p.data -= (lr * update).astype(p.data.dtype)


def clip_gradients(params: dict[str, Tensor], max_norm: float):
    total = 0.0
    for p in params.values():
        if p.grad is not None:
            total += float((p.grad.astype(np.float64) ** 2).sum())
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params.values():
            if p.grad is not None:
                p.grad *= p.grad.dtype.type(scale)
    return norm


def batch_digest(lqs: list[np.ndarray], hqs: list[np.ndarray]) -> bytes:
    """SHA-256 over each sample's lq bytes then hq bytes, in batch order."""
    h = hashlib.sha256()
    for lq, hq in zip(lqs, hqs):
        h.update(np.ascontiguousarray(lq).tobytes())
        h.update(np.ascontiguousarray(hq).tobytes())
    return h.digest()


@dataclass
class LogRow:
    epoch: int
    iteration: int
    loss: float
    lr: float
    digest: bytes

    def csv(self) -> str:
        return f"{self.epoch},{self.iteration},{self.loss!r},{self.lr!r},{self.digest.hex()}"


TRAINLOG_CSV_HEADER = "epoch,iter,loss,lr,batch_digest"


@dataclass
class TrainLog:
    rows: list[LogRow] = field(default_factory=list)
    checkpoint_path: str | None = None

    def to_csv(self) -> str:
        return "\n".join([TRAINLOG_CSV_HEADER] + [r.csv() for r in self.rows]) + "\n"

    def save(self, path):
        Path(path).write_text(self.to_csv())

    def digest_column(self) -> bytes:
        return b"".join(r.digest for r in self.rows)

    def losses(self) -> list[float]:
        return [r.loss for r in self.rows]


def load_images(manifest: DatasetManifest) -> dict[str, np.ndarray]:
    return {e.image_id: load_image(e.path) for e in manifest.entries}


def _batches(entries, batch_size):
    for i in range(0, len(entries), batch_size):
        yield entries[i:i + batch_size]


def train(config: TrainConfig, model_config: ModelConfig, manifest: DatasetManifest,
          images: dict[str, np.ndarray] | None = None,
          nonfinite: str = "abort",
          on_iteration=None) -> tuple[Model, TrainLog]:
    """Run the schedule in canonical order and return the trained model.

    ``nonfinite`` is "abort" (raise, naming epoch and iteration) or
    "recover" (restore the previous step's parameters and keep going).
    ``on_iteration(row)`` is called after each logged row.
    """
    if nonfinite not in ("abort", "recover"):
        raise ValueError(f"unknown nonfinite policy {nonfinite!r}")
    schedule = build_schedule(manifest, config.stage_plan, config.epochs, config.data_seed)
    if images is None:
        images = load_images(manifest)
    model = build_model(model_config, config.init_seed)
    params = dict(model.named_parameters())
    state = AdamState()
    betas, eps = config.adam[:2], config.adam[2]
    log = TrainLog()

    per_epoch = len(manifest)
    for epoch in range(config.epochs):
        lr = lr_at(epoch, config)
        stage = config.stage_plan.stage_at(epoch)
        entries = schedule.entries[epoch * per_epoch:(epoch + 1) * per_epoch]
        for it, batch in enumerate(_batches(entries, stage.batch_size)):
            lqs, hqs = [], []
            for e in batch:
                lq, hq = materialize_sample(e, images[e.image_id])
                lqs.append(lq)
                hqs.append(hq)
            digest = batch_digest(lqs, hqs)

            if nonfinite == "recover":
                prev = {n: p.data.copy() for n, p in params.items()}
                prev_state = (state.step,
                              {n: a.copy() for n, a in state.m.items()},
                              {n: a.copy() for n, a in state.v.items()})

            for p in params.values():
                p.zero_grad()
            pred = model.forward(Tensor(np.stack(lqs)))
            loss = l1_loss(pred, Tensor(np.stack(hqs)))
            loss_val = float(loss.data)
            row = LogRow(epoch, it, loss_val, lr, digest)
            log.rows.append(row)

            if not np.isfinite(loss_val):
                if nonfinite == "abort":
                    raise TrainDivergence(f"non-finite loss at epoch {epoch}, iter {it}")
                params_data = {n: p for n, p in params.items()}
                for n, p in params_data.items():
                    p.data = prev[n]
                state.step, state.m, state.v = prev_state
                if on_iteration:
                    on_iteration(row)
                continue

            T.backward(loss)
            if config.clip_norm is not None:
                clip_gradients(params, config.clip_norm)
            adam_step(params, state, lr, betas, eps)
            if on_iteration:
                on_iteration(row)
    return model, log


def default_stage_plan(epochs: int, base_patch: int = 24, base_batch: int = 8) -> StagePlan:
    """Progressive stages at 25% and 50% of the run, scaled from the
    full-recipe 64/96/128 patch progression to desk size."""
    from .pipeline import Stage
    stages = [Stage(0, base_patch, base_batch)]
    s1, s2 = max(1, epochs // 4), max(2, epochs // 2)
    if s2 > s1 and epochs > s2:
        stages.append(Stage(s1, base_patch + base_patch // 2, max(1, base_batch // 2)))
        stages.append(Stage(s2, base_patch * 2, max(1, base_batch // 4)))
    return StagePlan(stages)
