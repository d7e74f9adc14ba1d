"""Deterministic training-data schedule: derive, record, replay, verify.

Every training sample's provenance (image pick, crop origin, flip,
rotation, blind noise level, noise seed) is a pure function of
(data_seed, epoch, sample_index, manifest, stage plan).  Batch size and
device count never enter the derivation, which is what makes the stream
bit-identical across models and simulated hardware layouts.

Per-entry draw order, pinned by golden fixtures: a SplitMix64 stream is
seeded with mix(data_seed, epoch, sample_index) and consumed as
image pick, crop_y, crop_x, hflip, rotation, sigma, noise_seed.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .rng import SplitMix64, mix

SIGMA_MAX = 50.0
ROTATIONS = (0, 90, 180, 270)

MANIFEST_HEADER = "image_id,path,height,width,channels"
SCHEDULE_MAGIC = "FDN-SCHED v1"


class UnusableImageError(ValueError):
    """An image is smaller than the patch size the current stage needs."""


@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    path: str
    height: int
    width: int
    channels: int


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    def __post_init__(self):
        ids = [e.image_id for e in self.entries]
        if len(set(ids)) != len(ids):
            dupes = sorted({i for i in ids if ids.count(i) > 1})
            raise ValueError(f"duplicate image ids in manifest: {dupes}")
        for e in self.entries:
            if e.channels not in (1, 3):
                raise ValueError(f"{e.image_id}: channels must be 1 or 3, got {e.channels}")

    def __len__(self):
        return len(self.entries)

    def by_id(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)

    def save(self, path):
        lines = [MANIFEST_HEADER]
        for e in self.entries:
            lines.append(f"{e.image_id},{e.path},{e.height},{e.width},{e.channels}")
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        entries = []
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if not line or line == MANIFEST_HEADER:
                continue
            image_id, p, h, w, c = line.split(",")
            entries.append(ManifestEntry(image_id, p, int(h), int(w), int(c)))
        return cls(entries)


@dataclass(frozen=True)
class Stage:
    start_epoch: int
    patch_size: int
    batch_size: int


@dataclass
class StagePlan:
    stages: list[Stage]

    def __post_init__(self):
        if not self.stages:
            raise ValueError("stage plan needs at least one stage")
        if self.stages[0].start_epoch != 0:
            raise ValueError("first stage must start at epoch 0")
        starts = [s.start_epoch for s in self.stages]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ValueError(f"stage start epochs must be strictly increasing, got {starts}")
        patches = [s.patch_size for s in self.stages]
        if any(b < a for a, b in zip(patches, patches[1:])):
            raise ValueError(f"patch sizes must be non-decreasing, got {patches}")

    def stage_at(self, epoch: int) -> Stage:
        current = self.stages[0]
        for s in self.stages:
            if s.start_epoch <= epoch:
                current = s
        return current

    def max_patch(self) -> int:
        return max(s.patch_size for s in self.stages)


def validate_manifest_for_plan(manifest: DatasetManifest, plan: StagePlan):
    biggest = plan.max_patch()
    for e in manifest.entries:
        if e.height < biggest or e.width < biggest:
            raise UnusableImageError(
                f"image {e.image_id!r} is {e.height}x{e.width}, smaller than patch size {biggest}")


@dataclass(frozen=True)
class ScheduleEntry:
    epoch: int
    sample_index: int
    image_id: str
    crop_y: int
    crop_x: int
    patch_size: int
    hflip: bool
    rotation: int
    sigma: float  # float32-quantized, in [0, 50]
    noise_seed: int


def _format_sigma(sigma: float) -> str:
    # shortest decimal that round-trips through float32
    return np.format_float_positional(np.float32(sigma), unique=True)


def entry_to_row(e: ScheduleEntry) -> str:
    return (f"{e.epoch},{e.sample_index},{e.image_id},{e.crop_y},{e.crop_x},"
            f"{e.patch_size},{int(e.hflip)},{e.rotation},{_format_sigma(e.sigma)},{e.noise_seed}")


def entry_from_row(row: str) -> ScheduleEntry:
    f = row.split(",")
    return ScheduleEntry(
        epoch=int(f[0]), sample_index=int(f[1]), image_id=f[2],
        crop_y=int(f[3]), crop_x=int(f[4]), patch_size=int(f[5]),
        hflip=bool(int(f[6])), rotation=int(f[7]),
        sigma=float(np.float32(f[8])), noise_seed=int(f[9]),
    )


def sample_entry(data_seed: int, epoch: int, sample_index: int,
                 manifest: DatasetManifest, plan: StagePlan) -> ScheduleEntry:
    """Derive one sample's provenance; see the module docstring for the order."""
    if not len(manifest):
        raise ValueError("manifest is empty")
    stage = plan.stage_at(epoch)
    patch = stage.patch_size
    stream = SplitMix64(mix(data_seed, epoch, sample_index))
    img = manifest.entries[stream.next_below(len(manifest))]
    if img.height < patch or img.width < patch:
        raise UnusableImageError(
            f"image {img.image_id!r} is {img.height}x{img.width}, smaller than patch size {patch}")
    crop_y = stream.next_below(img.height - patch + 1)
    crop_x = stream.next_below(img.width - patch + 1)
    hflip = stream.next_bool()
    rotation = ROTATIONS[stream.next_below(4)]
    sigma = float(np.float32(stream.next_unit() * SIGMA_MAX))
    noise_seed = stream.next_u64()
    return ScheduleEntry(epoch, sample_index, img.image_id, crop_y, crop_x,
                         patch, hflip, rotation, sigma, noise_seed)


@dataclass
class Schedule:
    data_seed: int
    epochs: int
    entries: list[ScheduleEntry]

    def header(self) -> str:
        return f"{SCHEDULE_MAGIC} {self.data_seed} {self.epochs}"

    def canonical_body(self) -> bytes:
        """Row byte stream, LF-terminated; the hashing domain."""
        return "".join(entry_to_row(e) + "\n" for e in self.entries).encode("ascii")

    def save(self, path):
        Path(path).write_bytes((self.header() + "\n").encode("ascii") + self.canonical_body())

    @classmethod
    def load(cls, path) -> "Schedule":
        lines = Path(path).read_bytes().decode("ascii").splitlines()
        if not lines or not lines[0].startswith(SCHEDULE_MAGIC):
            raise ValueError(f"{path}: not a schedule file")
        parts = lines[0].split(" ")
        data_seed, epochs = int(parts[2]), int(parts[3])
        entries = [entry_from_row(r) for r in lines[1:] if r]
        return cls(data_seed, epochs, entries)


def samples_per_epoch(manifest: DatasetManifest) -> int:
    # one random patch per image per epoch
    return len(manifest)


def build_schedule(manifest: DatasetManifest, plan: StagePlan,
                   epochs: int, data_seed: int) -> Schedule:
    if epochs > 0:
        validate_manifest_for_plan(manifest, plan)
    n = samples_per_epoch(manifest)
    entries = [sample_entry(data_seed, ep, i, manifest, plan)
               for ep in range(epochs) for i in range(n)]
    return Schedule(data_seed, epochs, entries)


def build_schedule_partitioned(manifest: DatasetManifest, plan: StagePlan, epochs: int,
                               data_seed: int, batch_size: int, devices: int) -> Schedule:
    """Build the schedule the way a multi-device loader would, then merge.

    Batches of the stage's (overridden) batch size are dealt round-robin
    to simulated devices; each device derives its own entries; the merge
    re-sorts into canonical (epoch, sample_index) order.  Because every
    entry is a pure function of its coordinates, the result must equal
    the direct build whatever (batch_size, devices) is.
    """
    validate_manifest_for_plan(manifest, plan)
    n = samples_per_epoch(manifest)
    per_device: list[list[ScheduleEntry]] = [[] for _ in range(devices)]
    for ep in range(epochs):
        batches = [list(range(b, min(b + batch_size, n))) for b in range(0, n, batch_size)]
        for bi, batch in enumerate(batches):
            dev = bi % devices
            for i in batch:
                per_device[dev].append(sample_entry(data_seed, ep, i, manifest, plan))
    merged = sorted((e for dev in per_device for e in dev),
                    key=lambda e: (e.epoch, e.sample_index))
    return Schedule(data_seed, epochs, merged)


def schedule_hash(schedule: Schedule) -> bytes:
    """SHA-256 over the canonical row body (header excluded)."""
    return hashlib.sha256(schedule.canonical_body()).digest()


@dataclass
class ReplayReport:
    ok: bool
    epoch: int | None = None
    sample_index: int | None = None
    field: str | None = None

    def __str__(self):
        if self.ok:
            return "replay ok"
        return f"mismatch at epoch {self.epoch}, sample {self.sample_index}, field {self.field!r}"


def replay_verify(schedule: Schedule, manifest: DatasetManifest, plan: StagePlan,
                  epochs: int, data_seed: int) -> ReplayReport:
    """Regenerate every entry and compare field by field."""
    fresh = build_schedule(manifest, plan, epochs, data_seed)
    for got, want in zip(schedule.entries, fresh.entries):
        for field in ScheduleEntry.__dataclass_fields__:
            if getattr(got, field) != getattr(want, field):
                return ReplayReport(False, want.epoch, want.sample_index, field)
    if len(schedule.entries) != len(fresh.entries):
        k = min(len(schedule.entries), len(fresh.entries))
        ref = (fresh.entries + schedule.entries)[k]
        return ReplayReport(False, ref.epoch, ref.sample_index, "entry_count")
    return ReplayReport(True)


# ---------------------------------------------------------------------------
# sample materialization

def add_awgn(hq, sigma: float, noise_seed: int):
    """hq + N(0, (sigma/255)^2) noise from a SplitMix64/Box-Muller stream.

    hq is a float32 array in the normalized [0,1] domain; sigma is on the
    0..255 scale. The output is intentionally not clipped.
    """
    from .tensor import Tensor  # local import keeps the data path numpy-only
    arr = hq.data if isinstance(hq, Tensor) else np.asarray(hq)
    if not 0.0 <= sigma <= SIGMA_MAX:
        raise ValueError(f"sigma {sigma} outside [0, {SIGMA_MAX}]")
    if sigma == 0.0:
        out = arr.copy()
    else:
        z = SplitMix64(noise_seed).block_gauss(arr.size)
        noise = (z * (sigma / 255.0)).astype(np.float32).reshape(arr.shape)
        out = arr + noise
    return Tensor(out) if isinstance(hq, Tensor) else out


def augment_patch(patch: np.ndarray, hflip: bool, rotation: int) -> np.ndarray:
    """Fixed order: horizontal flip (width axis), then CCW rotation."""
    if hflip:
        patch = patch[:, :, ::-1]
    k = rotation // 90
    if k:
        patch = np.rot90(patch, k=k, axes=(1, 2))
    return np.ascontiguousarray(patch)


def materialize_sample(entry: ScheduleEntry, image: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Crop, flip, rotate, then noise; returns (lq, hq) float32 (C,P,P)."""
    C, H, W = image.shape
    if entry.crop_y + entry.patch_size > H or entry.crop_x + entry.patch_size > W:
        raise ValueError(
            f"crop ({entry.crop_y},{entry.crop_x})+{entry.patch_size} exceeds image {H}x{W} "
            f"for {entry.image_id!r}")
    patch = image[:, entry.crop_y:entry.crop_y + entry.patch_size,
                  entry.crop_x:entry.crop_x + entry.patch_size]
    hq = augment_patch(patch, entry.hflip, entry.rotation)
    lq = add_awgn(hq, entry.sigma, entry.noise_seed)
    return lq, hq


# ---------------------------------------------------------------------------
# image files (8-bit PNG, grayscale or RGB)

def load_image(path) -> np.ndarray:
    """PNG -> float32 (C,H,W) in [0,1]."""
    img = Image.open(path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB" if img.mode in ("RGBA", "P", "CMYK") else "L")
    arr = np.asarray(img, dtype=np.float32) / 255.0
    if arr.ndim == 2:
        arr = arr[None]
    else:
        arr = np.ascontiguousarray(arr.transpose(2, 0, 1))
    return arr


def save_image(path, arr: np.ndarray):
    """float32 (C,H,W) in [0,1] -> 8-bit PNG."""
    q = np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)
    if q.shape[0] == 1:
        Image.fromarray(q[0], mode="L").save(path)
    else:
        Image.fromarray(q.transpose(1, 2, 0), mode="RGB").save(path)
