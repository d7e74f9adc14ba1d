"""Procedural texture corpus: multi-frequency sinusoids, checkerboards,
and gradients, fully determined by per-image seeds.  Lets the acceptance
suite run offline without benchmark downloads.

Images are quantized to 8 bits at generation time, so the in-memory
arrays equal a PNG save/load round trip exactly.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .pipeline import DatasetManifest, ManifestEntry, save_image
from .rng import SplitMix64, mix


def synth_image(seed: int, size: int, channels: int = 3) -> np.ndarray:
    """One (C, size, size) float32 texture in [0,1], 8-bit quantized."""
    stream = SplitMix64(seed)
    ys, xs = np.meshgrid(np.arange(size, dtype=np.float64),
                         np.arange(size, dtype=np.float64), indexing="ij")
    planes = []
    for _ in range(channels):
        img = np.zeros((size, size), dtype=np.float64)
        n_waves = 2 + stream.next_below(3)
        for _ in range(n_waves):
            fx = stream.next_uniform(0.02, 0.35)
            fy = stream.next_uniform(0.02, 0.35)
            phase = stream.next_uniform(0.0, 2 * np.pi)
            amp = stream.next_uniform(0.2, 1.0)
            img += amp * np.sin(2 * np.pi * (fx * xs + fy * ys) + phase)
        cell = 2 ** (2 + stream.next_below(3))
        amp = stream.next_uniform(0.1, 0.6)
        checker = (((ys // cell) + (xs // cell)) % 2) * 2.0 - 1.0
        img += amp * checker
        gx = stream.next_uniform(-1.0, 1.0)
        gy = stream.next_uniform(-1.0, 1.0)
        img += (gx * xs + gy * ys) / size
        lo, hi = img.min(), img.max()
        img = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
        planes.append(img)
    arr = np.stack(planes)
    return (np.rint(arr * 255.0) / 255.0).astype(np.float32)


def synth_corpus(seed: int, count: int, size: int, channels: int = 3,
                 prefix: str = "synth") -> tuple[DatasetManifest, dict[str, np.ndarray]]:
    """In-memory corpus: manifest entries plus preloaded image arrays."""
    entries, images = [], {}
    for i in range(count):
        image_id = f"{prefix}_{i:04d}"
        images[image_id] = synth_image(mix(seed, i), size, channels)
        entries.append(ManifestEntry(image_id, f"{image_id}.png", size, size, channels))
    return DatasetManifest(entries), images


def write_synth_corpus(out_dir, seed: int, count: int, size: int,
                       channels: int = 3, prefix: str = "synth") -> DatasetManifest:
    """Write PNGs plus manifest.csv under out_dir; returns the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest, images = synth_corpus(seed, count, size, channels, prefix)
    entries = []
    for e in manifest.entries:
        path = out / f"{e.image_id}.png"
        save_image(path, images[e.image_id])
        entries.append(ManifestEntry(e.image_id, str(path), e.height, e.width, e.channels))
    manifest = DatasetManifest(entries)
    manifest.save(out / "manifest.csv")
    return manifest
