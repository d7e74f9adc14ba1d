"""PSNR/SSIM and the per-dataset evaluation harness.

Inputs are float arrays in the normalized [0,1] domain; both metrics
clip to [0,1] and rescale to 0..255 internally.  Color PSNR is computed
over RGB jointly; color SSIM is the mean of per-channel SSIM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .pipeline import DatasetManifest, add_awgn, load_image
from .rng import fnv1a64, mix

PSNR_CAP_DB = 100.0
_PEAK = 255.0

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass
class MetricReport:
    dataset_name: str
    sigma: float
    psnr_db: float
    ssim: float
    n_images: int
    param_count: int
    notes: str = ""

    def csv_row(self) -> str:
        return (f"{self.dataset_name},{self.sigma:g},{self.psnr_db:.4f},"
                f"{self.ssim:.6f},{self.n_images},{self.param_count},{self.notes}")


REPORT_CSV_HEADER = "dataset,sigma,psnr,ssim,n_images,params,notes"


def _to_255(a: np.ndarray) -> np.ndarray:
    return np.clip(np.asarray(a, dtype=np.float64), 0.0, 1.0) * _PEAK


def psnr(a, b, peak: float = _PEAK) -> float:
    """10*log10(peak^2 / MSE) over all pixels and channels, capped at 100 dB."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"psnr: shapes {a.shape} and {b.shape} differ")
    mse = float(np.mean((_to_255(a) - _to_255(b)) ** 2))
    if mse < peak * peak * 1e-10:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def _gaussian_taps(radius: int = (SSIM_WINDOW - 1) // 2, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return k / k.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    """Separable valid-mode correlation with a symmetric 1-D kernel."""
    rows = sliding_window_view(img, len(taps), axis=1) @ taps
    return sliding_window_view(rows, len(taps), axis=0) @ taps


def _ssim_channel(x: np.ndarray, y: np.ndarray, taps: np.ndarray) -> float:
    c1 = (SSIM_K1 * _PEAK) ** 2
    c2 = (SSIM_K2 * _PEAK) ** 2
    mu_x = _filter_valid(x, taps)
    mu_y = _filter_valid(y, taps)
    var_x = _filter_valid(x * x, taps) - mu_x * mu_x
    var_y = _filter_valid(y * y, taps) - mu_y * mu_y
    cov = _filter_valid(x * y, taps) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def ssim(a, b) -> float:
    """Single-scale SSIM, 11x11 Gaussian window sigma=1.5, valid positions only."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"ssim: shapes {a.shape} and {b.shape} differ")
    if a.ndim == 2:
        a, b = a[None], b[None]
    H, W = a.shape[-2], a.shape[-1]
    if H < SSIM_WINDOW or W < SSIM_WINDOW:
        raise ValueError(f"ssim: image {H}x{W} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    taps = _gaussian_taps()
    xa, xb = _to_255(a), _to_255(b)
    return float(np.mean([_ssim_channel(xa[c], xb[c], taps) for c in range(a.shape[0])]))


def eval_noise_seed(eval_seed: int, image_id: str, sigma: float) -> int:
    """Per-(image, sigma) noise seed: mix of eval seed, id hash, and f32 sigma bits."""
    bits = int(np.float32(sigma).view(np.uint32))
    return mix(eval_seed, fnv1a64(image_id.encode("utf-8")), bits)


def evaluate_model(model, test_manifest: DatasetManifest, sigmas: list[float],
                   eval_seed: int, dataset_name: str = "test",
                   images: dict[str, np.ndarray] | None = None) -> list[MetricReport]:
    """Per-sigma PSNR/SSIM means over a dataset with deterministic eval noise.

    ``images`` may supply preloaded (C,H,W) float arrays keyed by image id;
    otherwise files are read from the manifest paths.  An allocation
    failure on one image is recorded as a resource-exhausted note instead
    of crashing, and that image is skipped.
    """
    params = model.param_count()
    loaded = {}
    for entry in test_manifest.entries:
        arr = images[entry.image_id] if images is not None else load_image(entry.path)
        if arr.shape[0] != model.in_channels:
            raise ValueError(
                f"model expects {model.in_channels} channels, image {entry.image_id!r} has {arr.shape[0]}")
        loaded[entry.image_id] = arr

    reports = []
    for sigma in sigmas:
        psnrs, ssims, notes, done = [], [], "", 0
        for entry in test_manifest.entries:
            clean = loaded[entry.image_id]
            noisy = add_awgn(clean, float(sigma), eval_noise_seed(eval_seed, entry.image_id, sigma))
            try:
                pred = model.denoise_array(noisy)
            except MemoryError:
                notes = "resource-exhausted"
                continue
            pred = np.clip(pred, 0.0, 1.0)
            psnrs.append(psnr(pred, clean))
            ssims.append(ssim(pred, clean))
            done += 1
        reports.append(MetricReport(
            dataset_name=dataset_name,
            sigma=float(sigma),
            psnr_db=float(np.mean(psnrs)) if psnrs else 0.0,
            ssim=float(np.mean(ssims)) if ssims else 0.0,
            n_images=done,
            param_count=params,
            notes=notes,
        ))
    return reports


def reports_to_csv(reports: list[MetricReport]) -> str:
    return "\n".join([REPORT_CSV_HEADER] + [r.csv_row() for r in reports]) + "\n"
