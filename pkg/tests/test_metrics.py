import numpy as np
import pytest
from skimage.metrics import structural_similarity as skimage_ssim

from fairdenoise.metrics import (
    MetricReport, eval_noise_seed, psnr, reports_to_csv, ssim,
)


def test_psnr_identical_capped():
    a = np.random.default_rng(0).random((3, 16, 16)).astype(np.float32)
    assert psnr(a, a) == 100.0


def test_psnr_uniform_one_level_difference():
    a = np.full((3, 20, 20), 100.0 / 255.0)
    b = a + 1.0 / 255.0
    # MSE is exactly 1 on the 0..255 scale
    assert abs(psnr(a, b) - 48.1308) < 1e-3


def test_psnr_zero_vs_one():
    a = np.zeros((1, 8, 8))
    b = np.ones((1, 8, 8))
    assert psnr(a, b) == 0.0


def test_psnr_symmetric_and_monotone():
    rng = np.random.default_rng(1)
    a = rng.random((3, 12, 12))
    b = rng.random((3, 12, 12))
    assert psnr(a, b) == psnr(b, a)
    base = np.full((1, 10, 10), 0.5)
    vals = [psnr(base, base + d) for d in (0.01, 0.02, 0.05, 0.1)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        psnr(np.zeros((1, 4, 4)), np.zeros((1, 4, 5)))


# ---------------------------------------------------------------------------
# SSIM against the independently coded reference (scikit-image)

def _reference_ssim(a, b):
    """skimage single-scale SSIM in the Wang et al. configuration."""
    xa = np.clip(a, 0, 1) * 255.0
    xb = np.clip(b, 0, 1) * 255.0
    if xa.ndim == 3:
        return float(np.mean([
            skimage_ssim(xa[c], xb[c], data_range=255.0, gaussian_weights=True,
                         sigma=1.5, use_sample_covariance=False)
            for c in range(xa.shape[0])
        ]))
    return float(skimage_ssim(xa, xb, data_range=255.0, gaussian_weights=True,
                              sigma=1.5, use_sample_covariance=False))


def test_ssim_identical_is_exactly_one():
    a = np.random.default_rng(2).random((3, 24, 24))
    assert ssim(a, a) == 1.0


def test_ssim_inverted_binary_strongly_negative_structure():
    rng = np.random.default_rng(3)
    a = (rng.random((16, 16)) > 0.5).astype(np.float64)
    value = ssim(a, 1.0 - a)
    assert value < 0.1
    assert abs(value - _reference_ssim(a, 1.0 - a)) < 1e-6


CRAFTED_PAIRS = []
_rng = np.random.default_rng(4)
CRAFTED_PAIRS.append((np.full((12, 12), 0.5), np.full((12, 12), 0.5 + 2.0 / 255.0)))
CRAFTED_PAIRS.append((_rng.random((20, 20)), _rng.random((20, 20))))
_base = _rng.random((3, 16, 16))
CRAFTED_PAIRS.append((_base, np.clip(_base + 0.05 * _rng.standard_normal(_base.shape), 0, 1)))
_grad = np.linspace(0, 1, 15 * 15).reshape(15, 15)
CRAFTED_PAIRS.append((_grad, _grad.T.copy()))
_checker = np.indices((14, 14)).sum(axis=0) % 2 * 1.0
CRAFTED_PAIRS.append((_checker, np.roll(_checker, 1, axis=1)))


@pytest.mark.parametrize("idx", range(len(CRAFTED_PAIRS)))
def test_ssim_matches_reference_on_crafted_pairs(idx):
    a, b = CRAFTED_PAIRS[idx]
    assert abs(ssim(a, b) - _reference_ssim(a, b)) < 1e-6


def test_ssim_symmetry():
    rng = np.random.default_rng(5)
    a = rng.random((1, 18, 18))
    b = rng.random((1, 18, 18))
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-9


def test_ssim_rejects_small_images():
    with pytest.raises(ValueError):
        ssim(np.zeros((1, 8, 8)), np.zeros((1, 8, 8)))


def test_eval_noise_seed_distinct():
    s = {eval_noise_seed(1, "a", 15.0), eval_noise_seed(1, "a", 25.0),
         eval_noise_seed(1, "b", 15.0), eval_noise_seed(2, "a", 15.0)}
    assert len(s) == 4


def test_report_csv_shape():
    reps = [MetricReport("synth", 25.0, 20.5, 0.55, 8, 12345)]
    text = reports_to_csv(reps)
    lines = text.strip().split("\n")
    assert lines[0] == "dataset,sigma,psnr,ssim,n_images,params,notes"
    assert lines[1].startswith("synth,25,20.5")
