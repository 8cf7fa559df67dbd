"""Full-reference image quality metrics: PSNR, SSIM and CIEDE2000."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Optional

import numpy as np
from scipy.ndimage import gaussian_filter

from imaging.core import PlanarImage, luma
from utils.validation import StructuralError, UnsupportedError, validate_same_shape

logger = logging.getLogger(__name__)

PSNR_CAP_DB = 99.0

SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # 11 x 11 window at sigma 1.5
SSIM_WINDOW = 2 * int(SSIM_TRUNCATE * SSIM_SIGMA + 0.5) + 1
SSIM_K1 = 0.01
SSIM_K2 = 0.03

# sRGB (D65) to XYZ, and the D65 2-degree reference white
RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
D65_WHITE = np.array([0.95047, 1.0, 1.08883])

METRIC_NAMES = ("psnr", "ssim", "ciede2000")


@dataclass(frozen=True)
class MetricReport:
    psnr: Optional[float] = None
    ssim: Optional[float] = None
    ciede2000: Optional[float] = None

    def to_row(self, image: str) -> Dict[str, object]:
        return {'image': image, 'psnr_db': self.psnr, 'ssim': self.ssim, 'ciede2000': self.ciede2000}


def _check_pair(a: PlanarImage, b: PlanarImage) -> None:
    validate_same_shape(a.data.shape, b.data.shape, "compared images")


def psnr(a: PlanarImage, b: PlanarImage) -> float:
    """Peak signal to noise ratio in dB over all samples, peak 1.0, capped at 99 dB."""
    _check_pair(a, b)
    diff = a.data - b.data
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def ssim(a: PlanarImage, b: PlanarImage) -> float:
    """
    Single-scale SSIM on luma: Gaussian window sigma 1.5 (11 x 11), K1 = 0.01,
    K2 = 0.03, dynamic range 1. Mean over pixels whose window fits the image.

    Raises:
        StructuralError: On size mismatch or an image smaller than 11 x 11
    """
    _check_pair(a, b)
    if a.height < SSIM_WINDOW or a.width < SSIM_WINDOW:
        raise StructuralError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.width}x{a.height}")

    x = luma(a).data
    y = luma(b).data

    def blur(img):
        return gaussian_filter(img, sigma=SSIM_SIGMA, truncate=SSIM_TRUNCATE, mode='reflect')

    mu_x, mu_y = blur(x), blur(y)
    var_x = blur(x * x) - mu_x * mu_x
    var_y = blur(y * y) - mu_y * mu_y
    cov_xy = blur(x * y) - mu_x * mu_y

    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    numerator = (2 * mu_x * mu_y + c1) * (2 * cov_xy + c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    ssim_map = numerator / denominator

    pad = (SSIM_WINDOW - 1) // 2
    return float(ssim_map[pad:-pad, pad:-pad].mean())


def srgb_to_lab(img: PlanarImage) -> np.ndarray:
    """CIELAB of a 3-channel sRGB image, shape (3, H, W) as (L, a, b)."""
    if img.channels != 3:
        raise UnsupportedError("CIELAB conversion needs a 3-channel image")
    c = img.data
    linear = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    xyz = np.tensordot(RGB_TO_XYZ, linear, axes=1) / D65_WHITE.reshape(3, 1, 1)

    delta = 6.0 / 29.0
    f = np.where(xyz > delta ** 3, np.cbrt(xyz), xyz / (3 * delta ** 2) + 4.0 / 29.0)
    lightness = 116.0 * f[1] - 16.0
    a_star = 500.0 * (f[0] - f[1])
    b_star = 200.0 * (f[1] - f[2])
    return np.stack([lightness, a_star, b_star])


def delta_e_2000(lab1: np.ndarray, lab2: np.ndarray) -> np.ndarray:
    """
    CIEDE2000 color difference, element-wise over the leading (L, a, b) axis.

    Args:
        lab1, lab2: Arrays of shape (3, ...) holding L*, a*, b*

    Returns:
        Array of shape (...) with Delta E 00
    """
    l1, a1, b1 = np.asarray(lab1, dtype=np.float64)
    l2, a2, b2 = np.asarray(lab2, dtype=np.float64)

    c1 = np.hypot(a1, b1)
    c2 = np.hypot(a2, b2)
    c_mean7 = ((c1 + c2) / 2.0) ** 7
    g = 0.5 * (1.0 - np.sqrt(c_mean7 / (c_mean7 + 25.0 ** 7)))

    a1p = (1.0 + g) * a1
    a2p = (1.0 + g) * a2
    c1p = np.hypot(a1p, b1)
    c2p = np.hypot(a2p, b2)
    h1p = np.degrees(np.arctan2(b1, a1p)) % 360.0
    h2p = np.degrees(np.arctan2(b2, a2p)) % 360.0

    chroma_product = c1p * c2p
    achromatic = chroma_product == 0.0

    d_l = l2 - l1
    d_c = c2p - c1p
    dh = h2p - h1p
    dh = np.where(dh > 180.0, dh - 360.0, dh)
    dh = np.where(dh < -180.0, dh + 360.0, dh)
    dh = np.where(achromatic, 0.0, dh)
    d_h = 2.0 * np.sqrt(chroma_product) * np.sin(np.radians(dh) / 2.0)

    l_mean = (l1 + l2) / 2.0
    c_mean_p = (c1p + c2p) / 2.0
    h_sum = h1p + h2p
    h_mean = np.where(
        np.abs(h1p - h2p) <= 180.0,
        h_sum / 2.0,
        np.where(h_sum < 360.0, (h_sum + 360.0) / 2.0, (h_sum - 360.0) / 2.0),
    )
    h_mean = np.where(achromatic, h_sum, h_mean)

    t = (1.0
         - 0.17 * np.cos(np.radians(h_mean - 30.0))
         + 0.24 * np.cos(np.radians(2.0 * h_mean))
         + 0.32 * np.cos(np.radians(3.0 * h_mean + 6.0))
         - 0.20 * np.cos(np.radians(4.0 * h_mean - 63.0)))
    d_theta = 30.0 * np.exp(-(((h_mean - 275.0) / 25.0) ** 2))
    c_mean_p7 = c_mean_p ** 7
    r_c = 2.0 * np.sqrt(c_mean_p7 / (c_mean_p7 + 25.0 ** 7))
    l_dev = (l_mean - 50.0) ** 2
    s_l = 1.0 + 0.015 * l_dev / np.sqrt(20.0 + l_dev)
    s_c = 1.0 + 0.045 * c_mean_p
    s_h = 1.0 + 0.015 * c_mean_p * t
    r_t = -np.sin(np.radians(2.0 * d_theta)) * r_c

    term_l = d_l / s_l
    term_c = d_c / s_c
    term_h = d_h / s_h
    return np.sqrt(term_l ** 2 + term_c ** 2 + term_h ** 2 + r_t * term_c * term_h)


def ciede2000(a: PlanarImage, b: PlanarImage) -> float:
    """
    Mean CIEDE2000 difference over pixels, after sRGB (D65) to CIELAB.

    Raises:
        UnsupportedError: For gray images
        StructuralError: On size mismatch
    """
    _check_pair(a, b)
    if a.channels != 3:
        raise UnsupportedError("CIEDE2000 is only defined for 3-channel images")
    return float(np.mean(delta_e_2000(srgb_to_lab(a), srgb_to_lab(b))))


def evaluate(a: PlanarImage, b: PlanarImage, metrics: Iterable[str] = METRIC_NAMES) -> MetricReport:
    """Compute the requested metrics; unsupported ones are left as None."""
    metrics = set(metrics)
    unknown = metrics - set(METRIC_NAMES)
    if unknown:
        raise UnsupportedError(f"Unknown metrics: {sorted(unknown)}")

    values: Dict[str, Optional[float]] = {}
    if "psnr" in metrics:
        values['psnr'] = psnr(a, b)
    if "ssim" in metrics:
        values['ssim'] = ssim(a, b)
    if "ciede2000" in metrics:
        if a.channels == 3:
            values['ciede2000'] = ciede2000(a, b)
        else:
            logger.warning("Skipping CIEDE2000 for gray image pair")
    return MetricReport(**values)
