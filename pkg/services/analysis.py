"""Depth-order validation: rank correlation, row profiles, epsilon curves."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import rankdata

from config import DehazeConfig
from imaging.core import AtmosphericLight, PlanarImage, ScalarMap
from services.airlight import resolve_airlight
from services.pipeline import (
    boundary_theta,
    boundary_transmission,
    color_difference,
    extract_depth_order,
    normalize,
    sortp,
)
from utils.validation import StructuralError, ValidationError, validate_same_shape

logger = logging.getLogger(__name__)

DEFAULT_MAX_SAMPLES = 100_000
DEFAULT_EPSILON_GRID = tuple(round(0.005 * i, 3) for i in range(21))  # 0 .. 0.1


@dataclass(frozen=True)
class DepthOrderReport:
    """Spearman rho of one image pair plus the hazy row profile."""

    rho: Optional[float]
    row_profile: np.ndarray
    patch_size: int
    n_pixels: int
    reference_kind: str = "none"
    airlight: Sequence[float] = field(default_factory=tuple)

    def to_row(self, image_id: str) -> dict:
        return {
            'image_id': image_id,
            'r': self.patch_size,
            'rho': self.rho,
            'n_pixels': self.n_pixels,
        }


def spearman_rho(xs: Sequence[float], ys: Sequence[float]) -> float:
    """
    Spearman rank correlation with average ranks for ties.

    Raises:
        StructuralError: If lengths differ or fewer than 2 samples
        ValidationError: If either side is constant (rho undefined)
    """
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size != ys.size:
        raise StructuralError(f"Sequences differ in length: {xs.size} vs {ys.size}")
    if xs.size < 2:
        raise StructuralError("Spearman rho needs at least 2 samples")

    rx = rankdata(xs, method='average')
    ry = rankdata(ys, method='average')
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0.0:
        raise ValidationError("Spearman rho is undefined when one sequence is constant")
    return float(np.clip((dx @ dy) / denom, -1.0, 1.0))


def row_profile(theta_r: ScalarMap) -> np.ndarray:
    """Mean of each row, bottom row first."""
    return theta_r.data.mean(axis=1)[::-1].copy()


def hazy_depth_order(hazy: PlanarImage, cfg: Optional[DehazeConfig] = None) -> Tuple[AtmosphericLight, ScalarMap]:
    """Airlight and theta_r of a hazy image, as the pipeline computes them."""
    cfg = cfg or DehazeConfig()
    airlight = resolve_airlight(hazy, cfg.airlight_override, cfg.airlight_patch, cfg.airlight_top_fraction)
    return airlight, extract_depth_order(color_difference(hazy, airlight), cfg.r)


def _sample_stride(n: int, max_samples: Optional[int]) -> int:
    if not max_samples or n <= max_samples:
        return 1
    return -(-n // max_samples)


def depth_order_correlation(
    hazy: PlanarImage,
    reference: Union[ScalarMap, PlanarImage],
    cfg: Optional[DehazeConfig] = None,
    max_samples: Optional[int] = DEFAULT_MAX_SAMPLES,
) -> DepthOrderReport:
    """
    Rank agreement between the extracted depth order and a reference.

    With a depth map, rho compares -theta_r(hazy) with depth. With a clear
    image, rho compares theta_r(hazy) with theta_r(clear), both measured
    against the airlight estimated from the hazy image.

    Args:
        hazy: Hazy image
        reference: Ground-truth depth (ScalarMap) or clear image (PlanarImage)
        cfg: Supplies r and the airlight settings
        max_samples: Pixels are subsampled by a uniform stride down to this
            many; None ranks every pixel

    Raises:
        StructuralError: If sizes differ
    """
    cfg = cfg or DehazeConfig()
    validate_same_shape(hazy.shape, reference.shape, "hazy image and reference")

    airlight, theta_r = hazy_depth_order(hazy, cfg)

    if isinstance(reference, PlanarImage):
        if reference.channels != hazy.channels:
            raise StructuralError("Hazy and clear images differ in channel count")
        xs = theta_r.samples
        ys = extract_depth_order(color_difference(reference, airlight), cfg.r).samples
        kind = "clear"
    else:
        xs = -theta_r.samples
        ys = reference.samples
        kind = "depth"

    stride = _sample_stride(xs.size, max_samples)
    xs, ys = xs[::stride], ys[::stride]
    rho = spearman_rho(xs, ys)
    logger.info(f"Depth order rho={rho:.4f} over {xs.size} pixels (r={cfg.r}, reference={kind})")

    return DepthOrderReport(
        rho=rho,
        row_profile=row_profile(theta_r),
        patch_size=cfg.r,
        n_pixels=int(xs.size),
        reference_kind=kind,
        airlight=tuple(float(a) for a in airlight.values),
    )


def epsilon_curve(theta_b, epsilons: Iterable[float]) -> np.ndarray:
    """theta_eps for each epsilon; the curve is continuous and non-decreasing."""
    return np.array([sortp(theta_b, e) for e in epsilons])


def epsilon_sweep(
    hazy: PlanarImage,
    cfg: Optional[DehazeConfig] = None,
    epsilons: Sequence[float] = DEFAULT_EPSILON_GRID,
) -> np.ndarray:
    """
    theta_eps of a hazy image over a grid of epsilon values.

    An image whose boundary pool is empty yields max theta_r for every epsilon,
    the same fallback dehaze uses.
    """
    cfg = cfg or DehazeConfig()
    airlight, theta_r = hazy_depth_order(hazy, cfg)
    theta_b = boundary_theta(theta_r, normalize(theta_r), boundary_transmission(hazy, airlight), cfg.weight_fn)
    if theta_b.count() == 0:
        logger.warning("No pixel can reach the boundary; epsilon curve is flat")
        return np.full(len(epsilons), float(theta_r.data.max()))
    return epsilon_curve(theta_b, epsilons)


def plot_row_profile(profile: Sequence[float], path: Path, title: Optional[str] = None) -> Path:
    """Render a row profile (row index 0 = bottom) to an image file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(profile)), profile, linewidth=1.5)
    ax.set_xlabel("row index (0 = bottom)")
    ax.set_ylabel("mean theta_r")
    if title:
        ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    logger.info(f"Row profile plot saved to {path}")
    return path
