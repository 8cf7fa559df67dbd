"""Atmospheric light estimation.

Dark-channel estimator: per-pixel minimum over channels, eroded by a
square window, then the hazy colors of the brightest 0.1% of that dark
channel are averaged. Isolated bright outliers (specular highlights,
lamps) are eroded away before selection.
"""

from __future__ import annotations

import logging
from typing import Optional, Sequence

import numpy as np

from imaging.core import AtmosphericLight, PlanarImage, ScalarMap
from services.filters import min_filter_array
from utils.validation import validate_window

logger = logging.getLogger(__name__)

AIRLIGHT_FLOOR = 0.05
AIRLIGHT_CEILING = 1.0 - 1e-4


def _fitting_window(size: int, height: int, width: int) -> int:
    """Largest odd window <= size that fits inside the image."""
    limit = min(height, width)
    if size <= limit:
        return size
    fitted = limit if limit % 2 == 1 else limit - 1
    logger.debug(f"Airlight patch {size} does not fit {width}x{height}, using {fitted}")
    return max(fitted, 1)


def dark_channel(img: PlanarImage, patch: int = 15) -> ScalarMap:
    """Minimum over channels followed by a patch x patch minimum filter."""
    patch = validate_window(patch, "dark channel patch")
    return ScalarMap(min_filter_array(img.data.min(axis=0), patch))


def estimate_airlight(
    hazy: PlanarImage,
    patch: int = 15,
    top_fraction: float = 0.001,
) -> AtmosphericLight:
    """
    Estimate the global airlight of a hazy image.

    Args:
        hazy: Hazy input image
        patch: Dark channel window; shrunk to fit images smaller than it
        top_fraction: Share of brightest dark-channel pixels averaged

    Returns:
        AtmosphericLight with components clamped to [0.05, 1 - 1e-4]
    """
    patch = _fitting_window(validate_window(patch, "airlight patch"), hazy.height, hazy.width)
    dark = dark_channel(hazy, patch).samples

    count = max(1, int(dark.size * top_fraction))
    # stable sort keeps the selection deterministic among equal dark values
    order = np.argsort(-dark, kind='stable')[:count]

    colors = hazy.data.reshape(hazy.channels, -1)[:, order]
    values = np.clip(colors.mean(axis=1), AIRLIGHT_FLOOR, AIRLIGHT_CEILING)

    airlight = AtmosphericLight(values)
    logger.debug(f"Estimated airlight {airlight} from {count} candidate pixels")
    return airlight


def resolve_airlight(
    hazy: PlanarImage,
    override: Optional[Sequence[float]] = None,
    patch: int = 15,
    top_fraction: float = 0.001,
) -> AtmosphericLight:
    """User override when given (broadcast/adapted to the image), else the estimate."""
    if override is not None:
        airlight = AtmosphericLight(np.asarray(override, dtype=np.float64)).matching(hazy.channels)
        logger.info(f"Using airlight override {airlight}")
        return airlight
    return estimate_airlight(hazy, patch, top_fraction)
