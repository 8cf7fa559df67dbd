"""Forward haze model: H = J * t + A * (1 - t) with t = exp(-beta * d).

Under this model the color difference to the airlight shrinks by the
transmission, so two pixels whose clear-scene color differences are at most
sqrt(3) apart keep their order once their depths differ by more than
ln(sqrt(3)) / beta. MIN_DISTINGUISHABLE_DEPTH_GAP is that bound for beta = 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from imaging.core import AtmosphericLight, PlanarImage, ScalarMap
from utils.validation import ConfigError, ValidationError, validate_same_shape

logger = logging.getLogger(__name__)

MIN_DISTINGUISHABLE_DEPTH_GAP = math.log(math.sqrt(3.0))


@dataclass(frozen=True)
class SynthParams:
    """Scattering coefficient, airlight and scene depth for the forward model."""

    airlight: AtmosphericLight
    depth: ScalarMap
    beta: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.beta, (int, float)) and math.isfinite(self.beta) and self.beta > 0):
            raise ConfigError(f"beta must be > 0, got {self.beta!r}")
        if self.depth.data.min() < 0:
            raise ValidationError(f"depth must be >= 0 everywhere, min is {self.depth.data.min()}")

    def transmission(self) -> ScalarMap:
        return ScalarMap(np.exp(-self.beta * self.depth.data))


def synthesize_haze(clear: PlanarImage, p: SynthParams) -> PlanarImage:
    """
    Haze a clear image with the atmospheric scattering model.

    Args:
        clear: Haze-free image J
        p: Scattering parameters; p.depth must match the image size

    Returns:
        Hazy image H

    Raises:
        StructuralError: If the depth map and image sizes differ
    """
    validate_same_shape(clear.shape, p.depth.shape, "clear image and depth map")
    airlight = p.airlight.matching(clear.channels).planar()
    t = p.transmission().data[np.newaxis]
    hazy = clear.data * t + airlight * (1.0 - t)
    logger.debug(f"Synthesized haze with beta={p.beta}, t in [{t.min():.4f}, {t.max():.4f}]")
    return PlanarImage.clamped(hazy)
