"""Imaging package for the hazeorder dehazing system."""

from .core import (
    AIRLIGHT_DELTA,
    AtmosphericLight,
    PlanarImage,
    ScalarMap,
    from_bytes,
    luma,
    quantize,
    to_bytes,
)

__all__ = [
    'AIRLIGHT_DELTA',
    'AtmosphericLight',
    'PlanarImage',
    'ScalarMap',
    'from_bytes',
    'luma',
    'quantize',
    'to_bytes',
]
