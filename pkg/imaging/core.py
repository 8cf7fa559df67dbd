"""Image and map value types for the hazeorder pipeline.

Images live in floating-point working space: sRGB-coded values scaled to
[0, 1] with no linearization. Samples are stored planar, shape
``(channels, height, width)``, so each channel is one contiguous block.
All types are immutable after construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from utils.validation import StructuralError, ValidationError

logger = logging.getLogger(__name__)

BytesLike = Union[bytes, bytearray, memoryview, np.ndarray, Sequence[int]]

# BT.601 luma weights
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# Airlight components are kept this far below 1 wherever 1 - A appears
# in a denominator.
AIRLIGHT_DELTA = 1e-4


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class PlanarImage:
    """H x W x C image with samples in [0, 1], stored channel-planar."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 3:
            raise StructuralError(f"PlanarImage data must be 3-D (C, H, W), got shape {data.shape}")
        if data.shape[0] not in (1, 3):
            raise StructuralError(f"PlanarImage must have 1 or 3 channels, got {data.shape[0]}")
        if data.shape[1] < 1 or data.shape[2] < 1:
            raise StructuralError(f"PlanarImage must be non-empty, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValidationError("PlanarImage samples must be finite")
        if data.min() < 0.0 or data.max() > 1.0:
            raise ValidationError(
                f"PlanarImage samples must lie in [0, 1], got range [{data.min()}, {data.max()}]"
            )
        object.__setattr__(self, "data", data)

    @classmethod
    def from_hwc(cls, array: np.ndarray, clamp: bool = False) -> "PlanarImage":
        """Build from an interleaved (H, W, C) or gray (H, W) float array."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 2:
            planar = array[np.newaxis, :, :]
        elif array.ndim == 3:
            planar = np.moveaxis(array, -1, 0)
        else:
            raise StructuralError(f"Expected (H, W) or (H, W, C) array, got shape {array.shape}")
        if clamp:
            planar = np.clip(planar, 0.0, 1.0)
        return cls(planar)

    @classmethod
    def clamped(cls, planar: np.ndarray) -> "PlanarImage":
        """Build from a planar array, clamping samples into [0, 1]."""
        return cls(np.clip(np.asarray(planar, dtype=np.float64), 0.0, 1.0))

    @classmethod
    def constant(cls, height: int, width: int, values: Sequence[float]) -> "PlanarImage":
        values = np.asarray(values, dtype=np.float64).reshape(-1, 1, 1)
        return cls(np.broadcast_to(values, (values.shape[0], height, width)))

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    @property
    def shape(self) -> tuple:
        """(height, width), the shape every map derived from this image shares."""
        return self.data.shape[1:]

    @property
    def samples(self) -> np.ndarray:
        """Flat planar view: all of channel 0, then channel 1, ..."""
        return self.data.reshape(-1)

    def plane(self, channel: int) -> np.ndarray:
        return self.data[channel]

    def to_hwc(self) -> np.ndarray:
        """Interleaved copy, shape (H, W, C)."""
        return np.ascontiguousarray(np.moveaxis(self.data, 0, -1))

    def __repr__(self) -> str:
        return f"<PlanarImage {self.width}x{self.height}x{self.channels}>"


@dataclass(frozen=True, eq=False)
class ScalarMap:
    """Single-channel H x W map of finite floats (θ, θ_r, z, w, t, depth, ...)."""

    data: np.ndarray

    def __post_init__(self):
        data = _frozen(self.data)
        if data.ndim != 2:
            raise StructuralError(f"ScalarMap data must be 2-D (H, W), got shape {data.shape}")
        if data.size == 0:
            raise StructuralError("ScalarMap must be non-empty")
        if not np.all(np.isfinite(data)):
            raise ValidationError("ScalarMap samples must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def full(cls, height: int, width: int, value: float) -> "ScalarMap":
        return cls(np.full((height, width), float(value)))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def samples(self) -> np.ndarray:
        return self.data.reshape(-1)

    def __repr__(self) -> str:
        return f"<ScalarMap {self.width}x{self.height} range=[{self.data.min():.4g}, {self.data.max():.4g}]>"


@dataclass(frozen=True, eq=False)
class AtmosphericLight:
    """Global per-channel airlight A^c, each component in (0, 1]."""

    values: np.ndarray

    def __post_init__(self):
        values = _frozen(np.atleast_1d(self.values))
        if values.ndim != 1 or values.size not in (1, 3):
            raise StructuralError(f"Airlight must have 1 or 3 components, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or values.min() <= 0.0 or values.max() > 1.0:
            raise ValidationError(f"Airlight components must lie in (0, 1], got {values.tolist()}")
        object.__setattr__(self, "values", values)

    @property
    def channels(self) -> int:
        return self.values.size

    def for_boundary(self) -> np.ndarray:
        """Components pulled below 1 by AIRLIGHT_DELTA, safe to divide by 1 - A."""
        return np.minimum(self.values, 1.0 - AIRLIGHT_DELTA)

    def planar(self) -> np.ndarray:
        """Shape (C, 1, 1), broadcastable against PlanarImage.data."""
        return self.values.reshape(-1, 1, 1)

    def matching(self, channels: int) -> "AtmosphericLight":
        """Return an airlight with the requested channel count."""
        if channels == self.channels:
            return self
        if self.channels == 3 and channels == 1:
            return AtmosphericLight(np.array([float(LUMA_WEIGHTS @ self.values)]))
        if self.channels == 1 and channels == 3:
            return AtmosphericLight(np.repeat(self.values, 3))
        raise StructuralError(f"Cannot adapt {self.channels}-channel airlight to {channels} channels")

    def __repr__(self) -> str:
        return "<AtmosphericLight (" + ", ".join(f"{v:.4f}" for v in self.values) + ")>"


def from_bytes(raw: BytesLike, width: int, height: int, channels: int) -> PlanarImage:
    """
    Decode interleaved 8-bit samples into a PlanarImage.

    Args:
        raw: width * height * channels bytes, interleaved per pixel
        width: Image width in pixels
        height: Image height in pixels
        channels: 1 or 3

    Returns:
        PlanarImage with samples v / 255

    Raises:
        StructuralError: If the byte count does not match the dimensions
    """
    if isinstance(raw, (bytes, bytearray, memoryview)):
        buffer = np.frombuffer(raw, dtype=np.uint8)
    else:
        buffer = np.asarray(raw)
        if buffer.size and (buffer.min() < 0 or buffer.max() > 255):
            raise ValidationError("Byte samples must lie in [0, 255]")
        buffer = buffer.astype(np.uint8).reshape(-1)

    expected = width * height * channels
    if buffer.size != expected:
        raise StructuralError(
            f"Expected {expected} bytes for {width}x{height}x{channels}, got {buffer.size}"
        )

    interleaved = buffer.reshape(height, width, channels)
    return PlanarImage(np.moveaxis(interleaved, -1, 0) / 255.0)


def quantize(data: np.ndarray) -> np.ndarray:
    """Round-half-up to uint8 after scaling by 255, clamped to [0, 255]."""
    return np.clip(np.floor(np.asarray(data) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def to_bytes(img: PlanarImage) -> bytes:
    """Encode a PlanarImage as interleaved 8-bit samples."""
    return quantize(img.to_hwc()).tobytes()


def luma(img: PlanarImage) -> ScalarMap:
    """BT.601 luma of a 3-channel image; the single plane of a gray image."""
    if img.channels == 1:
        return ScalarMap(img.data[0])
    return ScalarMap(np.tensordot(LUMA_WEIGHTS, img.data, axes=1))
