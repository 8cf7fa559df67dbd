"""Image and depth-map files.

Images: PNG (8-bit gray/RGB, alpha dropped) and binary PPM/PGM (P6/P5,
maxval 255), decoded with Pillow. Depth maps: 16-bit gray PNG scaled by
``depth_scale`` or PFM floats.
"""

from __future__ import annotations

import logging
import re
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from imaging.core import PlanarImage, ScalarMap, from_bytes, to_bytes
from utils.validation import ImageIOError, ValidationError, validate_positive

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

IMAGE_SUFFIXES = ('.png', '.ppm', '.pgm', '.pnm')
DEPTH_16BIT_MAX = 65535.0

_PFM_HEADER = re.compile(rb"^(PF|Pf)\s+(\d+)\s+(\d+)\s+(-?[0-9.eE+-]+)\s")


def is_image_file(path: Path) -> bool:
    return path.is_file() and path.suffix.lower() in IMAGE_SUFFIXES


def _open(path: Path) -> Image.Image:
    try:
        img = Image.open(path)
        img.load()
        return img
    except FileNotFoundError:
        raise ImageIOError(path, "file not found")
    except UnidentifiedImageError:
        raise ImageIOError(path, "unsupported or unrecognized image format")
    except (OSError, SyntaxError, ValueError) as e:
        raise ImageIOError(path, f"corrupt or truncated image ({e})")


def read_image(path: PathLike) -> PlanarImage:
    """
    Read an 8-bit gray or RGB image.

    Raises:
        ImageIOError: Missing, corrupt, truncated, or unsupported file
    """
    path = Path(path)
    img = _open(path)

    if img.mode in ('L', 'RGB'):
        pass
    elif img.mode == 'LA':
        img = img.convert('L')
    elif img.mode in ('RGBA', 'P', 'PA', 'CMYK', 'YCbCr', '1'):
        img = img.convert('RGB') if img.mode != '1' else img.convert('L')
    else:
        raise ImageIOError(path, f"unsupported pixel mode {img.mode} (8-bit gray or RGB expected)")

    channels = 1 if img.mode == 'L' else 3
    image = from_bytes(img.tobytes(), img.width, img.height, channels)
    logger.debug(f"Read {path} as {image!r}")
    return image


def write_image(img: PlanarImage, path: PathLike) -> Path:
    """Write a PlanarImage as 8-bit; the format follows the suffix (PNG by default)."""
    path = Path(path)
    mode = 'L' if img.channels == 1 else 'RGB'
    out = Image.frombytes(mode, (img.width, img.height), to_bytes(img))
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        out.save(path, format=None if path.suffix else 'PNG')
    except (OSError, ValueError) as e:
        raise ImageIOError(path, f"could not write image ({e})")
    logger.debug(f"Wrote {path}")
    return path


def render_map(m: ScalarMap) -> PlanarImage:
    """Linear min-max stretch of a map to a gray image; constant maps render black."""
    lo, hi = float(m.data.min()), float(m.data.max())
    span = hi - lo
    stretched = (m.data - lo) / span if span > 0 else np.zeros_like(m.data)
    return PlanarImage(np.clip(stretched, 0.0, 1.0)[np.newaxis])


def write_map(m: ScalarMap, path: PathLike) -> Path:
    """Render a map with render_map and save it as 8-bit gray."""
    return write_image(render_map(m), path)


def read_pfm(path: PathLike) -> np.ndarray:
    """
    Read a PFM file into a float64 array, shape (H, W) or (H, W, 3), top row first.

    Raises:
        ImageIOError: Malformed header or truncated data
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except FileNotFoundError:
        raise ImageIOError(path, "file not found")

    match = _PFM_HEADER.match(raw)
    if not match:
        raise ImageIOError(path, "malformed PFM header")
    kind, width, height, scale = match.groups()
    width, height = int(width), int(height)
    channels = 3 if kind == b'PF' else 1
    dtype = '<f4' if float(scale) < 0 else '>f4'

    payload = raw[match.end():]
    expected = width * height * channels * 4
    if len(payload) < expected:
        raise ImageIOError(path, f"truncated PFM data: {len(payload)} of {expected} bytes")

    data = np.frombuffer(payload[:expected], dtype=dtype).reshape(height, width, channels)
    # rows are stored bottom to top
    data = data[::-1].astype(np.float64)
    return data[:, :, 0] if channels == 1 else data


def write_pfm(data: np.ndarray, path: PathLike) -> Path:
    """Write a (H, W) or (H, W, 3) array as little-endian float32 PFM."""
    path = Path(path)
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        kind = 'Pf'
    elif data.ndim == 3 and data.shape[2] == 3:
        kind = 'PF'
    else:
        raise ValidationError(f"PFM stores (H, W) or (H, W, 3) arrays, got shape {data.shape}")

    header = f"{kind}\n{data.shape[1]} {data.shape[0]}\n-1.0\n".encode('ascii')
    body = np.ascontiguousarray(data[::-1]).astype('<f4').tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(header + body)
    logger.debug(f"Wrote PFM {path}")
    return path


def read_depth(path: PathLike, depth_scale: float = 10.0) -> ScalarMap:
    """
    Read a depth map.

    Args:
        path: 16-bit gray PNG (d = raw / 65535 * depth_scale) or PFM (raw floats)
        depth_scale: Depth units at PNG value 65535

    Raises:
        ImageIOError: Unreadable file or unsupported format
        ValidationError: Negative or non-finite depth values
    """
    path = Path(path)
    depth_scale = validate_positive(depth_scale, "depth_scale")

    if path.suffix.lower() == '.pfm':
        data = read_pfm(path)
        if data.ndim == 3:
            raise ImageIOError(path, "depth PFM must have a single channel")
    else:
        img = _open(path)
        if img.mode in ('I;16', 'I;16B', 'I;16L', 'I'):
            data = np.asarray(img, dtype=np.float64) / DEPTH_16BIT_MAX * depth_scale
        elif img.mode == 'L':
            logger.warning(f"{path} is 8-bit; depth precision is limited to 256 levels")
            data = np.asarray(img, dtype=np.float64) / 255.0 * depth_scale
        else:
            raise ImageIOError(path, f"depth PNG must be 16-bit gray, got mode {img.mode}")

    if not np.all(np.isfinite(data)):
        raise ValidationError(f"{path}: depth values must be finite")
    if data.min() < 0:
        raise ValidationError(f"{path}: depth values must be >= 0, min is {data.min()}")
    return ScalarMap(data)


def write_depth(depth: ScalarMap, path: PathLike, depth_scale: float = 10.0) -> Path:
    """Write depth as PFM (exact) or 16-bit PNG (quantized to depth_scale / 65535 steps)."""
    path = Path(path)
    if path.suffix.lower() == '.pfm':
        return write_pfm(depth.data, path)

    depth_scale = validate_positive(depth_scale, "depth_scale")
    raw = np.clip(np.floor(depth.data / depth_scale * DEPTH_16BIT_MAX + 0.5), 0, DEPTH_16BIT_MAX)
    if np.any(depth.data > depth_scale):
        logger.warning(f"Depth above {depth_scale} saturates in {path}")
    out = Image.fromarray(raw.astype(np.uint16))
    path.parent.mkdir(parents=True, exist_ok=True)
    out.save(path, format='PNG')
    logger.debug(f"Wrote 16-bit depth {path}")
    return path


__all__ = [
    'IMAGE_SUFFIXES',
    'is_image_file',
    'read_depth',
    'read_image',
    'read_pfm',
    'render_map',
    'write_depth',
    'write_image',
    'write_map',
    'write_pfm',
]
