"""Separable window filters for the dehazing pipeline.

Every window operation replicates edge pixels at the borders. The sliding
maximum and the box mean cost O(1) per pixel regardless of the window size:
the maximum runs two 1-D van Herk/Gil-Werman passes (rows, then columns), the
mean reads four corners of an integral image.

The ``reference_*`` functions are brute-force O(r^2) twins used as oracles by
the test-suite.
"""

from __future__ import annotations

import logging
from typing import Tuple

import numpy as np

from imaging.core import PlanarImage, ScalarMap, luma, quantize
from utils.validation import validate_positive, validate_same_shape, validate_window

logger = logging.getLogger(__name__)

CLAHE_BINS = 256


class IntegralImage:
    """(H+1) x (W+1) prefix-sum table, S[y, x] = sum of data[:y, :x]."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError(f"IntegralImage needs a 2-D array, got shape {data.shape}")
        table = np.zeros((data.shape[0] + 1, data.shape[1] + 1), dtype=np.float64)
        np.cumsum(np.cumsum(data, axis=0), axis=1, out=table[1:, 1:])
        self.table = table

    @property
    def shape(self) -> Tuple[int, int]:
        return self.table.shape[0] - 1, self.table.shape[1] - 1

    def box_sum(self, y0, x0, y1, x1):
        """Sum over rows [y0, y1) and columns [x0, x1); accepts scalars or arrays."""
        s = self.table
        return s[y1, x1] - s[y0, x1] - s[y1, x0] + s[y0, x0]

    def window_sums(self, size: int) -> np.ndarray:
        """Sums of every full size x size window, shape (H-size+1, W-size+1)."""
        s = self.table
        return s[size:, size:] - s[:-size, size:] - s[size:, :-size] + s[:-size, :-size]


def _running_max(a: np.ndarray, size: int) -> np.ndarray:
    """Sliding maximum along the last axis, edge-replicated, centered window."""
    if size == 1:
        return a.copy()
    half = size // 2
    n = a.shape[-1]
    padded_len = n + 2 * half
    blocks = -(-padded_len // size)
    extra = blocks * size - padded_len
    pad = [(0, 0)] * (a.ndim - 1) + [(half, half + extra)]
    padded = np.pad(a, pad, mode='edge')

    shaped = padded.reshape(a.shape[:-1] + (blocks, size))
    forward = np.maximum.accumulate(shaped, axis=-1).reshape(padded.shape)
    backward = np.maximum.accumulate(shaped[..., ::-1], axis=-1)[..., ::-1].reshape(padded.shape)

    # window [i, i + size) spans at most two blocks
    return np.maximum(backward[..., :n], forward[..., size - 1:size - 1 + n])


def max_filter_array(data: np.ndarray, size: int) -> np.ndarray:
    """max_filter on a raw 2-D array."""
    size = validate_window(size, "window size")
    rows = _running_max(np.asarray(data, dtype=np.float64), size)
    return _running_max(rows.T, size).T


def max_filter(m: ScalarMap, r: int) -> ScalarMap:
    """
    Sliding-window maximum over an r x r window centered on each pixel.

    Args:
        m: Input map
        r: Odd window side length, >= 1

    Returns:
        Map of local maxima, same shape as m

    Raises:
        ConfigError: If r is even or < 1
    """
    return ScalarMap(max_filter_array(m.data, r))


def min_filter_array(data: np.ndarray, size: int) -> np.ndarray:
    """Sliding minimum, computed as -max(-data)."""
    return -max_filter_array(-np.asarray(data, dtype=np.float64), size)


def box_mean_array(data: np.ndarray, size: int) -> np.ndarray:
    """box_mean on a raw 2-D array."""
    size = validate_window(size, "window size")
    half = size // 2
    padded = np.pad(np.asarray(data, dtype=np.float64), half, mode='edge')
    return IntegralImage(padded).window_sums(size) / float(size * size)


def box_mean(m: ScalarMap, r: int) -> ScalarMap:
    """
    Mean over an r x r window centered on each pixel, edge-replicated.

    Raises:
        ConfigError: If r is even or < 1
    """
    return ScalarMap(box_mean_array(m.data, r))


def guided_filter(src: ScalarMap, guide: ScalarMap, radius: int, eps: float) -> ScalarMap:
    """
    Edge-preserving smoothing of ``src`` steered by ``guide``.

    Each window fits src ~ a * guide + b; the output averages the fitted
    coefficients of all windows covering a pixel. Both signals are centered
    on their global means first, which leaves the result unchanged and keeps
    the integral-image sums small.

    Args:
        src: Map to smooth (the transmission map in the pipeline)
        guide: Guide map of the same shape
        radius: Odd window side length
        eps: Regularizer, > 0

    Returns:
        Filtered map

    Raises:
        StructuralError: If src and guide shapes differ
        ConfigError: If radius is even or eps <= 0
    """
    validate_same_shape(src.shape, guide.shape, "guided filter source and guide")
    radius = validate_window(radius, "guided filter radius")
    eps = validate_positive(eps, "guided filter eps")

    p_offset = float(src.data.mean())
    i_offset = float(guide.data.mean())
    p = src.data - p_offset
    g = guide.data - i_offset

    mean_g = box_mean_array(g, radius)
    mean_p = box_mean_array(p, radius)
    cov_gp = box_mean_array(g * p, radius) - mean_g * mean_p
    var_g = box_mean_array(g * g, radius) - mean_g * mean_g

    a = cov_gp / (var_g + eps)
    b = mean_p - a * mean_g

    q = box_mean_array(a, radius) * g + box_mean_array(b, radius)
    return ScalarMap(q + p_offset)


def _tile_edges(length: int, tiles: int) -> np.ndarray:
    return np.linspace(0, length, tiles + 1).round().astype(int)


def _tile_mapping(bins: np.ndarray, clip: float) -> np.ndarray:
    """Clipped, redistributed CDF of one tile's quantized samples, in [0, 1]."""
    hist = np.bincount(bins.ravel(), minlength=CLAHE_BINS).astype(np.float64)
    total = hist.sum()
    limit = clip * total / CLAHE_BINS
    excess = np.maximum(hist - limit, 0.0).sum()
    hist = np.minimum(hist, limit) + excess / CLAHE_BINS
    return np.minimum(np.cumsum(hist) / total, 1.0)


def _blend_axis(length: int, edges: np.ndarray):
    """Lower tile index, upper tile index and upper weight for each coordinate."""
    centers = (edges[:-1] + edges[1:] - 1) / 2.0
    position = np.interp(np.arange(length), centers, np.arange(len(centers)))
    lower = np.floor(position).astype(int)
    upper = np.minimum(lower + 1, len(centers) - 1)
    return lower, upper, position - lower


def equalize_plane(plane: np.ndarray, tiles: Tuple[int, int] = (8, 8), clip: float = 2.0) -> np.ndarray:
    """CLAHE on one [0, 1] plane; see clahe()."""
    height, width = plane.shape
    tiles_y, tiles_x = int(tiles[0]), int(tiles[1])
    if tiles_y < 1 or tiles_x < 1 or tiles_y > height or tiles_x > width:
        logger.debug(f"CLAHE grid {tiles_y}x{tiles_x} does not fit {width}x{height}, using one tile")
        tiles_y, tiles_x = 1, 1

    bins = quantize(plane)
    edges_y = _tile_edges(height, tiles_y)
    edges_x = _tile_edges(width, tiles_x)

    mappings = np.empty((tiles_y, tiles_x, CLAHE_BINS))
    for i in range(tiles_y):
        for j in range(tiles_x):
            tile = bins[edges_y[i]:edges_y[i + 1], edges_x[j]:edges_x[j + 1]]
            mappings[i, j] = _tile_mapping(tile, clip)

    y0, y1, wy = _blend_axis(height, edges_y)
    x0, x1, wx = _blend_axis(width, edges_x)
    y0, y1, wy = y0[:, None], y1[:, None], wy[:, None]
    x0, x1, wx = x0[None, :], x1[None, :], wx[None, :]

    out = ((1 - wy) * (1 - wx) * mappings[y0, x0, bins]
           + (1 - wy) * wx * mappings[y0, x1, bins]
           + wy * (1 - wx) * mappings[y1, x0, bins]
           + wy * wx * mappings[y1, x1, bins])
    return np.clip(out, 0.0, 1.0)


def clahe(img: PlanarImage, tiles: Tuple[int, int] = (8, 8), clip: float = 2.0) -> PlanarImage:
    """
    Contrast limited adaptive histogram equalization.

    Gray images are equalized directly. Color images are equalized on BT.601
    luma only: the luma change is added to every channel, which keeps both
    chroma differences (B - Y, R - Y) fixed.

    Args:
        img: Input image
        tiles: Tile grid (rows, columns); a grid larger than the image
            falls back to one global tile
        clip: Histogram clip as a multiple of the uniform bin height

    Returns:
        Equalized image clamped to [0, 1]
    """
    clip = validate_positive(clip, "CLAHE clip")
    if img.channels == 1:
        return PlanarImage.clamped(equalize_plane(img.data[0], tiles, clip)[np.newaxis])

    y = luma(img).data
    delta = equalize_plane(np.clip(y, 0.0, 1.0), tiles, clip) - y
    return PlanarImage.clamped(img.data + delta[np.newaxis])


def reference_max_filter(data: np.ndarray, size: int) -> np.ndarray:
    """Brute-force O(r^2) sliding maximum, edge-replicated."""
    half = size // 2
    padded = np.pad(np.asarray(data, dtype=np.float64), half, mode='edge')
    height, width = np.shape(data)
    out = np.empty((height, width))
    for y in range(height):
        for x in range(width):
            out[y, x] = padded[y:y + size, x:x + size].max()
    return out


def reference_box_mean(data: np.ndarray, size: int) -> np.ndarray:
    """Brute-force O(r^2) window mean, edge-replicated."""
    half = size // 2
    padded = np.pad(np.asarray(data, dtype=np.float64), half, mode='edge')
    height, width = np.shape(data)
    out = np.empty((height, width))
    for y in range(height):
        for x in range(width):
            out[y, x] = padded[y:y + size, x:x + size].mean()
    return out
