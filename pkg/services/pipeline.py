"""Depth-order guided dehazing pipeline.

The color difference theta between each pixel and the airlight shrinks
with transmission, so its local maximum theta_r orders the scene by depth
(small theta_r = far). The pipeline raises theta_r toward a global target
theta_hat with a weight that increases with theta_r. That transform is
monotone, so the clear-scene theta_r keeps the hazy depth order, and
transmission follows as theta_r(hazy) / theta_r(clear). theta_hat is
chosen so that a fraction epsilon of pixels reaches the [0, 1] boundary
after recovery.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from config import DehazeConfig
from imaging.core import AtmosphericLight, PlanarImage, ScalarMap, luma
from services.airlight import resolve_airlight
from services.filters import clahe, guided_filter, max_filter
from utils.validation import (
    ConfigError,
    StructuralError,
    ValidationError,
    validate_fraction,
    validate_same_shape,
    validate_window,
)

logger = logging.getLogger(__name__)

# Below this, a denominator is treated as zero
TINY = 1e-9
NORMALIZE_TINY = 1e-12

WEIGHT_FUNCTIONS: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "phi1": lambda z: z * (2.0 - z),
    "phi2": lambda z: z,
    "phi3": lambda z: z * z,
}


@dataclass(frozen=True, eq=False)
class PipelineTrace:
    """Intermediate maps and global parameters of one dehaze run."""

    airlight: AtmosphericLight
    theta_haze: ScalarMap
    theta_r_haze: ScalarMap
    z: ScalarMap
    w: ScalarMap
    t_boundary: ScalarMap
    theta_eps: float
    pool_size: int
    theta_hat_clear: float
    theta_r_clear: ScalarMap
    t_raw: ScalarMap
    t_refined: ScalarMap
    overflow_fraction: float
    timings_ms: Dict[str, float] = field(default_factory=dict)

    @property
    def pixel_count(self) -> int:
        return self.theta_haze.data.size


def color_difference(img: PlanarImage, airlight: AtmosphericLight) -> ScalarMap:
    """
    Euclidean distance between each pixel and the airlight.

    For gray images this is |I - A|.

    Raises:
        StructuralError: If channel counts differ
    """
    if img.channels != airlight.channels:
        raise StructuralError(
            f"Image has {img.channels} channels but airlight has {airlight.channels}"
        )
    diff = img.data - airlight.planar()
    if img.channels == 1:
        return ScalarMap(np.abs(diff[0]))
    return ScalarMap(np.sqrt(np.sum(diff * diff, axis=0)))


def extract_depth_order(theta: ScalarMap, r: int) -> ScalarMap:
    """Local maximum of theta over r x r windows; smaller values lie deeper."""
    validate_window(r, "patch size r", minimum=3)
    return max_filter(theta, r)


def normalize(theta_r: ScalarMap) -> ScalarMap:
    """Min-max normalize to [0, 1]; a constant map normalizes to zeros."""
    data = theta_r.data
    low, high = float(data.min()), float(data.max())
    if high - low < NORMALIZE_TINY:
        return ScalarMap(np.zeros_like(data))
    return ScalarMap(np.clip((data - low) / (high - low), 0.0, 1.0))


def weight(z: ScalarMap, fn: str = "phi2") -> ScalarMap:
    """
    Apply a monotonically increasing weight function on [0, 1].

    phi1(z) = z(2 - z), phi2(z) = z, phi3(z) = z^2.

    Raises:
        ConfigError: If fn is not one of phi1, phi2, phi3
    """
    try:
        func = WEIGHT_FUNCTIONS[fn]
    except KeyError:
        raise ConfigError(f"Unknown weight function {fn!r}, expected one of {sorted(WEIGHT_FUNCTIONS)}")
    return ScalarMap(np.clip(func(np.clip(z.data, 0.0, 1.0)), 0.0, 1.0))


def boundary_transmission(hazy: PlanarImage, airlight: AtmosphericLight) -> ScalarMap:
    """
    Smallest transmission at which each pixel's recovery stays inside [0, 1].

    Per channel the recovered value hits 0 at t = (H - A) / (0 - A) and 1 at
    t = (H - A) / (1 - A); the larger of the two, maximized over channels and
    clamped to [0, 1], is the boundary.
    """
    a = airlight.matching(hazy.channels).for_boundary().reshape(-1, 1, 1)
    diff = hazy.data - a
    bound = np.maximum(diff / (0.0 - a), diff / (1.0 - a))
    return ScalarMap(np.clip(bound.max(axis=0), 0.0, 1.0))


def boundary_theta(
    theta_r: ScalarMap,
    z: ScalarMap,
    t_b: ScalarMap,
    fn: str = "phi2",
) -> np.ma.MaskedArray:
    """
    The theta_hat at which each pixel reaches the [0, 1] boundary.

    theta_b = theta_r / (t_b * phi(z)) * (1 - t_b + t_b * phi(z)). Pixels with
    t_b * phi(z) < 1e-9 can never reach the boundary; they are masked and
    carry no constraint.

    Returns:
        Masked (H, W) array; masked entries are excluded from sortp
    """
    validate_same_shape(theta_r.shape, z.shape, "theta_r and z")
    validate_same_shape(theta_r.shape, t_b.shape, "theta_r and t_b")

    phi = weight(z, fn).data
    denom = t_b.data * phi
    excluded = denom < TINY
    safe = np.where(excluded, 1.0, denom)
    values = theta_r.data / safe * (1.0 - t_b.data + denom)
    return np.ma.masked_array(values, mask=excluded | ~np.isfinite(values))


def sortp(values, epsilon: float, default: Optional[float] = None) -> float:
    """
    The epsilon-quantile of the finite values, linear between closest ranks.

    Args:
        values: Array-like or masked array; masked and non-finite entries drop out
        epsilon: Quantile in [0, 1]
        default: Returned when no finite value remains

    Raises:
        ValidationError: If the pool is empty and no default is given
    """
    epsilon = validate_fraction(epsilon, "epsilon")
    pool = np.ma.asarray(values).compressed() if np.ma.isMaskedArray(values) else np.asarray(values, dtype=np.float64).ravel()
    pool = pool[np.isfinite(pool)]
    if pool.size == 0:
        if default is None:
            raise ValidationError("sortp needs at least one finite value")
        logger.debug("Empty boundary pool, falling back to default theta")
        return float(default)
    return float(np.quantile(pool, epsilon))


def global_theta_hat(theta_eps: float, theta_r: ScalarMap) -> float:
    """theta_hat = max(theta_eps, max theta_r); never below the hazy maximum."""
    return max(float(theta_eps), float(theta_r.data.max()))


def rough_theta_hat(theta_r: ScalarMap, scale: float) -> float:
    """theta_hat = scale * max theta_r; the fixed setting used to compare weight functions."""
    if scale < 1.0:
        raise ConfigError(f"theta_hat scale must be >= 1, got {scale}")
    return float(scale) * float(theta_r.data.max())


def transform_theta(theta_r: ScalarMap, w: ScalarMap, theta_hat: float) -> ScalarMap:
    """
    Interpolate each pixel between its hazy theta_r (w = 0) and theta_hat (w = 1).

    Written as theta_r + w * (theta_hat - theta_r) so the result never drops
    below theta_r when theta_hat >= theta_r.
    """
    validate_same_shape(theta_r.shape, w.shape, "theta_r and w")
    return ScalarMap(theta_r.data + w.data * (theta_hat - theta_r.data))


def enforce_order(theta_r: ScalarMap, theta_clear: ScalarMap) -> ScalarMap:
    """
    Running maximum of theta_clear along ascending theta_r.

    The transform is monotone in exact arithmetic; this removes rounding
    inversions of an ulp or so. Equal theta_r values keep equal outputs.
    """
    order = np.argsort(theta_r.samples, kind='stable')
    flat = theta_clear.samples[order]
    fixed = np.empty_like(flat)
    fixed[order] = np.maximum.accumulate(flat)
    return ScalarMap(fixed.reshape(theta_clear.shape))


def order_preserving_theta(theta_r: ScalarMap, fn: str, theta_hat: float) -> Tuple[ScalarMap, ScalarMap, ScalarMap]:
    """normalize -> weight -> transform -> enforce_order; returns (z, w, theta_r_clear)."""
    z = normalize(theta_r)
    w = weight(z, fn)
    return z, w, enforce_order(theta_r, transform_theta(theta_r, w, theta_hat))


def transmission(theta_haze_r: ScalarMap, theta_clear_r: ScalarMap, t_floor: float = 0.01) -> ScalarMap:
    """
    t = theta_haze / theta_clear, clamped to [t_floor, 1].

    Pixels whose clear theta is below 1e-9 are indistinguishable from the
    airlight and get t_floor.
    """
    validate_same_shape(theta_haze_r.shape, theta_clear_r.shape, "hazy and clear theta_r")
    clear = theta_clear_r.data
    usable = clear >= TINY
    t = np.where(usable, theta_haze_r.data / np.where(usable, clear, 1.0), t_floor)
    return ScalarMap(np.clip(t, t_floor, 1.0))


def recover_unclamped(hazy: PlanarImage, t: ScalarMap, airlight: AtmosphericLight) -> np.ndarray:
    """J = (H - A) / t + A as a raw planar array, before clamping."""
    validate_same_shape(hazy.shape, t.shape, "hazy image and transmission")
    a = airlight.matching(hazy.channels).planar()
    return (hazy.data - a) / t.data[np.newaxis] + a


def recover(hazy: PlanarImage, t: ScalarMap, airlight: AtmosphericLight) -> PlanarImage:
    """Invert the scattering model and clamp to [0, 1]."""
    return PlanarImage.clamped(recover_unclamped(hazy, t, airlight))


def overflow_fraction(hazy: PlanarImage, t: ScalarMap, airlight: AtmosphericLight) -> float:
    """Share of pixels whose unclamped recovery leaves [0, 1] in any channel."""
    raw = recover_unclamped(hazy, t, airlight)
    outside = ((raw < 0.0) | (raw > 1.0)).any(axis=0)
    return float(outside.mean())


class _StageTimer:
    def __init__(self):
        self.timings: Dict[str, float] = {}
        self._last = time.perf_counter()

    def mark(self, stage: str) -> None:
        now = time.perf_counter()
        self.timings[stage] = (now - self._last) * 1000.0
        self._last = now


def dehaze(hazy: PlanarImage, cfg: Optional[DehazeConfig] = None) -> Tuple[PlanarImage, PipelineTrace]:
    """
    Run the full dehazing procedure on one image.

    Steps: airlight, color difference, depth order, normalization and
    weighting, boundary-constrained theta_hat, transformed theta, raw
    transmission, guided refinement against the hazy luma, recovery, and
    optionally CLAHE.

    Args:
        hazy: Hazy input, at least r x r pixels
        cfg: Pipeline parameters (defaults when None)

    Returns:
        (dehazed image, trace of intermediate maps)

    Raises:
        StructuralError: If the image is smaller than r x r
        ConfigError: If cfg is invalid
    """
    cfg = (cfg or DehazeConfig()).checked()
    if hazy.height < cfg.r or hazy.width < cfg.r:
        raise StructuralError(f"Image {hazy.width}x{hazy.height} is smaller than patch {cfg.r}x{cfg.r}")

    timer = _StageTimer()

    airlight = resolve_airlight(hazy, cfg.airlight_override, cfg.airlight_patch, cfg.airlight_top_fraction)
    timer.mark("airlight")

    theta = color_difference(hazy, airlight)
    theta_r = extract_depth_order(theta, cfg.r)
    timer.mark("depth_order")

    z = normalize(theta_r)
    t_b = boundary_transmission(hazy, airlight)
    theta_b = boundary_theta(theta_r, z, t_b, cfg.weight_fn)
    pool_size = int(theta_b.count())
    theta_max = float(theta_r.data.max())
    theta_eps = sortp(theta_b, cfg.epsilon, default=theta_max)
    if cfg.theta_hat_scale is not None:
        theta_hat = rough_theta_hat(theta_r, cfg.theta_hat_scale)
    else:
        theta_hat = global_theta_hat(theta_eps, theta_r)
    timer.mark("global_optimization")

    z, w, theta_clear = order_preserving_theta(theta_r, cfg.weight_fn, theta_hat)
    t_raw = transmission(theta_r, theta_clear, cfg.t_floor)
    timer.mark("transmission")

    refined = guided_filter(t_raw, luma(hazy), cfg.guided_radius, cfg.guided_eps)
    t_refined = ScalarMap(np.clip(refined.data, cfg.t_floor, 1.0))
    timer.mark("refinement")

    overflow = overflow_fraction(hazy, t_refined, airlight)
    result = recover(hazy, t_refined, airlight)
    timer.mark("recovery")

    if cfg.apply_clahe:
        result = clahe(result, cfg.clahe_tiles, cfg.clahe_clip)
        timer.mark("clahe")

    logger.info(
        f"Dehazed {hazy.width}x{hazy.height}: A={airlight}, theta_hat={theta_hat:.4f} "
        f"(theta_eps={theta_eps:.4f}, max theta_r={theta_max:.4f}), overflow={overflow:.2%}"
    )
    logger.debug(f"Stage timings (ms): {timer.timings}")

    trace = PipelineTrace(
        airlight=airlight,
        theta_haze=theta,
        theta_r_haze=theta_r,
        z=z,
        w=w,
        t_boundary=t_b,
        theta_eps=theta_eps,
        pool_size=pool_size,
        theta_hat_clear=theta_hat,
        theta_r_clear=theta_clear,
        t_raw=t_raw,
        t_refined=t_refined,
        overflow_fraction=overflow,
        timings_ms=timer.timings,
    )
    return result, trace


def compare_weight_functions(hazy: PlanarImage, cfg: Optional[DehazeConfig] = None) -> Dict[str, Tuple[PlanarImage, PipelineTrace]]:
    """Run dehaze once per weight function with otherwise identical settings."""
    cfg = cfg or DehazeConfig()
    return {fn: dehaze(hazy, cfg.with_overrides(weight_fn=fn)) for fn in WEIGHT_FUNCTIONS}
