"""Services package for the hazeorder dehazing system."""

from .airlight import dark_channel, estimate_airlight, resolve_airlight
from .analysis import DepthOrderReport, depth_order_correlation, epsilon_curve, row_profile, spearman_rho
from .metrics import MetricReport, ciede2000, evaluate, psnr, ssim
from .pipeline import PipelineTrace, compare_weight_functions, dehaze
from .synthesis import SynthParams, synthesize_haze

__all__ = [
    'DepthOrderReport',
    'MetricReport',
    'PipelineTrace',
    'SynthParams',
    'ciede2000',
    'compare_weight_functions',
    'dark_channel',
    'dehaze',
    'depth_order_correlation',
    'epsilon_curve',
    'estimate_airlight',
    'evaluate',
    'psnr',
    'resolve_airlight',
    'row_profile',
    'spearman_rho',
    'ssim',
    'synthesize_haze',
]
