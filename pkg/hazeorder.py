#!/usr/bin/env python3
"""Command line interface for hazeorder.

Subcommands:
    dehaze   Remove haze from an image (or every image in a directory)
    synth    Haze a clear image with a depth map
    eval     Full-reference metrics between restored and ground-truth images
    analyze  Depth-order validation: row profile, Spearman rho, epsilon curve

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error.
"""

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import pandas as pd
from dotenv import find_dotenv, load_dotenv

from config import LOG_LEVELS, WEIGHT_FUNCTIONS, AppConfig, DehazeConfig, load_config, setup_logging
from imaging.codecs import is_image_file, read_depth, read_image, write_image, write_map
from imaging.core import AtmosphericLight, PlanarImage
from services.analysis import (
    DEFAULT_EPSILON_GRID,
    depth_order_correlation,
    epsilon_sweep,
    hazy_depth_order,
    plot_row_profile,
    row_profile,
)
from services.batch import run_batch
from services.metrics import METRIC_NAMES, evaluate
from services.pipeline import compare_weight_functions, dehaze
from services.synthesis import SynthParams, synthesize_haze
from utils.reports import (
    ANALYZE_COLUMNS,
    EPSILON_COLUMNS,
    EVAL_COLUMNS,
    PROFILE_COLUMNS,
    RUN_COLUMNS,
    STATUS_COLUMN,
    append_rows,
    epsilon_rows,
    profile_rows,
    write_table,
)
from utils.validation import ConfigError, ImageIOError, ValidationError, parse_airlight, validate_positive

logger = logging.getLogger("hazeorder")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def _airlight_arg(text: str):
    try:
        return parse_airlight(text)
    except ValidationError as e:
        raise argparse.ArgumentTypeError(str(e))


def _metrics_arg(text: str) -> List[str]:
    names = [n.strip().lower() for n in text.split(",") if n.strip()]
    unknown = [n for n in names if n not in METRIC_NAMES]
    if not names or unknown:
        raise argparse.ArgumentTypeError(f"metrics must be a subset of {','.join(METRIC_NAMES)}, got '{text}'")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hazeorder", description="Depth-order guided single image dehazing")
    parser.add_argument("--log-level", choices=LOG_LEVELS, help="Logging level (default: from config)")
    parser.add_argument("--config", type=Path, help="JSON configuration file (default: $HAZEORDER_CONFIG or ./hazeorder.json)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dehaze", help="Dehaze an image or a directory of images")
    p.add_argument("input", type=Path, help="Hazy image, or a directory of images")
    p.add_argument("-o", "--output", type=Path, required=True, help="Output image (or directory in batch mode)")
    p.add_argument("--r", type=int, help="Patch size for depth order extraction (odd, default 35)")
    p.add_argument("--epsilon", type=float, help="Fraction of pixels allowed to reach the boundary (default 0.02)")
    p.add_argument("--weight-fn", choices=WEIGHT_FUNCTIONS, help="Weight function (default phi2)")
    p.add_argument("--no-clahe", action="store_true", help="Skip the CLAHE post-step")
    p.add_argument("--airlight", type=_airlight_arg, help="Override the airlight, R,G,B in (0, 1]")
    p.add_argument("--theta-hat-scale", type=float, help="Use theta_hat = S * max theta_r instead of the optimized value")
    p.add_argument("--save-transmission", type=Path, help="Write the refined transmission map as 8-bit gray")
    p.add_argument("--save-theta", type=Path, help="Write the theta_r map as 8-bit gray")
    p.add_argument("--trace", type=Path, help="Append a run report row to this CSV")
    p.add_argument("--gt", type=Path, help="Ground-truth clear image (or directory) for metrics in the run report")
    p.add_argument("--compare-weights", action="store_true", help="Also write <stem>_phi1/_phi2/_phi3 outputs")
    p.add_argument("--threads", type=int, help="Batch worker threads (0 = one per CPU)")
    p.set_defaults(handler=cmd_dehaze)

    p = sub.add_parser("synth", help="Synthesize a hazy image from a clear image and depth")
    p.add_argument("clear", type=Path, help="Clear image")
    p.add_argument("--depth", type=Path, required=True, help="Depth map (16-bit PNG or PFM)")
    p.add_argument("--beta", type=float, default=1.0, help="Scattering coefficient (> 0, default 1.0)")
    p.add_argument("--airlight", type=_airlight_arg, default=(1.0, 1.0, 1.0), help="Airlight R,G,B (default 1,1,1)")
    p.add_argument("--depth-scale", type=float, help="Depth units at 16-bit value 65535 (default 10)")
    p.add_argument("-o", "--output", type=Path, required=True, help="Output hazy image")
    p.add_argument("--save-t", type=Path, help="Write the true transmission map as 8-bit gray")
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("eval", help="Compare restored images with ground truth")
    p.add_argument("restored", type=Path, help="Restored image or directory")
    p.add_argument("ground_truth", type=Path, help="Ground-truth image or directory")
    p.add_argument("--metrics", type=_metrics_arg, default=list(METRIC_NAMES), help="Comma separated: psnr,ssim,ciede2000")
    p.add_argument("--csv", type=Path, help="Append metric rows to this CSV")
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("analyze", help="Validate the extracted depth order")
    p.add_argument("hazy", type=Path, help="Hazy image")
    ref = p.add_mutually_exclusive_group()
    ref.add_argument("--gt-depth", type=Path, help="Ground-truth depth map")
    ref.add_argument("--gt-clear", type=Path, help="Ground-truth clear image")
    p.add_argument("--r", type=int, help="Patch size (odd, default 35)")
    p.add_argument("--airlight", type=_airlight_arg, help="Override the airlight")
    p.add_argument("--depth-scale", type=float, help="Depth units at 16-bit value 65535 (default 10)")
    p.add_argument("--profile", type=Path, help="Write the row profile CSV (row_index 0 = bottom)")
    p.add_argument("--rho", action="store_true", help="Print rho only")
    p.add_argument("--report", type=Path, help="Append the depth-order report row to this CSV")
    p.add_argument("--full-rank", action="store_true", help="Rank every pixel instead of a subsample")
    p.add_argument("--plot", type=Path, help="Render the row profile to an image")
    p.add_argument("--epsilon-curve", type=Path, help="Write theta_eps over epsilon in [0, 0.1] to this CSV")
    p.set_defaults(handler=cmd_analyze)

    return parser


def _dehaze_config(args: argparse.Namespace, app: AppConfig) -> DehazeConfig:
    """App defaults with command line overrides; raises ConfigError."""
    overrides = {
        'r': getattr(args, 'r', None),
        'epsilon': getattr(args, 'epsilon', None),
        'weight_fn': getattr(args, 'weight_fn', None),
        'airlight_override': getattr(args, 'airlight', None),
        'theta_hat_scale': getattr(args, 'theta_hat_scale', None),
        'depth_scale': getattr(args, 'depth_scale', None),
    }
    if getattr(args, 'no_clahe', False):
        overrides['apply_clahe'] = False
    return app.dehaze.with_overrides(**overrides)


# ---------------------------------------------------------------------------
# dehaze
# ---------------------------------------------------------------------------

def _run_row(input_path: Path, output_path: Path, wall_ms: float, cfg: DehazeConfig, trace) -> Dict[str, object]:
    return {
        'input': str(input_path),
        'output': str(output_path),
        'wall_ms': round(wall_ms, 3),
        'r': cfg.r,
        'epsilon': cfg.epsilon,
        'weight_fn': cfg.weight_fn,
        'theta_hat': trace.theta_hat_clear,
        'overflow_fraction': trace.overflow_fraction,
    }


def _add_metrics(row: Dict[str, object], restored: PlanarImage, gt_path: Optional[Path]) -> None:
    if gt_path is None:
        return
    report = evaluate(restored, read_image(gt_path))
    row.update({'psnr_db': report.psnr, 'ssim': report.ssim, 'ciede2000': report.ciede2000})


def _dehaze_one(
    input_path: Path,
    output_path: Path,
    cfg: DehazeConfig,
    gt_path: Optional[Path] = None,
    save_transmission: Optional[Path] = None,
    save_theta: Optional[Path] = None,
    compare_weights: bool = False,
) -> Dict[str, object]:
    hazy = read_image(input_path)

    start = time.perf_counter()
    result, trace = dehaze(hazy, cfg)
    wall_ms = (time.perf_counter() - start) * 1000.0

    write_image(result, output_path)
    if save_transmission:
        write_map(trace.t_refined, save_transmission)
    if save_theta:
        write_map(trace.theta_r_haze, save_theta)
    if compare_weights:
        for fn, (image, _) in compare_weight_functions(hazy, cfg).items():
            write_image(image, output_path.with_name(f"{output_path.stem}_{fn}.png"))

    row = _run_row(input_path, output_path, wall_ms, cfg, trace)
    _add_metrics(row, result, gt_path)
    logger.info(f"{input_path} -> {output_path} in {wall_ms:.1f} ms")
    return row


def _dehaze_batch(args: argparse.Namespace, cfg: DehazeConfig, workers: int) -> int:
    inputs = sorted(p for p in args.input.iterdir() if is_image_file(p))
    if not inputs:
        logger.error(f"No images found in {args.input}")
        return EXIT_FAILURE
    if args.save_transmission or args.save_theta:
        logger.warning("--save-transmission/--save-theta apply to single images only; ignored in batch mode")
    if args.output.exists() and not args.output.is_dir():
        raise ConfigError(f"Batch output {args.output} must be a directory")
    args.output.mkdir(parents=True, exist_ok=True)

    def task(path: Path) -> Dict[str, object]:
        gt = None
        if args.gt is not None:
            gt = args.gt / path.name
            if not gt.exists():
                logger.warning(f"No ground truth for {path.name} in {args.gt}")
                gt = None
        output = args.output / f"{path.stem}.png"
        return _dehaze_one(path, output, cfg, gt, compare_weights=args.compare_weights)

    outcomes = run_batch(inputs, task, workers)

    rows = []
    for outcome in outcomes:
        if outcome.ok:
            row = dict(outcome.result)
            row[STATUS_COLUMN] = 'ok'
        else:
            row = {'input': str(outcome.item), 'r': cfg.r, 'epsilon': cfg.epsilon,
                   'weight_fn': cfg.weight_fn, STATUS_COLUMN: f"error: {outcome.error}"}
        rows.append(row)

    if args.trace:
        append_rows(args.trace, rows, RUN_COLUMNS + [STATUS_COLUMN])

    succeeded = sum(1 for o in outcomes if o.ok)
    print(f"Dehazed {succeeded}/{len(outcomes)} images into {args.output}")
    return EXIT_OK if succeeded else EXIT_FAILURE


def cmd_dehaze(args: argparse.Namespace, app: AppConfig) -> int:
    cfg = _dehaze_config(args, app)
    if args.threads is not None:
        app = replace(app, threads=args.threads)
        if app.threads < 0:
            raise ConfigError("--threads must be >= 0")

    if args.input.is_dir():
        return _dehaze_batch(args, cfg, app.worker_count())

    row = _dehaze_one(
        args.input, args.output, cfg, args.gt,
        args.save_transmission, args.save_theta, args.compare_weights,
    )
    if args.trace:
        append_rows(args.trace, [row], RUN_COLUMNS)
    print(f"Wrote {args.output} (theta_hat={row['theta_hat']:.4f}, overflow={row['overflow_fraction']:.2%})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace, app: AppConfig) -> int:
    beta = validate_positive(args.beta, "beta")
    depth_scale = args.depth_scale if args.depth_scale is not None else app.dehaze.depth_scale
    depth_scale = validate_positive(depth_scale, "depth_scale")
    clear = read_image(args.clear)
    depth = read_depth(args.depth, depth_scale)
    params = SynthParams(AtmosphericLight(args.airlight), depth, beta)

    hazy = synthesize_haze(clear, params)
    write_image(hazy, args.output)
    if args.save_t:
        write_map(params.transmission(), args.save_t)

    print(f"Wrote {args.output} (beta={beta})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _eval_pairs(restored: Path, ground_truth: Path) -> List[tuple]:
    if restored.is_dir() != ground_truth.is_dir():
        raise ConfigError("restored and ground_truth must both be files or both be directories")
    if not restored.is_dir():
        return [(restored.name, restored, ground_truth)]

    pairs = []
    unmatched = []
    for path in sorted(p for p in restored.iterdir() if is_image_file(p)):
        gt = ground_truth / path.name
        if gt.exists():
            pairs.append((path.name, path, gt))
        else:
            unmatched.append(path.name)
    if unmatched:
        logger.warning(f"Skipping {len(unmatched)} unmatched file(s): {', '.join(unmatched)}")
    return pairs


def cmd_eval(args: argparse.Namespace, app: AppConfig) -> int:
    pairs = _eval_pairs(args.restored, args.ground_truth)
    batch = args.restored.is_dir()

    rows = []
    for name, restored_path, gt_path in pairs:
        try:
            report = evaluate(read_image(restored_path), read_image(gt_path), args.metrics)
        except (ValidationError, ImageIOError) as e:
            if not batch:
                raise
            logger.warning(f"Skipping {name}: {e}")
            continue
        rows.append(report.to_row(name))

    if not rows:
        logger.error("No image pairs could be evaluated")
        return EXIT_FAILURE

    print(pd.DataFrame(rows, columns=EVAL_COLUMNS).to_string(index=False))
    if args.csv:
        append_rows(args.csv, rows, EVAL_COLUMNS)
    return EXIT_OK


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------

def cmd_analyze(args: argparse.Namespace, app: AppConfig) -> int:
    cfg = _dehaze_config(args, app)
    hazy = read_image(args.hazy)
    image_id = args.hazy.stem

    reference = None
    if args.gt_depth:
        reference = read_depth(args.gt_depth, cfg.depth_scale)
    elif args.gt_clear:
        reference = read_image(args.gt_clear)

    if reference is not None:
        max_samples = None if (args.full_rank or app.full_rank) else app.max_rank_samples
        report = depth_order_correlation(hazy, reference, cfg, max_samples)
        profile = report.row_profile
        if args.rho:
            print(f"{report.rho:.6f}")
        else:
            print(pd.DataFrame([report.to_row(image_id)], columns=ANALYZE_COLUMNS).to_csv(index=False), end="")
        if args.report:
            append_rows(args.report, [report.to_row(image_id)], ANALYZE_COLUMNS)
    else:
        if args.rho:
            logger.warning("--rho needs --gt-depth or --gt-clear; printing the row profile only")
        _, theta_r = hazy_depth_order(hazy, cfg)
        profile = row_profile(theta_r)
        if not args.profile:
            print(pd.DataFrame(profile_rows(profile), columns=PROFILE_COLUMNS).to_csv(index=False), end="")

    if args.profile:
        write_table(args.profile, profile_rows(profile), PROFILE_COLUMNS)
    if args.plot:
        plot_row_profile(profile, args.plot, title=f"{image_id} (r={cfg.r})")
    if args.epsilon_curve:
        curve = epsilon_sweep(hazy, cfg, DEFAULT_EPSILON_GRID)
        write_table(args.epsilon_curve, epsilon_rows(DEFAULT_EPSILON_GRID, curve), EPSILON_COLUMNS)

    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, load configuration and run one subcommand."""
    load_dotenv(find_dotenv(usecwd=True))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE

    try:
        app = load_config(args.config)
    except ConfigError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.log_level:
        app.log_level = args.log_level
    setup_logging(app)

    try:
        return args.handler(args, app)
    except ConfigError as e:
        logger.error(f"Invalid arguments: {e}")
        return EXIT_USAGE
    except (ValidationError, ImageIOError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception(f"Unexpected error in {args.command}: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
