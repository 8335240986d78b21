"""Command-line front end wiring the library into reproducible pipelines.

Subcommands: simulate, fit, score, roc, map, tune. Every subcommand takes
--seed (default 42) and is deterministic given it, independent of
--threads. Randomness per subcommand is drawn in a fixed documented order:

    simulate   pervasive noise with seed, scrambling with seed + 1
    fit        training-pixel draw with seed
    tune       training draw with seed, validation draw with seed + 1

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 numerical failure,
4 degenerate labels.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import io_formats
from .detectors import (
    DETECTOR_BETAS,
    DetectorConfig,
    fit,
    score_pixels,
    with_params,
)
from .kernels import KernelSpec
from .linalg import SingularCovarianceError
from .metrics import (
    DegenerateLabelsError,
    apply_threshold,
    roc_curve,
    threshold_at_quantile,
    threshold_at_tpr,
)
from .raster import flatten, sample_pixels, unflatten
from .simulate import pervasive_noise, scramble_anomalies
from .tune import anchor_sigma, grid_search, split_train_val

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_IO = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_DEGENERATE = 4


def _positive_or_auto(text: str):
    if text == "auto":
        return None
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError("must be positive or 'auto'")
    return value


def _resolve_threads(args) -> int:
    env = os.environ.get("ACD_THREADS")
    if env is not None:
        return max(1, int(env))
    if args.threads is not None:
        return max(1, args.threads)
    return os.cpu_count() or 1


def _read_pair(x_path, y_path):
    cube_x = io_formats.read_raster(x_path)
    cube_y = io_formats.read_raster(y_path)
    if (cube_x.height, cube_x.width) != (cube_y.height, cube_y.width):
        raise ValueError("unaligned pair: rasters differ in height/width")
    return cube_x, cube_y


def _read_labels(path, height, width) -> np.ndarray:
    cube = io_formats.read_raster(path)
    if (cube.height, cube.width) != (height, width):
        raise ValueError("label raster does not match image dimensions")
    return io_formats.cube_to_labels(cube)


def _build_config(args, *, require_nu: bool) -> DetectorConfig:
    beta_x, beta_y = DETECTOR_BETAS[args.detector]
    nu = args.nu
    if args.dist == "ec" and nu is None:
        if require_nu:
            raise ValueError("ec distribution requires --nu")
        nu = 1.0  # placeholder; the tuning grid supplies nu
    kernel = None
    if args.mode == "kernel":
        if args.kernel == "linear":
            kernel = KernelSpec("linear")
        else:
            # sigma may still be None here ('auto'); resolved against the
            # training draw before fitting.
            kernel = KernelSpec(args.kernel, args.sigma if args.sigma else 1.0)
    return DetectorConfig(
        beta_x=beta_x,
        beta_y=beta_y,
        distribution=args.dist,
        nu=nu,
        mode=args.mode,
        kernel=kernel,
        lam=args.lam,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    if not 0.0 < args.scramble_frac <= 1.0:
        raise ValueError("--scramble-frac must be in (0, 1]")
    cube = io_formats.read_raster(args.input)
    noisy = pervasive_noise(cube, args.noise_std, args.seed)
    result = scramble_anomalies(noisy, args.scramble_frac, args.seed + 1)
    io_formats.write_raster(result.second_image, args.out)
    io_formats.write_raster(
        io_formats.labels_to_cube(result.labels, cube.height, cube.width), args.labels
    )
    return EXIT_OK


def _training_draw(x, y, labels, n_train, seed):
    n_total = x.shape[0]
    if labels is None:
        candidates = np.arange(n_total)
    else:
        candidates = np.nonzero(labels == 0)[0]
    if n_train > candidates.size:
        raise ValueError(
            f"requested {n_train} training samples, only {candidates.size} available"
        )
    idx = candidates[sample_pixels(candidates.size, n_train, seed)]
    return x[idx], y[idx]


def cmd_fit(args) -> int:
    cube_x, cube_y = _read_pair(args.x, args.y)
    x, y = flatten(cube_x), flatten(cube_y)
    labels = None
    if args.train_labels:
        labels = _read_labels(args.train_labels, cube_x.height, cube_x.width)
    x_tr, y_tr = _training_draw(x, y, labels, args.train_samples, args.seed)

    config = _build_config(args, require_nu=True)
    if config.mode == "kernel" and config.kernel.kind != "linear" and args.sigma is None:
        sigma = anchor_sigma(x_tr, y_tr)
        config = with_params(config, sigma=sigma)
        print(f"sigma auto -> {sigma:.17g}")
    det = fit(x_tr, y_tr, config)
    io_formats.save_model(det, args.model_out)
    print(f"model written to {args.model_out}")
    return EXIT_OK


def cmd_score(args) -> int:
    det = io_formats.load_model(args.model)
    cube_x, cube_y = _read_pair(args.x, args.y)
    scores = score_pixels(det, flatten(cube_x), flatten(cube_y), threads=args.threads)
    cube = unflatten(scores[:, None], cube_x.height, cube_x.width)
    io_formats.write_raster(cube, args.out)
    return EXIT_OK


def cmd_roc(args) -> int:
    scores_cube = io_formats.read_raster(args.scores)
    if scores_cube.bands != 1:
        raise ValueError("scores raster must have exactly one band")
    labels = _read_labels(args.labels, scores_cube.height, scores_cube.width)
    curve = roc_curve(scores_cube.data.ravel(), labels)
    io_formats.write_roc_csv(curve, args.out)
    print(f"AUC {curve.auc:.17g}")
    return EXIT_OK


def cmd_map(args) -> int:
    scores_cube = io_formats.read_raster(args.scores)
    if scores_cube.bands != 1:
        raise ValueError("scores raster must have exactly one band")
    scores = scores_cube.data.ravel()
    if args.threshold is not None:
        t = args.threshold
    elif args.tpr_rate is not None:
        if not args.labels:
            raise ValueError("--tpr-rate requires --labels")
        labels = _read_labels(args.labels, scores_cube.height, scores_cube.width)
        t = threshold_at_tpr(scores, labels, args.tpr_rate)
    else:
        t = threshold_at_quantile(scores, args.quantile)
    binary = apply_threshold(scores, t)
    io_formats.write_pgm(
        binary.reshape(scores_cube.height, scores_cube.width), args.out, mode="binary"
    )
    print(f"threshold {t:.17g}")
    return EXIT_OK


def cmd_tune(args) -> int:
    cube_x, cube_y = _read_pair(args.x, args.y)
    x, y = flatten(cube_x), flatten(cube_y)
    labels = _read_labels(args.labels, cube_x.height, cube_x.width)
    config = _build_config(args, require_nu=False)

    result = grid_search(
        x, y, labels, config, None, args.n_train, args.n_val, args.seed
    )
    best = result.best_params
    print(
        f"best nu={best.nu} sigma={best.sigma} lambda={best.lam} "
        f"val_auc={result.best_val_auc:.17g}"
    )
    if args.trace_out:
        io_formats.write_trace_csv(result.trace, args.trace_out)
    if args.model_out:
        train_idx, _ = split_train_val(labels, args.n_train, args.n_val, args.seed)
        best_config = with_params(config, nu=best.nu, sigma=best.sigma, lam=best.lam)
        det = fit(x[train_idx], y[train_idx], best_config)
        io_formats.save_model(det, args.model_out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="random seed (default 42)")
    common.add_argument(
        "--threads", type=int, default=None,
        help="scoring threads (default: all cores; ACD_THREADS overrides)",
    )

    detector_common = argparse.ArgumentParser(add_help=False)
    detector_common.add_argument(
        "--detector", choices=sorted(DETECTOR_BETAS), default="hacd"
    )
    detector_common.add_argument("--dist", choices=["gaussian", "ec"], default="gaussian")
    detector_common.add_argument("--nu", type=float, default=None,
                                 help="EC shape parameter")
    detector_common.add_argument("--mode", choices=["linear", "kernel"], default="linear")
    detector_common.add_argument("--kernel", choices=["linear", "rbf", "sam"],
                                 default="rbf")
    detector_common.add_argument(
        "--sigma", type=_positive_or_auto, default="auto", dest="sigma",
        help="kernel lengthscale, or 'auto' for the mean-distance heuristic",
    )
    detector_common.add_argument(
        "--lambda", type=_positive_or_auto, default="auto", dest="lam",
        help="kernel regularizer, or 'auto' for 1e-5/n",
    )

    parser = argparse.ArgumentParser(
        prog="acdkit",
        description="Anomalous change detection on co-registered raster pairs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common],
                       help="simulate a second image with pervasive noise and scrambled anomalies")
    p.add_argument("--input", required=True)
    p.add_argument("--noise-std", type=float, default=0.1)
    p.add_argument("--scramble-frac", type=float, default=0.01)
    p.add_argument("--out", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common, detector_common],
                       help="fit a detector on a raster pair")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--train-samples", type=int, default=1000)
    p.add_argument("--train-labels", default=None,
                   help="optional label raster; training draws from non-anomalous pixels")
    p.add_argument("--model-out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", parents=[common], help="score a raster pair with a model")
    p.add_argument("--model", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("roc", parents=[common], help="ROC curve and AUC from scores + labels")
    p.add_argument("--scores", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("map", parents=[common], help="binary detection map from scores")
    p.add_argument("--scores", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--threshold", type=float, default=None)
    group.add_argument("--tpr-rate", type=float, default=None,
                       help="pick the threshold detecting this fraction of labeled changes")
    group.add_argument("--quantile", type=float, default=None,
                       help="flag roughly this fraction of pixels")
    p.add_argument("--labels", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("tune", parents=[common, detector_common],
                       help="grid-search hyperparameters by validation AUC")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--n-train", type=int, default=1000)
    p.add_argument("--n-val", type=int, default=4000)
    p.add_argument("--trace-out", default=None)
    p.add_argument("--model-out", default=None)
    p.set_defaults(func=cmd_tune)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        args.threads = _resolve_threads(args)
        return args.func(args)
    except SingularCovarianceError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DegenerateLabelsError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (
        OSError,
        io_formats.RasterFormatError,
        io_formats.CorruptModelError,
        io_formats.UnsupportedVersionError,
    ) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
