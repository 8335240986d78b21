"""Grid-search hyperparameter tuning by validation AUC.

The search space covers up to three axes depending on the detector
config: the EC shape nu, the kernel lengthscale sigma, and the kernel
regularizer lambda. Default grids:

    nu      100 points, log-spaced over [1e-5, 1e10]
    sigma   60 points, log-spaced multipliers over [1e-3, 1e3] applied to
            a pairwise-distance heuristic anchor
    lambda  30 points, log-spaced over [1e-10, 10^2.5]

Training pixels are drawn from non-anomalous positions only; validation
pixels are drawn from the remainder and keep both classes. Fitting does
not depend on nu, so the search refits once per (sigma, lambda) pair and
sweeps nu over cached xi values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detectors import DetectorConfig, combine_xi, fit, with_params, xi_pixels
from .kernels import sigma_heuristic
from .metrics import DegenerateLabelsError, roc_curve
from .raster import (
    as_pixel_matrix,
    sample_pixels,
    stack_pair,
    standardize_apply,
    standardize_fit,
)

__all__ = [
    "TuneGrid",
    "GridPoint",
    "TuneResult",
    "anchor_sigma",
    "default_grid",
    "split_train_val",
    "grid_search",
]

NU_RANGE = (1e-5, 1e10, 100)
SIGMA_MULTIPLIER_RANGE = (1e-3, 1e3, 60)
LAMBDA_RANGE = (1e-10, 10.0**2.5, 30)


def _log_grid(lo: float, hi: float, num: int) -> np.ndarray:
    grid = np.logspace(np.log10(lo), np.log10(hi), num)
    grid[0], grid[-1] = lo, hi  # pin endpoints exactly
    return grid


def _check_grid_axis(values: np.ndarray, name: str) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 1:
        raise ValueError(f"{name} grid must be 1-d")
    if values.size:
        if not np.all(values > 0):
            raise ValueError(f"{name} grid entries must be strictly positive")
        if not np.all(np.diff(values) >= 0):
            raise ValueError(f"{name} grid must be sorted ascending")
    values.flags.writeable = False
    return values


@dataclass(frozen=True)
class TuneGrid:
    """Candidate values per axis; an empty axis is not tuned."""

    nu_grid: np.ndarray = field(default_factory=lambda: np.array([]))
    sigma_grid: np.ndarray = field(default_factory=lambda: np.array([]))
    lambda_grid: np.ndarray = field(default_factory=lambda: np.array([]))

    def __post_init__(self):
        object.__setattr__(self, "nu_grid", _check_grid_axis(self.nu_grid, "nu"))
        object.__setattr__(self, "sigma_grid", _check_grid_axis(self.sigma_grid, "sigma"))
        object.__setattr__(self, "lambda_grid", _check_grid_axis(self.lambda_grid, "lambda"))


@dataclass(frozen=True)
class GridPoint:
    """One parameter combination; None marks an axis that was not tuned."""

    nu: float | None = None
    sigma: float | None = None
    lam: float | None = None


@dataclass(frozen=True)
class TuneResult:
    best_params: GridPoint
    best_val_auc: float
    trace: tuple  # of (GridPoint, auc), in canonical grid order


def anchor_sigma(x_train: np.ndarray, y_train: np.ndarray, method: str = "mean") -> float:
    """Bandwidth anchor: pairwise-distance heuristic on standardized stacked rows."""
    x_train = as_pixel_matrix(x_train)
    y_train = as_pixel_matrix(y_train)
    xs = standardize_apply(x_train, standardize_fit(x_train))
    ys = standardize_apply(y_train, standardize_fit(y_train))
    return sigma_heuristic(stack_pair(xs, ys), method)


def default_grid(config: DetectorConfig, heuristic_sigma: float | None = None) -> TuneGrid:
    """Default grids for the axes the config actually exposes.

    The sigma axis is empty for the linear kernel (it has no lengthscale).
    """
    empty = np.array([])
    nu = _log_grid(*NU_RANGE) if config.distribution == "ec" else empty
    if config.mode == "kernel":
        if heuristic_sigma is None or not heuristic_sigma > 0:
            raise ValueError("kernel mode requires a positive heuristic sigma")
        if config.kernel is not None and config.kernel.kind == "linear":
            sigma = empty
        else:
            sigma = heuristic_sigma * _log_grid(*SIGMA_MULTIPLIER_RANGE)
        lam = _log_grid(*LAMBDA_RANGE)
    else:
        sigma, lam = empty, empty
    return TuneGrid(nu_grid=nu, sigma_grid=sigma, lambda_grid=lam)


def split_train_val(
    labels: np.ndarray, n_train: int, n_val: int, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/validation index split.

    Training indices come from non-anomalous pixels only; validation
    indices come from the remaining pixels and must contain both classes.
    Draw order: training draw with `seed`, validation draw with `seed + 1`.
    """
    labels = (np.asarray(labels).ravel() > 0).astype(np.int64)
    n_total = labels.size
    background = np.nonzero(labels == 0)[0]
    if n_train > background.size:
        raise ValueError(
            f"not enough non-anomalous pixels: need {n_train}, have {background.size}"
        )
    if n_train + n_val > n_total:
        raise ValueError("n_train + n_val exceeds available pixels")
    train_idx = background[sample_pixels(background.size, n_train, seed)]
    mask = np.ones(n_total, dtype=bool)
    mask[train_idx] = False
    rest = np.nonzero(mask)[0]
    val_idx = rest[sample_pixels(rest.size, n_val, seed + 1)]
    val_labels = labels[val_idx]
    if val_labels.min() == val_labels.max():
        raise DegenerateLabelsError("validation draw has a single class")
    return train_idx, val_idx


def grid_search(
    x: np.ndarray,
    y: np.ndarray,
    labels: np.ndarray,
    config: DetectorConfig,
    grid: TuneGrid | None,
    n_train: int,
    n_val: int,
    seed: int,
) -> TuneResult:
    """Exhaustive search maximizing validation AUC.

    Ties break toward the smallest parameters, nu first, then sigma, then
    lambda. The trace lists every grid point in canonical (nu, sigma,
    lambda) nested order. Passing grid=None builds the default grid, with
    the sigma axis anchored at the mean pairwise-distance heuristic of the
    training draw.
    """
    x = as_pixel_matrix(x)
    y = as_pixel_matrix(y)
    train_idx, val_idx = split_train_val(labels, n_train, n_val, seed)
    x_tr, y_tr = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]
    val_labels = (np.asarray(labels).ravel() > 0).astype(np.int64)[val_idx]

    if grid is None:
        anchor = anchor_sigma(x_tr, y_tr) if config.mode == "kernel" else None
        grid = default_grid(config, anchor)

    nu_values = list(grid.nu_grid) if grid.nu_grid.size else [None]
    sigma_values = list(grid.sigma_grid) if grid.sigma_grid.size else [None]
    lambda_values = list(grid.lambda_grid) if grid.lambda_grid.size else [None]

    # nu only affects the score combination, so fit once per (sigma, lambda)
    # and sweep nu over the cached xi triplets.
    entries = {}
    for i_s, sigma in enumerate(sigma_values):
        for i_l, lam in enumerate(lambda_values):
            fit_config = with_params(config, sigma=sigma, lam=lam)
            det = fit(x_tr, y_tr, fit_config)
            xi = xi_pixels(det, x_val, y_val)
            for i_n, nu in enumerate(nu_values):
                eval_config = with_params(fit_config, nu=nu)
                scores = combine_xi(*xi, eval_config, det.d_x, det.d_y)
                auc = roc_curve(scores, val_labels).auc
                entries[(i_n, i_s, i_l)] = (GridPoint(nu=nu, sigma=sigma, lam=lam), auc)

    trace = tuple(entries[key] for key in sorted(entries))
    best_params, best_auc = trace[0]
    for point, auc in trace[1:]:
        if auc > best_auc:
            best_params, best_auc = point, auc
    return TuneResult(best_params=best_params, best_val_auc=best_auc, trace=trace)
