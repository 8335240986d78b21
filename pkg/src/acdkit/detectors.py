"""Anomalous change detectors for co-registered multiband image pairs.

A fitted detector scores each pixel pair (x_i, y_i) by how anomalous the
joint observation z_i = [x_i, y_i] is under the background model, minus
optional marginal penalties:

    score = xi(z_i) - beta_x * xi(x_i) - beta_y * xi(y_i)

where xi is a squared Mahalanobis distance, evaluated either in input
space (linear mode) or implicitly in a reproducing-kernel Hilbert space
(kernel mode). The beta flags pick the family member:

    beta_x  beta_y  name
      0       0     rx      joint anomalousness only
      0       1     yx      discount pixels whose y is itself anomalous
      1       0     xy      discount pixels whose x is itself anomalous
      1       1     hacd    discount both marginals (hyperbolic boundaries)

Two score combinations are available. The Gaussian combination uses the
xi values directly. The elliptically-contoured (EC) combination wraps
each xi in a Student-t flavored rescaling (dim + nu) * log1p(xi / nu);
as nu grows it reproduces the Gaussian ordering.

Kernel mode evaluates xi through the regularized dual form

    xi_H(v) = k_v (K K + lambda I)^-1 k_v^T

with K the training Gram matrix and k_v the probe-to-training kernel row.
With a linear kernel, negligible lambda, and more samples than features
this reduces to the uncentered input-space quadratic form v (X^T X)^-1 v.

Inputs are z-score standardized per band with statistics fit on the
training pixels; Gram matrices are not centered in feature space.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from .kernels import KernelSpec, cross_gram, gram
from .linalg import (
    DEFAULT_RIDGE_SCALE,
    SpdFactor,
    covariance,
    mahalanobis_batch,
    spd_factorize,
)
from .raster import (
    BandStats,
    as_pixel_matrix,
    stack_pair,
    standardize_apply,
    standardize_fit,
)

__all__ = [
    "DETECTOR_BETAS",
    "DetectorConfig",
    "LinearTerm",
    "KernelTerm",
    "FittedDetector",
    "fit",
    "fit_kernel_term",
    "xi_linear",
    "xi_kernel",
    "score_gaussian",
    "score_ec",
    "xi_pixels",
    "combine_xi",
    "score_pixels",
    "with_params",
]

# Table of beta flags per detector name.
DETECTOR_BETAS = {"rx": (0, 0), "yx": (0, 1), "xy": (1, 0), "hacd": (1, 1)}

# Default kernel regularizer is AUTO_LAMBDA_NUM / n_train.
AUTO_LAMBDA_NUM = 1e-5

# Pixels are scored in fixed-size chunks so results are bit-identical
# regardless of thread count.
_SCORE_CHUNK = 8192


@dataclass(frozen=True)
class DetectorConfig:
    """Which family member to build and how.

    lam: kernel regularizer; None means auto (1e-5 / n_train).
    kernel_x / kernel_y / kernel_z: optional per-term overrides of the
    shared kernel spec.
    """

    beta_x: int = 1
    beta_y: int = 1
    distribution: str = "gaussian"
    nu: float | None = None
    mode: str = "linear"
    kernel: KernelSpec | None = None
    lam: float | None = None
    kernel_x: KernelSpec | None = None
    kernel_y: KernelSpec | None = None
    kernel_z: KernelSpec | None = None
    ridge_scale: float = DEFAULT_RIDGE_SCALE

    def __post_init__(self):
        if self.beta_x not in (0, 1) or self.beta_y not in (0, 1):
            raise ValueError("beta flags must be 0 or 1")
        if self.distribution not in ("gaussian", "ec"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "ec":
            if self.nu is None or not self.nu > 0:
                raise ValueError("ec distribution requires nu > 0")
        if self.mode not in ("linear", "kernel"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == "kernel":
            if self.kernel is None:
                raise ValueError("kernel mode requires a kernel spec")
            if self.lam is not None and not self.lam > 0:
                raise ValueError("lam must be positive (or None for auto)")

    def spec_for_term(self, term: str) -> KernelSpec:
        override = {"x": self.kernel_x, "y": self.kernel_y, "z": self.kernel_z}[term]
        return override if override is not None else self.kernel


@dataclass(frozen=True)
class LinearTerm:
    """Mean and SPD covariance factor for one term (x, y, or z)."""

    mean: np.ndarray = field(repr=False)
    factor: SpdFactor

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        if mean.shape != (self.factor.dim,):
            raise ValueError("mean length does not match factor dim")
        mean.flags.writeable = False
        object.__setattr__(self, "mean", mean)

    @property
    def dim(self) -> int:
        return self.factor.dim


@dataclass(frozen=True)
class KernelTerm:
    """Training samples plus the factorized (K K + lambda I) solve for one term."""

    train: np.ndarray = field(repr=False)
    spec: KernelSpec
    lam: float
    solve_factor: SpdFactor

    def __post_init__(self):
        train = as_pixel_matrix(self.train)
        if self.solve_factor.dim != train.shape[0]:
            raise ValueError("solve factor dim does not match training count")
        train.flags.writeable = False
        object.__setattr__(self, "train", train)

    @property
    def dim(self) -> int:
        return self.train.shape[1]


@dataclass(frozen=True)
class FittedDetector:
    config: DetectorConfig
    band_stats_x: BandStats
    band_stats_y: BandStats
    d_x: int
    d_y: int
    term_x: LinearTerm | KernelTerm
    term_y: LinearTerm | KernelTerm
    term_z: LinearTerm | KernelTerm

    def __post_init__(self):
        if self.term_z.dim != self.d_x + self.d_y:
            raise ValueError("z term dimensionality must equal d_x + d_y")


def _fit_linear_term(rows: np.ndarray, ridge_scale: float) -> LinearTerm:
    mean = rows.mean(axis=0)
    cov = covariance(rows, mean)
    return LinearTerm(mean=mean, factor=spd_factorize(cov, ridge_scale))


def fit_kernel_term(train: np.ndarray, spec: KernelSpec, lam: float) -> KernelTerm:
    """Fit one kernelized term: Gram, then factorize K K + lambda I."""
    train = as_pixel_matrix(train)
    k = gram(train, spec)
    m = k @ k
    m = (m + m.T) / 2.0
    m[np.diag_indices_from(m)] += lam
    return KernelTerm(
        train=train, spec=spec, lam=lam, solve_factor=spd_factorize(m, ridge_scale=0.0)
    )


def fit(x_train: np.ndarray, y_train: np.ndarray, config: DetectorConfig) -> FittedDetector:
    """Fit per-term statistics on a training pair.

    Band standardization is fit on the training pixels and baked into the
    detector. Linear mode stores means and covariance factors for x, y and
    the stacked z; kernel mode stores the standardized training samples and
    the factorized regularized Gram product per term.
    """
    x_train = as_pixel_matrix(x_train)
    y_train = as_pixel_matrix(y_train)
    if x_train.shape[0] != y_train.shape[0]:
        raise ValueError("unaligned pair: training row counts differ")
    n = x_train.shape[0]
    if n < 2:
        raise ValueError("need at least 2 training samples")

    stats_x = standardize_fit(x_train)
    stats_y = standardize_fit(y_train)
    xs = standardize_apply(x_train, stats_x)
    ys = standardize_apply(y_train, stats_y)
    zs = stack_pair(xs, ys)

    if config.mode == "linear":
        terms = {
            name: _fit_linear_term(rows, config.ridge_scale)
            for name, rows in (("x", xs), ("y", ys), ("z", zs))
        }
    else:
        lam = config.lam if config.lam is not None else AUTO_LAMBDA_NUM / n
        terms = {
            name: fit_kernel_term(rows, config.spec_for_term(name), lam)
            for name, rows in (("x", xs), ("y", ys), ("z", zs))
        }

    return FittedDetector(
        config=config,
        band_stats_x=stats_x,
        band_stats_y=stats_y,
        d_x=x_train.shape[1],
        d_y=y_train.shape[1],
        term_x=terms["x"],
        term_y=terms["y"],
        term_z=terms["z"],
    )


def xi_linear(term: LinearTerm, v: np.ndarray) -> float:
    """Squared Mahalanobis distance of v to the term's fitted Gaussian."""
    return float(mahalanobis_batch(term.factor, term.mean, np.atleast_2d(v))[0])


def _xi_kernel_batch(term: KernelTerm, rows: np.ndarray) -> np.ndarray:
    kc = cross_gram(term.train, rows, term.spec)
    w = solve_triangular(term.solve_factor.L, kc.T, lower=True)
    xi = np.einsum("ij,ij->j", w, w)
    # Analytically PSD; the clip pins any ill-conditioning artifact at 0.
    return np.maximum(xi, 0.0)


def xi_kernel(term: KernelTerm, v: np.ndarray) -> float:
    """Kernelized quadratic form k_v (K K + lambda I)^-1 k_v^T, clipped at 0."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (term.train.shape[1],):
        raise ValueError("dimension mismatch")
    return float(_xi_kernel_batch(term, v[None, :])[0])


def _xi_term_batch(term, rows: np.ndarray) -> np.ndarray:
    if isinstance(term, LinearTerm):
        return mahalanobis_batch(term.factor, term.mean, rows)
    return _xi_kernel_batch(term, rows)


def score_gaussian(xi_z, xi_x, xi_y, beta_x: int, beta_y: int):
    """Gaussian combination xi_z - beta_x * xi_x - beta_y * xi_y."""
    return xi_z - beta_x * xi_x - beta_y * xi_y


def score_ec(xi_z, xi_x, xi_y, beta_x: int, beta_y: int, nu: float, d_x: int, d_y: int):
    """Elliptically-contoured combination with Student-t shape nu.

    Each term's coefficient uses that term's own input dimensionality, so
    unequal band counts d_x != d_y are handled consistently.
    """
    if not nu > 0:
        raise ValueError("nu must be positive")
    score = (d_x + d_y + nu) * np.log1p(xi_z / nu)
    if beta_x:
        score = score - (d_x + nu) * np.log1p(xi_x / nu)
    if beta_y:
        score = score - (d_y + nu) * np.log1p(xi_y / nu)
    return score


def combine_xi(
    xi_z: np.ndarray,
    xi_x: np.ndarray,
    xi_y: np.ndarray,
    config: DetectorConfig,
    d_x: int,
    d_y: int,
) -> np.ndarray:
    """Combine per-term xi values into final scores per the config."""
    if config.distribution == "gaussian":
        return score_gaussian(xi_z, xi_x, xi_y, config.beta_x, config.beta_y)
    return score_ec(xi_z, xi_x, xi_y, config.beta_x, config.beta_y,
                    config.nu, d_x, d_y)


def _standardized_terms(det: FittedDetector, x: np.ndarray, y: np.ndarray):
    x = as_pixel_matrix(x)
    y = as_pixel_matrix(y)
    if x.shape[0] != y.shape[0]:
        raise ValueError("unaligned pair: row counts differ")
    if x.shape[1] != det.d_x or y.shape[1] != det.d_y:
        raise ValueError(
            f"band-count mismatch: expected ({det.d_x}, {det.d_y}), "
            f"got ({x.shape[1]}, {y.shape[1]})"
        )
    xs = standardize_apply(x, det.band_stats_x)
    ys = standardize_apply(y, det.band_stats_y)
    return xs, ys, stack_pair(xs, ys)


def xi_pixels(
    det: FittedDetector, x: np.ndarray, y: np.ndarray, threads: int = 1
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel (xi_z, xi_x, xi_y) for a pair of pixel matrices.

    Evaluation is chunked at a fixed size independent of the thread count,
    so results are bit-identical whether run sequentially or in parallel.
    """
    xs, ys, zs = _standardized_terms(det, x, y)
    n = xs.shape[0]
    chunks = [slice(i, min(i + _SCORE_CHUNK, n)) for i in range(0, n, _SCORE_CHUNK)]

    def one(sl):
        return (
            _xi_term_batch(det.term_z, zs[sl]),
            _xi_term_batch(det.term_x, xs[sl]),
            _xi_term_batch(det.term_y, ys[sl]),
        )

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(one, chunks))
    else:
        parts = [one(sl) for sl in chunks]

    xi_z = np.concatenate([p[0] for p in parts])
    xi_x = np.concatenate([p[1] for p in parts])
    xi_y = np.concatenate([p[2] for p in parts])
    return xi_z, xi_x, xi_y


def score_pixels(
    det: FittedDetector, x: np.ndarray, y: np.ndarray, threads: int = 1
) -> np.ndarray:
    """Per-pixel anomalousness scores, in input pixel order."""
    xi_z, xi_x, xi_y = xi_pixels(det, x, y, threads=threads)
    return combine_xi(xi_z, xi_x, xi_y, det.config, det.d_x, det.d_y)


def with_params(
    config: DetectorConfig,
    nu: float | None = None,
    sigma: float | None = None,
    lam: float | None = None,
) -> DetectorConfig:
    """Copy a config with tuning parameters swapped in (None leaves as-is)."""
    out = config
    if nu is not None:
        out = replace(out, nu=nu)
    if sigma is not None:
        if out.kernel is None:
            raise ValueError("sigma given but config has no kernel")
        out = replace(out, kernel=replace(out.kernel, sigma=sigma))
    if lam is not None:
        out = replace(out, lam=lam)
    return out
