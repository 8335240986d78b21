"""Kernel functions, Gram assembly, and bandwidth heuristics.

Three kernels are supported:

    linear   k(a, b) = a.b
    rbf      k(a, b) = exp(-||a - b||^2 / (2 sigma^2))
    sam      k(a, b) = exp(-acos(a.b / (||a|| ||b||))^2 / (2 sigma^2))

The sam kernel is scale-invariant in the spectra. Its cosine argument is
clamped to [-1, 1] before acos so floating-point overshoot cannot produce
NaN. Zero-norm vectors use a fixed convention: cosine 1 if both operands
are zero, else 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist

from .raster import as_pixel_matrix, sample_pixels

__all__ = [
    "KernelSpec",
    "kernel_eval",
    "gram",
    "cross_gram",
    "cross_row",
    "sigma_heuristic",
    "sigma_percentile_grid",
]

KERNEL_KINDS = ("linear", "rbf", "sam")

# Pairwise-distance heuristics go exact up to this many rows, subsampled above.
_HEURISTIC_MAX_EXACT = 2000


@dataclass(frozen=True)
class KernelSpec:
    """Kernel kind plus lengthscale; sigma is ignored for the linear kernel."""

    kind: str
    sigma: float | None = None

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind != "linear":
            if self.sigma is None or not self.sigma > 0:
                raise ValueError(f"{self.kind} kernel requires sigma > 0")


def _sam_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Clamped cosine matrix between the rows of a and b, zero-norm convention."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    dots = a @ b.T
    denom = np.outer(na, nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        cos = dots / denom
    zero_a = na == 0.0
    zero_b = nb == 0.0
    if zero_a.any() or zero_b.any():
        either = zero_a[:, None] | zero_b[None, :]
        both = zero_a[:, None] & zero_b[None, :]
        cos = np.where(either, 0.0, cos)
        cos = np.where(both, 1.0, cos)
    return np.clip(cos, -1.0, 1.0)


def _eval_matrix(a: np.ndarray, b: np.ndarray, spec: KernelSpec) -> np.ndarray:
    if spec.kind == "linear":
        return a @ b.T
    if spec.kind == "rbf":
        sq = (
            np.einsum("ij,ij->i", a, a)[:, None]
            + np.einsum("ij,ij->i", b, b)[None, :]
            - 2.0 * (a @ b.T)
        )
        np.maximum(sq, 0.0, out=sq)
        return np.exp(-sq / (2.0 * spec.sigma**2))
    angles = np.arccos(_sam_cosines(a, b))
    return np.exp(-(angles**2) / (2.0 * spec.sigma**2))


def kernel_eval(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> float:
    """Evaluate the kernel on a single pair of equal-length vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("kernel arguments must be equal-length vectors")
    return float(_eval_matrix(a[None, :], b[None, :], spec)[0, 0])


def gram(rows: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """n x n kernel matrix over the rows, exactly symmetric.

    For rbf and sam the diagonal is pinned to exactly 1.
    """
    rows = as_pixel_matrix(rows)
    if rows.shape[0] < 1:
        raise ValueError("gram needs at least one row")
    k = _eval_matrix(rows, rows, spec)
    k = (k + k.T) / 2.0
    if spec.kind != "linear":
        np.fill_diagonal(k, 1.0)
    return k


def cross_gram(train: np.ndarray, probes: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """(m, n) matrix of kernel values between probe rows and training rows."""
    train = as_pixel_matrix(train)
    probes = as_pixel_matrix(probes)
    if probes.shape[1] != train.shape[1]:
        raise ValueError("dimension mismatch between probes and training rows")
    return _eval_matrix(probes, train, spec)


def cross_row(train: np.ndarray, v: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Length-n vector of kernel values between v and each training row."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("probe must be a vector")
    return cross_gram(train, v[None, :], spec)[0]


def _pairwise_distances(rows: np.ndarray, seed: int) -> np.ndarray:
    if rows.shape[0] > _HEURISTIC_MAX_EXACT:
        idx = sample_pixels(rows.shape[0], _HEURISTIC_MAX_EXACT, seed)
        rows = rows[np.sort(idx)]
    return pdist(rows)


def sigma_heuristic(rows: np.ndarray, method: str = "mean", *, seed: int = 0) -> float:
    """Mean or median pairwise Euclidean distance over all row pairs i < j.

    Exact up to 2000 rows; above that the estimate uses 2000 seeded random
    rows so the O(n^2) cost stays bounded.
    """
    rows = as_pixel_matrix(rows)
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if method not in ("mean", "median"):
        raise ValueError(f"unknown heuristic method {method!r}")
    dists = _pairwise_distances(rows, seed)
    if not np.any(dists > 0):
        raise ValueError("zero dispersion: all rows identical")
    return float(dists.mean() if method == "mean" else np.median(dists))


def sigma_percentile_grid(
    rows: np.ndarray,
    low: float = 0.05,
    high: float = 0.95,
    num: int = 60,
    *,
    seed: int = 0,
) -> np.ndarray:
    """Log-spaced sigma candidates between two percentiles of pairwise distances."""
    rows = as_pixel_matrix(rows)
    if rows.shape[0] < 2:
        raise ValueError("need at least 2 rows")
    if not 0.0 <= low < high <= 1.0:
        raise ValueError("percentiles must satisfy 0 <= low < high <= 1")
    dists = _pairwise_distances(rows, seed)
    lo = float(np.quantile(dists, low))
    hi = float(np.quantile(dists, high))
    if not lo > 0:
        raise ValueError("low percentile of distances is not positive")
    grid = np.logspace(np.log10(lo), np.log10(hi), num)
    grid[0], grid[-1] = lo, hi
    return grid
