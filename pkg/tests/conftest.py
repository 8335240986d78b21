import numpy as np
import pytest

from acdkit.raster import ImageCube


def correlated_pair(n, d_x, d_y=None, seed=0, noise=0.1):
    """Gaussian pair where y is a mixed, noisy copy of x."""
    if d_y is None:
        d_y = d_x
    rng = np.random.default_rng(seed)
    mix_x = rng.normal(size=(d_x, d_x))
    x = rng.normal(size=(n, d_x)) @ mix_x.T
    mix_xy = rng.normal(size=(d_y, d_x)) / np.sqrt(d_x)
    y = x @ mix_xy.T + noise * rng.normal(size=(n, d_y))
    return x, y


def mixture_cube(height, width, bands, seed, n_components=3, separation=4.0):
    """Cube whose pixel spectra come from a Gaussian mixture."""
    rng = np.random.default_rng(seed)
    n = height * width
    means = separation * rng.normal(size=(n_components, bands))
    chols = []
    for _ in range(n_components):
        a = rng.normal(size=(bands, bands)) / np.sqrt(bands)
        chols.append(np.linalg.cholesky(a @ a.T + 0.3 * np.eye(bands)))
    comp = rng.integers(0, n_components, size=n)
    eps = rng.normal(size=(n, bands))
    flat = np.empty((n, bands))
    for c in range(n_components):
        mask = comp == c
        flat[mask] = means[c] + eps[mask] @ chols[c].T
    return ImageCube.from_array(flat.reshape(height, width, bands))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
