import numpy as np
import pytest
from scipy.stats import rankdata

from acdkit.detectors import (
    DETECTOR_BETAS,
    DetectorConfig,
    fit,
    fit_kernel_term,
    score_ec,
    score_gaussian,
    score_pixels,
    with_params,
    xi_kernel,
    xi_linear,
    xi_pixels,
)
from acdkit.kernels import KernelSpec
from acdkit.linalg import spd_factorize
from acdkit.detectors import LinearTerm

from conftest import correlated_pair


def kernel_config(**kw):
    kw.setdefault("kernel", KernelSpec("rbf", 2.0))
    kw.setdefault("mode", "kernel")
    return DetectorConfig(**kw)


def test_detector_beta_table():
    assert DETECTOR_BETAS == {"rx": (0, 0), "yx": (0, 1), "xy": (1, 0), "hacd": (1, 1)}


def test_config_validation():
    with pytest.raises(ValueError):
        DetectorConfig(beta_x=2)
    with pytest.raises(ValueError):
        DetectorConfig(distribution="ec")  # nu missing
    with pytest.raises(ValueError):
        DetectorConfig(mode="kernel")  # kernel spec missing
    with pytest.raises(ValueError):
        kernel_config(lam=-1.0)


def test_fit_linear_dimensions():
    x, y = correlated_pair(100, 2, seed=0)
    det = fit(x, y, DetectorConfig(beta_x=0, beta_y=0))
    assert det.d_x == det.d_y == 2
    assert det.term_z.dim == 4
    assert det.term_x.dim == 2


def test_fit_kernel_dimensions():
    x, y = correlated_pair(50, 3, seed=1)
    det = fit(x, y, kernel_config())
    for term in (det.term_x, det.term_y, det.term_z):
        assert term.solve_factor.dim == 50
    assert det.term_z.dim == 6


def test_fit_rejects_unaligned():
    x, y = correlated_pair(30, 2, seed=2)
    with pytest.raises(ValueError, match="unaligned pair"):
        fit(x, y[:-1], DetectorConfig())


def test_fit_recovers_known_covariance():
    # unit-variance bands with known correlations, so standardization is
    # close to the identity and the fitted z covariance approximates truth
    rho = 0.6
    true_c = np.array([[1.0, rho], [rho, 1.0]])
    L = np.linalg.cholesky(true_c)
    rng = np.random.default_rng(3)
    base = rng.normal(size=(5000, 2)) @ L.T
    x, y = base[:, :1], base[:, 1:]
    det = fit(x, y, DetectorConfig(beta_x=0, beta_y=0))
    fitted = det.term_z.factor.reconstruct()
    assert np.max(np.abs(fitted - true_c)) < 0.1


def test_xi_linear_cases():
    term = LinearTerm(mean=np.zeros(2), factor=spd_factorize(np.eye(2), 0.0))
    assert xi_linear(term, np.zeros(2)) == 0.0
    assert xi_linear(term, np.ones(2)) == pytest.approx(2.0)


def test_xi_linear_matches_explicit_inverse(rng):
    rows = rng.normal(size=(300, 3))
    mean = rows.mean(axis=0)
    from acdkit.linalg import covariance

    c = covariance(rows, mean)
    term = LinearTerm(mean=mean, factor=spd_factorize(c, 0.0))
    v = rng.normal(size=3)
    expected = (v - mean) @ np.linalg.inv(c) @ (v - mean)
    assert xi_linear(term, v) == pytest.approx(expected, rel=1e-9)


def test_xi_kernel_linear_reduction(rng):
    # uncentered full-rank data, linear kernel, negligible regularizer
    train = rng.normal(size=(200, 5)) + 1.0
    term = fit_kernel_term(train, KernelSpec("linear"), lam=1e-10)
    direct = np.linalg.inv(train.T @ train)
    for _ in range(10):
        v = rng.normal(size=5)
        expected = v @ direct @ v
        assert xi_kernel(term, v) == pytest.approx(expected, rel=1e-4)


def test_xi_kernel_training_row_bounded(rng):
    train = rng.normal(size=(40, 3))
    term = fit_kernel_term(train, KernelSpec("rbf", 1.5), lam=1e-6)
    for i in (0, 7, 39):
        assert xi_kernel(term, train[i]) <= 1.0 + 1e-9


def test_xi_kernel_nonnegative(rng):
    train = rng.normal(size=(60, 4))
    term = fit_kernel_term(train, KernelSpec("rbf", 0.8), lam=1e-8)
    probes = rng.normal(size=(100, 4)) * 3
    for v in probes:
        assert xi_kernel(term, v) >= 0.0


def test_score_gaussian_cases():
    assert score_gaussian(5.0, 2.0, 1.0, 0, 0) == 5.0
    assert score_gaussian(5.0, 2.0, 1.0, 1, 1) == 2.0
    assert score_gaussian(3.0, 7.0, 3.0, 0, 1) == 0.0


def test_score_ec_zero_case():
    assert score_ec(0.0, 0.0, 0.0, 1, 1, nu=2.0, d_x=3, d_y=3) == 0.0


def test_score_ec_monotone_in_xi_z():
    xs = np.linspace(0, 50, 100)
    vals = score_ec(xs, 0.0, 0.0, 0, 0, nu=1.0, d_x=4, d_y=4)
    assert np.all(np.diff(vals) > 0)


def test_score_ec_high_nu_approaches_gaussian():
    rng = np.random.default_rng(4)
    xi = rng.uniform(0, 20, size=(3, 50))
    g = score_gaussian(xi[0], xi[1], xi[2], 1, 1)
    e = score_ec(xi[0], xi[1], xi[2], 1, 1, nu=1e10, d_x=3, d_y=3)
    assert np.allclose(e, g, rtol=1e-4)


def test_score_ec_rejects_bad_nu():
    with pytest.raises(ValueError):
        score_ec(1.0, 0.0, 0.0, 0, 0, nu=0.0, d_x=1, d_y=1)


@pytest.mark.parametrize("mode", ["linear", "kernel"])
def test_rx_rank_equivalence(mode):
    x, y = correlated_pair(400, 3, seed=5)
    kw = {"mode": mode}
    if mode == "kernel":
        kw["kernel"] = KernelSpec("rbf", 3.0)
    det_g = fit(x[:200], y[:200], DetectorConfig(beta_x=0, beta_y=0, **kw))
    s_g = score_pixels(det_g, x[200:], y[200:])
    for nu in (0.1, 1.0, 100.0):
        cfg = DetectorConfig(beta_x=0, beta_y=0, distribution="ec", nu=nu, **kw)
        det_e = fit(x[:200], y[:200], cfg)
        s_e = score_pixels(det_e, x[200:], y[200:])
        assert np.array_equal(rankdata(s_g), rankdata(s_e))


@pytest.mark.parametrize("name", sorted(DETECTOR_BETAS))
def test_high_nu_limit_rank_agreement(name):
    from scipy.stats import spearmanr

    bx, by = DETECTOR_BETAS[name]
    x, y = correlated_pair(600, 3, seed=6)
    det_g = fit(x[:300], y[:300], DetectorConfig(beta_x=bx, beta_y=by))
    det_e = fit(x[:300], y[:300],
                DetectorConfig(beta_x=bx, beta_y=by, distribution="ec", nu=1e10))
    s_g = score_pixels(det_g, x[300:], y[300:])
    s_e = score_pixels(det_e, x[300:], y[300:])
    assert spearmanr(s_g, s_e).statistic >= 1 - 1e-9


def test_score_pixels_chi_square_expectation():
    x, y = correlated_pair(4000, 3, seed=7)
    det = fit(x[:2000], y[:2000], DetectorConfig(beta_x=0, beta_y=0))
    mean_score = score_pixels(det, x[2000:], y[2000:]).mean()
    assert abs(mean_score - 6.0) / 6.0 < 0.15


def test_score_pixels_thread_determinism():
    x, y = correlated_pair(3000, 2, seed=9)
    det = fit(x[:500], y[:500], kernel_config())
    a = score_pixels(det, x, y, threads=1)
    b = score_pixels(det, x, y, threads=4)
    assert np.array_equal(a, b)


def test_score_pixels_permutation_equivariance():
    x, y = correlated_pair(200, 2, seed=10)
    det = fit(x[:100], y[:100], DetectorConfig())
    scores = score_pixels(det, x, y)
    perm = np.random.default_rng(11).permutation(200)
    assert np.array_equal(score_pixels(det, x[perm], y[perm]), scores[perm])


def test_score_pixels_band_count_mismatch():
    x, y = correlated_pair(50, 2, seed=12)
    det = fit(x, y, DetectorConfig())
    with pytest.raises(ValueError, match="band-count"):
        score_pixels(det, np.zeros((5, 3)), np.zeros((5, 2)))


def test_joint_scaling_rank_invariance():
    x, y = correlated_pair(500, 3, seed=13)
    det_a = fit(x, y, DetectorConfig(beta_x=1, beta_y=1))
    det_b = fit(100.0 * x, 100.0 * y, DetectorConfig(beta_x=1, beta_y=1))
    s_a = score_pixels(det_a, x, y)
    s_b = score_pixels(det_b, 100.0 * x, 100.0 * y)
    assert np.array_equal(np.argsort(s_a), np.argsort(s_b))


def test_unequal_band_counts():
    x, y = correlated_pair(300, 2, d_y=5, seed=14)
    cfg = DetectorConfig(beta_x=1, beta_y=1, distribution="ec", nu=3.0)
    det = fit(x, y, cfg)
    assert det.term_z.dim == 7
    scores = score_pixels(det, x[:50], y[:50])
    assert scores.shape == (50,)
    assert np.all(np.isfinite(scores))


def test_auto_lambda_resolution():
    x, y = correlated_pair(50, 2, seed=15)
    det = fit(x, y, kernel_config(lam=None))
    assert det.term_x.lam == pytest.approx(1e-5 / 50)


def test_with_params():
    cfg = kernel_config(distribution="ec", nu=1.0)
    out = with_params(cfg, nu=5.0, sigma=0.7, lam=2e-3)
    assert out.nu == 5.0
    assert out.kernel.sigma == 0.7
    assert out.lam == 2e-3
    with pytest.raises(ValueError):
        with_params(DetectorConfig(), sigma=1.0)


def test_xi_pixels_nonnegative():
    x, y = correlated_pair(300, 3, seed=16)
    for cfg in (DetectorConfig(), kernel_config()):
        det = fit(x[:150], y[:150], cfg)
        for part in xi_pixels(det, x[150:], y[150:]):
            assert np.all(part >= 0)
