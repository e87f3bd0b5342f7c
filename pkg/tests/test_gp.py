import warnings

import numpy as np
import pytest

from orc.config import PAPER_BOUNDS
from orc.fields import paper_ti_density
from orc.geometry import build_grid
from orc.gp import GpModel, fit_hyperparams, gp_posterior
from orc.kernel import rbf

LO, HI = np.array([-1.6, -1.0]), np.array([1.6, 1.0])


def _data(seed, n=50, noise_std=0.01):
    rng = np.random.default_rng(seed)
    X = rng.uniform(LO, HI, size=(n, 2))
    return X, paper_ti_density()(X) + noise_std * rng.standard_normal(n)


def _dense_oracle(X, y, q, ls, mag, noise, rho=np.zeros(2)):
    """Textbook posterior with an explicit inverse."""
    Kinv = np.linalg.inv(mag * rbf(X, X, ls) + noise * np.eye(len(X)))
    kq = mag * rbf(X, q, ls)
    mean = q @ rho + kq.T @ Kinv @ (y - X @ rho)
    var = mag - np.einsum("ij,ik,kj->j", kq, Kinv, kq)
    return mean, var


class TestPosterior:
    def test_prior(self):
        m = GpModel(0.5, 4.0, 0.1, rho=(2.0, -1.0))
        assert gp_posterior(m, (0.3, 0.4)) == pytest.approx((0.6 - 0.4, 4.0))

    def test_single_observation(self):
        mag, noise, y = 3.0, 0.5, 2.0
        m = GpModel(0.7, mag, noise, mean="zero").fit([[0.1, 0.2]], [y])
        mu, var = gp_posterior(m, (0.1, 0.2))
        assert mu == pytest.approx(y * mag / (mag + noise), rel=1e-12)
        assert var == pytest.approx(mag * noise / (mag + noise), rel=1e-12)

    def test_matches_dense_oracle(self):
        X, y = _data(0)
        q = build_grid(PAPER_BOUNDS, 0.1).points
        rho = np.array([3.0, -2.0])
        m = GpModel(0.4, 1e4, 1.0, rho=rho).fit(X, y)
        mean, var = m.posterior(q)
        ref_mean, ref_var = _dense_oracle(X, y, q, 0.4, 1e4, 1.0, rho)
        np.testing.assert_allclose(mean, ref_mean, rtol=1e-8)
        np.testing.assert_allclose(var, ref_var, rtol=1e-8)

    def test_variance_below_prior(self):
        rng = np.random.default_rng(2)
        q = rng.uniform(LO, HI, size=(300, 2))
        for seed in range(10):
            X, y = _data(seed, n=int(rng.integers(1, 60)))
            _, var = GpModel(rng.uniform(0.1, 1.5), 5.0, 0.01).fit(X, y).posterior(q)
            assert np.all(var <= 5.0 + 1e-10)
            assert np.all(var >= 0)

    def test_interpolation_small_noise(self):
        X, y = _data(3, n=15)
        m = GpModel(0.3, 1e4, 1e-10, mean="zero").fit(X, y)
        np.testing.assert_allclose(m.posterior(X)[0], y, atol=1e-4)

    def test_permutation_invariance(self):
        X, y = _data(4)
        q = build_grid(PAPER_BOUNDS, 0.2).points
        perm = np.random.default_rng(0).permutation(len(y))
        a = GpModel(0.5, 1e3, 0.1).fit(X, y).posterior(q)
        b = GpModel(0.5, 1e3, 0.1).fit(X[perm], y[perm]).posterior(q)
        np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-10)
        np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-10)


class TestIncremental:
    def test_blocks_equal_one_shot(self):
        X, y = _data(5, n=66)
        q = build_grid(PAPER_BOUNDS, 0.1).points
        inc = GpModel(1.3, 1e4, 1e-4)
        tracker = inc.track(q)
        for k in range(0, 66, 11):
            inc.add(X[k : k + 11], y[k : k + 11])
        one = GpModel(1.3, 1e4, 1e-4).fit(X, y)
        m1, v1 = one.posterior(q)
        m0, v0 = inc.posterior(q)
        np.testing.assert_allclose(m0, m1, rtol=1e-7)
        np.testing.assert_allclose(tracker.mean, m1, rtol=1e-7)
        np.testing.assert_allclose(tracker.var, np.maximum(v1, 0), atol=1e-6)
        assert inc.logdet() == pytest.approx(one.logdet(), rel=1e-8)  # K/noise ~ 1e8, conditioning-limited

    def test_fit_resets_tracker(self):
        q = build_grid(PAPER_BOUNDS, 0.2).points
        m = GpModel(0.5, 2.0, 0.1)
        tr = m.track(q)
        X, y = _data(6, n=10)
        m.fit(X, y)
        m.fit(X[:3], y[:3])
        np.testing.assert_allclose(tr.mean, m.posterior(q)[0], rtol=1e-10)

    def test_info_gain_matches_logdet(self):
        X, y = _data(7, n=30)
        m = GpModel(0.5, 5.0, 0.1).fit(X, y)
        K = 5.0 * rbf(X, X, 0.5)
        ref = 0.5 * np.linalg.slogdet(np.eye(30) + K / 0.1)[1]
        assert m.info_gain() == pytest.approx(ref, rel=1e-10)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            GpModel(0.5, 1.0, 0.0)
        with pytest.raises(ValueError):
            GpModel(0.5, 1.0, 0.1).add(np.zeros((2, 2)), np.zeros(3))


class TestFitHyperparams:
    def test_recovers_lengthscale(self):
        hits = 0
        for seed in range(10):
            rng = np.random.default_rng(100 + seed)
            X = rng.uniform(LO, HI, size=(200, 2))
            K = rbf(X, X, 0.3) + 0.01 * np.eye(200)
            y = np.linalg.cholesky(K) @ rng.standard_normal(200)
            _, ls = fit_hyperparams(X, y, 1.0, 0.01, mean="zero")
            hits += 0.2 <= ls <= 0.45
        assert hits >= 8

    def test_linear_mean_recovery(self):
        rng = np.random.default_rng(0)
        X = rng.uniform(LO, HI, size=(60, 2))
        rho_star = np.array([4.0, -2.5])
        rho, _ = fit_hyperparams(X, X @ rho_star, 1.0, 1e-6)
        np.testing.assert_allclose(rho, rho_star, rtol=0.05)

    def test_output_beats_grid(self):
        from orc.gp import _profile_nll

        X, y = _data(8, n=80)
        rho, ls = fit_hyperparams(X, y, 1e4, 1e-4)
        best = _profile_nll(X, y, ls, 1e4, 1e-4, "linear")[0]
        for cand in np.geomspace(0.05, 3.0, 16):
            assert best <= _profile_nll(X, y, cand, 1e4, 1e-4, "linear")[0] + 1e-9

    def test_degenerate_warns(self):
        X = np.tile([[0.2, 0.3]], (5, 1))
        with warnings.catch_warnings(record=True) as w:
            warnings.simplefilter("always")
            rho, ls = fit_hyperparams(X, np.ones(5), 1.0, 0.1)
        assert any(issubclass(x.category, RuntimeWarning) for x in w)
        assert ls == 0.5 and np.all(rho == 0)

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_hyperparams(np.zeros((1, 2)), np.zeros(1), 1.0, 0.1)
