"""Transfer function models against scipy filtering oracles."""

import numpy as np
import pytest
from scipy import signal, stats

from hmc_sysid.models import (
    ArxSpec,
    DataSet,
    GaussianNoise,
    InsufficientData,
    OeSpec,
    StudentTNoise,
    UnstableSimulation,
    arx_loglik,
    arx_predict,
    arx_regressors,
    arx_simulate,
    gaussian_logpdf,
    make_input,
    oe_loglik,
    oe_predict,
    oe_simulate,
    studentt_logpdf,
)
from hmc_sysid.numerics import RngStream, dual_eval, fd_gradient

SPEC71 = ArxSpec(n_a=2, n_b=2)
THETA71 = np.array([-1.5, 0.7, 0.0, 1.0, 0.5])


class TestDataSet:
    def test_split(self):
        data = DataSet(u=np.arange(10.0), y=np.arange(10.0), dt=1.0)
        est, n_est = data.split(0.667)
        assert n_est == 7 and est.T == 7
        full, n = data.split(1.0)
        assert n == 10

    def test_validation(self):
        with pytest.raises(ValueError):
            DataSet(u=np.arange(4.0), y=np.arange(3.0), dt=1.0)
        with pytest.raises(ValueError):
            DataSet(u=np.arange(4.0), y=np.arange(4.0), dt=0.0)

    def test_make_input_square_wave(self):
        u = make_input("square_wave", 8, period=4)
        assert np.array_equal(u, [1, 1, -1, -1, 1, 1, -1, -1])

    def test_make_input_random_binary(self):
        u = make_input("random_binary", 64, RngStream(3, 0), amplitude=2.0)
        assert set(np.unique(u)) <= {-2.0, 2.0}

    def test_noise_logpdfs_match_scipy(self):
        e = np.array([0.3, -1.2, 2.0])
        assert np.isclose(
            gaussian_logpdf(e, 1.3), stats.norm(0, 1.3).logpdf(e).sum(), rtol=1e-13
        )
        assert np.isclose(
            studentt_logpdf(e, 4.0, 0.8),
            stats.t(df=4.0, scale=0.8).logpdf(e).sum(),
            rtol=1e-12,
        )

    def test_noise_draw_scales(self):
        g = GaussianNoise(sigma=2.0).draw(RngStream(5, 0), 4000)
        assert abs(np.std(g) - 2.0) < 0.1
        t = StudentTNoise(nu=30.0, sigma=0.5).draw(RngStream(5, 1), 4000)
        assert abs(np.std(t) - 0.5) < 0.1


class TestArx:
    def test_regressors_hand_oracle(self):
        # y_t = -a1 y_{t-1} - a2 y_{t-2} + b0 u_t + b1 u_{t-1} + b2 u_{t-2}
        u = np.array([1.0, 2.0, 3.0, 4.0])
        y = np.array([10.0, 20.0, 30.0, 40.0])
        data = DataSet(u=u, y=y, dt=1.0)
        Phi, target = arx_regressors(SPEC71, data)
        assert Phi.shape == (2, 5)
        assert np.array_equal(target, [30.0, 40.0])
        assert np.array_equal(Phi[0], [-20.0, -10.0, 3.0, 2.0, 1.0])
        assert np.array_equal(Phi[1], [-30.0, -20.0, 4.0, 3.0, 2.0])

    def test_simulate_matches_scipy_lfilter(self):
        u = make_input("random_binary", 120, RngStream(1, 0))
        silent = GaussianNoise(sigma=0.0)
        y = arx_simulate(SPEC71, THETA71, silent, u, RngStream(1, 1))
        ref = signal.lfilter([0.0, 1.0, 0.5], [1.0, -1.5, 0.7], u)
        assert np.allclose(y, ref, atol=1e-12)

    def test_predict_recovers_simulation(self):
        u = make_input("random_binary", 60, RngStream(2, 0))
        y = arx_simulate(SPEC71, THETA71, GaussianNoise(sigma=0.0), u, RngStream(2, 1))
        data = DataSet(u=u, y=y, dt=1.0)
        yhat = arx_predict(SPEC71, THETA71, data)
        assert np.allclose(yhat, y[SPEC71.t0 :], atol=1e-10)

    def test_loglik_is_gaussian_on_residuals(self):
        u = make_input("random_binary", 50, RngStream(3, 0))
        y = arx_simulate(SPEC71, THETA71, GaussianNoise(sigma=0.3), u, RngStream(3, 1))
        data = DataSet(u=u, y=y, dt=1.0)
        ll = arx_loglik(SPEC71, THETA71, GaussianNoise(sigma=0.3), data)
        resid = y[SPEC71.t0 :] - arx_predict(SPEC71, THETA71, data)
        assert np.isclose(ll, stats.norm(0, 0.3).logpdf(resid).sum(), rtol=1e-12)

    def test_loglik_gradient_matches_fd(self):
        u = make_input("random_binary", 80, RngStream(4, 0))
        y = arx_simulate(SPEC71, THETA71, GaussianNoise(sigma=0.5), u, RngStream(4, 1))
        data = DataSet(u=u, y=y, dt=1.0)

        def f(z):
            return arx_loglik(SPEC71, z[:5], GaussianNoise(sigma=np.exp(z[5])), data)

        x = np.concatenate([THETA71 + 0.05, [np.log(0.4)]])
        _, grad = dual_eval(f, x)
        fd = fd_gradient(f, x, h=1e-6)
        assert np.allclose(grad, fd, rtol=1e-6, atol=1e-6 * max(1, np.abs(fd).max()))

    def test_unstable_simulation_raises(self):
        unstable = np.array([-2.5, 1.6, 0.0, 1.0, 0.0])
        u = np.ones(400)
        with pytest.raises(UnstableSimulation):
            arx_simulate(SPEC71, unstable, GaussianNoise(sigma=0.0), u, RngStream(5, 0))

    def test_insufficient_data(self):
        tiny = DataSet(u=np.ones(2), y=np.ones(2), dt=1.0)
        with pytest.raises(InsufficientData):
            arx_regressors(SPEC71, tiny)


OE_SPEC = OeSpec(n_b=4, n_f=3)
OE_B = np.array([0.0, 0.024, 0.170, 0.113, 0.007])
OE_F = np.array([1.22, 0.56, -0.18])
OE_THETA = np.concatenate([OE_B, OE_F])


class TestOe:
    def test_noise_free_matches_scipy_lfilter(self):
        u = make_input("square_wave", 150, period=50)
        y = oe_simulate(OE_SPEC, OE_THETA, GaussianNoise(sigma=0.0), u, RngStream(6, 0))
        ref = signal.lfilter(OE_B, np.concatenate([[1.0], OE_F]), u)
        assert np.allclose(y, ref, atol=1e-10)

    def test_predict_equals_noise_free_response(self):
        u = make_input("square_wave", 100, period=20)
        clean = oe_simulate(OE_SPEC, OE_THETA, GaussianNoise(sigma=0.0), u, RngStream(7, 0))
        noisy = clean + 0.1 * RngStream(7, 1).normal(100)
        data = DataSet(u=u, y=noisy, dt=1.0)
        yhat = oe_predict(OE_SPEC, OE_THETA, data)
        assert np.allclose(np.asarray(yhat), clean, atol=1e-10)

    def test_loglik_gradient_matches_fd(self):
        u = make_input("square_wave", 90, period=30)
        y = oe_simulate(OE_SPEC, OE_THETA, GaussianNoise(sigma=0.05), u, RngStream(8, 0))
        data = DataSet(u=u, y=y, dt=1.0)

        def f(z):
            return oe_loglik(OE_SPEC, z[:8], GaussianNoise(sigma=np.exp(z[8])), data)

        x = np.concatenate([OE_THETA * 1.02 + 0.001, [np.log(0.06)]])
        _, grad = dual_eval(f, x)
        fd = fd_gradient(f, x, h=1e-7)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-5 * max(1, np.abs(fd).max()))

    def test_unstable_denominator_rejected(self):
        # pole radius > 1: the recursion rails at the guard and the
        # likelihood is effectively -inf long before T
        unstable = np.concatenate([OE_B, [-2.2, 1.5, 0.0]])
        u = make_input("square_wave", 600, period=50)
        y = np.zeros(600)
        data = DataSet(u=u, y=y, dt=1.0)
        ll = oe_loglik(OE_SPEC, unstable, GaussianNoise(sigma=1.0), data)
        assert ll == -np.inf

    def test_unstable_simulation_raises(self):
        unstable = np.concatenate([OE_B, [-2.2, 1.5, 0.0]])
        u = np.ones(600)
        with pytest.raises(UnstableSimulation):
            oe_simulate(OE_SPEC, unstable, GaussianNoise(sigma=0.0), u, RngStream(9, 0))

    def test_coeff_names(self):
        assert OE_SPEC.coeff_names == ("b0", "b1", "b2", "b3", "b4", "f1", "f2", "f3")
        assert SPEC71.coeff_names == ("a1", "a2", "b0", "b1", "b2")
