"""Rotary pendulum rigid-body model: hand values, energy balance, gradients."""

import numpy as np
import pytest

from hmc_sysid.models import (
    GRAVITY,
    L_P,
    L_R,
    M_P,
    THETA_NOMINAL,
    SingularMassMatrix,
    pendulum_dynamics,
    pendulum_energy,
    pendulum_forcing,
    pendulum_mass_matrix,
    pendulum_measure,
    pendulum_rate_matrix,
    rk4_step,
)
from hmc_sysid.numerics import dual_eval, fd_gradient

THETA = np.array(THETA_NOMINAL)


class TestComponents:
    def test_mass_matrix_hanging(self):
        m11, m12, m22 = pendulum_mass_matrix(0.0, THETA)
        assert np.isclose(m11, THETA[0] + M_P * L_R ** 2)
        assert np.isclose(m12, -0.5 * M_P * L_P * L_R)
        assert np.isclose(m22, THETA[1] + 0.25 * M_P * L_P ** 2)

    def test_mass_matrix_horizontal(self):
        m11, m12, m22 = pendulum_mass_matrix(np.pi / 2.0, THETA)
        assert np.isclose(m11, THETA[0] + M_P * L_R ** 2 + 0.25 * M_P * L_P ** 2)
        assert np.isclose(m12, 0.0, atol=1e-17)
        assert np.isclose(m22, THETA[1] + 0.25 * M_P * L_P ** 2)

    def test_forcing_hand_values(self):
        x = (0.0, np.pi / 2.0, 2.0, 0.0)
        tau, grav = pendulum_forcing(x, 5.0, THETA)
        k_m, R_m = THETA[2], THETA[3]
        assert np.isclose(tau, k_m * (5.0 - k_m * 2.0) / R_m)
        assert np.isclose(grav, -0.5 * M_P * L_P * GRAVITY)

    def test_rate_matrix_at_rest(self):
        n11, n12, n21, n22 = pendulum_rate_matrix((0.0, 0.7, 0.0, 0.0), THETA)
        assert np.isclose(n11, THETA[4])
        assert np.isclose(n22, THETA[5])
        assert n12 == 0.0 and n21 == 0.0

    def test_measure_current(self):
        x = (0.3, -0.2, 1.5, 0.0)
        y1, y2, i_m = pendulum_measure(x, 4.0, THETA)
        assert y1 == 0.3 and y2 == -0.2
        assert np.isclose(i_m, (4.0 - THETA[2] * 1.5) / THETA[3])

    def test_hanging_equilibrium_is_fixed_point(self):
        dx = pendulum_dynamics((0.0, 0.0, 0.0, 0.0), 0.0, THETA)
        assert all(np.isclose(d, 0.0, atol=1e-15) for d in dx)

    def test_batched_states(self):
        x = tuple(np.array([v, 2.0 * v]) for v in (0.1, 0.2, 0.3, 0.4))
        dx = pendulum_dynamics(x, np.array([1.0, 2.0]), THETA)
        assert all(d.shape == (2,) for d in dx)
        single = pendulum_dynamics((0.1, 0.2, 0.3, 0.4), 1.0, THETA)
        assert all(np.isclose(d[0], s) for d, s in zip(dx, single))

    def test_singular_mass_matrix_raises(self):
        bad = THETA.copy()
        bad[0] = -1.0
        with pytest.raises(SingularMassMatrix):
            pendulum_dynamics((0.0, 0.0, 0.0, 0.0), 0.0, bad)


class TestEnergy:
    def test_conserved_without_dissipation(self):
        # kill motor coupling and damping, swing from a large angle
        free = THETA.copy()
        free[2] = 0.0
        free[4] = 0.0
        free[5] = 0.0
        x = (0.0, 2.0, 0.0, 0.0)
        e0 = pendulum_energy(x, free)
        drift = 0.0
        for _ in range(2000):
            x = rk4_step(pendulum_dynamics, x, 0.0, free, 1e-3)
            drift = max(drift, abs(pendulum_energy(x, free) - e0))
        # compare against the potential-energy amplitude, not e0 itself, which
        # can sit arbitrarily close to zero
        scale = 0.5 * M_P * L_P * GRAVITY
        assert drift < 1e-6 * scale

    def test_damping_dissipates(self):
        free = THETA.copy()
        free[2] = 0.0  # no motor torque, only D_r and D_p act
        x = (0.0, 2.0, 0.0, 0.0)
        energies = [pendulum_energy(x, free)]
        for _ in range(500):
            x = rk4_step(pendulum_dynamics, x, 0.0, free, 2e-3)
            energies.append(pendulum_energy(x, free))
        diffs = np.diff(energies)
        assert np.all(diffs <= 1e-12)
        assert energies[-1] < energies[0] - 1e-6


class TestGradients:
    def test_dynamics_gradient_in_theta(self):
        x = (0.2, 1.1, -0.4, 0.8)

        def acc1(theta):
            return pendulum_dynamics(x, 2.5, theta)[2]

        value, grad = dual_eval(acc1, THETA)
        assert np.isclose(value, acc1(THETA), rtol=1e-14)
        fd = fd_gradient(acc1, THETA, h=1e-9)
        assert np.allclose(grad, fd, rtol=5e-5)

    def test_dynamics_gradient_in_state(self):
        def acc2(x):
            return pendulum_dynamics(tuple(x), 1.0, THETA)[3]

        x0 = np.array([0.1, 0.9, 0.3, -0.6])
        value, grad = dual_eval(acc2, x0)
        fd = fd_gradient(acc2, x0, h=1e-6)
        assert np.allclose(grad, fd, rtol=1e-5, atol=1e-8)
