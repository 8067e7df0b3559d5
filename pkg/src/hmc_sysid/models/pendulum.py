"""Rotary inverted pendulum on a DC-motor driven arm.

State is ``(theta, alpha, theta_dot, alpha_dot)``: arm angle, pendulum angle
(zero hanging down), and their rates.  The rigid-body dynamics are

    M(alpha) [theta_ddot; alpha_ddot] = forcing - nu(rates) [theta_dot; alpha_dot]

with a configuration-dependent mass matrix M, gravity/motor forcing, and a
rate matrix ``nu`` collecting Coriolis, centripetal and viscous terms.  The
motor is voltage driven; back EMF enters through the armature current
``i_m = (V - k_m theta_dot) / R_m`` which is also the third measured output.

All functions take state components as a tuple and are vectorized over
trailing batch shapes; they accept dual numbers, so the same code serves
simulation and gradient evaluation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import dual_value
from .statespace import SingularMassMatrix

THETA_NAMES = ("J_r", "J_p", "k_m", "R_m", "D_r", "D_p")

# physical constants of the rig (pendulum mass/length, arm length, gravity)
M_P = 0.024
L_P = 0.129
L_R = 0.085
GRAVITY = 9.81

# nominal data-sheet values for the estimated parameters, in THETA_NAMES order:
# rotor and pendulum inertia, motor constant, armature resistance, viscous
# damping of arm and pendulum
THETA_NOMINAL = (5.7e-5, 3.4e-5, 0.042, 8.4, 1.5e-3, 5e-4)


@dataclass(frozen=True)
class PendulumConstants:
    m_p: float = M_P
    L_p: float = L_P
    L_r: float = L_R
    g: float = GRAVITY


DEFAULT_CONSTANTS = PendulumConstants()


def pendulum_mass_matrix(alpha, theta, consts: PendulumConstants = DEFAULT_CONSTANTS):
    """Entries (m11, m12, m22) of the symmetric mass matrix at angle alpha."""
    J_r, J_p = theta[0], theta[1]
    c = consts
    sa = np.sin(alpha)
    ca = np.cos(alpha)
    m11 = J_r + c.m_p * c.L_r ** 2 + 0.25 * c.m_p * c.L_p ** 2 * (sa * sa)
    m12 = -0.5 * c.m_p * c.L_p * c.L_r * ca
    m22 = J_p + 0.25 * c.m_p * c.L_p ** 2
    return m11, m12, m22


def pendulum_forcing(x, V, theta, consts: PendulumConstants = DEFAULT_CONSTANTS):
    """Motor torque and gravity torque before rate-dependent terms."""
    k_m, R_m = theta[2], theta[3]
    tau = k_m * (V - k_m * x[2]) / R_m
    grav = -0.5 * consts.m_p * consts.L_p * consts.g * np.sin(x[1])
    return tau, grav


def pendulum_rate_matrix(x, theta, consts: PendulumConstants = DEFAULT_CONSTANTS):
    """Entries of nu(theta_dot, alpha_dot): Coriolis, centripetal and damping."""
    D_r, D_p = theta[4], theta[5]
    c = consts
    sa = np.sin(x[1])
    ca = np.cos(x[1])
    n11 = 0.5 * c.m_p * c.L_p ** 2 * sa * ca * x[3] + D_r
    n12 = 0.5 * c.m_p * c.L_p * c.L_r * sa * x[3]
    n21 = -0.25 * c.m_p * c.L_p ** 2 * sa * ca * x[2]
    n22 = D_p
    return n11, n12, n21, n22


def pendulum_dynamics(x, V, theta,
                      consts: PendulumConstants = DEFAULT_CONSTANTS) -> tuple:
    """State derivative of the pendulum; solves the 2x2 mass matrix in place."""
    m11, m12, m22 = pendulum_mass_matrix(x[1], theta, consts)
    f1, f2 = pendulum_forcing(x, V, theta, consts)
    n11, n12, n21, n22 = pendulum_rate_matrix(x, theta, consts)

    rhs1 = f1 - (n11 * x[2] + n12 * x[3])
    rhs2 = f2 - (n21 * x[2] + n22 * x[3])
    det = m11 * m22 - m12 * m12
    det_val = dual_value(det)
    if np.min(det_val) <= 0.0 or not np.all(np.isfinite(det_val)):
        raise SingularMassMatrix("mass matrix determinant is not positive")
    acc1 = (m22 * rhs1 - m12 * rhs2) / det
    acc2 = (m11 * rhs2 - m12 * rhs1) / det
    return x[2], x[3], acc1, acc2


def pendulum_measure(x, V, theta,
                     consts: PendulumConstants = DEFAULT_CONSTANTS) -> tuple:
    """Measured outputs: both angles and the armature current."""
    k_m, R_m = theta[2], theta[3]
    i_m = (V - k_m * x[2]) / R_m
    return x[0], x[1], i_m


def pendulum_energy(x, theta, consts: PendulumConstants = DEFAULT_CONSTANTS):
    """Mechanical energy; conserved when damping and motor coupling are zero."""
    m11, m12, m22 = pendulum_mass_matrix(x[1], theta, consts)
    kinetic = 0.5 * (m11 * x[2] * x[2] + 2.0 * m12 * x[2] * x[3] + m22 * x[3] * x[3])
    potential = -0.5 * consts.m_p * consts.L_p * consts.g * np.cos(x[1])
    return kinetic + potential
