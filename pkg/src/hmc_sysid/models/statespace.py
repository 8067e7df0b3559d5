"""Linear and nonlinear state space models.

Linear Gaussian models are scored by the prediction-error decomposition: a
Kalman filter turns the record into a sequence of Gaussian innovations whose
densities multiply into the likelihood, so the latent state never has to be
sampled.  Nonlinear models instead carry the full state trajectory as part
of the sampled vector and are scored by the joint density of transitions,
observations and the initial state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..numerics import (
    LOG_2PI,
    Dual,
    RngStream,
    dual_logdet,
    dual_matinv,
    dual_value,
)
from .data import BOUND, DataSet, UnstableSimulation


class SingularMassMatrix(Exception):
    """Configuration-dependent mass matrix lost positive definiteness."""


# ---------------------------------------------------------------------------
# linear Gaussian state space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LgssSpec:
    """Linear Gaussian state space model with a user-supplied parameterization.

    ``build(theta)`` returns ``(A, B, C, D, Q, R)``; the initial state belief
    is fixed at mean zero with covariance ``p0 * I``, wide enough to wash out
    after a few samples.
    """

    n_x: int
    n_y: int
    build: Callable = None
    theta_names: tuple = ()
    p0: float = 10.0

    @property
    def n_theta(self) -> int:
        return len(self.theta_names)


def kalman_loglik(spec: LgssSpec, theta, data: DataSet):
    """Prediction-error log likelihood of a linear Gaussian state space model.

    Accepts dual ``theta`` for gradient passes.  Returns -inf when an
    innovation covariance loses positive definiteness, which rejects the
    parameter point instead of crashing the chain.
    """
    A, B, C, D, Q, R = spec.build(theta)
    n_x, n_y = spec.n_x, spec.n_y
    y = data.y.reshape(data.T, n_y)
    u = data.u.reshape(data.T, 1)

    ndir = theta.ndir if isinstance(theta, Dual) else None
    x = Dual.constant(np.zeros(n_x), ndir) if ndir is not None else np.zeros(n_x)
    P = (
        Dual.constant(spec.p0 * np.eye(n_x), ndir)
        if ndir is not None
        else spec.p0 * np.eye(n_x)
    )

    ll = 0.0
    for t in range(data.T):
        yhat = C @ x + D @ u[t]
        S = C @ P @ C.T + R
        S_val = dual_value(S)
        if not np.all(np.isfinite(S_val)) or np.min(np.linalg.eigvalsh(S_val)) <= 0.0:
            return -np.inf
        S_inv = dual_matinv(S)
        innov = y[t] - yhat
        quad = innov @ (S_inv @ innov)
        ll = ll + (-0.5 * (n_y * LOG_2PI + dual_logdet(S) + quad))

        K = P @ C.T @ S_inv
        x = x + K @ innov
        P = P - K @ S @ K.T
        P = (P + P.T) * 0.5

        x = A @ x + B @ u[t]
        P = A @ P @ A.T + Q
        P = (P + P.T) * 0.5
        if not np.all(np.isfinite(dual_value(x))):
            return -np.inf
    return ll


def kalman_predictions(spec: LgssSpec, theta, data: DataSet) -> np.ndarray:
    """One-step-ahead output predictions under fixed parameters."""
    A, B, C, D, Q, R = (np.asarray(m, dtype=float) for m in spec.build(theta))
    n_x, n_y = spec.n_x, spec.n_y
    y = data.y.reshape(data.T, n_y)
    u = data.u.reshape(data.T, 1)
    x = np.zeros(n_x)
    P = spec.p0 * np.eye(n_x)
    yhat = np.zeros((data.T, n_y))
    for t in range(data.T):
        yhat[t] = C @ x + D @ u[t]
        S = C @ P @ C.T + R
        K = P @ C.T @ np.linalg.inv(S)
        x = x + K @ (y[t] - yhat[t])
        P = P - K @ S @ K.T
        P = (P + P.T) * 0.5
        x = A @ x + B @ u[t]
        P = A @ P @ A.T + Q
        P = (P + P.T) * 0.5
    return yhat if n_y > 1 else yhat[:, 0]


def lgss_simulate(spec: LgssSpec, theta, u: np.ndarray, rng: RngStream,
                  x0: np.ndarray | None = None) -> np.ndarray:
    """Draw one output record from the generative model (noise included)."""
    A, B, C, D, Q, R = (np.asarray(m, dtype=float) for m in spec.build(theta))
    T = u.shape[0]
    x = np.zeros(spec.n_x) if x0 is None else np.asarray(x0, dtype=float)
    Lq = np.linalg.cholesky(Q + 1e-300 * np.eye(spec.n_x))
    Lr = np.linalg.cholesky(R + 1e-300 * np.eye(spec.n_y))
    y = np.zeros((T, spec.n_y))
    for t in range(T):
        y[t] = C @ x + D @ u[t : t + 1] + Lr @ rng.normal(spec.n_y)
        x = A @ x + B @ u[t : t + 1] + Lq @ rng.normal(spec.n_x)
        if np.max(np.abs(x)) > BOUND:
            raise UnstableSimulation(f"state norm exceeded guard at t={t}")
    return y if spec.n_y > 1 else y[:, 0]


# ---------------------------------------------------------------------------
# numerical integration
# ---------------------------------------------------------------------------

def rk4_step(f: Callable, x: tuple, u, theta, dt: float) -> tuple:
    """Classic fourth-order Runge-Kutta step for dx/dt = f(x, u, theta).

    States are tuples of components (scalars, arrays or duals) so the same
    integrator serves scalar tests, batched trajectories and gradient passes.
    The input is held constant over the step.
    """
    def shift(base, k, w):
        return tuple(b + w * ki for b, ki in zip(base, k))

    k1 = f(x, u, theta)
    k2 = f(shift(x, k1, 0.5 * dt), u, theta)
    k3 = f(shift(x, k2, 0.5 * dt), u, theta)
    k4 = f(shift(x, k3, dt), u, theta)
    sixth = dt / 6.0
    return tuple(
        xi + sixth * (a + 2.0 * b + 2.0 * c + d)
        for xi, a, b, c, d in zip(x, k1, k2, k3, k4)
    )


# ---------------------------------------------------------------------------
# nonlinear state space
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NlssSpec:
    """Nonlinear state space model with fixed diagonal noise scales.

    ``dynamics(x, u, theta)`` returns the state derivative (continuous time,
    integrated with RK4 over ``dt / substeps``); ``measure(x, u, theta)``
    returns the expected observation.  Both take and return tuples of
    components and must be vectorized over trailing batch shapes.
    """

    n_x: int
    n_y: int
    dynamics: Callable
    measure: Callable
    theta_names: tuple
    q: tuple
    r: tuple
    x1_mean: tuple
    x1_sd: tuple
    dt: float = 1.0
    substeps: int = 1

    def __post_init__(self):
        if len(self.q) != self.n_x or len(self.x1_mean) != self.n_x:
            raise ValueError("process noise and initial-state sizes must match n_x")
        if len(self.r) != self.n_y:
            raise ValueError("measurement noise size must match n_y")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")

    @property
    def n_theta(self) -> int:
        return len(self.theta_names)

    def step(self, x: tuple, u, theta) -> tuple:
        h = self.dt / self.substeps
        for _ in range(self.substeps):
            x = rk4_step(self.dynamics, x, u, theta, h)
        return x


def _split_components(arr, n: int) -> tuple:
    """Columns of a (T, n) array (or Dual) as a tuple of (T,) components."""
    return tuple(arr[..., i] for i in range(n))


def nlss_logjoint(spec: NlssSpec, theta, x, data: DataSet):
    """Joint log density of states and record, up to the parameter prior.

    ``x`` is the full trajectory, shape (T, n_x).  The value decomposes as
    observation terms + transition terms + initial state term; all three are
    evaluated vectorized over time.
    """
    T = data.T
    y = data.y.reshape(T, spec.n_y)
    u = data.u

    xc = _split_components(x, spec.n_x)
    yp = spec.measure(xc, u, theta)
    lp = 0.0
    for i in range(spec.n_y):
        resid = (y[:, i] - yp[i]) / spec.r[i]
        lp = lp + (-0.5 * T * LOG_2PI - T * np.log(spec.r[i]) - 0.5 * _sum_sq(resid))

    xprev = tuple(c[:-1] for c in xc)
    xpred = spec.step(xprev, u[:-1], theta)
    for i in range(spec.n_x):
        w = (xc[i][1:] - xpred[i]) / spec.q[i]
        lp = lp + (
            -0.5 * (T - 1) * LOG_2PI - (T - 1) * np.log(spec.q[i]) - 0.5 * _sum_sq(w)
        )

    for i in range(spec.n_x):
        z = (xc[i][0] - spec.x1_mean[i]) / spec.x1_sd[i]
        lp = lp + (-0.5 * LOG_2PI - np.log(spec.x1_sd[i]) - 0.5 * z * z)
    return lp


def _sum_sq(v):
    return (v * v).sum() if isinstance(v, Dual) else float(np.sum(v * v))


def nlss_logjoint_grad(spec: NlssSpec, theta: np.ndarray, x: np.ndarray,
                       data: DataSet) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and gradient of the joint density in one vectorized forward pass.

    Each transition term touches only (x_t, x_{t+1}, theta) and each
    observation term only (x_t, theta), so all terms of a kind share one
    batched dual evaluation with a small tangent basis; the per-term tangents
    are then scattered into the dense gradient.  Cost is O(T (2 n_x + n_p))
    instead of the O(T^2) of seeding the whole trajectory at once.
    """
    T = data.T
    n_x, n_p = spec.n_x, spec.n_theta
    y = data.y.reshape(T, spec.n_y)
    u = data.u
    theta = np.asarray(theta, dtype=float)
    x = np.asarray(x, dtype=float)

    grad_theta = np.zeros(n_p)
    grad_x = np.zeros((T, n_x))
    value = 0.0

    # observation terms: directions = [x_t (n_x), theta (n_p)]
    width = n_x + n_p
    xc = tuple(
        Dual(x[:, i], _basis_column(T, width, i)) for i in range(n_x)
    )
    th = tuple(
        Dual(np.full(T, theta[j]), _basis_column(T, width, n_x + j))
        for j in range(n_p)
    )
    yp = spec.measure(xc, u, th)
    for i in range(spec.n_y):
        resid = (y[:, i] - yp[i]) / spec.r[i]
        term = -0.5 * (resid * resid)
        value += float(np.sum(dual_value(term))) - T * (0.5 * LOG_2PI + np.log(spec.r[i]))
        if isinstance(term, Dual):
            grad_x += term.tan[:, :n_x]
            grad_theta += term.tan[:, n_x:].sum(axis=0)

    # transition terms: directions = [x_t (n_x), x_{t+1} (n_x), theta (n_p)]
    width = 2 * n_x + n_p
    n = T - 1
    xprev = tuple(Dual(x[:-1, i], _basis_column(n, width, i)) for i in range(n_x))
    xnext = tuple(Dual(x[1:, i], _basis_column(n, width, n_x + i)) for i in range(n_x))
    th = tuple(
        Dual(np.full(n, theta[j]), _basis_column(n, width, 2 * n_x + j))
        for j in range(n_p)
    )
    xpred = spec.step(xprev, u[:-1], th)
    for i in range(n_x):
        w = (xnext[i] - xpred[i]) / spec.q[i]
        term = -0.5 * (w * w)
        value += float(np.sum(term.val)) - n * (0.5 * LOG_2PI + np.log(spec.q[i]))
        grad_x[:-1] += term.tan[:, :n_x]
        grad_x[1:] += term.tan[:, n_x : 2 * n_x]
        grad_theta += term.tan[:, 2 * n_x :].sum(axis=0)

    # initial state term, analytic
    for i in range(n_x):
        z = (x[0, i] - spec.x1_mean[i]) / spec.x1_sd[i]
        value += -0.5 * LOG_2PI - np.log(spec.x1_sd[i]) - 0.5 * z * z
        grad_x[0, i] += -z / spec.x1_sd[i]

    return value, grad_theta, grad_x


def _basis_column(n: int, width: int, j: int) -> np.ndarray:
    tan = np.zeros((n, width))
    tan[:, j] = 1.0
    return tan


def nlss_simulate(spec: NlssSpec, theta, u: np.ndarray, rng: RngStream,
                  x0) -> tuple[np.ndarray, np.ndarray]:
    """Simulate states and observations; returns ``(y, states)``.

    ``x0`` is the deterministic initial state of the simulation; process and
    measurement noise are drawn with the fixed scales in the spec.
    """
    T = u.shape[0]
    theta = np.asarray(theta, dtype=float)
    q = np.asarray(spec.q, dtype=float)
    r = np.asarray(spec.r, dtype=float)
    states = np.zeros((T, spec.n_x))
    y = np.zeros((T, spec.n_y))
    x = tuple(float(v) for v in np.asarray(x0, dtype=float))
    for t in range(T):
        states[t] = x
        g = spec.measure(tuple(np.array([c]) for c in x), u[t : t + 1], theta)
        y[t] = np.array([float(gi[0]) for gi in g]) + r * rng.normal(spec.n_y)
        xn = spec.step(tuple(np.array([c]) for c in x), u[t : t + 1], theta)
        x = tuple(float(c[0]) + q[i] * rng.normal() for i, c in enumerate(xn))
        if max(abs(c) for c in x) > BOUND:
            raise UnstableSimulation(f"state exceeded guard at t={t}")
    return y, states
