"""ARX and output-error transfer function models.

Both models share the coefficient layout ``[a_1..a_na, b_0..b_nb]`` (ARX)
or ``[b_0..b_nb, f_1..f_nf]`` (output error).  The ARX one-step predictor
regresses on measured outputs, so its likelihood is a linear least squares
form; the output-error predictor feeds back its own past predictions, which
makes the likelihood a deterministic simulation fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import Dual, RngStream, dual_value
from .data import BOUND, DataSet, InsufficientData, UnstableSimulation


@dataclass(frozen=True)
class ArxSpec:
    """Orders of an ARX model: n_a past outputs, b_0..b_nb input taps."""

    n_a: int
    n_b: int

    def __post_init__(self):
        if self.n_a < 0 or self.n_b < 0:
            raise ValueError(f"orders must be non-negative, got ({self.n_a}, {self.n_b})")
        if self.n_a == 0 and self.n_b < 0:
            raise ValueError("model has no coefficients")

    @property
    def n_coeffs(self) -> int:
        return self.n_a + self.n_b + 1

    @property
    def t0(self) -> int:
        """First index with a full regressor window."""
        return max(self.n_a, self.n_b)

    @property
    def coeff_names(self) -> tuple:
        return tuple(f"a{k}" for k in range(1, self.n_a + 1)) + tuple(
            f"b{k}" for k in range(self.n_b + 1)
        )


def arx_regressors(spec: ArxSpec, data: DataSet) -> tuple[np.ndarray, np.ndarray]:
    """Regressor matrix and target vector for rows t = t0 .. T-1.

    Row t is ``[-y[t-1] .. -y[t-n_a], u[t] .. u[t-n_b]]`` so that
    ``yhat = Phi @ coeffs`` realizes the one-step predictor.
    """
    t0 = spec.t0
    T = data.T
    if T <= t0:
        raise InsufficientData(f"need more than {t0} samples, got {T}")
    y, u = data.y, data.u
    cols = [-y[t0 - k : T - k] for k in range(1, spec.n_a + 1)]
    cols += [u[t0 - k : T - k] for k in range(spec.n_b + 1)]
    phi = np.column_stack(cols) if cols else np.zeros((T - t0, 0))
    return phi, y[t0:]


def arx_predict(spec: ArxSpec, coeffs, data: DataSet):
    """One-step-ahead predictions for t = t0 .. T-1; accepts dual coefficients."""
    phi, _ = arx_regressors(spec, data)
    return phi @ coeffs


def arx_loglik(spec: ArxSpec, coeffs, noise, data: DataSet):
    """Log likelihood of the record under the one-step prediction errors."""
    phi, target = arx_regressors(spec, data)
    resid = target - phi @ coeffs
    return noise.logpdf(resid)


def arx_simulate(spec: ArxSpec, coeffs, noise, u: np.ndarray,
                 rng: RngStream) -> np.ndarray:
    """Simulate the ARX recursion driven by u with additive noise."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (spec.n_coeffs,):
        raise ValueError(f"expected {spec.n_coeffs} coefficients, got {coeffs.shape}")
    a = coeffs[: spec.n_a]
    b = coeffs[spec.n_a :]
    T = u.shape[0]
    e = noise.draw(rng, T)
    y = np.zeros(T)
    for t in range(T):
        acc = e[t]
        for k in range(1, spec.n_a + 1):
            if t - k >= 0:
                acc -= a[k - 1] * y[t - k]
        for k in range(spec.n_b + 1):
            if t - k >= 0:
                acc += b[k] * u[t - k]
        if abs(acc) > BOUND:
            raise UnstableSimulation(f"|y[{t}]| = {abs(acc):.3e} exceeds {BOUND:.0e}")
        y[t] = acc
    return y


# ---------------------------------------------------------------------------
# output error
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OeSpec:
    """Orders of an output-error model: b_0..b_nb input taps, n_f feedback taps."""

    n_b: int
    n_f: int

    def __post_init__(self):
        if self.n_b < 0 or self.n_f < 0:
            raise ValueError(f"orders must be non-negative, got ({self.n_b}, {self.n_f})")

    @property
    def n_coeffs(self) -> int:
        return self.n_b + 1 + self.n_f

    @property
    def coeff_names(self) -> tuple:
        return tuple(f"b{k}" for k in range(self.n_b + 1)) + tuple(
            f"f{k}" for k in range(1, self.n_f + 1)
        )


def _oe_filter(b: np.ndarray, f: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Run yh[t] = sum_k b[k] u[t-k] - sum_j f[j] yh[t-j] with zero initial state.

    Once |yh| leaves the boundedness guard the remaining samples are pinned at
    the guard value; callers treat such trajectories as zero likelihood.
    """
    T = u.shape[0]
    n_f = f.shape[0]
    bu = np.zeros(T)
    for k in range(b.shape[0]):
        if k == 0:
            bu += b[0] * u
        else:
            bu[k:] += b[k] * u[:-k]
    yh = np.zeros(T + n_f)
    frev = f[::-1]
    for t in range(T):
        acc = bu[t] - frev @ yh[t : t + n_f] if n_f else bu[t]
        if abs(acc) > BOUND:
            yh[n_f + t :] = np.sign(acc) * BOUND
            break
        yh[n_f + t] = acc
    return yh[n_f:]


def oe_predict(spec: OeSpec, coeffs, data: DataSet):
    """Simulated (noise-free) model output over the record.

    For dual coefficients the predictor Jacobian is assembled from two extra
    filter passes: dyh/db_k is the input filtered by 1/F and delayed k steps,
    and dyh/df_j is the (negated, delayed) output of 1/F applied to yh itself.
    The tangent then follows by the chain rule, whatever the seeding.
    """
    if isinstance(coeffs, Dual):
        vals = coeffs.val
    else:
        vals = np.asarray(coeffs, dtype=float)
    if vals.shape != (spec.n_coeffs,):
        raise ValueError(f"expected {spec.n_coeffs} coefficients, got {vals.shape}")
    b = vals[: spec.n_b + 1]
    f = vals[spec.n_b + 1 :]
    yh = _oe_filter(b, f, data.u)
    if not isinstance(coeffs, Dual):
        return yh

    T = data.T
    jac = np.zeros((T, spec.n_coeffs))
    g = _oe_filter(np.array([1.0]), f, data.u)
    for k in range(spec.n_b + 1):
        jac[k:, k] = g[: T - k] if k else g
    s = _oe_filter(np.array([1.0]), f, yh)
    for j in range(1, spec.n_f + 1):
        jac[j:, spec.n_b + j] = -s[: T - j]
    return Dual(yh, jac @ coeffs.tan)


def oe_loglik(spec: OeSpec, coeffs, noise, data: DataSet):
    """Log likelihood of the record under the simulation errors.

    Returns -inf when the predictor hits the boundedness guard, which rejects
    unstable feedback polynomials instead of propagating overflow.
    """
    yh = oe_predict(spec, coeffs, data)
    vals = dual_value(yh)
    if not np.all(np.isfinite(vals)) or np.max(np.abs(vals)) >= BOUND:
        return -np.inf
    return noise.logpdf(data.y - yh)


def oe_simulate(spec: OeSpec, coeffs, noise, u: np.ndarray,
                rng: RngStream) -> np.ndarray:
    """Simulate the output-error model: noise-free response plus output noise."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (spec.n_coeffs,):
        raise ValueError(f"expected {spec.n_coeffs} coefficients, got {coeffs.shape}")
    yh = _oe_filter(coeffs[: spec.n_b + 1], coeffs[spec.n_b + 1 :], u)
    if np.max(np.abs(yh)) >= BOUND:
        raise UnstableSimulation("noise-free response exceeded the boundedness guard")
    return yh + noise.draw(rng, u.shape[0])
