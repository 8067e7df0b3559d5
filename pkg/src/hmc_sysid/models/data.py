"""Input/output records, noise models and test-signal generators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import LOG_2PI, Dual, RngStream, gammaln


class UnstableSimulation(Exception):
    """Simulated trajectory left the boundedness guard (|value| > 1e12)."""


class InsufficientData(Exception):
    """Record too short for the requested model order."""


BOUND = 1e12


@dataclass(frozen=True)
class DataSet:
    """One experiment record: input u, output y, sample period dt.

    ``y`` is ``(T,)`` for single-output models or ``(T, n_y)`` for
    multi-output state space models.
    """

    u: np.ndarray
    y: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if u.ndim != 1:
            raise ValueError(f"u must be 1-d, got shape {u.shape}")
        if y.ndim not in (1, 2):
            raise ValueError(f"y must be 1-d or 2-d, got shape {y.shape}")
        if y.shape[0] != u.shape[0]:
            raise ValueError(f"length mismatch: u has {u.shape[0]}, y has {y.shape[0]}")
        if u.shape[0] == 0:
            raise ValueError("empty record")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(y))):
            raise ValueError("record contains non-finite samples")
        if not (self.dt > 0.0 and np.isfinite(self.dt)):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def T(self) -> int:
        return self.u.shape[0]

    @property
    def n_y(self) -> int:
        return 1 if self.y.ndim == 1 else self.y.shape[1]

    def head(self, n: int) -> "DataSet":
        if not 1 <= n <= self.T:
            raise ValueError(f"cannot take {n} of {self.T} samples")
        return DataSet(self.u[:n], self.y[:n], self.dt)

    def split(self, fraction: float) -> tuple["DataSet", int]:
        """Leading estimation portion and its length; fraction 1.0 keeps all."""
        if not 0.0 < fraction <= 1.0:
            raise ValueError(f"estimation fraction must be in (0, 1], got {fraction}")
        n_est = max(1, int(round(fraction * self.T)))
        return self.head(n_est), n_est


# ---------------------------------------------------------------------------
# noise models
# ---------------------------------------------------------------------------

def gaussian_logpdf(e, sigma):
    """Sum of independent N(0, sigma^2) log densities; dual friendly."""
    z = e / sigma
    quad = (z * z).sum() if isinstance(z, Dual) else float(np.sum(z * z))
    n = e.val.size if isinstance(e, Dual) else np.size(e)
    logsig = np.log(sigma)
    return -0.5 * n * LOG_2PI - n * logsig - 0.5 * quad


def studentt_logpdf(e, nu, sigma):
    """Sum of scaled Student-T log densities with nu degrees of freedom."""
    z = e / sigma
    body = np.log(1.0 + (z * z) / nu)
    tot = body.sum() if isinstance(body, Dual) else float(np.sum(body))
    n = e.val.size if isinstance(e, Dual) else np.size(e)
    const = (
        gammaln((nu + 1.0) / 2.0)
        - gammaln(nu / 2.0)
        - 0.5 * np.log(nu * np.pi)
        - np.log(sigma)
    )
    return n * const - 0.5 * (nu + 1.0) * tot


@dataclass(frozen=True)
class GaussianNoise:
    """Additive white Gaussian noise with scale sigma."""

    sigma: object = 1.0

    def logpdf(self, e):
        return gaussian_logpdf(e, self.sigma)

    def draw(self, rng: RngStream, size: int) -> np.ndarray:
        return float(self.sigma) * rng.normal(size)


@dataclass(frozen=True)
class StudentTNoise:
    """Additive Student-T noise; heavier tails absorb outliers."""

    nu: object = 3.0
    sigma: object = 1.0

    def logpdf(self, e):
        return studentt_logpdf(e, self.nu, self.sigma)

    def draw(self, rng: RngStream, size: int) -> np.ndarray:
        return float(self.sigma) * rng.student_t(float(self.nu), size)


# ---------------------------------------------------------------------------
# test signals
# ---------------------------------------------------------------------------

def make_input(kind: str, T: int, rng: RngStream | None = None,
               period: int = 50, amplitude: float = 1.0) -> np.ndarray:
    """Excitation signal of length T.

    ``random_binary`` draws each sample from {-amplitude, +amplitude};
    ``square_wave`` alternates every half period, starting high.
    """
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    if kind == "random_binary":
        if rng is None:
            raise ValueError("random_binary input needs a random stream")
        return amplitude * rng.binary_choice(T)
    if kind == "square_wave":
        if period < 2:
            raise ValueError(f"square wave period must be >= 2, got {period}")
        t = np.arange(T)
        return amplitude * np.where((t // (period // 2)) % 2 == 0, 1.0, -1.0)
    raise ValueError(f"unknown input kind {kind!r}")
