"""Chain quality measures and posterior summaries.

Autocorrelation uses the biased (1/N) estimator, integrated autocorrelation
time uses the initial-positive-sequence truncation on pairwise sums, and the
model fit score compares predictions to held-out output on the raw (not
mean-centered) scale, in percent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .priors import ParameterSpace


class ZeroVariance(Exception):
    """Draws are constant; autocorrelation is undefined."""


class AllZeroOutput(Exception):
    """Model fit is undefined when the reference output is identically zero."""


class PoleOnGrid(Exception):
    """Every draw's denominator vanishes at some frequency grid point."""


IACT_FLOOR = 0.1


def acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelation at lags 0..max_lag with the biased 1/N normalization.

    The biased estimator trades a little lag-wise bias for a positive
    semidefinite sequence, which keeps downstream truncation stable.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] < 2:
        raise ValueError(f"need a 1-d series with >= 2 points, got shape {x.shape}")
    n = x.shape[0]
    if not 0 <= max_lag < n:
        raise ValueError(f"max_lag must be in [0, {n - 1}], got {max_lag}")
    xc = x - np.mean(x)
    c0 = float(xc @ xc) / n
    if c0 <= 0.0 or not np.isfinite(c0):
        raise ZeroVariance("series has no variance")
    # FFT autocorrelation with zero padding to avoid circular wraparound
    nfft = 1
    while nfft < 2 * n:
        nfft *= 2
    f = np.fft.rfft(xc, nfft)
    full = np.fft.irfft(f * np.conj(f), nfft)[: max_lag + 1]
    return full / (n * c0)


def iact(x: np.ndarray, max_lag: int | None = None) -> float:
    """Integrated autocorrelation time via the initial positive sequence.

    Consecutive lag pairs are summed (for a reversible chain these pair sums
    are positive and decreasing); summation stops at the first non-positive
    pair.  The result is floored at 0.1 so anti-correlated chains, which mix
    better than independent draws, keep a positive time.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    if max_lag is None:
        max_lag = n - 1
    rho = acf(x, max_lag)
    total = 0.0
    m = 0
    while 2 * m + 1 <= max_lag:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        total += pair
        m += 1
    return max(2.0 * total - 1.0, IACT_FLOOR)


def ess(x: np.ndarray, max_lag: int | None = None) -> float:
    """Effective sample size: draws divided by integrated autocorrelation time."""
    x = np.asarray(x, dtype=float)
    return x.shape[0] / iact(x, max_lag)


def model_fit(y: np.ndarray, yhat: np.ndarray) -> float:
    """Percentage fit 100 (1 - ||yhat - y||^2 / ||y||^2); 100 is a perfect match.

    The reference energy is the raw sum of squares of y, so records centered
    near zero are scored against their full signal power.
    """
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape:
        raise ValueError(f"shape mismatch: y {y.shape}, yhat {yhat.shape}")
    denom = float(np.sum(y * y))
    if denom == 0.0:
        raise AllZeroOutput("reference output is identically zero")
    return 100.0 * (1.0 - float(np.sum((yhat - y) ** 2)) / denom)


# ---------------------------------------------------------------------------
# posterior summaries
# ---------------------------------------------------------------------------

@dataclass
class Summary:
    """Per-coordinate posterior table on the constrained scale."""

    names: list
    mean: np.ndarray
    sd: np.ndarray
    q025: np.ndarray
    median: np.ndarray
    q975: np.ndarray
    iact: np.ndarray
    ess: np.ndarray
    n_draws: int

    def to_dict(self) -> dict:
        return {
            "n_draws": self.n_draws,
            "parameters": [
                {
                    "name": self.names[i],
                    "mean": float(self.mean[i]),
                    "sd": float(self.sd[i]),
                    "q025": float(self.q025[i]),
                    "median": float(self.median[i]),
                    "q975": float(self.q975[i]),
                    "iact": float(self.iact[i]),
                    "ess": float(self.ess[i]),
                }
                for i in range(len(self.names))
            ],
        }

    def row(self, name: str) -> dict:
        i = self.names.index(name)
        return {
            "mean": float(self.mean[i]),
            "sd": float(self.sd[i]),
            "q025": float(self.q025[i]),
            "median": float(self.median[i]),
            "q975": float(self.q975[i]),
            "iact": float(self.iact[i]),
            "ess": float(self.ess[i]),
        }


def summarize(draws: np.ndarray, space: ParameterSpace | None = None,
              names: list | None = None) -> Summary:
    """Summary statistics per coordinate, mapped to the constrained scale.

    With a parameter space the draws are assumed unconstrained; transforms
    are applied elementwise and coordinates of hyperparameter blocks
    (shrinkage scales) are dropped from the table.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] < 2:
        raise ValueError(f"need a (n >= 2, dim) draw matrix, got shape {draws.shape}")
    if space is not None:
        if draws.shape[1] != space.dim:
            raise ValueError(
                f"draws have {draws.shape[1]} columns, space has {space.dim}"
            )
        values = space.constrain(draws)
        keep = ~space.hyper_mask
        values = values[:, keep]
        names = [n for n, k in zip(space.constrained_names, keep) if k]
    else:
        values = draws
        if names is None:
            names = [f"x[{i}]" for i in range(draws.shape[1])]
        if len(names) != draws.shape[1]:
            raise ValueError(f"{len(names)} names for {draws.shape[1]} columns")

    n, d = values.shape
    q = np.percentile(values, [2.5, 50.0, 97.5], axis=0)
    iacts = np.empty(d)
    for i in range(d):
        try:
            iacts[i] = iact(values[:, i])
        except ZeroVariance:
            iacts[i] = np.inf
    return Summary(
        names=list(names),
        mean=values.mean(axis=0),
        sd=values.std(axis=0, ddof=1),
        q025=q[0],
        median=q[1],
        q975=q[2],
        iact=iacts,
        ess=n / iacts,
        n_draws=n,
    )


# ---------------------------------------------------------------------------
# frequency response
# ---------------------------------------------------------------------------

@dataclass
class FrequencyResponse:
    """Sampled transfer function G(e^{j omega}) over posterior draws.

    ``response`` is (draws, frequencies) complex; grid cells where the
    denominator polynomial nearly vanishes are set to nan and excluded from
    the posterior mean.
    """

    omega: np.ndarray
    response: np.ndarray
    mean: np.ndarray
    n_excluded: int

    def to_dict(self, max_draws: int = 200) -> dict:
        r = self.response
        if r.shape[0] > max_draws:
            idx = np.linspace(0, r.shape[0] - 1, max_draws).astype(int)
            r = r[idx]
        return {
            "omega": self.omega.tolist(),
            "mean": [[float(np.real(v)), float(np.imag(v))] for v in self.mean],
            "draws": [
                [[float(np.real(v)), float(np.imag(v))] for v in row] for row in r
            ],
            "n_excluded": int(self.n_excluded),
        }


def default_omega_grid(n: int = 200) -> np.ndarray:
    """Log-spaced digital frequencies from 1e-3 to pi."""
    return np.geomspace(1e-3, np.pi, n)


def freq_response(num_coeffs: np.ndarray, den_coeffs: np.ndarray,
                  omega: np.ndarray | None = None,
                  den_tol: float = 1e-12) -> FrequencyResponse:
    """Transfer function values per posterior draw on a frequency grid.

    ``num_coeffs`` holds rows of ``[b_0 .. b_nb]`` and ``den_coeffs`` rows of
    ``[c_1 .. c_nc]`` for a monic denominator ``1 + sum_k c_k z^-k``; for an
    ARX model the denominator coefficients are the a's, for an output-error
    model the f's.
    """
    if omega is None:
        omega = default_omega_grid()
    omega = np.asarray(omega, dtype=float)
    num = np.atleast_2d(np.asarray(num_coeffs, dtype=float))
    den = np.atleast_2d(np.asarray(den_coeffs, dtype=float))
    if num.shape[0] != den.shape[0]:
        raise ValueError(
            f"draw count mismatch: {num.shape[0]} numerators, {den.shape[0]} denominators"
        )

    # z^-k on the unit circle, shape (W, max_order + 1)
    kmax = max(num.shape[1] - 1, den.shape[1])
    zpow = np.exp(-1j * np.outer(omega, np.arange(kmax + 1)))
    B = num @ zpow[:, : num.shape[1]].T
    A = 1.0 + den @ zpow[:, 1 : den.shape[1] + 1].T

    bad = np.abs(A) < den_tol
    n_excluded = int(np.sum(bad))
    G = np.where(bad, np.nan + 0j, B / np.where(bad, 1.0, A))
    if np.all(bad, axis=0).any():
        raise PoleOnGrid(
            "a frequency grid point lost every draw to denominator zeros"
        )
    mean = np.nanmean(np.where(bad, np.nan + 0j, G), axis=0)
    return FrequencyResponse(omega=omega, response=G, mean=mean, n_excluded=n_excluded)
