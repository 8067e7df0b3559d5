"""MCMC kernels over unconstrained parameter vectors.

Three kernels share one chain driver: random-walk Metropolis-Hastings, a
quasi-Newton Langevin proposal (mMALA) whose local metric comes from finite
differences of the gradient, and Hamiltonian Monte Carlo with a leapfrog
integrator and jittered trajectory lengths.  Warmup adapts the step size by
dual averaging toward a kernel-specific acceptance rate and, for HMC, a
diagonal mass matrix from the warmup draws.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .numerics import (
    LOG_2PI,
    NonFiniteEvaluation,
    NotPositiveDefinite,
    RngStream,
    fd_gradient,
)
from .models.statespace import SingularMassMatrix


class InitializationFailure(Exception):
    """No finite starting point found within the retry budget."""


# acceptance-rate targets per kernel: the classic optimal-scaling value for
# random walks, the Langevin value for mMALA, and the common HMC setting
DEFAULT_TARGET_ACCEPT = {"mh": 0.234, "mmala": 0.574, "hmc": 0.8}

DIVERGENCE_THRESHOLD = 1000.0

_TARGET_ERRORS = (
    NotPositiveDefinite,
    NonFiniteEvaluation,
    SingularMassMatrix,
    FloatingPointError,
    OverflowError,
    ZeroDivisionError,
)


class TargetDensity:
    """Log density (and gradient) of the distribution a chain explores.

    Wraps user callables with evaluation counters so sampler comparisons can
    run on matched budgets, and converts numeric failures inside the model
    into a -inf density, which the kernels treat as an ordinary rejection.
    """

    def __init__(self, dim: int, log_density, value_and_grad=None, name: str = ""):
        if dim <= 0:
            raise ValueError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        self.name = name
        self._log_density = log_density
        self._value_and_grad = value_and_grad
        self.n_logpdf = 0
        self.n_gradient = 0

    def log_density(self, zeta: np.ndarray) -> float:
        self.n_logpdf += 1
        try:
            # extreme proposals overflow before they are rejected; that is
            # the -inf path, not a numerical problem worth warning about
            with np.errstate(all="ignore"):
                lp = float(self._log_density(zeta))
        except _TARGET_ERRORS:
            return -np.inf
        return lp if not math.isnan(lp) else -np.inf

    def value_and_grad(self, zeta: np.ndarray) -> tuple[float, np.ndarray]:
        self.n_gradient += 1
        if self._value_and_grad is None:
            # fall back to finite differences over the counted density
            self.n_gradient -= 1
            lp = self.log_density(zeta)
            if not np.isfinite(lp):
                return lp, np.zeros(self.dim)
            self.n_gradient += 1
            try:
                return lp, fd_gradient(self.log_density, zeta)
            except _TARGET_ERRORS:
                return -np.inf, np.zeros(self.dim)
        try:
            with np.errstate(all="ignore"):
                lp, grad = self._value_and_grad(zeta)
                lp = float(lp)
        except _TARGET_ERRORS:
            return -np.inf, np.zeros(self.dim)
        if math.isnan(lp):
            return -np.inf, np.zeros(self.dim)
        grad = np.asarray(grad, dtype=float)
        if not np.all(np.isfinite(grad)):
            return -np.inf, np.zeros(self.dim)
        return lp, grad

    def gradient(self, zeta: np.ndarray) -> np.ndarray:
        return self.value_and_grad(zeta)[1]

    @property
    def n_evals(self) -> int:
        """Total model sweeps: density evaluations plus gradient passes."""
        return self.n_logpdf + self.n_gradient

    def reset_counters(self) -> None:
        self.n_logpdf = 0
        self.n_gradient = 0


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class SamplerConfig:
    """Chain settings; ``iterations`` counts warmup plus kept draws."""

    kind: str = "hmc"
    iterations: int = 6000
    warmup: int = 1000
    epsilon: float = 0.1
    target_accept: float | None = None
    L_base: float = 1.0
    jitter: float = 0.2
    mass_diag: np.ndarray | None = None
    proposal_cov: np.ndarray | None = None
    adapt_step_size: bool = True
    adapt_mass: bool = True
    init: np.ndarray | None = None
    init_scale: float = 0.1
    max_init_tries: int = 100
    max_steps: int = 1000

    def __post_init__(self):
        if self.kind not in ("mh", "mmala", "hmc"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if self.iterations <= 0 or not 0 <= self.warmup < self.iterations:
            raise ValueError(
                f"need 0 <= warmup < iterations, got {self.warmup}, {self.iterations}"
            )
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError(f"jitter must be in [0, 1), got {self.jitter}")
        if self.L_base <= 0:
            raise ValueError(f"L_base must be positive, got {self.L_base}")

    @property
    def resolved_target_accept(self) -> float:
        if self.target_accept is not None:
            return self.target_accept
        return DEFAULT_TARGET_ACCEPT[self.kind]


@dataclass
class Chain:
    """Post-warmup output of one chain plus adaptation bookkeeping."""

    draws: np.ndarray
    log_density: np.ndarray
    accepted: np.ndarray
    acceptance_rate: float
    divergences: int
    warmup_divergences: int
    epsilon: float
    mass_diag: np.ndarray
    config: SamplerConfig
    seed: int
    stream: int
    evals_warmup: tuple
    evals_main: tuple
    elapsed_seconds: float


# ---------------------------------------------------------------------------
# step-size and mass adaptation
# ---------------------------------------------------------------------------

class StepSizeAdapter:
    """Dual-averaging step size controller.

    Tracks the gap between realized and targeted acceptance probability and
    shrinks it toward zero; ``current`` drives warmup iterations, ``frozen``
    is the averaged value used after warmup.
    """

    def __init__(self, epsilon0: float, target_accept: float,
                 gamma: float = 0.05, t0: float = 10.0, kappa: float = 0.75):
        if epsilon0 <= 0:
            raise ValueError("initial step size must be positive")
        if not 0.0 < target_accept < 1.0:
            raise ValueError("target acceptance must be in (0, 1)")
        self.mu = math.log(10.0 * epsilon0)
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.log_eps = math.log(epsilon0)
        self.log_eps_bar = math.log(epsilon0)
        self.h_bar = 0.0
        self.t = 0

    def update(self, accept_prob: float) -> None:
        self.t += 1
        frac = 1.0 / (self.t + self.t0)
        self.h_bar = (1.0 - frac) * self.h_bar + frac * (
            self.target_accept - accept_prob
        )
        self.log_eps = self.mu - math.sqrt(self.t) / self.gamma * self.h_bar
        w = self.t ** (-self.kappa)
        self.log_eps_bar = w * self.log_eps + (1.0 - w) * self.log_eps_bar

    @property
    def current(self) -> float:
        return math.exp(self.log_eps)

    @property
    def frozen(self) -> float:
        return math.exp(self.log_eps_bar)


def adapt_mass_matrix(draws: np.ndarray) -> np.ndarray:
    """Diagonal mass matrix from warmup draws.

    The sample variance is shrunk toward unit scale (more shrinkage for fewer
    draws), and the inverse is floored so degenerate coordinates cannot
    produce unbounded mass entries.
    """
    draws = np.asarray(draws, dtype=float)
    if draws.ndim != 2 or draws.shape[0] < 2:
        raise ValueError(f"need a (n >= 2, dim) draw matrix, got shape {draws.shape}")
    n = draws.shape[0]
    var = np.var(draws, axis=0, ddof=1)
    shrink = n / (n + 5.0)
    var_reg = shrink * var + (1.0 - shrink) * 1.0
    return 1.0 / np.maximum(var_reg, 1e-6)


# ---------------------------------------------------------------------------
# kernels
# ---------------------------------------------------------------------------

@dataclass
class StepResult:
    zeta: np.ndarray
    log_density: float
    accepted: bool
    accept_prob: float
    diverged: bool = False
    grad: np.ndarray | None = None
    cache: object = None


def mh_step(target: TargetDensity, zeta: np.ndarray, rng: RngStream,
            eps: float, chol_prop: np.ndarray | None = None,
            current_lp: float | None = None) -> StepResult:
    """Random-walk proposal ``zeta + eps * L n`` with symmetric acceptance."""
    if current_lp is None:
        current_lp = target.log_density(zeta)
    step = rng.normal(target.dim)
    if chol_prop is not None:
        step = chol_prop @ step
    prop = zeta + eps * step
    lp = target.log_density(prop)
    log_alpha = lp - current_lp
    aprob = math.exp(min(0.0, log_alpha)) if np.isfinite(log_alpha) else 0.0
    if rng.uniform() < aprob:
        return StepResult(prop, lp, True, aprob)
    return StepResult(zeta, current_lp, False, aprob)


@dataclass
class _MmalaCache:
    lp: float
    grad: np.ndarray
    eigvec: np.ndarray
    eigval: np.ndarray


def _fd_hessian(target: TargetDensity, zeta: np.ndarray, h: float = 1e-4) -> np.ndarray:
    """Negative Hessian of the log density from central differences of gradients."""
    d = target.dim
    H = np.empty((d, d))
    for i in range(d):
        hi = h * max(1.0, abs(zeta[i]))
        zp = zeta.copy()
        zm = zeta.copy()
        zp[i] += hi
        zm[i] -= hi
        gp = target.gradient(zp)
        gm = target.gradient(zm)
        H[:, i] = -(gp - gm) / (2.0 * hi)
    return 0.5 * (H + H.T)


def _mmala_cache(target: TargetDensity, zeta: np.ndarray,
                 eig_floor: float = 1e-6) -> _MmalaCache | None:
    lp, grad = target.value_and_grad(zeta)
    if not np.isfinite(lp):
        return None
    H = _fd_hessian(target, zeta)
    if not np.all(np.isfinite(H)):
        return None
    w, V = np.linalg.eigh(H)
    # flip concave-violating directions instead of discarding curvature
    lam = np.maximum(np.abs(w), eig_floor)
    return _MmalaCache(lp, grad, V, lam)


def _mmala_mean(zeta: np.ndarray, cache: _MmalaCache, eps: float) -> np.ndarray:
    natural = cache.eigvec @ ((cache.eigvec.T @ cache.grad) / cache.eigval)
    return zeta + 0.5 * eps * eps * natural


def _mmala_logq(x: np.ndarray, mean: np.ndarray, cache: _MmalaCache,
                eps: float) -> float:
    d = x.shape[0]
    z = (cache.eigvec.T @ (x - mean)) * np.sqrt(cache.eigval) / eps
    logdet = 2.0 * d * math.log(eps) - float(np.sum(np.log(cache.eigval)))
    return -0.5 * (d * LOG_2PI + logdet + float(z @ z))


def mmala_step(target: TargetDensity, zeta: np.ndarray, rng: RngStream,
               eps: float, cache: _MmalaCache | None = None) -> StepResult:
    """Langevin proposal preconditioned by the local quasi-Newton metric.

    Proposal: N(zeta + (eps^2/2) H^-1 g, eps^2 H^-1) with H the
    eigenvalue-regularized negative Hessian; the acceptance ratio carries the
    full asymmetric correction because H changes between points.
    """
    if cache is None:
        cache = _mmala_cache(target, zeta)
        if cache is None:
            raise InitializationFailure("mMALA started at a point without finite curvature")
    mean = _mmala_mean(zeta, cache, eps)
    noise = rng.normal(target.dim)
    prop = mean + eps * (cache.eigvec @ (noise / np.sqrt(cache.eigval)))

    prop_cache = _mmala_cache(target, prop)
    if prop_cache is None:
        return StepResult(zeta, cache.lp, False, 0.0, grad=cache.grad, cache=cache)
    mean_rev = _mmala_mean(prop, prop_cache, eps)
    log_alpha = (
        prop_cache.lp
        - cache.lp
        + _mmala_logq(zeta, mean_rev, prop_cache, eps)
        - _mmala_logq(prop, mean, cache, eps)
    )
    aprob = math.exp(min(0.0, log_alpha)) if np.isfinite(log_alpha) else 0.0
    if rng.uniform() < aprob:
        return StepResult(prop, prop_cache.lp, True, aprob,
                          grad=prop_cache.grad, cache=prop_cache)
    return StepResult(zeta, cache.lp, False, aprob, grad=cache.grad, cache=cache)


def kinetic_energy(rho: np.ndarray, mass_diag: np.ndarray) -> float:
    """Negative log density of the momentum draw N(0, diag(mass))."""
    d = rho.shape[0]
    return float(
        0.5 * np.sum(rho * rho / mass_diag)
        + 0.5 * np.sum(np.log(mass_diag))
        + 0.5 * d * LOG_2PI
    )


def leapfrog(target: TargetDensity, zeta: np.ndarray, rho: np.ndarray,
             eps: float, n_steps: int,
             mass_diag: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Leapfrog integration of Hamilton's equations; returns final position
    and momentum.  Symplectic and, with momentum negation, an involution."""
    zeta, rho, _, _, _ = _leapfrog_core(target, zeta, rho, eps, n_steps, mass_diag)
    return zeta, rho


def _leapfrog_core(target: TargetDensity, zeta: np.ndarray, rho: np.ndarray,
                   eps: float, n_steps: int, mass_diag: np.ndarray | None,
                   lp0: float | None = None, grad0: np.ndarray | None = None):
    """Half kick, drift, half kick, repeated; bails out on non-finite values."""
    if mass_diag is None:
        mass_diag = np.ones(zeta.shape[0])
    minv = 1.0 / mass_diag
    if grad0 is None or lp0 is None:
        lp, grad = target.value_and_grad(zeta)
    else:
        lp, grad = lp0, grad0
    for _ in range(n_steps):
        if not np.isfinite(lp):
            return zeta, rho, lp, grad, False
        rho = rho + 0.5 * eps * grad
        zeta = zeta + eps * minv * rho
        if not np.all(np.isfinite(zeta)):
            return zeta, rho, -np.inf, grad, False
        lp, grad = target.value_and_grad(zeta)
        rho = rho + 0.5 * eps * grad
    if not np.isfinite(lp):
        return zeta, rho, lp, grad, False
    return zeta, rho, lp, grad, True


def hmc_step(target: TargetDensity, zeta: np.ndarray, rng: RngStream,
             eps: float, L_base: float, jitter: float,
             mass_diag: np.ndarray, lp0: float | None = None,
             grad0: np.ndarray | None = None,
             max_steps: int = 1000) -> StepResult:
    """One HMC iteration with a jittered trajectory length.

    The integration time is ``L_base`` perturbed by a uniform factor in
    ``[1 - jitter, 1 + jitter]``, divided by the step size to give the step
    count; the count is capped so early warmup, where the step size can
    collapse by orders of magnitude, cannot demand unbounded work per
    iteration.  Trajectories whose Hamiltonian error exceeds the divergence
    threshold are rejected and flagged.  Momentum negation at the end makes
    the proposal an involution; it is implicit since the kinetic energy is
    even in rho.
    """
    if lp0 is None or grad0 is None:
        lp0, grad0 = target.value_and_grad(zeta)
    rho0 = np.sqrt(mass_diag) * rng.normal(target.dim)
    u = rng.uniform()
    L_sim = L_base * (1.0 + jitter * (2.0 * u - 1.0))
    n_steps = min(max(1, int(math.floor(L_sim / eps))), max_steps)

    z, rho, lp, grad, ok = _leapfrog_core(
        target, zeta, rho0, eps, n_steps, mass_diag, lp0, grad0
    )
    h0 = -lp0 + kinetic_energy(rho0, mass_diag)
    h1 = (-lp + kinetic_energy(rho, mass_diag)) if np.isfinite(lp) else np.inf
    delta_h = h1 - h0
    diverged = (not ok) or (not np.isfinite(delta_h)) or abs(delta_h) > DIVERGENCE_THRESHOLD
    if diverged:
        return StepResult(zeta, lp0, False, 0.0, diverged=True, grad=grad0)
    aprob = math.exp(min(0.0, -delta_h))
    if rng.uniform() < aprob:
        return StepResult(z, lp, True, aprob, grad=grad)
    return StepResult(zeta, lp0, False, aprob, grad=grad0)


# ---------------------------------------------------------------------------
# chain driver
# ---------------------------------------------------------------------------

def _initial_point(target: TargetDensity, config: SamplerConfig,
                   rng: RngStream) -> tuple[np.ndarray, float]:
    if config.init is not None:
        zeta = np.asarray(config.init, dtype=float).copy()
        if zeta.shape != (target.dim,):
            raise ValueError(
                f"init has shape {zeta.shape}, target dimension is {target.dim}"
            )
        lp = target.log_density(zeta)
        if not np.isfinite(lp):
            raise InitializationFailure("supplied initial point has -inf density")
        return zeta, lp
    scale = math.sqrt(config.init_scale)
    for _ in range(config.max_init_tries):
        zeta = scale * rng.normal(target.dim)
        lp = target.log_density(zeta)
        if np.isfinite(lp):
            return zeta, lp
    raise InitializationFailure(
        f"no finite starting point in {config.max_init_tries} tries"
    )


def run_chain(target: TargetDensity, config: SamplerConfig,
              rng: RngStream) -> Chain:
    """Run one chain: adaptation during warmup, frozen settings afterwards.

    Step size follows dual averaging toward the kernel's target acceptance;
    for HMC a diagonal mass matrix is re-estimated twice inside warmup, with
    the step size re-adapted after each change.  Post-warmup draws, log
    densities and acceptance flags are returned together with evaluation
    counts for warmup and sampling separately.
    """
    t_start = time.perf_counter()
    M, W = config.iterations, config.warmup
    dim = target.dim
    kind = config.kind

    zeta, lp = _initial_point(target, config, rng)
    grad = None
    cache = None
    mass = (
        np.asarray(config.mass_diag, dtype=float).copy()
        if config.mass_diag is not None
        else np.ones(dim)
    )
    if mass.shape != (dim,) or np.any(mass <= 0):
        raise ValueError("mass_diag must be positive with one entry per coordinate")
    chol_prop = None
    if config.proposal_cov is not None:
        from .numerics import cholesky

        chol_prop = cholesky(config.proposal_cov)

    if kind == "hmc":
        lp, grad = target.value_and_grad(zeta)
        if not np.isfinite(lp):
            raise InitializationFailure("gradient pass lost finiteness at the start")
    elif kind == "mmala":
        cache = _mmala_cache(target, zeta)
        if cache is None:
            raise InitializationFailure("mMALA needs finite curvature at the start")

    adapter = (
        StepSizeAdapter(config.epsilon, config.resolved_target_accept)
        if config.adapt_step_size
        else None
    )
    eps = config.epsilon

    # mass re-estimation checkpoints inside warmup (draw windows)
    checkpoints = []
    if kind == "hmc" and config.adapt_mass and W >= 200:
        checkpoints = [
            (int(0.4 * W), int(0.15 * W)),
            (int(0.7 * W), int(0.4 * W)),
        ]

    draws = np.empty((M, dim))
    lps = np.empty(M)
    accepted = np.zeros(M, dtype=bool)
    div_warm = 0
    div_main = 0
    evals_at_w = None

    for m in range(M):
        warm = m < W
        if warm and adapter is not None:
            eps = adapter.current
        if m == W:
            if adapter is not None:
                eps = adapter.frozen
            evals_at_w = (target.n_logpdf, target.n_gradient)

        if kind == "mh":
            res = mh_step(target, zeta, rng, eps, chol_prop, lp)
        elif kind == "mmala":
            res = mmala_step(target, zeta, rng, eps, cache)
            cache = res.cache
        else:
            res = hmc_step(target, zeta, rng, eps, config.L_base, config.jitter,
                           mass, lp, grad, max_steps=config.max_steps)
            grad = res.grad
        zeta, lp = res.zeta, res.log_density

        draws[m] = zeta
        lps[m] = lp
        accepted[m] = res.accepted
        if res.diverged:
            if warm:
                div_warm += 1
            else:
                div_main += 1

        if warm and adapter is not None:
            adapter.update(res.accept_prob)
        for cp_end, cp_start in checkpoints:
            if m == cp_end - 1:
                mass = adapt_mass_matrix(draws[cp_start:cp_end])
                if adapter is not None:
                    adapter = StepSizeAdapter(
                        adapter.current, config.resolved_target_accept
                    )

    if evals_at_w is None:
        evals_at_w = (target.n_logpdf, target.n_gradient)
    evals_main = (
        target.n_logpdf - evals_at_w[0],
        target.n_gradient - evals_at_w[1],
    )
    kept = slice(W, M)
    return Chain(
        draws=draws[kept].copy(),
        log_density=lps[kept].copy(),
        accepted=accepted[kept].copy(),
        acceptance_rate=float(np.mean(accepted[kept])),
        divergences=div_main,
        warmup_divergences=div_warm,
        epsilon=float(eps),
        mass_diag=mass.copy(),
        config=config,
        seed=rng.seed,
        stream=rng.stream,
        evals_warmup=evals_at_w,
        evals_main=evals_main,
        elapsed_seconds=time.perf_counter() - t_start,
    )


# ---------------------------------------------------------------------------
# reference target
# ---------------------------------------------------------------------------

def doughnut_target(r0: float = 3.0, sigma_r: float = 0.5,
                    dim: int = 2) -> TargetDensity:
    """Ring-shaped density: Gaussian in the radius, uniform in angle.

    The density concentrates near radius ``r0``; the radial marginal is
    proportional to r^(dim-1) exp(-(r - r0)^2 / (2 sigma_r^2)), which gives a
    closed-form check for sampler output.  The origin has zero density.
    """
    if r0 <= 0 or sigma_r <= 0:
        raise ValueError("need r0 > 0 and sigma_r > 0")

    def logpdf(zeta: np.ndarray) -> float:
        r = float(np.linalg.norm(zeta))
        if r == 0.0:
            return -np.inf
        return -0.5 * ((r - r0) / sigma_r) ** 2

    def value_and_grad(zeta: np.ndarray):
        r = float(np.linalg.norm(zeta))
        if r == 0.0:
            return -np.inf, np.zeros(zeta.shape[0])
        lp = -0.5 * ((r - r0) / sigma_r) ** 2
        grad = -((r - r0) / sigma_r**2) * (zeta / r)
        return lp, grad

    return TargetDensity(dim, logpdf, value_and_grad, name="doughnut")
