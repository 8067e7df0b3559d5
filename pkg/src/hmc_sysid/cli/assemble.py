"""From a validated config to a sampler-ready posterior.

Lays out the unconstrained vector block by block (model coefficients, then
noise parameters, then shrinkage scales or latent states), builds the joint
log density over that vector, and wraps it in a TargetDensity.  One evaluator
serves plain floats and Dual vectors, so values and exact forward-mode
gradients share a single code path; the nonlinear state space model instead
uses the sparse per-term gradient, which is linear in the trajectory length.
"""

from __future__ import annotations

import numpy as np

from ..models import (
    THETA_NAMES,
    ArxSpec,
    DataSet,
    GaussianNoise,
    LgssSpec,
    NlssSpec,
    OeSpec,
    StudentTNoise,
    arx_loglik,
    arx_predict,
    arx_simulate,
    kalman_loglik,
    kalman_predictions,
    lgss_simulate,
    make_input,
    nlss_logjoint,
    nlss_logjoint_grad,
    nlss_simulate,
    oe_loglik,
    oe_predict,
    oe_simulate,
    pendulum_dynamics,
    pendulum_measure,
)
from ..numerics import Dual, RngStream, dual_eval, dual_value
from ..priors import (
    IDENTITY,
    LOG_POSITIVE,
    Block,
    ParameterSpace,
    gaussian_logprior,
    horseshoe_logjoint,
    shifted_log,
)
from ..samplers import TargetDensity
from .config import ConstraintViolation, ExperimentConfig, ModelConfig

# stream ids reserved by the orchestrator: chains use 1..n_chains
INPUT_STREAM = 1001
NOISE_STREAM = 1002
INIT_STREAM_BASE = 2000

PENDULUM_N_X = 4
PENDULUM_N_Y = 3


# ---------------------------------------------------------------------------
# model specs
# ---------------------------------------------------------------------------

def transfer_spec(model: ModelConfig):
    if model.kind == "arx":
        return ArxSpec(n_a=model.n_a, n_b=model.n_b)
    return OeSpec(n_b=model.n_b, n_f=model.n_f)


def lgss_theta_names(n_x: int) -> tuple:
    names = [f"a{i + 1}{j + 1}" for i in range(n_x) for j in range(n_x)]
    names += [f"b{i + 1}" for i in range(n_x)]
    names += [f"c{i + 1}" for i in range(n_x)]
    names += ["d", "log_sd_w", "log_sd_e"]
    return tuple(names)


def lgss_spec(model: ModelConfig) -> LgssSpec:
    """Dense scalar-output parameterization: A, B, C, D plus log noise scales."""
    n = model.n_x

    def build(theta):
        A = theta[: n * n].reshape(n, n)
        B = theta[n * n : n * n + n].reshape(n, 1)
        C = theta[n * n + n : n * n + 2 * n].reshape(1, n)
        D = theta[n * n + 2 * n : n * n + 2 * n + 1].reshape(1, 1)
        Q = np.exp(2.0 * theta[n * n + 2 * n + 1]) * np.eye(n)
        R = np.exp(2.0 * theta[n * n + 2 * n + 2]) * np.eye(1)
        return A, B, C, D, Q, R

    return LgssSpec(n_x=n, n_y=1, build=build, theta_names=lgss_theta_names(n))


def pendulum_spec(model: ModelConfig, dt: float) -> NlssSpec:
    return NlssSpec(
        n_x=PENDULUM_N_X,
        n_y=PENDULUM_N_Y,
        dynamics=pendulum_dynamics,
        measure=pendulum_measure,
        theta_names=THETA_NAMES,
        q=model.q,
        r=model.r,
        x1_mean=model.x1_mean,
        x1_sd=model.x1_sd,
        dt=dt,
        substeps=model.substeps,
    )


def pendulum_state_names(T: int) -> tuple:
    return tuple(f"x{i + 1}[{t}]" for t in range(T) for i in range(PENDULUM_N_X))


# ---------------------------------------------------------------------------
# parameter space
# ---------------------------------------------------------------------------

def build_parameter_space(cfg: ExperimentConfig, data: DataSet) -> ParameterSpace:
    model = cfg.model
    blocks = []
    if model.kind in ("arx", "oe"):
        spec = transfer_spec(model)
        coeff_prior = cfg.priors["coefficients"]
        blocks.append(
            Block(
                "coefficients",
                spec.n_coeffs,
                IDENTITY,
                spec.coeff_names,
                prior=coeff_prior,
            )
        )
        if coeff_prior.kind == "horseshoe":
            blocks.append(
                Block(
                    "hs_beta",
                    spec.n_coeffs,
                    LOG_POSITIVE,
                    tuple(f"beta_{n}" for n in spec.coeff_names),
                    prior=None,
                    hyper=True,
                    add_jacobian=False,
                )
            )
            blocks.append(
                Block(
                    "hs_tau",
                    1,
                    LOG_POSITIVE,
                    ("tau",),
                    prior=None,
                    hyper=True,
                    add_jacobian=False,
                )
            )
        if model.noise.sigma is None:
            blocks.append(
                Block("sigma", 1, LOG_POSITIVE, ("sigma_e",), prior=cfg.priors["sigma"])
            )
        if model.noise.kind == "student_t" and model.noise.nu is None:
            blocks.append(
                Block("nu", 1, shifted_log(1.0), ("nu",), prior=cfg.priors["nu"])
            )
        return ParameterSpace(blocks)

    if model.kind == "lgss":
        spec = lgss_spec(model)
        blocks.append(
            Block(
                "theta",
                spec.n_theta,
                IDENTITY,
                spec.theta_names,
                prior=cfg.priors["theta"],
            )
        )
        return ParameterSpace(blocks)

    # pendulum: physical parameters on a log scale plus the state trajectory
    params_prior = cfg.priors["params"]
    states_prior = cfg.priors["states"]
    if states_prior.kind not in ("flat", "gaussian"):
        raise ConstraintViolation(
            f"states prior must be flat or gaussian, got {states_prior.kind!r}"
        )
    blocks.append(Block("params", 6, LOG_POSITIVE, THETA_NAMES, prior=params_prior))
    blocks.append(
        Block(
            "states",
            data.T * PENDULUM_N_X,
            IDENTITY,
            pendulum_state_names(data.T),
            prior=states_prior,
        )
    )
    return ParameterSpace(blocks)


# ---------------------------------------------------------------------------
# joint density
# ---------------------------------------------------------------------------

def _prior_terms(space: ParameterSpace, zeta):
    """Sum of block priors and transform Jacobians; returns (lp, etas, parts)."""
    parts = space.split(zeta)
    etas = {}
    lp = 0.0
    horseshoe_block = None
    for b in space.blocks:
        eta, logjac = b.transform.apply(parts[b.name])
        etas[b.name] = eta
        if b.prior is None:
            continue
        if b.prior.kind == "horseshoe":
            horseshoe_block = b
            continue
        lp = lp + b.prior.logpdf(eta, parts[b.name])
        if b.add_jacobian:
            lp = lp + logjac
    if horseshoe_block is not None:
        lp = lp + horseshoe_logjoint(
            etas[horseshoe_block.name], parts["hs_beta"], parts["hs_tau"][0]
        )
    return lp, etas, parts


def _noise_model(model: ModelConfig, etas: dict):
    sigma = model.noise.sigma if model.noise.sigma is not None else etas["sigma"]
    if isinstance(sigma, (Dual, np.ndarray)):
        sigma = sigma[0] if np.ndim(dual_value(sigma)) else sigma
    if model.noise.kind == "gaussian":
        return GaussianNoise(sigma=sigma)
    nu = model.noise.nu if model.noise.nu is not None else etas["nu"]
    if isinstance(nu, (Dual, np.ndarray)):
        nu = nu[0] if np.ndim(dual_value(nu)) else nu
    return StudentTNoise(nu=nu, sigma=sigma)


def assemble_target(cfg: ExperimentConfig, data: DataSet):
    """Posterior over the unconstrained vector for the estimation record.

    Returns ``(target, space)``.  The caller passes the estimation portion of
    the record; validation data never enters the density.
    """
    model = cfg.model
    space = build_parameter_space(cfg, data)

    if model.kind in ("arx", "oe"):
        spec = transfer_spec(model)
        loglik = arx_loglik if model.kind == "arx" else oe_loglik

        def logjoint(zeta):
            lp, etas, _ = _prior_terms(space, zeta)
            noise = _noise_model(model, etas)
            return loglik(spec, etas["coefficients"], noise, data) + lp

        target = TargetDensity(
            space.dim,
            logjoint,
            lambda zeta: dual_eval(logjoint, zeta),
            name=f"{model.kind} posterior",
        )
        return target, space

    if model.kind == "lgss":
        spec = lgss_spec(model)

        def logjoint(zeta):
            lp, etas, _ = _prior_terms(space, zeta)
            return kalman_loglik(spec, etas["theta"], data) + lp

        target = TargetDensity(
            space.dim,
            logjoint,
            lambda zeta: dual_eval(logjoint, zeta),
            name="lgss posterior",
        )
        return target, space

    return _pendulum_target(cfg, data, space)


def _pendulum_target(cfg: ExperimentConfig, data: DataSet, space: ParameterSpace):
    """Joint posterior over physical parameters and the state trajectory.

    The likelihood gradient comes from the sparse per-term pass; the chain
    rule for the log-scale parameters is d theta / d zeta = theta.  Prior
    terms touch only the 6 parameter coordinates (plus an optional Gaussian
    on the states), so their gradient is a cheap 6-direction dual evaluation.
    """
    model = cfg.model
    spec = pendulum_spec(model, data.dt)
    T = data.T
    n_x = spec.n_x
    params_block = space.blocks[0]
    states_prior = space.blocks[1].prior

    def params_prior(z6):
        eta, logjac = params_block.transform.apply(z6)
        lp = params_block.prior.logpdf(eta, z6)
        return lp + (logjac if params_block.add_jacobian else 0.0)

    def states_prior_terms(x_flat):
        if states_prior.kind == "flat":
            return 0.0, None
        scale = np.broadcast_to(
            np.asarray(states_prior.scale, dtype=float), x_flat.shape
        )
        loc = np.asarray(states_prior.loc, dtype=float)
        lp = gaussian_logprior(x_flat, scale, loc)
        return lp, -(x_flat - loc) / scale**2

    def log_density(zeta):
        theta = np.exp(zeta[:6])
        x = zeta[6:].reshape(T, n_x)
        value = nlss_logjoint(spec, theta, x, data)
        pv, _ = dual_eval(params_prior, zeta[:6])
        sv, _ = states_prior_terms(zeta[6:])
        return value + pv + sv

    def value_and_grad(zeta):
        theta = np.exp(zeta[:6])
        x = zeta[6:].reshape(T, n_x)
        value, g_theta, g_x = nlss_logjoint_grad(spec, theta, x, data)
        pv, pg = dual_eval(params_prior, zeta[:6])
        sv, sg = states_prior_terms(zeta[6:])
        grad = np.empty(space.dim)
        grad[:6] = g_theta * theta + pg
        grad[6:] = g_x.reshape(-1)
        if sg is not None:
            grad[6:] += sg
        return value + pv + sv, grad

    target = TargetDensity(
        space.dim, log_density, value_and_grad, name="pendulum posterior"
    )
    return target, space


# ---------------------------------------------------------------------------
# data generation and initial points
# ---------------------------------------------------------------------------

def simulate_dataset(cfg: ExperimentConfig, seed: int):
    """Draw one record from the configured generative model.

    Returns ``(data, states)`` where states is None except for the pendulum.
    Input and noise use separate streams so changing the noise realization
    never perturbs the excitation.
    """
    model, sim = cfg.model, cfg.data.simulate
    rng_in = RngStream(seed, INPUT_STREAM)
    rng_noise = RngStream(seed, NOISE_STREAM)
    u = make_input(
        sim.input.kind, sim.T, rng_in, period=sim.input.period,
        amplitude=sim.input.amplitude,
    )
    theta = np.asarray(sim.theta_true, dtype=float)

    if model.kind in ("arx", "oe"):
        # nu_true selects the generating noise so a misspecified Gaussian
        # model can be fit to exactly the same heavy-tailed record
        if sim.nu_true is not None:
            noise = StudentTNoise(nu=sim.nu_true, sigma=sim.sigma_true)
        else:
            noise = GaussianNoise(sigma=sim.sigma_true)
        spec = transfer_spec(model)
        simulate = arx_simulate if model.kind == "arx" else oe_simulate
        y = simulate(spec, theta, noise, u, rng_noise)
        return DataSet(u=u, y=y, dt=sim.dt), None

    if model.kind == "lgss":
        spec = lgss_spec(model)
        y = lgss_simulate(spec, theta, u, rng_noise)
        return DataSet(u=u, y=y, dt=sim.dt), None

    spec = pendulum_spec(model, sim.dt)
    y, states = nlss_simulate(spec, theta, u, rng_noise, sim.x0)
    return DataSet(u=u, y=y, dt=sim.dt), states


def _smooth(v: np.ndarray, width: int = 5) -> np.ndarray:
    kernel = np.ones(width) / width
    padded = np.concatenate([np.full(width // 2, v[0]), v, np.full(width // 2, v[-1])])
    return np.convolve(padded, kernel, mode="valid")[: v.shape[0]]


def _pendulum_state_init(cfg: ExperimentConfig, data: DataSet,
                         theta: np.ndarray) -> np.ndarray:
    """Most probable trajectory for fixed parameters.

    Seeds angles from the measured channels and velocities from smoothed
    first differences, then climbs the joint density over the state block
    with L-BFGS using the sparse gradient.  Starting the chain at this ridge
    keeps early warmup step sizes (and so leapfrog step counts) sane.
    """
    from scipy.optimize import minimize

    spec = pendulum_spec(cfg.model, data.dt)
    T = data.T
    y = data.y.reshape(T, PENDULUM_N_Y)
    x = np.zeros((T, PENDULUM_N_X))
    x[:, 0] = _smooth(y[:, 0])
    x[:, 1] = _smooth(y[:, 1])
    x[:, 2] = np.gradient(x[:, 0], data.dt)
    x[:, 3] = np.gradient(x[:, 1], data.dt)

    def objective(flat: np.ndarray):
        value, _, g_x = nlss_logjoint_grad(spec, theta, flat.reshape(T, PENDULUM_N_X), data)
        return -value, -g_x.reshape(-1)

    result = minimize(
        objective,
        x.reshape(-1),
        jac=True,
        method="L-BFGS-B",
        options={"maxiter": 500},
    )
    return result.x


def initial_point(cfg: ExperimentConfig, space: ParameterSpace, data: DataSet,
                  chain: int) -> np.ndarray:
    """Per-chain starting point.

    Transfer function and state space chains start near the origin with a
    small jitter.  Pendulum chains start at the prior center for the physical
    parameters (jittered per chain) with the state block at its most probable
    trajectory under those parameters.
    """
    rng = RngStream(cfg.seed, INIT_STREAM_BASE + chain)
    if cfg.model.kind != "pendulum":
        return 0.1 * rng.normal(space.dim)

    zeta = np.zeros(space.dim)
    prior = cfg.priors["params"]
    if prior.space == "unconstrained":
        center = np.broadcast_to(np.asarray(prior.loc, dtype=float), (6,)).copy()
    else:
        center = np.log(np.broadcast_to(np.asarray(prior.loc, dtype=float), (6,)))
    zeta[:6] = center + 0.05 * rng.normal(6)
    zeta[6:] = _pendulum_state_init(cfg, data, np.exp(zeta[:6]))
    return zeta


# ---------------------------------------------------------------------------
# fit quality for reporting
# ---------------------------------------------------------------------------

def predicted_outputs(cfg: ExperimentConfig, theta_constrained: np.ndarray,
                      data: DataSet):
    """Model output over the full record under fixed parameters.

    Returns ``(yhat, t_offset)``: the first prediction corresponds to sample
    index ``t_offset`` (regressor models cannot predict the first max-lag
    samples).
    """
    model = cfg.model
    if model.kind == "arx":
        spec = transfer_spec(model)
        coeffs = theta_constrained[: spec.n_coeffs]
        return np.asarray(arx_predict(spec, coeffs, data)), spec.t0
    if model.kind == "oe":
        spec = transfer_spec(model)
        coeffs = theta_constrained[: spec.n_coeffs]
        return np.asarray(oe_predict(spec, coeffs, data)), 0
    if model.kind == "lgss":
        spec = lgss_spec(model)
        return kalman_predictions(spec, theta_constrained, data), 0
    spec = pendulum_spec(model, data.dt)
    theta = theta_constrained[:6]
    x = theta_constrained[6:].reshape(data.T, PENDULUM_N_X)
    comps = spec.measure(tuple(x[:, i] for i in range(PENDULUM_N_X)), data.u, theta)
    return np.stack([np.asarray(c, dtype=float) for c in comps], axis=1), 0
