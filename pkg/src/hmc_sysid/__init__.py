"""Bayesian system identification with gradient-based MCMC.

The package estimates dynamic-system parameters from input/output records by
sampling the posterior with random-walk Metropolis-Hastings, a quasi-Newton
Langevin proposal (mMALA) or Hamiltonian Monte Carlo.  Supported model
families: ARX and output-error transfer functions, linear Gaussian state
space models via prediction-error likelihoods, and nonlinear state space
models where the latent state trajectory is sampled jointly with the
parameters.
"""

__version__ = "0.1.0"

from . import diagnostics, models, numerics, priors, samplers  # noqa: F401
