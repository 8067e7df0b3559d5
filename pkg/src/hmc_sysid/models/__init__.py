"""Model families: transfer functions, linear and nonlinear state space."""

from .data import (
    BOUND,
    DataSet,
    GaussianNoise,
    InsufficientData,
    StudentTNoise,
    UnstableSimulation,
    gaussian_logpdf,
    make_input,
    studentt_logpdf,
)
from .linear import (
    ArxSpec,
    OeSpec,
    arx_loglik,
    arx_predict,
    arx_regressors,
    arx_simulate,
    oe_loglik,
    oe_predict,
    oe_simulate,
)
from .pendulum import (
    DEFAULT_CONSTANTS,
    GRAVITY,
    L_P,
    L_R,
    M_P,
    THETA_NAMES,
    THETA_NOMINAL,
    PendulumConstants,
    pendulum_dynamics,
    pendulum_energy,
    pendulum_forcing,
    pendulum_mass_matrix,
    pendulum_measure,
    pendulum_rate_matrix,
)
from .statespace import (
    LgssSpec,
    NlssSpec,
    SingularMassMatrix,
    kalman_loglik,
    kalman_predictions,
    lgss_simulate,
    nlss_logjoint,
    nlss_logjoint_grad,
    nlss_simulate,
    rk4_step,
)

__all__ = [
    "BOUND",
    "DataSet",
    "GaussianNoise",
    "InsufficientData",
    "StudentTNoise",
    "UnstableSimulation",
    "gaussian_logpdf",
    "make_input",
    "studentt_logpdf",
    "ArxSpec",
    "OeSpec",
    "arx_loglik",
    "arx_predict",
    "arx_regressors",
    "arx_simulate",
    "oe_loglik",
    "oe_predict",
    "oe_simulate",
    "LgssSpec",
    "NlssSpec",
    "SingularMassMatrix",
    "kalman_loglik",
    "kalman_predictions",
    "lgss_simulate",
    "nlss_logjoint",
    "nlss_logjoint_grad",
    "nlss_simulate",
    "rk4_step",
    "PendulumConstants",
    "DEFAULT_CONSTANTS",
    "GRAVITY",
    "L_P",
    "L_R",
    "M_P",
    "THETA_NAMES",
    "THETA_NOMINAL",
    "pendulum_dynamics",
    "pendulum_energy",
    "pendulum_forcing",
    "pendulum_mass_matrix",
    "pendulum_measure",
    "pendulum_rate_matrix",
]
