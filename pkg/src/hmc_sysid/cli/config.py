"""Declarative experiment configs: JSON in, validated dataclasses out.

Validation is strict: unknown keys are rejected with their full path so a
typo in a config never silently falls back to a default.  ``serialize``
emits the canonical form with every default filled in, and round-trips
through ``parse_config``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from ..priors import PriorSpec, PriorDomainError
from ..models import pendulum as pend


class ConfigError(Exception):
    """Base class: anything wrong with the experiment description."""


class ParseError(ConfigError):
    """Input is not a JSON object."""


class UnknownKey(ConfigError):
    """Config contains a key the schema does not define."""


class ConstraintViolation(ConfigError):
    """A value is outside its legal range or sections are inconsistent."""


MODEL_KINDS = ("arx", "oe", "lgss", "pendulum")
NOISE_KINDS = ("gaussian", "student_t")
INPUT_KINDS = ("random_binary", "square_wave")
SAMPLER_KINDS = ("mh", "mmala", "hmc")


def _check_keys(section: dict, allowed: set, path: str) -> None:
    for key in section:
        if key not in allowed:
            raise UnknownKey(f"{path}.{key}" if path else key)


def _get_num(section: dict, key: str, path: str, default=None,
             minimum=None, maximum=None, allow_none=False, integer=False):
    if key not in section or section[key] is None:
        if key in section and section[key] is None and allow_none:
            return None
        if default is None and not allow_none and key not in section:
            raise ConstraintViolation(f"{path}.{key} is required")
        return default
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConstraintViolation(f"{path}.{key} must be a number, got {v!r}")
    if integer:
        if int(v) != v:
            raise ConstraintViolation(f"{path}.{key} must be an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
    if minimum is not None and v < minimum:
        raise ConstraintViolation(f"{path}.{key} must be >= {minimum}, got {v}")
    if maximum is not None and v > maximum:
        raise ConstraintViolation(f"{path}.{key} must be <= {maximum}, got {v}")
    return v


def _get_vector(section: dict, key: str, path: str, default=None, size=None):
    if key not in section or section[key] is None:
        return default
    v = section[key]
    if not isinstance(v, (list, tuple)) or not all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in v
    ):
        raise ConstraintViolation(f"{path}.{key} must be a list of numbers")
    v = tuple(float(x) for x in v)
    if size is not None and len(v) != size:
        raise ConstraintViolation(f"{path}.{key} must have {size} entries, got {len(v)}")
    return v


def _get_choice(section: dict, key: str, path: str, choices, default=None):
    if key not in section:
        if default is None:
            raise ConstraintViolation(f"{path}.{key} is required")
        return default
    v = section[key]
    if v not in choices:
        raise ConstraintViolation(
            f"{path}.{key} must be one of {sorted(choices)}, got {v!r}"
        )
    return v


def _get_bool(section: dict, key: str, path: str, default: bool) -> bool:
    if key not in section:
        return default
    v = section[key]
    if not isinstance(v, bool):
        raise ConstraintViolation(f"{path}.{key} must be true or false, got {v!r}")
    return v


# ---------------------------------------------------------------------------
# sections
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseConfig:
    kind: str = "gaussian"
    sigma: float | None = None  # None means the scale is sampled
    nu: float | None = None     # None means degrees of freedom are sampled

    def to_dict(self) -> dict:
        return {"kind": self.kind, "sigma": self.sigma, "nu": self.nu}


@dataclass(frozen=True)
class ModelConfig:
    kind: str
    n_a: int = 0
    n_b: int = 0
    n_f: int = 0
    n_x: int = 0
    noise: NoiseConfig = NoiseConfig()
    substeps: int = 1
    q: tuple = ()
    r: tuple = ()
    x1_mean: tuple = ()
    x1_sd: tuple = ()

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "arx":
            d.update(n_a=self.n_a, n_b=self.n_b, noise=self.noise.to_dict())
        elif self.kind == "oe":
            d.update(n_b=self.n_b, n_f=self.n_f, noise=self.noise.to_dict())
        elif self.kind == "lgss":
            d.update(n_x=self.n_x)
        else:
            d.update(
                substeps=self.substeps,
                q=list(self.q),
                r=list(self.r),
                x1_mean=list(self.x1_mean),
                x1_sd=list(self.x1_sd),
            )
        return d


@dataclass(frozen=True)
class InputConfig:
    kind: str = "random_binary"
    period: int = 50
    amplitude: float = 1.0

    def to_dict(self) -> dict:
        return {"kind": self.kind, "period": self.period, "amplitude": self.amplitude}


@dataclass(frozen=True)
class SimulateConfig:
    T: int
    input: InputConfig
    theta_true: tuple
    sigma_true: float | None = None
    nu_true: float | None = None
    dt: float = 1.0
    x0: tuple = ()

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "input": self.input.to_dict(),
            "theta_true": list(self.theta_true),
            "sigma_true": self.sigma_true,
            "nu_true": self.nu_true,
            "dt": self.dt,
            "x0": list(self.x0),
        }


@dataclass(frozen=True)
class DataConfig:
    file: str | None = None
    simulate: SimulateConfig | None = None

    def to_dict(self) -> dict:
        if self.file is not None:
            return {"file": self.file}
        return {"simulate": self.simulate.to_dict()}


@dataclass(frozen=True)
class SamplerSection:
    kind: str = "hmc"
    iterations: int = 6000
    warmup: int = 1000
    epsilon: float = 0.1
    target_accept: float | None = None
    L_base: float = 1.0
    jitter: float = 0.2
    max_steps: int = 1000
    adapt_step_size: bool = True
    adapt_mass: bool = True

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "iterations": self.iterations,
            "warmup": self.warmup,
            "epsilon": self.epsilon,
            "target_accept": self.target_accept,
            "L_base": self.L_base,
            "jitter": self.jitter,
            "max_steps": self.max_steps,
            "adapt_step_size": self.adapt_step_size,
            "adapt_mass": self.adapt_mass,
        }


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    priors: dict
    sampler: SamplerSection
    data: DataConfig
    split: float = 1.0
    outputs: str | None = None
    chains: int = 1
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "priors": {k: v.to_dict() for k, v in sorted(self.priors.items())},
            "sampler": self.sampler.to_dict(),
            "data": self.data.to_dict(),
            "split": self.split,
            "outputs": self.outputs,
            "chains": self.chains,
            "seed": self.seed,
        }


# block names a model exposes to the priors map
def prior_block_names(model: ModelConfig) -> tuple:
    if model.kind in ("arx", "oe"):
        names = ["coefficients"]
        if model.noise.sigma is None:
            names.append("sigma")
        if model.noise.kind == "student_t" and model.noise.nu is None:
            names.append("nu")
        return tuple(names)
    if model.kind == "lgss":
        return ("theta",)
    return ("params", "states")


def default_priors(model: ModelConfig) -> dict:
    out = {}
    if model.kind in ("arx", "oe"):
        out["coefficients"] = PriorSpec("gaussian", scale=5.0)
        if model.noise.sigma is None:
            out["sigma"] = PriorSpec("half_cauchy", scale=1.0)
        if model.noise.kind == "student_t" and model.noise.nu is None:
            out["nu"] = PriorSpec("gamma", shape=2.0, rate=0.1)
    elif model.kind == "lgss":
        out["theta"] = PriorSpec("gaussian", scale=5.0)
    else:
        out["params"] = PriorSpec(
            "gaussian",
            scale=1.0,
            loc=tuple(float(v) for v in np.log(pend.THETA_NOMINAL)),
            space="unconstrained",
        )
        out["states"] = PriorSpec("flat")
    return out


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _parse_noise(raw: dict, path: str) -> NoiseConfig:
    _check_keys(raw, {"kind", "sigma", "nu"}, path)
    kind = _get_choice(raw, "kind", path, NOISE_KINDS, default="gaussian")
    sigma = _get_num(raw, "sigma", path, default=None, allow_none=True, minimum=0.0)
    if sigma is not None and sigma <= 0:
        raise ConstraintViolation(f"{path}.sigma must be > 0 when fixed")
    nu = _get_num(raw, "nu", path, default=None, allow_none=True)
    if kind == "gaussian" and nu is not None:
        raise ConstraintViolation(f"{path}.nu only applies to student_t noise")
    if nu is not None and nu <= 1.0:
        raise ConstraintViolation(f"{path}.nu must be > 1 when fixed")
    return NoiseConfig(kind=kind, sigma=sigma, nu=nu)


def _parse_model(raw: dict, path: str = "model") -> ModelConfig:
    if not isinstance(raw, dict):
        raise ConstraintViolation(f"{path} must be an object")
    kind = _get_choice(raw, "kind", path, MODEL_KINDS)
    if kind == "arx":
        _check_keys(raw, {"kind", "n_a", "n_b", "noise"}, path)
        return ModelConfig(
            kind=kind,
            n_a=_get_num(raw, "n_a", path, minimum=0, integer=True),
            n_b=_get_num(raw, "n_b", path, minimum=0, integer=True),
            noise=_parse_noise(raw.get("noise", {}), f"{path}.noise"),
        )
    if kind == "oe":
        _check_keys(raw, {"kind", "n_b", "n_f", "noise"}, path)
        return ModelConfig(
            kind=kind,
            n_b=_get_num(raw, "n_b", path, minimum=0, integer=True),
            n_f=_get_num(raw, "n_f", path, minimum=1, integer=True),
            noise=_parse_noise(raw.get("noise", {}), f"{path}.noise"),
        )
    if kind == "lgss":
        _check_keys(raw, {"kind", "n_x"}, path)
        return ModelConfig(kind=kind, n_x=_get_num(raw, "n_x", path, minimum=1, integer=True))
    _check_keys(raw, {"kind", "substeps", "q", "r", "x1_mean", "x1_sd"}, path)
    return ModelConfig(
        kind=kind,
        substeps=_get_num(raw, "substeps", path, default=1, minimum=1, integer=True),
        q=_get_vector(raw, "q", path, default=(1e-4, 1e-4, 1e-3, 1e-3), size=4),
        r=_get_vector(raw, "r", path, default=(2e-3, 2e-3, 5e-4), size=3),
        x1_mean=_get_vector(raw, "x1_mean", path, default=(0.0, 0.0, 0.0, 0.0), size=4),
        x1_sd=_get_vector(raw, "x1_sd", path, default=(0.1, 0.1, 0.1, 0.1), size=4),
    )


def _parse_prior(raw: dict, path: str) -> PriorSpec:
    if not isinstance(raw, dict):
        raise ConstraintViolation(f"{path} must be an object")
    _check_keys(raw, {"kind", "scale", "loc", "shape", "rate", "space"}, path)
    if "kind" not in raw:
        raise ConstraintViolation(f"{path}.kind is required")
    try:
        spec = PriorSpec.from_dict(raw)
    except PriorDomainError as err:
        raise ConstraintViolation(f"{path}: {err}") from None
    return spec


def _parse_input(raw: dict, path: str) -> InputConfig:
    _check_keys(raw, {"kind", "period", "amplitude"}, path)
    return InputConfig(
        kind=_get_choice(raw, "kind", path, INPUT_KINDS, default="random_binary"),
        period=_get_num(raw, "period", path, default=50, minimum=2, integer=True),
        amplitude=_get_num(raw, "amplitude", path, default=1.0, minimum=0.0),
    )


def _parse_simulate(raw: dict, model: ModelConfig, path: str) -> SimulateConfig:
    _check_keys(
        raw,
        {"T", "input", "theta_true", "sigma_true", "nu_true", "dt", "x0"},
        path,
    )
    T = _get_num(raw, "T", path, minimum=2, integer=True)
    theta = _get_vector(raw, "theta_true", path)
    if theta is None:
        raise ConstraintViolation(f"{path}.theta_true is required")
    expected = {
        "arx": model.n_a + model.n_b + 1,
        "oe": model.n_b + 1 + model.n_f,
        "pendulum": 6,
    }.get(model.kind)
    if expected is not None and len(theta) != expected:
        raise ConstraintViolation(
            f"{path}.theta_true needs {expected} values for this model, got {len(theta)}"
        )
    sigma_true = _get_num(raw, "sigma_true", path, default=None, allow_none=True)
    nu_true = _get_num(raw, "nu_true", path, default=None, allow_none=True)
    if model.kind in ("arx", "oe") and (sigma_true is None or sigma_true <= 0):
        raise ConstraintViolation(f"{path}.sigma_true must be > 0 for {model.kind}")
    if nu_true is not None and nu_true <= 1.0:
        raise ConstraintViolation(f"{path}.nu_true must be > 1")
    x0 = _get_vector(raw, "x0", path, default=())
    if model.kind == "pendulum":
        if len(x0) != 4:
            raise ConstraintViolation(f"{path}.x0 must have 4 entries for the pendulum")
    return SimulateConfig(
        T=T,
        input=_parse_input(raw.get("input", {}), f"{path}.input"),
        theta_true=theta,
        sigma_true=sigma_true,
        nu_true=nu_true,
        dt=_get_num(raw, "dt", path, default=1.0, minimum=0.0),
        x0=x0,
    )


def _parse_data(raw: dict, model: ModelConfig, path: str = "data") -> DataConfig:
    if not isinstance(raw, dict):
        raise ConstraintViolation(f"{path} must be an object")
    _check_keys(raw, {"file", "simulate"}, path)
    has_file = raw.get("file") is not None
    has_sim = raw.get("simulate") is not None
    if has_file == has_sim:
        raise ConstraintViolation(f"{path} needs exactly one of 'file' or 'simulate'")
    if has_file:
        if not isinstance(raw["file"], str):
            raise ConstraintViolation(f"{path}.file must be a path string")
        return DataConfig(file=raw["file"])
    return DataConfig(simulate=_parse_simulate(raw["simulate"], model, f"{path}.simulate"))


def _parse_sampler(raw: dict, path: str = "sampler") -> SamplerSection:
    if not isinstance(raw, dict):
        raise ConstraintViolation(f"{path} must be an object")
    _check_keys(
        raw,
        {
            "kind",
            "iterations",
            "warmup",
            "epsilon",
            "target_accept",
            "L_base",
            "jitter",
            "max_steps",
            "adapt_step_size",
            "adapt_mass",
        },
        path,
    )
    iterations = _get_num(raw, "iterations", path, default=6000, minimum=1, integer=True)
    warmup = _get_num(raw, "warmup", path, default=min(1000, iterations // 2),
                      minimum=0, integer=True)
    if warmup >= iterations:
        raise ConstraintViolation(f"{path}.warmup must be < iterations")
    target = _get_num(raw, "target_accept", path, default=None, allow_none=True)
    if target is not None and not 0.0 < target < 1.0:
        raise ConstraintViolation(f"{path}.target_accept must be in (0, 1)")
    return SamplerSection(
        kind=_get_choice(raw, "kind", path, SAMPLER_KINDS, default="hmc"),
        iterations=iterations,
        warmup=warmup,
        epsilon=_get_num(raw, "epsilon", path, default=0.1, minimum=1e-12),
        target_accept=target,
        L_base=_get_num(raw, "L_base", path, default=1.0, minimum=1e-12),
        jitter=_get_num(raw, "jitter", path, default=0.2, minimum=0.0, maximum=0.99),
        max_steps=_get_num(raw, "max_steps", path, default=1000, minimum=1, integer=True),
        adapt_step_size=_get_bool(raw, "adapt_step_size", path, True),
        adapt_mass=_get_bool(raw, "adapt_mass", path, True),
    )


def parse_config(text) -> ExperimentConfig:
    """Validate a JSON experiment description; errors name the key path."""
    if isinstance(text, (bytes, bytearray)):
        text = text.decode("utf-8")
    if isinstance(text, str):
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as err:
            raise ParseError(f"invalid JSON: {err}") from None
    else:
        raw = text
    if not isinstance(raw, dict):
        raise ParseError("config root must be a JSON object")

    _check_keys(
        raw,
        {"model", "priors", "sampler", "data", "split", "outputs", "chains", "seed"},
        "",
    )
    if "model" not in raw:
        raise ConstraintViolation("model section is required")
    if "data" not in raw:
        raise ConstraintViolation("data section is required")
    model = _parse_model(raw["model"])

    priors = default_priors(model)
    allowed_blocks = prior_block_names(model)
    raw_priors = raw.get("priors", {})
    if not isinstance(raw_priors, dict):
        raise ConstraintViolation("priors must be an object")
    for name, sub in raw_priors.items():
        if name not in allowed_blocks:
            raise UnknownKey(f"priors.{name}")
        priors[name] = _parse_prior(sub, f"priors.{name}")

    sampler = _parse_sampler(raw.get("sampler", {}))
    data = _parse_data(raw["data"], model)
    split = _get_num(raw, "split", "", default=1.0, minimum=1e-9, maximum=1.0)
    outputs = raw.get("outputs")
    if outputs is not None and not isinstance(outputs, str):
        raise ConstraintViolation("outputs must be a directory path string")
    chains = _get_num(raw, "chains", "", default=1, minimum=1, integer=True)
    seed = _get_num(raw, "seed", "", default=0, integer=True)
    return ExperimentConfig(
        model=model,
        priors=priors,
        sampler=sampler,
        data=data,
        split=split,
        outputs=outputs,
        chains=chains,
        seed=seed,
    )


def serialize(cfg: ExperimentConfig) -> str:
    """Canonical JSON form with all defaults made explicit."""
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n"
