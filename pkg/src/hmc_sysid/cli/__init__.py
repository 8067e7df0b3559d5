"""Config parsing, target assembly, experiment orchestration and the CLI."""

from .config import (
    ConfigError,
    ConstraintViolation,
    ExperimentConfig,
    ParseError,
    UnknownKey,
    parse_config,
    serialize,
)
from .assemble import assemble_target, build_parameter_space, simulate_dataset
from .io import (
    DataFileError,
    MissingHeader,
    NonFiniteValue,
    NonUniformSampling,
    ingest_csv,
    read_chain_csv,
    write_chain_csv,
    write_data_csv,
)
from .runner import run_experiment, simulate_only
from .main import main

__all__ = [
    "ConfigError",
    "ConstraintViolation",
    "ExperimentConfig",
    "ParseError",
    "UnknownKey",
    "parse_config",
    "serialize",
    "assemble_target",
    "build_parameter_space",
    "simulate_dataset",
    "DataFileError",
    "MissingHeader",
    "NonFiniteValue",
    "NonUniformSampling",
    "ingest_csv",
    "read_chain_csv",
    "write_chain_csv",
    "write_data_csv",
    "run_experiment",
    "simulate_only",
    "main",
]
