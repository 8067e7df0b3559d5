"""Command line interface.

Subcommands
-----------
simulate   draw a record from the configured generative model
fit        run the sampler and write all run artifacts
diagnose   summary table (JSON) for a stored chain
freqresp   posterior transfer function samples on a frequency grid

Exit codes: 0 success, 2 configuration or data errors, 3 runtime failures.
The environment variable ``HMC_SYSID_SEED`` overrides the config seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numpy as np

from ..diagnostics import freq_response, summarize
from ..priors import ParameterSpace
from .config import ConfigError, ConstraintViolation, ExperimentConfig, parse_config
from .io import DataFileError, read_chain_csv, read_json, write_json
from .runner import run_experiment, simulate_only

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SEED_ENV = "HMC_SYSID_SEED"


def load_config(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        cfg = parse_config(fh.read())
    env_seed = os.environ.get(SEED_ENV)
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConstraintViolation(
                f"{SEED_ENV} must be an integer, got {env_seed!r}"
            ) from None
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _resolve_out(cfg: ExperimentConfig, out_flag: str | None) -> str:
    out = out_flag or cfg.outputs
    if out is None:
        raise ConstraintViolation("no output directory: pass --out or set outputs")
    return out


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    artifacts = simulate_only(cfg, _resolve_out(cfg, args.out))
    print(f"wrote {', '.join(artifacts)} to {_resolve_out(cfg, args.out)}")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = load_config(args.config)
    if args.chains is not None:
        if args.chains < 1:
            raise ConstraintViolation(f"--chains must be >= 1, got {args.chains}")
        cfg = dataclasses.replace(cfg, chains=args.chains)
    out = _resolve_out(cfg, args.out)
    manifest = run_experiment(cfg, out, thin=args.thin)
    accept = ", ".join(
        f"{c['acceptance_rate']:.3f}" for c in manifest["chains"]
    )
    print(
        f"fit complete: {cfg.chains} chain(s) in {manifest['wall_seconds']:.1f} s, "
        f"acceptance {accept}; artifacts in {out}"
    )
    return EXIT_OK


def cmd_diagnose(args) -> int:
    names, draws, _, accepted = read_chain_csv(args.chain)
    payload = read_json(args.space)
    space = ParameterSpace.from_dict(payload["space"])
    if names != space.unconstrained_names:
        raise ConstraintViolation(
            "chain columns do not match the parameter space coordinates"
        )
    summary = summarize(draws, space)
    report = {
        **summary.to_dict(),
        "acceptance_rate": float(np.mean(accepted)),
    }
    print(json.dumps(report, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_freqresp(args) -> int:
    names, draws, _, _ = read_chain_csv(args.chain)
    payload = read_json(args.model)
    model = payload["model"]
    space = ParameterSpace.from_dict(payload["space"])
    if names != space.unconstrained_names:
        raise ConstraintViolation(
            "chain columns do not match the parameter space coordinates"
        )
    sl = space.slice_of("coefficients")
    coeffs = space.constrain(draws)[:, sl]
    if model["kind"] == "arx":
        n_a = int(model["n_a"])
        den = coeffs[:, :n_a]
        num = coeffs[:, n_a:]
    elif model["kind"] == "oe":
        n_b = int(model["n_b"])
        num = coeffs[:, : n_b + 1]
        den = coeffs[:, n_b + 1 :]
    else:
        raise ConstraintViolation(
            f"frequency response needs a transfer function model, got {model['kind']!r}"
        )
    response = freq_response(num, den)
    write_json(args.out, response.to_dict())
    print(f"wrote frequency response for {draws.shape[0]} draws to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmc-sysid",
        description="Bayesian system identification with gradient-based MCMC",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a record from the generative model")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="sample the posterior and write artifacts")
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--chains", type=int, default=None, help="override chain count")
    p.add_argument("--thin", type=int, default=1, help="keep every k-th draw")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("diagnose", help="summary statistics for a stored chain")
    p.add_argument("--chain", required=True, help="chain.csv from a fit")
    p.add_argument("--space", required=True, help="space.json from the same fit")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("freqresp", help="posterior transfer function samples")
    p.add_argument("--chain", required=True, help="chain.csv from a fit")
    p.add_argument("--model", required=True, help="space.json from the same fit")
    p.add_argument("--out", required=True, help="output JSON file")
    p.set_defaults(func=cmd_freqresp)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DataFileError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as err:  # sampling or serialization failure
        print(f"runtime error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
