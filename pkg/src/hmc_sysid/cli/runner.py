"""Experiment orchestration: data, chains, artifacts, manifest.

Chains run concurrently on one thread each with independent random streams
keyed off the experiment seed.  All artifact files are written by the
orchestrator thread after every chain has joined, so a crash mid-run never
leaves a half-written chain file, and reruns with the same config and seed
produce byte-identical chain output.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .. import __version__
from ..diagnostics import model_fit, summarize
from ..models import DataSet
from ..samplers import Chain, SamplerConfig, run_chain
from ..numerics import RngStream
from .assemble import (
    PENDULUM_N_X,
    assemble_target,
    initial_point,
    simulate_dataset,
    predicted_outputs,
)
from .config import ConstraintViolation, ExperimentConfig
from .io import (
    ingest_csv,
    write_chain_csv,
    write_data_csv,
    write_json,
    write_states_csv,
)

PENDULUM_STATE_LABELS = ("x1", "x2", "x3", "x4")


def chain_filename(index: int) -> str:
    return "chain.csv" if index == 0 else f"chain_{index}.csv"


def _sampler_config(cfg: ExperimentConfig, init: np.ndarray) -> SamplerConfig:
    s = cfg.sampler
    return SamplerConfig(
        kind=s.kind,
        iterations=s.iterations,
        warmup=s.warmup,
        epsilon=s.epsilon,
        target_accept=s.target_accept,
        L_base=s.L_base,
        jitter=s.jitter,
        max_steps=s.max_steps,
        adapt_step_size=s.adapt_step_size,
        adapt_mass=s.adapt_mass,
        init=init,
    )


def load_dataset(cfg: ExperimentConfig):
    """Materialize the record: read it from disk or simulate it.

    Returns ``(data, states)``; states is the true trajectory when the config
    simulates a state space model, else None.
    """
    if cfg.data.file is not None:
        data = ingest_csv(cfg.data.file)
        _check_record(cfg, data)
        return data, None
    data, states = simulate_dataset(cfg, cfg.seed)
    _check_record(cfg, data)
    return data, states


def _check_record(cfg: ExperimentConfig, data: DataSet) -> None:
    if cfg.model.kind == "pendulum":
        n_y = data.y.shape[1] if data.y.ndim == 2 else 1
        if n_y != 3:
            raise ConstraintViolation(
                f"pendulum needs 3 output channels, data has {n_y}"
            )
    elif data.y.ndim != 1:
        raise ConstraintViolation(
            f"{cfg.model.kind} is single-output, data has {data.y.shape[1]} channels"
        )


def _fit_report(cfg: ExperimentConfig, data: DataSet, n_est: int,
                eta_mean: np.ndarray, states_true) -> dict:
    yhat, t0 = predicted_outputs(cfg, eta_mean, data)
    y = data.y if data.y.ndim == 2 else data.y[:, None]
    yhat2 = yhat if yhat.ndim == 2 else yhat[:, None]
    names = ["y" if j == 0 else f"y{j + 1}" for j in range(y.shape[1])]

    def fits(lo: int, hi: int):
        out = {}
        if hi - lo < 2:
            return out
        for j, name in enumerate(names):
            out[name] = model_fit(y[lo:hi, j], yhat2[lo - t0 : hi - t0, j])
        return out

    report = {
        "n_estimation": int(n_est),
        "n_validation": int(data.T - n_est),
        "prediction_start": int(t0),
        "model_fit": {"estimation": fits(t0, n_est)},
    }
    if n_est < data.T:
        report["model_fit"]["validation"] = fits(max(n_est, t0), data.T)

    if cfg.model.kind == "pendulum" and states_true is not None:
        x_mean = eta_mean[6:].reshape(data.T, PENDULUM_N_X)
        rmse = np.sqrt(np.mean((x_mean - states_true) ** 2, axis=0))
        report["state_rmse"] = {
            name: float(r) for name, r in zip(PENDULUM_STATE_LABELS, rmse)
        }
    return report


def run_experiment(cfg: ExperimentConfig, out_dir: str, thin: int = 1) -> dict:
    """Run the full experiment and populate ``out_dir``; returns the manifest.

    Artifacts: data.csv (when simulated), states_true.csv (simulated state
    space models), chain.csv (+ chain_1.csv ... for extra chains), space.json,
    summary.json, fit.json, manifest.json.  On failure, files written so far
    are removed so the directory never holds a partial run.
    """
    if thin < 1:
        raise ConstraintViolation(f"thin must be >= 1, got {thin}")
    t_start = time.perf_counter()
    created_dir = not os.path.isdir(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def _write(name: str, writer, *args) -> str:
        path = os.path.join(out_dir, name)
        writer(path, *args)
        written.append(name)
        return path

    try:
        data, states_true = load_dataset(cfg)
        if cfg.data.simulate is not None:
            _write("data.csv", write_data_csv, data)
            if states_true is not None:
                _write(
                    "states_true.csv",
                    write_states_csv,
                    states_true,
                    data.dt,
                    PENDULUM_STATE_LABELS,
                )

        data_est, n_est = data.split(cfg.split)
        if cfg.model.kind == "pendulum" and n_est != data.T:
            raise ConstraintViolation(
                "pendulum estimates states jointly; split must be 1.0"
            )

        # one target per chain: evaluation counters must not be shared
        builds = [assemble_target(cfg, data_est) for _ in range(cfg.chains)]
        space = builds[0][1]
        jobs = []
        for i, (target, _) in enumerate(builds):
            init = initial_point(cfg, space, data_est, i)
            jobs.append((target, _sampler_config(cfg, init), RngStream(cfg.seed, i + 1)))

        with ThreadPoolExecutor(max_workers=cfg.chains) as pool:
            futures = [pool.submit(run_chain, *job) for job in jobs]
            chains: list[Chain] = [f.result() for f in futures]

        names = space.unconstrained_names
        for i, ch in enumerate(chains):
            _write(
                chain_filename(i),
                write_chain_csv,
                names,
                ch.draws[::thin],
                ch.log_density[::thin],
                ch.accepted[::thin],
            )

        _write(
            "space.json",
            write_json,
            {
                "space": space.to_dict(),
                "model": cfg.model.to_dict(),
                "dt": data.dt,
                "T": data.T,
                "n_est": int(n_est),
                "split": cfg.split,
            },
        )

        pooled = np.concatenate([ch.draws[::thin] for ch in chains], axis=0)
        summary = summarize(pooled, space)
        _write(
            "summary.json",
            write_json,
            {**summary.to_dict(), "chains": cfg.chains, "thin": int(thin)},
        )

        eta_mean = space.constrain(pooled).mean(axis=0)
        _write("fit.json", write_json, _fit_report(cfg, data, n_est, eta_mean, states_true))

        manifest = {
            "version": __version__,
            "config": cfg.to_dict(),
            "seed": int(cfg.seed),
            "thin": int(thin),
            "chains": [
                {
                    "stream": i + 1,
                    "iterations": ch.config.iterations,
                    "warmup": ch.config.warmup,
                    "acceptance_rate": float(ch.acceptance_rate),
                    "divergences": int(ch.divergences),
                    "warmup_divergences": int(ch.warmup_divergences),
                    "epsilon": float(ch.epsilon),
                    "evals_warmup": list(ch.evals_warmup),
                    "evals_main": list(ch.evals_main),
                    "elapsed_seconds": float(ch.elapsed_seconds),
                }
                for i, ch in enumerate(chains)
            ],
            "wall_seconds": time.perf_counter() - t_start,
            "artifacts": sorted(written + ["manifest.json"]),
        }
        _write("manifest.json", write_json, manifest)
        return manifest
    except BaseException:
        for name in written:
            try:
                os.remove(os.path.join(out_dir, name))
            except OSError:
                pass
        if created_dir:
            try:
                os.rmdir(out_dir)
            except OSError:
                pass
        raise


def simulate_only(cfg: ExperimentConfig, out_dir: str) -> list:
    """Write just the simulated record (data.csv, states_true.csv if any)."""
    if cfg.data.simulate is None:
        raise ConstraintViolation("simulate requires a data.simulate section")
    os.makedirs(out_dir, exist_ok=True)
    data, states_true = load_dataset(cfg)
    artifacts = ["data.csv"]
    write_data_csv(os.path.join(out_dir, "data.csv"), data)
    if states_true is not None:
        write_states_csv(
            os.path.join(out_dir, "states_true.csv"),
            states_true,
            data.dt,
            PENDULUM_STATE_LABELS,
        )
        artifacts.append("states_true.csv")
    return artifacts
