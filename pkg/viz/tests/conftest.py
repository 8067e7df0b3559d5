"""Shared factories that fabricate artifact files for the plotting tests.

Everything here writes the same on-disk formats the sampler CLI emits
(chain.csv, space.json, data.csv, states_true.csv, freqresp.json) so the
readers and plot builders can be exercised without running a sampler.
"""

import json

import numpy as np
import pytest


def write_chain(path, names, draws, log_density=None, accepted=None):
    """Write a chain.csv with the trailing log_density/accepted columns."""
    draws = np.asarray(draws, dtype=float)
    n = draws.shape[0]
    if log_density is None:
        log_density = np.zeros(n)
    if accepted is None:
        accepted = np.ones(n)
    header = list(names) + ["log_density", "accepted"]
    body = np.column_stack([draws, np.asarray(log_density), np.asarray(accepted)])
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in body:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return path


def write_space(path, blocks, model="arx", dt=1.0, T=100, n_est=100, split=1.0):
    """Write a space.json; blocks is a list of dicts with name/size/..."""
    payload = {
        "space": {
            "dim": sum(b["size"] for b in blocks),
            "blocks": blocks,
        },
        "model": model,
        "dt": dt,
        "T": T,
        "n_est": n_est,
        "split": split,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
    return path


def block(name, coord_names, kind="identity", lower=0.0, hyper=False):
    return {
        "name": name,
        "size": len(coord_names),
        "transform": {"kind": kind, "lower": lower},
        "coord_names": list(coord_names),
        "hyper": hyper,
    }


def write_data(path, t, u, y):
    """Write a data.csv; y may be (T,) or (T, n_y)."""
    y = np.atleast_2d(np.asarray(y, dtype=float).T).T
    names = ["y" if j == 0 else f"y{j + 1}" for j in range(y.shape[1])]
    with open(path, "w") as fh:
        fh.write("t,u," + ",".join(names) + "\n")
        for k in range(len(t)):
            vals = [f"{t[k]:.17g}", f"{u[k]:.17g}"]
            vals += [f"{v:.17g}" for v in y[k]]
            fh.write(",".join(vals) + "\n")
    return path


def write_states(path, t, x, names=None):
    x = np.asarray(x, dtype=float)
    if names is None:
        names = [f"x{i + 1}" for i in range(x.shape[1])]
    with open(path, "w") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for k in range(len(t)):
            fh.write(
                ",".join([f"{t[k]:.17g}"] + [f"{v:.17g}" for v in x[k]]) + "\n"
            )
    return path


def write_freqresp(path, omega, mean, draws, n_excluded=0):
    """Write a freqresp.json; mean is (F,) complex, draws is (n, F) complex."""
    mean = np.asarray(mean, dtype=complex)
    draws = np.asarray(draws, dtype=complex)

    def pairs(row):
        return [[float(v.real), float(v.imag)] for v in row]

    payload = {
        "omega": [float(w) for w in omega],
        "mean": pairs(mean),
        "draws": [pairs(row) for row in draws],
        "n_excluded": int(n_excluded),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
    return path


@pytest.fixture
def arx_run(tmp_path):
    """A small ARX-flavoured run: 4 coefficients + a log noise scale."""
    rng = np.random.default_rng(7)
    n = 400
    names = ["a1", "a2", "b0", "b1", "log_sigma_e"]
    draws = np.column_stack(
        [
            -1.5 + 0.05 * rng.standard_normal(n),
            0.7 + 0.05 * rng.standard_normal(n),
            1.0 + 0.05 * rng.standard_normal(n),
            0.5 + 0.05 * rng.standard_normal(n),
            np.log(0.3) + 0.1 * rng.standard_normal(n),
        ]
    )
    chain = write_chain(
        tmp_path / "chain.csv",
        names,
        draws,
        log_density=-50 + rng.standard_normal(n),
        accepted=(rng.uniform(size=n) < 0.9).astype(float),
    )
    space = write_space(
        tmp_path / "space.json",
        [
            block("coefficients", ["a1", "a2", "b0", "b1"]),
            block("sigma_e", ["sigma_e"], kind="log"),
        ],
        model="arx",
        T=120,
        n_est=80,
        split=0.667,
    )
    t = np.arange(120, dtype=float)
    u = np.sign(np.sin(0.1 * t))
    y = np.convolve(u, [0.0, 1.0, 0.5], mode="full")[:120]
    data = write_data(tmp_path / "data.csv", t, u, y)
    return {
        "dir": tmp_path,
        "chain": chain,
        "space": space,
        "data": data,
        "names": names,
        "draws": draws,
    }


@pytest.fixture
def state_run(tmp_path):
    """A state-space-flavoured run: 2 log parameters + x1..x3 over T=25."""
    rng = np.random.default_rng(11)
    T, n_x, n = 25, 3, 150
    t = np.arange(T, dtype=float) * 0.01
    truth = np.column_stack(
        [np.sin(2.0 * t), np.cos(2.0 * t), 0.3 * np.sin(4.0 * t)]
    )
    names = ["log_k", "log_d"]
    cols = [np.log(2.0) + 0.05 * rng.standard_normal(n),
            np.log(0.1) + 0.05 * rng.standard_normal(n)]
    for k in range(T):
        for i in range(n_x):
            names.append(f"x{i + 1}[{k}]")
            cols.append(truth[k, i] + 0.02 * rng.standard_normal(n))
    chain = write_chain(tmp_path / "chain.csv", names, np.column_stack(cols))
    blocks = [
        block("params", ["k", "d"], kind="log"),
        block(
            "states",
            [f"x{i + 1}[{k}]" for k in range(T) for i in range(n_x)],
        ),
    ]
    space = write_space(
        tmp_path / "space.json", blocks, model="pendulum", dt=0.01, T=T, n_est=T
    )
    u = np.zeros(T)
    y = truth[:, :2] + 0.01 * rng.standard_normal((T, 2))
    data = write_data(tmp_path / "data.csv", t, u, y)
    states = write_states(tmp_path / "states_true.csv", t, truth)
    return {
        "dir": tmp_path,
        "chain": chain,
        "space": space,
        "data": data,
        "states": states,
        "T": T,
        "n_x": n_x,
    }
