"""The five figure kinds rendered from run artifacts.

Each plot function writes one image (format chosen by the output suffix,
PNG or SVG) and returns a small dict describing what was drawn: panel grid,
draw counts, and any series recomputed here.  Tests assert on that dict and
on the artifact numbers, never on pixels.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .artifacts import (
    ArtifactError,
    MissingColumn,
    read_chain,
    read_data,
    read_freqresp,
    read_space,
    read_states,
    read_transfer_truth,
    transfer_response,
)

KINDS = ("trace_acf", "marginals", "nyquist", "states", "pairs")

STATE_COLUMN = re.compile(r"^(x\d+)\[(\d+)\]$")


def acf(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Autocorrelation by direct lagged sums (1/N normalization).

    Deliberately not shared with the sampler package: the plotted ACF is an
    independent recomputation from the raw draws.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    max_lag = min(max_lag, n - 1)
    c = x - x.mean()
    denom = float(c @ c)
    out = np.zeros(max_lag + 1)
    out[0] = 1.0
    if denom == 0.0:
        return out
    for k in range(1, max_lag + 1):
        out[k] = float(c[: n - k] @ c[k:]) / denom
    return out


def _grid(n: int, max_cols: int = 4):
    cols = min(max_cols, n)
    rows = math.ceil(n / cols)
    return rows, cols


def _save(fig, out_path: str) -> None:
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)


def plot_trace_acf(chain_path, columns, out_path, max_lag: int = 50) -> dict:
    """One row per column: draw trace on the left, ACF out to 50 lags right."""
    if not columns:
        raise ArtifactError("trace_acf needs at least one column name")
    table = read_chain(chain_path)
    series = {name: table.column(name) for name in columns}

    fig, axes = plt.subplots(
        len(columns), 2, figsize=(9, 2.2 * len(columns)), squeeze=False
    )
    acfs = {}
    for i, name in enumerate(columns):
        x = series[name]
        rho = acf(x, max_lag)
        acfs[name] = rho
        ax = axes[i][0]
        ax.plot(x, lw=0.6, color="tab:blue")
        ax.set_ylabel(name)
        ax.set_xlim(0, x.size)
        axb = axes[i][1]
        axb.bar(np.arange(rho.size), rho, width=0.8, color="tab:orange")
        axb.axhline(0.0, color="black", lw=0.6)
        axb.set_ylim(min(-0.1, rho.min() - 0.05), 1.05)
    axes[-1][0].set_xlabel("iteration")
    axes[-1][1].set_xlabel("lag")
    fig.suptitle("traces and autocorrelation")
    _save(fig, out_path)
    return {
        "out": str(out_path),
        "panels": (len(columns), 2),
        "acf": acfs,
        "n_draws": table.n_draws,
    }


def plot_marginals(chain_path, space_path, out_path, columns=(),
                   bins: int = 40) -> dict:
    """Histogram per parameter on the natural (constrained) scale."""
    table = read_chain(chain_path)
    space = read_space(space_path)
    if table.names != space.unconstrained_names:
        raise ArtifactError(
            "chain columns do not match the coordinates in the space file"
        )
    values = space.constrain(table.draws)
    names = space.constrained_names
    if not columns:
        keep = ~space.hyper_mask
        columns = [n for n, k in zip(names, keep) if k]
    index = {}
    for name in columns:
        if name not in names:
            raise MissingColumn(f"no parameter named {name!r} in this run")
        index[name] = names.index(name)

    rows, cols = _grid(len(columns))
    fig, axes = plt.subplots(
        rows, cols, figsize=(3.0 * cols, 2.4 * rows), squeeze=False
    )
    n_bins = {}
    for j, name in enumerate(columns):
        ax = axes[j // cols][j % cols]
        v = values[:, index[name]]
        if v.max() == v.min():
            # degenerate column: one bin centred on the constant value
            edges = np.array([v[0] - 0.5, v[0] + 0.5])
        else:
            edges = np.histogram_bin_edges(v, bins=bins)
        counts, edges, _ = ax.hist(v, bins=edges, color="tab:green", alpha=0.8)
        n_bins[name] = int(np.count_nonzero(counts))
        ax.set_title(name, fontsize=9)
    for j in range(len(columns), rows * cols):
        axes[j // cols][j % cols].set_axis_off()
    fig.suptitle("posterior marginals")
    _save(fig, out_path)
    return {
        "out": str(out_path),
        "panels": (rows, cols),
        "n_bins": n_bins,
        "n_draws": table.n_draws,
    }


def plot_nyquist(freqresp_path, out_path, truth_path=None) -> dict:
    """Per-draw response curves, their mean, and an optional true system."""
    fr = read_freqresp(freqresp_path)
    fig, ax = plt.subplots(figsize=(5.5, 5.0))
    for row in fr.draws:
        ax.plot(np.real(row), np.imag(row), color="tab:green", alpha=0.05, lw=0.6)
    ax.plot(np.real(fr.mean), np.imag(fr.mean), color="tab:orange", lw=1.6,
            label="posterior mean")
    has_truth = False
    if truth_path is not None:
        num, den = read_transfer_truth(truth_path)
        g = transfer_response(num, den, fr.omega)
        ax.plot(np.real(g), np.imag(g), color="black", ls="--", lw=1.2,
                label="true system")
        has_truth = True
    ax.set_xlabel("Re G")
    ax.set_ylabel("Im G")
    ax.legend(loc="best", fontsize=8)
    ax.set_title("Nyquist diagram")
    _save(fig, out_path)
    return {
        "out": str(out_path),
        "n_draws": int(fr.draws.shape[0]),
        "n_excluded": fr.n_excluded,
        "truth_overlay": has_truth,
    }


def plot_states(chain_path, data_path, out_path, truth_path=None) -> dict:
    """Posterior-mean state trajectories with 2-sd bands and measurements.

    State columns are recognized in the chain by their ``x<i>[<t>]`` names;
    measured channels overlay the matching panel (channel j on state j).
    """
    table = read_chain(chain_path)
    data = read_data(data_path)

    slots = {}
    for col, name in enumerate(table.names):
        m = STATE_COLUMN.match(name)
        if m:
            slots[(m.group(1), int(m.group(2)))] = col
    if not slots:
        raise ArtifactError("chain carries no state trajectory columns")
    state_names = sorted({k[0] for k in slots}, key=lambda s: int(s[1:]))
    T = 1 + max(k[1] for k in slots)
    if len(slots) != len(state_names) * T:
        raise ArtifactError("state trajectory columns form a ragged grid")

    mean = np.empty((T, len(state_names)))
    sd = np.empty((T, len(state_names)))
    for i, sn in enumerate(state_names):
        cols = [slots[(sn, t)] for t in range(T)]
        block = table.draws[:, cols]
        mean[:, i] = block.mean(axis=0)
        sd[:, i] = block.std(axis=0, ddof=1) if block.shape[0] > 1 else 0.0

    truth = read_states(truth_path) if truth_path is not None else None
    t_axis = data.t[:T] if data.t.size >= T else np.arange(T)

    fig, axes = plt.subplots(
        len(state_names), 1, figsize=(7.5, 1.9 * len(state_names)),
        squeeze=False, sharex=True,
    )
    for i, sn in enumerate(state_names):
        ax = axes[i][0]
        ax.fill_between(t_axis, mean[:, i] - 2 * sd[:, i],
                        mean[:, i] + 2 * sd[:, i],
                        color="tab:blue", alpha=0.25, lw=0)
        ax.plot(t_axis, mean[:, i], color="tab:blue", lw=1.0,
                label="posterior mean")
        if i < data.y.shape[1]:
            ax.plot(data.t[: data.y.shape[0]], data.y[:, i], ".",
                    color="tab:gray", ms=2.0, label="measured")
        if truth is not None and sn in truth.names:
            ax.plot(truth.t, truth.column(sn), color="black", ls="--", lw=0.9,
                    label="true")
        ax.set_ylabel(sn)
        if i == 0:
            ax.legend(loc="best", fontsize=7)
    axes[-1][0].set_xlabel("time")
    fig.suptitle("smoothed states")
    _save(fig, out_path)
    return {
        "out": str(out_path),
        "panels": (len(state_names), 1),
        "T": int(T),
        "n_draws": table.n_draws,
    }


def plot_pairs(chain_path, columns, out_path) -> dict:
    """Scatter matrix: histograms on the diagonal, pairwise clouds off it."""
    if not columns:
        raise ArtifactError("pairs needs at least one column name")
    table = read_chain(chain_path)
    series = [table.column(name) for name in columns]

    k = len(columns)
    fig, axes = plt.subplots(k, k, figsize=(2.2 * k, 2.2 * k), squeeze=False)
    for i in range(k):
        for j in range(k):
            ax = axes[i][j]
            if i == j:
                ax.hist(series[i], bins=30, color="tab:green", alpha=0.8)
            else:
                ax.plot(series[j], series[i], ".", ms=1.2, alpha=0.35,
                        color="tab:blue")
            if i == k - 1:
                ax.set_xlabel(columns[j], fontsize=8)
            if j == 0:
                ax.set_ylabel(columns[i], fontsize=8)
            ax.tick_params(labelsize=6)
    fig.suptitle("pairwise joint distributions")
    _save(fig, out_path)
    return {"out": str(out_path), "panels": (k, k), "n_draws": table.n_draws}


@dataclass
class PlotJob:
    """One rendering request: a plot kind plus the artifacts it reads."""

    kind: str
    out: str
    chain: str | None = None
    space: str | None = None
    data: str | None = None
    freqresp: str | None = None
    truth: str | None = None
    columns: tuple = field(default_factory=tuple)
    max_lag: int = 50
    bins: int = 40

    REQUIRED = {
        "trace_acf": ("chain", "columns"),
        "marginals": ("chain", "space"),
        "nyquist": ("freqresp",),
        "states": ("chain", "data"),
        "pairs": ("chain", "columns"),
    }

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ArtifactError(
                f"unknown plot kind {self.kind!r}; choose from {', '.join(KINDS)}"
            )
        if not self.out:
            raise ArtifactError("no output path given")
        for name in self.REQUIRED[self.kind]:
            if not getattr(self, name):
                raise ArtifactError(f"plot kind {self.kind!r} needs --{name}")
        for name in ("chain", "space", "data", "freqresp", "truth"):
            path = getattr(self, name)
            if path is not None and not os.path.exists(path):
                raise ArtifactError(f"--{name} file not found: {path}")

    def run(self) -> dict:
        self.validate()
        if self.kind == "trace_acf":
            return plot_trace_acf(self.chain, tuple(self.columns), self.out,
                                  max_lag=self.max_lag)
        if self.kind == "marginals":
            return plot_marginals(self.chain, self.space, self.out,
                                  columns=tuple(self.columns), bins=self.bins)
        if self.kind == "nyquist":
            return plot_nyquist(self.freqresp, self.out, truth_path=self.truth)
        if self.kind == "states":
            return plot_states(self.chain, self.data, self.out,
                               truth_path=self.truth)
        return plot_pairs(self.chain, tuple(self.columns), self.out)
