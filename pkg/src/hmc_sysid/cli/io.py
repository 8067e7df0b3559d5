"""Artifact readers and writers.

All numeric text is emitted with ``repr``-style shortest round-trip
formatting, so a given array always serializes to the same bytes and
run outputs are reproducible at the file level.
"""

from __future__ import annotations

import json

import numpy as np

from ..models import DataSet
from .config import ConstraintViolation


class DataFileError(Exception):
    """Base class for problems with a measurement CSV."""


class MissingHeader(DataFileError):
    """First line is not the expected column header."""


class NonUniformSampling(DataFileError):
    """Timestamps are not strictly increasing on a uniform grid."""


class NonFiniteValue(DataFileError):
    """A data row contains NaN, infinity, or a non-numeric field."""

    def __init__(self, row: int, message: str = ""):
        self.row = row
        super().__init__(message or f"non-finite value in data row {row}")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_data_csv(path, data: DataSet) -> None:
    """Write ``t,u,y[,y2,...]`` rows for a dataset."""
    y = data.y if data.y.ndim == 2 else data.y[:, None]
    names = ["y" if j == 0 else f"y{j + 1}" for j in range(y.shape[1])]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t,u," + ",".join(names) + "\n")
        for t in range(data.T):
            row = [_fmt(t * data.dt), _fmt(data.u[t])]
            row += [_fmt(v) for v in y[t]]
            fh.write(",".join(row) + "\n")


def ingest_csv(path) -> DataSet:
    """Read a measurement CSV into a DataSet.

    The header must be ``t,u,y`` with optional extra outputs ``y2,y3,...``.
    Timestamps must be strictly increasing and uniformly spaced; the sample
    interval is taken from the first gap and every later gap must match it
    to within a relative tolerance of 1e-9.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n").rstrip("\r") for ln in fh]
    lines = [ln for ln in lines if ln.strip() != ""]
    if not lines:
        raise ConstraintViolation(f"{path}: data file is empty")
    header = [c.strip() for c in lines[0].split(",")]
    expected = ["t", "u", "y"]
    if len(header) < 3 or header[:3] != expected:
        raise MissingHeader(f"{path}: header must start with 't,u,y', got {lines[0]!r}")
    for j, name in enumerate(header[3:], start=2):
        if name != f"y{j}":
            raise MissingHeader(f"{path}: extra output columns must be y2,y3,..., got {name!r}")
    n_cols = len(header)
    n_y = n_cols - 2

    rows = np.empty((len(lines) - 1, n_cols))
    for i, line in enumerate(lines[1:]):
        fields = line.split(",")
        if len(fields) != n_cols:
            raise NonFiniteValue(i, f"row {i}: expected {n_cols} fields, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise NonFiniteValue(i, f"row {i}: non-numeric field in {line!r}") from None
        if not all(np.isfinite(vals)):
            raise NonFiniteValue(i)
        rows[i] = vals

    if rows.shape[0] == 0:
        raise ConstraintViolation(f"{path}: data file has a header but no samples")
    if rows.shape[0] < 2:
        raise NonUniformSampling(f"{path}: need at least two samples to fix the grid")
    t = rows[:, 0]
    gaps = np.diff(t)
    if np.any(gaps <= 0):
        bad = int(np.argmax(gaps <= 0))
        raise NonUniformSampling(f"{path}: timestamps not strictly increasing at row {bad + 1}")
    dt = gaps[0]
    if np.any(np.abs(gaps - dt) > 1e-9 * abs(dt)):
        bad = int(np.argmax(np.abs(gaps - dt) > 1e-9 * abs(dt)))
        raise NonUniformSampling(
            f"{path}: sample interval changes at row {bad + 1} "
            f"({gaps[bad]!r} vs {dt!r})"
        )
    u = rows[:, 1]
    y = rows[:, 2] if n_y == 1 else rows[:, 2:]
    return DataSet(u=u, y=y, dt=float(dt))


def write_states_csv(path, states, dt: float, names) -> None:
    states = np.asarray(states)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("t," + ",".join(names) + "\n")
        for t in range(states.shape[0]):
            fh.write(",".join([_fmt(t * dt)] + [_fmt(v) for v in states[t]]) + "\n")


def read_states_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header[1:], body[:, 1:]


def write_chain_csv(path, names, draws, log_density, accepted) -> None:
    """One row per kept draw: coordinates, log density, 0/1 accept flag."""
    draws = np.asarray(draws)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(list(names) + ["log_density", "accepted"]) + "\n")
        for i in range(draws.shape[0]):
            row = [_fmt(v) for v in draws[i]]
            row.append(_fmt(log_density[i]))
            row.append(str(int(accepted[i])))
            fh.write(",".join(row) + "\n")


def read_chain_csv(path):
    """Return (coordinate names, draws, log_density, accepted)."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        body = np.loadtxt(fh, delimiter=",", ndmin=2)
    if len(header) < 3 or header[-2:] != ["log_density", "accepted"]:
        raise MissingHeader(f"{path}: expected trailing log_density,accepted columns")
    names = header[:-2]
    return names, body[:, :-2], body[:, -2], body[:, -1].astype(int)


def write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
