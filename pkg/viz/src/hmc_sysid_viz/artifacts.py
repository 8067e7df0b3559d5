"""Readers for hmc-sysid run artifacts.

This package talks to the sampler only through its output files: chain.csv,
space.json, data.csv, states_true.csv and freqresp.json.  Nothing here
imports the sampler package; the file formats are the whole contract, so
every reader validates what it loads and raises a typed error otherwise.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np


class ArtifactError(Exception):
    """Base class for unreadable or inconsistent artifact files."""


class EmptyArtifact(ArtifactError):
    """File exists but carries no usable rows, draws or coefficients."""


class MissingColumn(ArtifactError):
    """A requested column is not present in the artifact."""


# ---------------------------------------------------------------------------
# chain.csv
# ---------------------------------------------------------------------------

@dataclass
class ChainTable:
    """Kept draws: one column per unconstrained coordinate plus bookkeeping."""

    names: tuple
    draws: np.ndarray
    log_density: np.ndarray
    accepted: np.ndarray

    @property
    def n_draws(self) -> int:
        return int(self.draws.shape[0])

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise MissingColumn(f"chain has no column {name!r}")
        return self.draws[:, self.names.index(name)]


def _load_rows(fh, path, what: str) -> np.ndarray:
    """Parse the numeric body of a csv artifact, or raise EmptyArtifact."""
    text = fh.read()
    if not text.strip():
        raise EmptyArtifact(f"{path}: {what} has a header but no rows")
    try:
        return np.loadtxt(io.StringIO(text), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise ArtifactError(f"{path}: unparseable {what} rows ({exc})") from None


def read_chain(path) -> ChainTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.strip():
            raise EmptyArtifact(f"{path}: missing header line")
        names = header.split(",")
        if len(names) < 3 or names[-2:] != ["log_density", "accepted"]:
            raise ArtifactError(
                f"{path}: chain header must end with log_density,accepted"
            )
        body = _load_rows(fh, path, "chain")
    if body.shape[1] != len(names):
        raise ArtifactError(
            f"{path}: {body.shape[1]} fields per row, header names {len(names)}"
        )
    return ChainTable(
        names=tuple(names[:-2]),
        draws=body[:, :-2],
        log_density=body[:, -2],
        accepted=body[:, -1].astype(int),
    )


# ---------------------------------------------------------------------------
# space.json
# ---------------------------------------------------------------------------

TRANSFORM_PREFIX = {"identity": "", "log": "log_", "shifted_log": "slog_"}


@dataclass
class SpaceBlock:
    name: str
    size: int
    transform: str
    lower: float
    coord_names: tuple
    hyper: bool


@dataclass
class Space:
    """Coordinate layout of a run: block structure, transforms, model info."""

    blocks: list
    model: dict = field(default_factory=dict)
    dt: float = 1.0
    T: int = 0
    n_est: int = 0

    @property
    def constrained_names(self) -> tuple:
        return tuple(n for b in self.blocks for n in b.coord_names)

    @property
    def unconstrained_names(self) -> tuple:
        out = []
        for b in self.blocks:
            prefix = TRANSFORM_PREFIX[b.transform]
            out.extend(prefix + n for n in b.coord_names)
        return tuple(out)

    @property
    def hyper_mask(self) -> np.ndarray:
        return np.concatenate(
            [np.full(b.size, b.hyper, dtype=bool) for b in self.blocks]
        )

    def constrain(self, draws: np.ndarray) -> np.ndarray:
        """Map unconstrained chain columns to natural-scale values."""
        values = np.asarray(draws, dtype=float).copy()
        lo = 0
        for b in self.blocks:
            sl = slice(lo, lo + b.size)
            if b.transform == "log":
                values[..., sl] = np.exp(values[..., sl])
            elif b.transform == "shifted_log":
                values[..., sl] = b.lower + np.exp(values[..., sl])
            lo += b.size
        return values


def read_space(path) -> Space:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not valid JSON ({exc})") from None
    try:
        raw_blocks = payload["space"]["blocks"]
    except (KeyError, TypeError):
        raise ArtifactError(f"{path}: no space/blocks entry") from None
    if not raw_blocks:
        raise EmptyArtifact(f"{path}: space has no blocks")
    blocks = []
    for bd in raw_blocks:
        tr = bd.get("transform", {})
        kind = tr.get("kind", "identity")
        if kind not in TRANSFORM_PREFIX:
            raise ArtifactError(f"{path}: unknown transform kind {kind!r}")
        blocks.append(SpaceBlock(
            name=bd["name"],
            size=int(bd["size"]),
            transform=kind,
            lower=float(tr.get("lower", 0.0)),
            coord_names=tuple(bd["coord_names"]),
            hyper=bool(bd.get("hyper", False)),
        ))
    return Space(
        blocks=blocks,
        model=payload.get("model", {}),
        dt=float(payload.get("dt", 1.0)),
        T=int(payload.get("T", 0)),
        n_est=int(payload.get("n_est", 0)),
    )


# ---------------------------------------------------------------------------
# data.csv / states_true.csv
# ---------------------------------------------------------------------------

@dataclass
class DataTable:
    t: np.ndarray
    u: np.ndarray
    y: np.ndarray  # (T, n_y)
    y_names: tuple


def read_data(path) -> DataTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if len(header) < 3 or header[:2] != ["t", "u"]:
            raise ArtifactError(f"{path}: data header must start with t,u")
        body = _load_rows(fh, path, "data")
    if body.shape[1] != len(header):
        raise ArtifactError(
            f"{path}: {body.shape[1]} fields per row, header names {len(header)}"
        )
    return DataTable(
        t=body[:, 0], u=body[:, 1], y=body[:, 2:], y_names=tuple(header[2:])
    )


@dataclass
class StatesTable:
    t: np.ndarray
    names: tuple
    x: np.ndarray  # (T, n_x)

    def column(self, name: str) -> np.ndarray:
        if name not in self.names:
            raise MissingColumn(f"state file has no column {name!r}")
        return self.x[:, self.names.index(name)]


def read_states(path) -> StatesTable:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if len(header) < 2 or header[0] != "t":
            raise ArtifactError(f"{path}: state header must start with t")
        body = _load_rows(fh, path, "state")
    if body.shape[1] != len(header):
        raise ArtifactError(
            f"{path}: {body.shape[1]} fields per row, header names {len(header)}"
        )
    return StatesTable(t=body[:, 0], names=tuple(header[1:]), x=body[:, 1:])


# ---------------------------------------------------------------------------
# freqresp.json and transfer-function truth overlays
# ---------------------------------------------------------------------------

@dataclass
class FreqResponseTable:
    omega: np.ndarray
    mean: np.ndarray  # complex (F,)
    draws: np.ndarray  # complex (n, F)
    n_excluded: int


def _complex_grid(rows) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim < 2 or arr.shape[-1] != 2:
        raise ArtifactError("response entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def read_freqresp(path) -> FreqResponseTable:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not valid JSON ({exc})") from None
    try:
        omega = np.asarray(payload["omega"], dtype=float)
        mean = _complex_grid(payload["mean"])
        draws_raw = payload["draws"]
    except (KeyError, TypeError, ValueError):
        raise ArtifactError(f"{path}: need omega, mean and draws entries") from None
    if omega.size == 0 or len(draws_raw) == 0:
        raise EmptyArtifact(f"{path}: frequency response carries no draws")
    draws = _complex_grid(draws_raw)
    if draws.shape[-1] != omega.size or mean.shape[-1] != omega.size:
        raise ArtifactError(f"{path}: grid sizes disagree with omega")
    return FreqResponseTable(
        omega=omega,
        mean=mean,
        draws=np.atleast_2d(draws),
        n_excluded=int(payload.get("n_excluded", 0)),
    )


def read_transfer_truth(path):
    """True system overlay: JSON with numerator taps and monic-denominator lags.

    Returns ``(num, den)`` where the transfer function is
    ``sum_k num[k] z^-k / (1 + sum_k den[k] z^-(k+1))``.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise EmptyArtifact(f"{path}: truth file is not valid JSON ({exc})") from None
    if not isinstance(payload, dict) or "num" not in payload or "den" not in payload:
        raise EmptyArtifact(f"{path}: truth file needs num and den arrays")
    try:
        num = np.asarray(payload["num"], dtype=float)
        den = np.asarray(payload["den"], dtype=float)
    except (TypeError, ValueError):
        raise EmptyArtifact(f"{path}: truth coefficients must be numeric") from None
    if num.ndim != 1 or den.ndim != 1 or num.size == 0:
        raise EmptyArtifact(f"{path}: truth coefficients must be nonempty vectors")
    return num, den


def transfer_response(num, den, omega) -> np.ndarray:
    """Evaluate ``B(z)/A(z)`` on the unit circle for a monic denominator."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    omega = np.asarray(omega, dtype=float)
    z_num = np.exp(-1j * np.outer(omega, np.arange(num.size)))
    z_den = np.exp(-1j * np.outer(omega, np.arange(1, den.size + 1)))
    return (z_num @ num) / (1.0 + z_den @ den)
