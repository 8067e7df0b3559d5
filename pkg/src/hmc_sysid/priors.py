"""Parameter transforms, prior log densities and the parameter space layout.

Samplers explore an unconstrained vector ``zeta``; each named block of that
vector maps through an elementwise transform to the constrained parameter
``eta`` the model consumes (noise scales live on a log scale, degrees of
freedom on a shifted log scale).  The transform Jacobian is added to the
target so the chain samples the intended posterior over ``eta``.

All densities here accept either plain arrays or :class:`~.numerics.Dual`
values, so one implementation serves both evaluation and gradient passes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .numerics import LOG_2PI, Dual, dual_value, gammaln

LOG_2_OVER_PI = float(np.log(2.0 / np.pi))


class PriorDomainError(Exception):
    """Prior hyperparameter or argument outside its domain."""


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Transform:
    """Elementwise map from unconstrained to constrained coordinates.

    kinds
    -----
    identity     eta = zeta
    log          eta = exp(zeta), for strictly positive parameters
    shifted_log  eta = lower + exp(zeta), for parameters bounded below
    """

    kind: str = "identity"
    lower: float = 0.0

    def __post_init__(self):
        if self.kind not in ("identity", "log", "shifted_log"):
            raise PriorDomainError(f"unknown transform kind {self.kind!r}")

    def apply(self, zeta):
        """Map to constrained coordinates; returns ``(eta, log_jacobian)``."""
        if self.kind == "identity":
            return zeta, 0.0
        grown = np.exp(zeta)
        logjac = zeta.sum() if isinstance(zeta, Dual) else float(np.sum(zeta))
        if self.kind == "log":
            return grown, logjac
        return self.lower + grown, logjac

    def inverse(self, eta) -> np.ndarray:
        eta = np.asarray(eta, dtype=float)
        if self.kind == "identity":
            return eta.copy()
        shifted = eta - (self.lower if self.kind == "shifted_log" else 0.0)
        if np.any(shifted <= 0.0):
            raise PriorDomainError(
                f"value {eta} outside the image of transform {self.kind!r}"
            )
        return np.log(shifted)

    def coord_name(self, name: str) -> str:
        """Name of the unconstrained coordinate backing ``name``."""
        if self.kind == "identity":
            return name
        if self.kind == "log":
            return f"log_{name}"
        return f"slog_{name}"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lower": self.lower}

    @staticmethod
    def from_dict(d: dict) -> "Transform":
        return Transform(kind=d["kind"], lower=float(d.get("lower", 0.0)))


IDENTITY = Transform("identity")
LOG_POSITIVE = Transform("log")


def shifted_log(lower: float) -> Transform:
    return Transform("shifted_log", lower=float(lower))


# ---------------------------------------------------------------------------
# prior densities
# ---------------------------------------------------------------------------

def _block_shape(x) -> tuple:
    return x.val.shape if isinstance(x, Dual) else np.shape(x)


def gaussian_logprior(eta, scale, loc=0.0):
    """Independent Gaussian log density summed over the block."""
    scale = np.broadcast_to(np.asarray(scale, dtype=float), _block_shape(eta))
    if np.any(scale <= 0.0):
        raise PriorDomainError("gaussian prior needs scale > 0")
    z = (eta - loc) / scale
    quad = (z * z).sum() if isinstance(z, Dual) else float(np.sum(z * z))
    return -0.5 * scale.size * LOG_2PI - float(np.sum(np.log(scale))) - 0.5 * quad


def laplace_logprior(eta, scale, loc=0.0):
    """Independent Laplace log density; the |.| kink carries subgradient 0."""
    scale = np.broadcast_to(np.asarray(scale, dtype=float), _block_shape(eta))
    if np.any(scale <= 0.0):
        raise PriorDomainError("laplace prior needs scale > 0")
    dev = abs(eta - loc) / scale
    tot = dev.sum() if isinstance(dev, Dual) else float(np.sum(dev))
    return -scale.size * np.log(2.0) - float(np.sum(np.log(scale))) - tot


def halfcauchy_logpdf(x, scale=1.0):
    """Half-Cauchy log density on x >= 0 with the given scale."""
    scale = float(scale)
    if scale <= 0.0:
        raise PriorDomainError("half-Cauchy prior needs scale > 0")
    if not isinstance(x, Dual) and np.any(np.asarray(x) < 0.0):
        return -np.inf
    z = x / scale
    body = np.log(1.0 + z * z)
    if isinstance(body, Dual):
        tot = body.sum()
        n = body.val.size
    else:
        tot = float(np.sum(body))
        n = np.size(body)
    return n * (LOG_2_OVER_PI - np.log(scale)) - tot


def gamma_logpdf(x, shape, rate):
    """Gamma log density in the shape/rate convention."""
    shape = float(shape)
    rate = float(rate)
    if shape <= 0.0 or rate <= 0.0:
        raise PriorDomainError("gamma prior needs shape > 0 and rate > 0")
    if not isinstance(x, Dual) and np.any(np.asarray(x) <= 0.0):
        return -np.inf
    body = (shape - 1.0) * np.log(x) - rate * x
    if isinstance(body, Dual):
        tot = body.sum()
        n = body.val.size
    else:
        tot = float(np.sum(body))
        n = np.size(body)
    return n * (shape * np.log(rate) - gammaln(shape)) + tot


def horseshoe_logjoint(w, log_beta, log_tau):
    """Joint log density of weights and their horseshoe scales, in log coordinates.

    Hierarchy: w_k ~ N(0, beta_k^2), beta_k ~ halfCauchy(tau), tau ~ halfCauchy(1).
    The chain samples log beta_k and log tau directly, so the change-of-variable
    terms (sum log beta_k + log tau) are folded in here; callers must not add a
    separate Jacobian for these coordinates.
    """
    beta = np.exp(log_beta)
    tau = np.exp(log_tau)
    z = w / beta
    quad = (z * z).sum() if isinstance(z, Dual) else float(np.sum(z * z))
    n = w.val.size if isinstance(w, Dual) else np.size(w)

    lp = -0.5 * n * LOG_2PI - _sum(log_beta) - 0.5 * quad
    ratio = beta / tau
    lp = lp + n * LOG_2_OVER_PI - n * log_tau - _sum(np.log(1.0 + ratio * ratio))
    lp = lp + LOG_2_OVER_PI - _sum(np.log(1.0 + tau * tau))
    lp = lp + _sum(log_beta) + log_tau
    return lp


def _sum(x):
    return x.sum() if isinstance(x, Dual) else float(np.sum(x))


@dataclass(frozen=True)
class PriorSpec:
    """Prior choice for one parameter block.

    ``space`` selects whether a gaussian/laplace density reads the constrained
    value or the raw unconstrained coordinate; the latter yields a log-normal
    style prior for positive physical constants.
    """

    kind: str
    scale: float | tuple = 1.0
    loc: float | tuple = 0.0
    shape: float = 2.0
    rate: float = 0.1
    space: str = "constrained"

    KINDS = ("flat", "gaussian", "laplace", "half_cauchy", "gamma", "horseshoe")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise PriorDomainError(f"unknown prior kind {self.kind!r}")
        if self.space not in ("constrained", "unconstrained"):
            raise PriorDomainError(f"unknown prior space {self.space!r}")

    def logpdf(self, eta, zeta):
        """Log prior for one block given both coordinate systems."""
        x = zeta if self.space == "unconstrained" else eta
        if self.kind == "flat":
            return 0.0
        if self.kind == "gaussian":
            return gaussian_logprior(x, np.asarray(self.scale), np.asarray(self.loc))
        if self.kind == "laplace":
            return laplace_logprior(x, np.asarray(self.scale), np.asarray(self.loc))
        if self.kind == "half_cauchy":
            return halfcauchy_logpdf(x, float(np.asarray(self.scale)))
        if self.kind == "gamma":
            return gamma_logpdf(x, self.shape, self.rate)
        raise PriorDomainError(f"prior kind {self.kind!r} is assembled structurally")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "scale": self.scale if np.isscalar(self.scale) else list(self.scale),
            "loc": self.loc if np.isscalar(self.loc) else list(self.loc),
            "shape": self.shape,
            "rate": self.rate,
            "space": self.space,
        }

    @staticmethod
    def from_dict(d: dict) -> "PriorSpec":
        def _tup(v):
            return tuple(v) if isinstance(v, (list, tuple)) else float(v)

        return PriorSpec(
            kind=d["kind"],
            scale=_tup(d.get("scale", 1.0)),
            loc=_tup(d.get("loc", 0.0)),
            shape=float(d.get("shape", 2.0)),
            rate=float(d.get("rate", 0.1)),
            space=d.get("space", "constrained"),
        )


# ---------------------------------------------------------------------------
# parameter space layout
# ---------------------------------------------------------------------------

@dataclass
class Block:
    """One named slice of the unconstrained vector.

    ``hyper`` marks shrinkage hyperparameters (horseshoe scales) so summary
    tables can exclude them.  ``add_jacobian`` is cleared for blocks whose
    change-of-variable term is already folded into a joint prior, to avoid
    double counting.
    """

    name: str
    size: int
    transform: Transform = IDENTITY
    coord_names: tuple = ()
    prior: PriorSpec | None = None
    hyper: bool = False
    add_jacobian: bool = True

    def __post_init__(self):
        if self.size <= 0:
            raise PriorDomainError(f"block {self.name!r} must have positive size")
        if not self.coord_names:
            if self.size == 1:
                self.coord_names = (self.name,)
            else:
                self.coord_names = tuple(f"{self.name}[{i}]" for i in range(self.size))
        if len(self.coord_names) != self.size:
            raise PriorDomainError(
                f"block {self.name!r}: {len(self.coord_names)} names for size {self.size}"
            )


class ParameterSpace:
    """Ordered collection of blocks covering the full unconstrained vector."""

    def __init__(self, blocks: list[Block]):
        if not blocks:
            raise PriorDomainError("parameter space needs at least one block")
        names = [b.name for b in blocks]
        if len(set(names)) != len(names):
            raise PriorDomainError(f"duplicate block names in {names}")
        self.blocks = list(blocks)
        self._slices = {}
        lo = 0
        for b in self.blocks:
            self._slices[b.name] = slice(lo, lo + b.size)
            lo += b.size
        self.dim = lo

    def slice_of(self, name: str) -> slice:
        return self._slices[name]

    def split(self, zeta) -> dict:
        """View of ``zeta`` as a dict of per-block segments (works on Duals)."""
        return {b.name: zeta[self._slices[b.name]] for b in self.blocks}

    @property
    def unconstrained_names(self) -> list[str]:
        out = []
        for b in self.blocks:
            out.extend(b.transform.coord_name(n) for n in b.coord_names)
        return out

    @property
    def constrained_names(self) -> list[str]:
        out = []
        for b in self.blocks:
            out.extend(b.coord_names)
        return out

    @property
    def hyper_mask(self) -> np.ndarray:
        mask = np.zeros(self.dim, dtype=bool)
        for b in self.blocks:
            if b.hyper:
                mask[self._slices[b.name]] = True
        return mask

    def constrain(self, zeta: np.ndarray) -> np.ndarray:
        """Map unconstrained draws to constrained values, elementwise.

        Accepts a single vector ``(dim,)`` or a stack of draws ``(n, dim)``.
        """
        zeta = np.asarray(zeta, dtype=float)
        eta = zeta.copy()
        for b in self.blocks:
            sl = self._slices[b.name]
            seg = zeta[..., sl]
            if b.transform.kind == "log":
                eta[..., sl] = np.exp(seg)
            elif b.transform.kind == "shifted_log":
                eta[..., sl] = b.transform.lower + np.exp(seg)
        return eta

    def initial_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "blocks": [
                {
                    "name": b.name,
                    "size": b.size,
                    "transform": b.transform.to_dict(),
                    "coord_names": list(b.coord_names),
                    "hyper": b.hyper,
                }
                for b in self.blocks
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "ParameterSpace":
        blocks = [
            Block(
                name=bd["name"],
                size=int(bd["size"]),
                transform=Transform.from_dict(bd["transform"]),
                coord_names=tuple(bd["coord_names"]),
                hyper=bool(bd.get("hyper", False)),
            )
            for bd in d["blocks"]
        ]
        return ParameterSpace(blocks)
