"""Shared numeric kernels: dense linear algebra, finite differences,
forward-mode dual numbers and seeded random streams.

Everything downstream (priors, models, samplers) builds on this module, so
the conventions here are load-bearing:

* vectors and matrices are plain ``numpy`` arrays of ``float64``,
* gradients follow the "tangent axis last" layout: a value of shape ``S``
  differentiated along ``k`` directions carries a tangent of shape ``S + (k,)``,
* randomness always flows through :class:`RngStream`, which is counter-based
  and therefore reproducible and cheaply splittable across chains.
"""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.linalg
import scipy.special

LOG_2PI = float(np.log(2.0 * np.pi))


class NotPositiveDefinite(Exception):
    """Matrix factorization hit a non-positive pivot."""


class DimensionMismatch(Exception):
    """Operands have incompatible shapes."""


class NonFiniteEvaluation(Exception):
    """A function returned nan or +/-inf where a finite value is required."""


class UnsupportedPrimitive(Exception):
    """A numpy ufunc without a dual-number derivative rule was applied to a Dual."""


def as_vector(x, name: str = "x") -> np.ndarray:
    """Coerce to a 1-d float array, rejecting higher ranks."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise DimensionMismatch(f"{name} must be 1-d, got shape {arr.shape}")
    return arr


def cholesky(m) -> np.ndarray:
    """Lower-triangular Cholesky factor of a symmetric positive definite matrix.

    Raises NotPositiveDefinite instead of numpy's LinAlgError so callers can
    branch on it (samplers regularize, likelihoods return -inf).
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = np.max(np.abs(m))
    if not np.isfinite(scale):
        raise NotPositiveDefinite("matrix contains non-finite entries")
    if np.max(np.abs(m - m.T)) > 1e-12 * max(scale, 1.0):
        raise DimensionMismatch("matrix is not symmetric")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as err:
        raise NotPositiveDefinite(str(err)) from None


def mvn_logpdf(x, mean, chol_cov) -> float:
    """Multivariate normal log density evaluated via a precomputed Cholesky factor.

    ``chol_cov`` is the lower factor L with cov = L L^T; the quadratic form is
    solved by one triangular substitution, never by forming the inverse.
    """
    x = as_vector(x, "x")
    mean = as_vector(mean, "mean")
    L = np.asarray(chol_cov, dtype=float)
    d = x.shape[0]
    if mean.shape[0] != d or L.shape != (d, d):
        raise DimensionMismatch(
            f"inconsistent shapes: x {x.shape}, mean {mean.shape}, chol {L.shape}"
        )
    z = scipy.linalg.solve_triangular(L, x - mean, lower=True)
    return float(-0.5 * d * LOG_2PI - np.sum(np.log(np.diag(L))) - 0.5 * z @ z)


def fd_gradient(f: Callable, x, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of a scalar function.

    The step along coordinate i is ``h * max(1, |x_i|)`` so the stencil keeps
    roughly constant relative accuracy across badly scaled coordinates.  Used
    as the independent route when cross-checking dual-number gradients, and by
    the quasi-Newton proposal for Hessian columns.
    """
    x = as_vector(x)
    grad = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        hi = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += hi
        xm[i] -= hi
        fp = float(f(xp))
        fm = float(f(xm))
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NonFiniteEvaluation(
                f"non-finite value in stencil for coordinate {i}: f+={fp}, f-={fm}"
            )
        grad[i] = (fp - fm) / (2.0 * hi)
    return grad


# ---------------------------------------------------------------------------
# forward-mode dual numbers
# ---------------------------------------------------------------------------

def _tan_shape(val: np.ndarray, ndir: int) -> tuple:
    return val.shape + (ndir,)


class Dual:
    """A value together with tangents along ``ndir`` directions.

    ``val`` has some shape S and ``tan`` has shape ``S + (ndir,)``; arithmetic
    propagates all directions at once, so differentiating a time-vectorized
    expression costs one vectorized pass instead of ``ndir`` replays.  Mixed
    expressions with plain arrays promote the array to a constant (zero
    tangent).  Unsupported ufuncs raise UnsupportedPrimitive rather than
    silently dropping derivative information.
    """

    __slots__ = ("val", "tan")

    def __init__(self, val, tan):
        self.val = np.asarray(val, dtype=float)
        self.tan = np.asarray(tan, dtype=float)
        if self.tan.shape[:-1] != self.val.shape:
            raise DimensionMismatch(
                f"tangent shape {self.tan.shape} does not extend value shape {self.val.shape}"
            )

    @property
    def ndir(self) -> int:
        return self.tan.shape[-1]

    @staticmethod
    def constant(val, ndir: int) -> "Dual":
        val = np.asarray(val, dtype=float)
        return Dual(val, np.zeros(_tan_shape(val, ndir)))

    @staticmethod
    def seed(x) -> "Dual":
        """Lift a vector to a Dual carrying the identity tangent basis."""
        x = as_vector(x)
        return Dual(x, np.eye(x.shape[0]))

    # -- helpers ------------------------------------------------------------

    def _coerce(self, other) -> "Dual":
        if isinstance(other, Dual):
            if other.ndir != self.ndir:
                raise DimensionMismatch(
                    f"mixed tangent widths {self.ndir} and {other.ndir}"
                )
            return other
        return Dual.constant(other, self.ndir)

    def __repr__(self) -> str:
        return f"Dual(val={self.val!r}, ndir={self.ndir})"

    def __len__(self) -> int:
        return len(self.val)

    @property
    def shape(self) -> tuple:
        return self.val.shape

    def __getitem__(self, idx) -> "Dual":
        return Dual(self.val[idx], self.tan[idx])

    def sum(self, axis=None) -> "Dual":
        if axis is None:
            ax = tuple(range(self.val.ndim))
        else:
            ax = axis if isinstance(axis, tuple) else (axis,)
            ax = tuple(a % self.val.ndim for a in ax)
        return Dual(self.val.sum(axis=ax), self.tan.sum(axis=ax))

    def reshape(self, *shape) -> "Dual":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Dual(self.val.reshape(shape), self.tan.reshape(shape + (self.ndir,)))

    @property
    def T(self) -> "Dual":
        if self.val.ndim <= 1:
            return self
        if self.val.ndim != 2:
            raise DimensionMismatch("transpose only supported up to rank 2")
        return Dual(self.val.T, np.swapaxes(self.tan, 0, 1))

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        return Dual(self.val + o.val, self.tan + o.tan)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        return Dual(self.val - o.val, self.tan - o.tan)

    def __rsub__(self, other):
        o = self._coerce(other)
        return Dual(o.val - self.val, o.tan - self.tan)

    def __neg__(self):
        return Dual(-self.val, -self.tan)

    def __mul__(self, other):
        o = self._coerce(other)
        val = self.val * o.val
        tan = self.tan * o.val[..., None] + o.tan * self.val[..., None]
        return Dual(val, tan)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        inv = 1.0 / o.val
        val = self.val * inv
        tan = (self.tan - o.tan * val[..., None]) * inv[..., None]
        return Dual(val, tan)

    def __rtruediv__(self, other):
        return self._coerce(other).__truediv__(self)

    def __pow__(self, p):
        if isinstance(p, Dual):
            raise UnsupportedPrimitive("dual exponent in power")
        p = float(p)
        val = self.val ** p
        tan = self.tan * (p * self.val ** (p - 1.0))[..., None]
        return Dual(val, tan)

    def __matmul__(self, other):
        return _dual_matmul(self, other)

    def __rmatmul__(self, other):
        return _dual_matmul(other, self)

    # -- elementwise transcendentals -----------------------------------------

    def exp(self) -> "Dual":
        v = np.exp(self.val)
        return Dual(v, self.tan * v[..., None])

    def log(self) -> "Dual":
        return Dual(np.log(self.val), self.tan / self.val[..., None])

    def sqrt(self) -> "Dual":
        v = np.sqrt(self.val)
        return Dual(v, self.tan * (0.5 / v)[..., None])

    def sin(self) -> "Dual":
        return Dual(np.sin(self.val), self.tan * np.cos(self.val)[..., None])

    def cos(self) -> "Dual":
        return Dual(np.cos(self.val), self.tan * (-np.sin(self.val))[..., None])

    def tanh(self) -> "Dual":
        v = np.tanh(self.val)
        return Dual(v, self.tan * (1.0 - v * v)[..., None])

    def abs(self) -> "Dual":
        # subgradient convention: slope 0 exactly at the kink
        return Dual(np.abs(self.val), self.tan * np.sign(self.val)[..., None])

    __abs__ = abs

    # -- numpy ufunc dispatch -------------------------------------------------

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        if method != "__call__" or kwargs.get("out") is not None:
            raise UnsupportedPrimitive(f"{ufunc.__name__}.{method}")
        handler = _UFUNC_RULES.get(ufunc)
        if handler is None:
            raise UnsupportedPrimitive(ufunc.__name__)
        return handler(*inputs)


def _as_dual_pair(a, b):
    if isinstance(a, Dual):
        return a, a._coerce(b)
    return b._coerce(a), b


def _rule_add(a, b):
    a, b = _as_dual_pair(a, b)
    return a + b


def _rule_sub(a, b):
    a, b = _as_dual_pair(a, b)
    return a - b


def _rule_mul(a, b):
    a, b = _as_dual_pair(a, b)
    return a * b


def _rule_div(a, b):
    a, b = _as_dual_pair(a, b)
    return a / b


def _matmul_tangent(aval: np.ndarray, atan, bval: np.ndarray) -> np.ndarray:
    """Tangent of ``a @ b`` contributed by ``a``'s tangent (which may be None)."""
    if atan is None:
        return None
    if aval.ndim == 1 and bval.ndim == 1:
        return atan.T @ bval
    if aval.ndim == 2 and bval.ndim == 1:
        return np.einsum("mnk,n->mk", atan, bval)
    if aval.ndim == 1 and bval.ndim == 2:
        return np.einsum("nk,nm->mk", atan, bval)
    if aval.ndim == 2 and bval.ndim == 2:
        return np.moveaxis(np.matmul(np.moveaxis(atan, -1, 0), bval), 0, -1)
    raise UnsupportedPrimitive("matmul with operand rank > 2")


def _matmul_tangent_right(aval: np.ndarray, bval: np.ndarray, btan) -> np.ndarray:
    """Tangent of ``a @ b`` contributed by ``b``'s tangent (which may be None)."""
    if btan is None:
        return None
    if aval.ndim == 1 and bval.ndim == 1:
        return aval @ btan
    if aval.ndim == 2 and bval.ndim == 1:
        return aval @ btan
    if aval.ndim == 1 and bval.ndim == 2:
        return np.einsum("n,nmk->mk", aval, btan)
    if aval.ndim == 2 and bval.ndim == 2:
        return np.moveaxis(np.matmul(aval, np.moveaxis(btan, -1, 0)), 0, -1)
    raise UnsupportedPrimitive("matmul with operand rank > 2")


def _dual_matmul(a, b) -> Dual:
    """Product rule for matmul; constants contribute no tangent allocation."""
    a_dual = isinstance(a, Dual)
    b_dual = isinstance(b, Dual)
    if a_dual and b_dual and a.ndir != b.ndir:
        raise DimensionMismatch(f"mixed tangent widths {a.ndir} and {b.ndir}")
    aval = a.val if a_dual else np.asarray(a, dtype=float)
    bval = b.val if b_dual else np.asarray(b, dtype=float)
    val = aval @ bval
    t1 = _matmul_tangent(aval, a.tan if a_dual else None, bval)
    t2 = _matmul_tangent_right(aval, bval, b.tan if b_dual else None)
    if t1 is None:
        tan = t2
    elif t2 is None:
        tan = t1
    else:
        tan = t1 + t2
    return Dual(val, tan)


def _rule_matmul(a, b):
    return _dual_matmul(a, b)


_UFUNC_RULES = {
    np.add: _rule_add,
    np.subtract: _rule_sub,
    np.multiply: _rule_mul,
    np.true_divide: _rule_div,
    np.matmul: _rule_matmul,
    np.negative: lambda a: -a,
    np.positive: lambda a: a,
    np.exp: lambda a: a.exp(),
    np.log: lambda a: a.log(),
    np.sqrt: lambda a: a.sqrt(),
    np.sin: lambda a: a.sin(),
    np.cos: lambda a: a.cos(),
    np.tanh: lambda a: a.tanh(),
    np.absolute: lambda a: a.abs(),
    np.square: lambda a: a * a,
    np.log1p: lambda a: (1.0 + a).log(),
}


def gammaln(x):
    """log Gamma, with a dual rule through the digamma function."""
    if isinstance(x, Dual):
        return Dual(
            scipy.special.gammaln(x.val),
            x.tan * scipy.special.digamma(x.val)[..., None],
        )
    return scipy.special.gammaln(x)


def dual_value(x) -> np.ndarray:
    return x.val if isinstance(x, Dual) else np.asarray(x, dtype=float)


def dual_matinv(m):
    """Inverse of a small dense matrix, with the product-rule tangent."""
    if not isinstance(m, Dual):
        return np.linalg.inv(np.asarray(m, dtype=float))
    inv = np.linalg.inv(m.val)
    mt = np.moveaxis(m.tan, -1, 0)
    tan = -np.matmul(np.matmul(inv, mt), inv)
    return Dual(inv, np.moveaxis(tan, 0, -1))


def dual_logdet(m):
    """log determinant of a positive definite matrix; tangent via trace identity."""
    if not isinstance(m, Dual):
        sign, logdet = np.linalg.slogdet(np.asarray(m, dtype=float))
        if sign <= 0:
            raise NotPositiveDefinite("non-positive determinant")
        return logdet
    sign, logdet = np.linalg.slogdet(m.val)
    if sign <= 0:
        raise NotPositiveDefinite("non-positive determinant")
    inv = np.linalg.inv(m.val)
    tan = np.einsum("ij,jik->k", inv, m.tan)
    return Dual(logdet, tan)


def dual_eval(f: Callable, x) -> tuple[float, np.ndarray]:
    """Evaluate a scalar function and its gradient in one forward pass.

    ``f`` receives a Dual vector seeded with the identity basis and must
    return a scalar Dual (or a plain float when it ignores its argument's
    tangents, in which case the gradient is zero).
    """
    x = as_vector(x)
    out = f(Dual.seed(x))
    if isinstance(out, Dual):
        if out.val.shape != ():
            raise DimensionMismatch(f"expected scalar output, got shape {out.val.shape}")
        return float(out.val), np.asarray(out.tan, dtype=float).reshape(x.shape[0])
    return float(out), np.zeros(x.shape[0])


# ---------------------------------------------------------------------------
# random streams
# ---------------------------------------------------------------------------

class RngStream:
    """Deterministic random stream keyed by ``(seed, stream)``.

    Philox is counter-based: streams with different ids are statistically
    independent and can be consumed concurrently in any order, which is what
    lets multiple chains share one experiment seed.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed & 0xFFFFFFFFFFFFFFFF, self.stream & 0xFFFFFFFFFFFFFFFF],
                       dtype=np.uint64)
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def split(self, stream: int) -> "RngStream":
        """A fresh stream with the same seed and a new stream id."""
        return RngStream(self.seed, stream)

    def normal(self, size=None) -> np.ndarray:
        return self._gen.standard_normal(size)

    def uniform(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def student_t(self, df: float, size=None) -> np.ndarray:
        return self._gen.standard_t(df, size)

    def binary_choice(self, size=None) -> np.ndarray:
        """Fair draws from {-1, +1}."""
        return self._gen.choice(np.array([-1.0, 1.0]), size=size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)
