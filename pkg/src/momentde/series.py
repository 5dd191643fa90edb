"""Truncated power series with scalar, vector or matrix coefficients.

All three types store a complex array whose axis 0 is the degree, so a series
of order ``N`` holds ``N + 1`` coefficient blocks. Products are Cauchy
products truncated at the smaller order.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.special import gammaln

from .errors import OrderExhaustedError, SingularAtOriginError, ValidationError
from .sequences import MomentSequence

MAX_ORDER = 4096
DEFAULT_ORDER = 64
COND_CAP = 1e12
# Pascal-triangle binomials are exact in double precision up to this order
PASCAL_LIMIT = 64


class _Series:
    coeffs: np.ndarray
    _block_ndim = 0

    def __init__(self, coeffs) -> None:
        c = np.array(coeffs, dtype=complex)
        if c.ndim != 1 + self._block_ndim or c.shape[0] == 0:
            raise ValidationError(
                f"{type(self).__name__} needs an array of {1 + self._block_ndim} dims with >= 1 degree",
                shape=list(c.shape),
            )
        if self._block_ndim == 2 and c.shape[1] != c.shape[2]:
            raise ValidationError("matrix series must be square", shape=list(c.shape))
        if c.shape[0] - 1 > MAX_ORDER:
            raise ValidationError(f"order exceeds hard cap {MAX_ORDER}", order=c.shape[0] - 1)
        if not np.all(np.isfinite(c)):
            raise ValidationError("series coefficients must be finite")
        c.setflags(write=False)
        self.coeffs = c

    @property
    def order(self) -> int:
        return self.coeffs.shape[0] - 1

    def __len__(self) -> int:
        return self.coeffs.shape[0]

    def __getitem__(self, p):
        return self.coeffs[p]

    def __repr__(self) -> str:
        return f"{type(self).__name__}(order={self.order}, shape={self.coeffs.shape[1:]})"

    def _new(self, coeffs):
        return type(self)(coeffs)

    def _check_same(self, other) -> None:
        if type(other) is not type(self) or other.coeffs.shape[1:] != self.coeffs.shape[1:]:
            raise ValidationError(
                "dimension mismatch",
                left=list(self.coeffs.shape[1:]),
                right=list(getattr(other, "coeffs", np.empty(0)).shape[1:]),
            )

    def __add__(self, other):
        self._check_same(other)
        n = min(self.order, other.order) + 1
        return self._new(self.coeffs[:n] + other.coeffs[:n])

    def __sub__(self, other):
        self._check_same(other)
        n = min(self.order, other.order) + 1
        return self._new(self.coeffs[:n] - other.coeffs[:n])

    def __neg__(self):
        return self._new(-self.coeffs)

    def scale(self, s: complex):
        return self._new(s * self.coeffs)

    def __rmul__(self, s):
        if np.isscalar(s):
            return self.scale(s)
        return NotImplemented

    def truncate(self, N: int):
        if N > self.order:
            return self.pad(N)
        return self._new(self.coeffs[: N + 1])

    def pad(self, N: int):
        if N <= self.order:
            return self.truncate(N)
        extra = np.zeros((N - self.order,) + self.coeffs.shape[1:], dtype=complex)
        return self._new(np.concatenate([self.coeffs, extra]))

    def __call__(self, z: complex):
        """Evaluate the polynomial ``sum_p c_p z^p`` (Horner)."""
        acc = np.zeros(self.coeffs.shape[1:], dtype=complex)
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc if acc.ndim else complex(acc)

    def allclose(self, other, atol: float = 0.0, rtol: float = 1e-12) -> bool:
        n = min(self.order, other.order) + 1
        return bool(np.allclose(self.coeffs[:n], other.coeffs[:n], atol=atol, rtol=rtol))


class TruncatedSeries(_Series):
    """Scalar series ``a_0 + a_1 z + ... + a_N z^N``."""

    _block_ndim = 0

    @classmethod
    def monomial(cls, p: int, N: int | None = None, c: complex = 1.0) -> TruncatedSeries:
        N = p if N is None else N
        out = np.zeros(N + 1, dtype=complex)
        if p <= N:
            out[p] = c
        return cls(out)

    @classmethod
    def zeros(cls, N: int) -> TruncatedSeries:
        return cls(np.zeros(N + 1))


class VectorSeries(_Series):
    """Series of n-vectors; ``coeffs[p]`` is the vector ``y_p``."""

    _block_ndim = 1

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    def component(self, i: int) -> TruncatedSeries:
        return TruncatedSeries(self.coeffs[:, i])

    @classmethod
    def from_components(cls, comps) -> VectorSeries:
        N = min(c.order for c in comps)
        return cls(np.stack([c.coeffs[: N + 1] for c in comps], axis=1))


class MatrixSeries(_Series):
    """Series of square n x n matrices; ``coeffs[p]`` is ``A_p``."""

    _block_ndim = 2

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]

    @classmethod
    def constant(cls, A0, N: int = 0) -> MatrixSeries:
        A0 = np.asarray(A0, dtype=complex)
        out = np.zeros((N + 1,) + A0.shape, dtype=complex)
        out[0] = A0
        return cls(out)

    @classmethod
    def identity(cls, n: int, N: int = 0) -> MatrixSeries:
        return cls.constant(np.eye(n), N)

    def column(self, j: int) -> VectorSeries:
        return VectorSeries(self.coeffs[:, :, j])

    @classmethod
    def from_columns(cls, cols) -> MatrixSeries:
        N = min(c.order for c in cols)
        return cls(np.stack([c.coeffs[: N + 1] for c in cols], axis=2))

    def right_multiply_constant(self, C) -> MatrixSeries:
        return MatrixSeries(self.coeffs @ np.asarray(C, dtype=complex))


_PRODUCT_TYPES = {
    (0, 0): TruncatedSeries,
    (0, 1): VectorSeries,
    (0, 2): MatrixSeries,
    (2, 1): VectorSeries,
    (2, 2): MatrixSeries,
}


def multiply(f: _Series, g: _Series) -> _Series:
    """Truncated Cauchy product ``(fg)_p = sum_{k<=p} f_k g_{p-k}``.

    Supported pairs: scalar*scalar, scalar*vector, scalar*matrix,
    matrix@vector and matrix@matrix.
    """
    key = (f._block_ndim, g._block_ndim)
    if key not in _PRODUCT_TYPES:
        raise ValidationError(f"unsupported product {type(f).__name__} * {type(g).__name__}")
    if key in ((2, 1), (2, 2)) and f.coeffs.shape[2] != g.coeffs.shape[1]:
        raise ValidationError("dimension mismatch", left=list(f.coeffs.shape[1:]), right=list(g.coeffs.shape[1:]))
    N = min(f.order, g.order)
    a, b = f.coeffs, g.coeffs
    out = np.zeros((N + 1,) + (b.shape[1:] if key[0] == 0 else (a.shape[1],) + b.shape[2:]), dtype=complex)
    # summation in ascending k for deterministic rounding
    for k in range(N + 1):
        m = N + 1 - k
        if key[0] == 0:
            out[k:] += a[k] * b[:m]
        elif key[1] == 1:
            out[k:] += b[:m] @ a[k].T
        else:
            out[k:] += a[k] @ b[:m]
    return _PRODUCT_TYPES[key](out)


def add(f: _Series, g: _Series) -> _Series:
    return f + g


def scale(f: _Series, s: complex) -> _Series:
    return f.scale(s)


def moment_derivative(f: _Series, seq: MomentSequence) -> _Series:
    """Apply ``d_m`` degree-wise: coefficient p of the result is ``a_{p+1} m_{p+1}/m_p``.

    The result has order ``N - 1``; an order-0 input maps to the zero series of
    order 0.
    """
    N = f.order
    if N == 0:
        return f._new(np.zeros_like(f.coeffs))
    r = seq.ratios(N)
    r = r.reshape((N,) + (1,) * f._block_ndim)
    return f._new(f.coeffs[1:] * r)


def iterated_moment_derivative(f: _Series, seq: MomentSequence, j: int) -> _Series:
    if j < 0:
        raise ValidationError("derivative count must be nonnegative", j=j)
    if j > f.order:
        raise OrderExhaustedError(f"cannot take {j} moment derivatives of an order-{f.order} series", j=j, order=f.order)
    out = f
    for _ in range(j):
        out = moment_derivative(out, seq)
    return out


def invert(f: TruncatedSeries | MatrixSeries, cond_cap: float = COND_CAP):
    """Multiplicative inverse up to the order of ``f``."""
    c = f.coeffs
    N = f.order
    if isinstance(f, TruncatedSeries):
        if c[0] == 0:
            raise SingularAtOriginError("series vanishes at the origin")
        out = np.zeros(N + 1, dtype=complex)
        out[0] = 1 / c[0]
        for p in range(1, N + 1):
            out[p] = -np.dot(c[1 : p + 1], out[p - 1 :: -1]) / c[0]
        return TruncatedSeries(out)
    if not isinstance(f, MatrixSeries):
        raise ValidationError(f"cannot invert {type(f).__name__}")
    cond = np.linalg.cond(c[0])
    if not np.isfinite(cond) or cond > 1 / np.finfo(float).eps:
        raise SingularAtOriginError("Y(0) is singular", condition_number=float(cond) if np.isfinite(cond) else None)
    if cond > cond_cap:
        warnings.warn(f"Y(0) is ill-conditioned (cond={cond:.3e})", RuntimeWarning, stacklevel=2)
    inv0 = np.linalg.inv(c[0])
    out = np.zeros_like(c)
    out[0] = inv0
    for p in range(1, N + 1):
        acc = np.zeros_like(c[0])
        for k in range(1, p + 1):
            acc += c[k] @ out[p - k]
        out[p] = -inv0 @ acc
    return MatrixSeries(out)


def binomial_row(p: int) -> np.ndarray:
    """``binom(p, j)`` for ``j = 0..p`` as floats."""
    if p <= PASCAL_LIMIT:
        row = np.ones(1)
        for _ in range(p):
            row = np.concatenate([[1.0], row[1:] + row[:-1], [1.0]])
        return row
    j = np.arange(p + 1)
    return np.exp(gammaln(p + 1) - gammaln(j + 1) - gammaln(p - j + 1))


def shift_expand(f: TruncatedSeries, z0: complex) -> TruncatedSeries:
    """Coefficients of ``g(z) = f(z - z0)``, exact as a polynomial identity."""
    N = f.order
    z0 = complex(z0)
    if z0 == 0:
        return f
    out = np.zeros(N + 1, dtype=complex)
    a = f.coeffs
    w = -z0
    if N <= PASCAL_LIMIT:
        powers = w ** np.arange(N + 1)
        for p in range(N + 1):
            if a[p] != 0:
                out[: p + 1] += a[p] * binomial_row(p) * powers[p::-1]
        return TruncatedSeries(out)
    # log-magnitude with separate phase keeps huge binomials finite
    lw, phase = math.log(abs(w)), np.angle(w)
    for p in range(N + 1):
        if a[p] == 0:
            continue
        j = np.arange(p + 1)
        lmag = gammaln(p + 1) - gammaln(j + 1) - gammaln(p - j + 1) + (p - j) * lw
        out[: p + 1] += a[p] * np.exp(lmag + 1j * (p - j) * phase)
    return TruncatedSeries(out)


def shift_commutation_defect(seq: MomentSequence, p: int, z0: complex) -> TruncatedSeries:
    """``(d_m z^p)(z - z0) - d_m((z - z0)^p)`` as a polynomial of degree ``p - 1``.

    Identically zero exactly when ``m_j / (j m_{j-1})`` is constant for
    ``1 <= j <= p``, i.e. when ``m`` is proportional to the factorials.
    """
    if p < 1:
        raise ValidationError("p must be >= 1", p=p)
    if z0 == 0:
        raise ValidationError("z0 must be nonzero", z0=str(z0))
    # coefficient j is p binom(p-1, j) w^{p-1-j} (r_p/p - r_{j+1}/(j+1)) with
    # w = -z0 and r the ratios; the bracket cancels before the large factors enter
    z0 = complex(z0)
    r = seq.ratios(p)
    j = np.arange(p)
    bracket = r[p - 1] / p - r[j] / (j + 1)
    powers = (-z0) ** (p - 1 - j)
    return TruncatedSeries(p * binomial_row(p - 1) * powers * bracket)
