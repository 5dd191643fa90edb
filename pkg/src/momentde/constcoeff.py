"""Constant-coefficient moment equations and the ``Delta_h E(lambda, z)`` basis.

``Delta_h E(lambda, z) = sum_{p>=h} binom(p, h) lambda^{p-h} z^p / m_p`` is the
moment analogue of ``z^h e^{lambda z} / h!``; it satisfies
``(d_m - lambda) Delta_h = Delta_{h-1}``. Solutions of
``d_m^n y + a_1 d_m^{n-1} y + ... + a_n y = 0`` are combinations of
``Delta_{k-1} E(lambda_j, .)`` for the characteristic roots ``lambda_j`` with
multiplicities ``l_j``; the combination is fixed by the Cauchy data
``d_m^i y(0) = y0^i``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sequences import MomentSequence
from .series import TruncatedSeries, iterated_moment_derivative

MERGE_TOL = 1e-6
AMBIGUITY_FACTOR = 1e3
TYPE_SLACK = 0.2
TINY = 1e-300
UNDERFLOW_EDGE = 1e-250


@dataclass(frozen=True)
class DeltaE:
    lam: complex
    h: int
    seq: MomentSequence
    series: TruncatedSeries


@dataclass(frozen=True)
class ConstCoeffSolution:
    roots: list[tuple[complex, int]]
    coeffs: dict[tuple[int, int], complex]  # (j, k), 1-based as in y = sum c_jk Delta_{k-1}E(lambda_j)
    y: TruncatedSeries
    cauchy_data: np.ndarray
    a: np.ndarray
    seq: MomentSequence
    fit_condition: float

    def to_dict(self) -> dict:
        return {
            "roots": [
                {"lambda": [lam.real, lam.imag], "multiplicity": ell} for lam, ell in self.roots
            ],
            "coefficients": [
                {"j": j, "k": k, "c": [c.real, c.imag]} for (j, k), c in sorted(self.coeffs.items())
            ],
            "fit_condition": self.fit_condition,
        }


@dataclass(frozen=True)
class OrderType:
    rho_hat: float | None
    sigma_hat: float | None
    entire: bool
    polynomial: bool = False


@dataclass(frozen=True)
class TypeBound:
    sigma: float
    sigma_hat: float | None
    holds: bool


def delta_e_coeffs(seq: MomentSequence, lam: complex, h: int, N: int) -> np.ndarray:
    """Coefficients ``binom(p, h) lambda^{p-h} / m_p`` (``m_0`` normalized to 1).

    ``lambda^p / m_p`` is built by the running product of ``lambda / (m_q/m_{q-1})``
    so the ladder identity only sees a few roundings per coefficient.
    """
    if h < 0 or h > N:
        raise ValidationError("need 0 <= h <= N", h=h, N=N)
    lam = complex(lam)
    out = np.zeros(N + 1, dtype=complex)
    if lam == 0:
        out[h] = math.exp(seq.log_value(0) - seq.log_value(h))
        return out
    steps = lam / seq.ratios(N)
    with np.errstate(under="ignore"):
        power = np.concatenate([[1.0 + 0j], np.cumprod(steps)])  # lambda^p / m_p
    binom = np.array([float(math.comb(p, h)) for p in range(h, N + 1)])
    out[h:] = binom * power[h:] / lam**h
    return out


def delta_e(seq: MomentSequence, lam: complex, h: int, N: int) -> DeltaE:
    """Materialize ``Delta_h E(lambda, .)`` to order N (``m_0`` normalized to 1)."""
    return DeltaE(complex(lam), h, seq, TruncatedSeries(delta_e_coeffs(seq, lam, h, N)))


def characteristic_roots(a, merge_tol: float = MERGE_TOL) -> list[tuple[complex, int]]:
    """Roots of ``x^n + a_1 x^{n-1} + ... + a_n`` clustered into multiplicities.

    Roots within ``merge_tol (1 + max|root|)`` of one another (single linkage)
    are merged into their centroid.
    """
    a = np.asarray(a, dtype=complex)
    n = len(a)
    C = np.zeros((n, n), dtype=complex)
    C[0, :] = -a
    C[1:, :-1] += np.eye(n - 1)
    raw = np.linalg.eigvals(C) if n > 0 else np.empty(0)
    tol = merge_tol * (1 + (np.abs(raw).max() if n else 0.0))
    labels = list(range(n))

    def find(i):
        while labels[i] != i:
            labels[i] = labels[labels[i]]
            i = labels[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(raw[i] - raw[j]) <= tol:
                labels[find(i)] = find(j)
    groups: dict[int, list[complex]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(raw[i])
    roots = []
    for members in groups.values():
        c = complex(np.mean(members))
        # snap tiny parts that are rounding noise
        re = 0.0 if abs(c.real) <= tol else c.real
        im = 0.0 if abs(c.imag) <= tol else c.imag
        roots.append((complex(re, im), len(members)))
    roots.sort(key=lambda t: (-abs(t[0]), t[0].real, t[0].imag))
    return roots


def _basis(seq, roots, N):
    cols, labels = [], []
    for j, (lam, ell) in enumerate(roots, start=1):
        for k in range(1, ell + 1):
            cols.append(delta_e_coeffs(seq, lam, k - 1, N))
            labels.append((j, k))
    return np.array(cols), labels


def solve_const(a, cauchy, seq: MomentSequence, N: int = 64) -> ConstCoeffSolution:
    """Solve the constant-coefficient Cauchy problem over the ``Delta`` basis."""
    a = np.asarray(a, dtype=complex).reshape(-1)
    cauchy = np.asarray(cauchy, dtype=complex).reshape(-1)
    n = len(a)
    if n < 1:
        raise ValidationError("equation order must be >= 1", field="a")
    if cauchy.shape != (n,):
        raise ValidationError(f"need {n} Cauchy data values", field="cauchy", got=int(cauchy.size))
    if N < n:
        raise ValidationError(f"order must be >= {n}", field="order", value=N)
    roots = characteristic_roots(a)
    basis, labels = _basis(seq, roots, N)
    # d_m^i at 0 of a series is m_i times its z^i coefficient
    m = np.exp(seq.log_values(n - 1) - seq.log_value(0))
    F = (basis[:, :n] * m).T
    cond = float(np.linalg.cond(F))
    tol = MERGE_TOL * (1 + max(abs(r) for r, _ in roots))
    centers = [r for r, _ in roots]
    close = any(
        abs(centers[i] - centers[j]) <= AMBIGUITY_FACTOR * tol
        for i in range(len(centers))
        for j in range(i + 1, len(centers))
    )
    if close:
        warnings.warn(
            f"root clusters nearly coincide; fitting system condition number {cond:.3e}",
            RuntimeWarning,
            stacklevel=2,
        )
    c = np.linalg.solve(F, cauchy)
    y = TruncatedSeries(c @ basis)
    seq0 = seq
    return ConstCoeffSolution(
        roots=roots,
        coeffs={lab: complex(v) for lab, v in zip(labels, c)},
        y=y,
        cauchy_data=cauchy,
        a=a,
        seq=seq0,
        fit_condition=cond,
    )


def equation_residual(a, y: TruncatedSeries, seq: MomentSequence) -> np.ndarray:
    """Coefficients of ``d_m^n y + sum_j a_j d_m^{n-j} y`` through degree ``N - n``."""
    a = np.asarray(a, dtype=complex)
    n = len(a)
    top = y.order - n
    out = iterated_moment_derivative(y, seq, n).coeffs[: top + 1].copy()
    for j in range(1, n + 1):
        out += a[j - 1] * iterated_moment_derivative(y, seq, n - j).coeffs[: top + 1]
    return out


def cauchy_values(y: TruncatedSeries, seq: MomentSequence, n: int) -> np.ndarray:
    """``d_m^i y(0)`` for ``i < n``."""
    return np.array([iterated_moment_derivative(y, seq, i).coeffs[0] for i in range(n)])


def estimate_order_type(f, min_points: int = 8) -> OrderType:
    """Order and type of an entire function from its Taylor coefficients.

    Fits ``log|a_p| = -(1/rho) p log p + beta p + gamma log p + delta`` by least
    squares over the upper concave envelope of the last half of the nonzero
    degrees, the asymptotic form of ``limsup p log p / -log|a_p| = rho`` and
    ``limsup p^{1/rho} |a_p|^{1/p} = (e rho sigma)^{1/rho}``; then
    ``sigma = exp(beta rho) / (e rho)``. The envelope keeps lacunary or
    rounding-level coefficients out of the fit. A geometric tail (no
    ``p log p`` decay) is reported as not entire.

    Coefficients that stop abruptly before degree ``N/2`` mean a polynomial;
    ones that fade into the underflow floor are fitted on what survives.
    """
    c = np.abs(np.asarray(getattr(f, "coeffs", f))).reshape(-1)
    N = len(c) - 1
    nz = np.nonzero(c > TINY)[0]
    if len(nz) == 0 or (nz[-1] < N // 2 and c[nz[-1]] > UNDERFLOW_EDGE):
        return OrderType(0.0, 0.0, True, polynomial=True)
    nz = nz[nz >= 1]
    logc = np.full(N + 1, -np.inf)
    logc[nz] = np.log(c[nz])
    hull = _upper_hull(nz, logc)
    tail = hull[hull >= nz[-1] // 2]
    if len(tail) < min_points:
        return OrderType(None, None, False)
    p = tail.astype(float)
    X = np.column_stack([p * np.log(p), p, np.log(p), np.ones_like(p)])
    colscale = np.abs(X).max(axis=0)
    coef = np.linalg.lstsq(X / colscale, logc[tail], rcond=None)[0] / colscale
    inv_rho = -coef[0]
    if not inv_rho > 0.05:
        return OrderType(None, None, False)
    rho = 1.0 / inv_rho
    sigma = math.exp(coef[1] * rho) / (math.e * rho)
    return OrderType(rho, sigma, True)


def _upper_hull(idx: np.ndarray, logc: np.ndarray) -> np.ndarray:
    """Degrees on the upper concave hull of ``(p, log|a_p|)``."""
    hull: list[int] = []
    for p in idx:
        while len(hull) >= 2:
            p0, p1 = hull[-2], hull[-1]
            # drop p1 when it lies on or below the chord p0 -> p
            if (logc[p1] - logc[p0]) * (p - p0) <= (logc[p] - logc[p0]) * (p1 - p0):
                hull.pop()
            else:
                break
        hull.append(int(p))
    return np.array(hull, dtype=int)


def max_root_type_bound(solution: ConstCoeffSolution, slack: float = TYPE_SLACK) -> TypeBound:
    """``sigma = tau (max_j |lambda_j|)^rho`` for a kernel of order ``rho`` and type ``tau``.

    ``E(lambda z)`` has type ``tau |lambda|^rho``; ``tau = 1`` except for
    ``gevrey(alpha)``, whose kernel has type ``alpha``.
    """
    rho = solution.seq.kernel_order
    if rho is None:
        raise ValidationError(
            f"no documented kernel order for sequence kind {solution.seq.kind!r}", field="sequence"
        )
    sigma = solution.seq.kernel_type * max(abs(lam) for lam, _ in solution.roots) ** rho
    est = estimate_order_type(solution.y)
    if est.polynomial:
        return TypeBound(sigma, 0.0, True)
    if est.sigma_hat is None:
        return TypeBound(sigma, None, False)
    return TypeBound(sigma, est.sigma_hat, est.sigma_hat <= sigma * (1 + slack))
