"""Caputo derivative and Riemann-Liouville integral on Puiseux series.

A Puiseux series of step ``alpha`` is ``sum_p c_p x^{alpha p}``. Both
operators act exactly on monomials,

    I^alpha x^beta = Gamma(1+beta) / Gamma(1+alpha+beta) x^{alpha+beta}
    D^alpha x^beta = Gamma(1+beta) / Gamma(1+beta-alpha) x^{beta-alpha}   (beta > 0)

with ``D^alpha 1 = 0``; no quadrature is involved. The Picard oracle solves

    h(x) = c0 + c C~ I^alpha[h(t) / (1 - K t^alpha)] + I^alpha[B(t^alpha)]

by fixed-point iteration in Puiseux arithmetic. Its coefficients are an
independent computation of the solver's majorant series.

Gamma ratios here use ``math.lgamma`` so that identity checks against the
moment-sequence code (``scipy.special.gammaln``) run on separate paths.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ValidationError
from .sequences import MomentSequence, as_fraction
from .series import TruncatedSeries, moment_derivative
from .solver import majorant_coefficients


@dataclass(frozen=True)
class PuiseuxSeries:
    alpha: Fraction
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        a = as_fraction(self.alpha)
        if a <= 0:
            raise ValidationError("alpha must be positive", field="alpha")
        object.__setattr__(self, "alpha", a)
        c = np.array(self.coeffs)
        if c.ndim != 1 or len(c) == 0 or not np.all(np.isfinite(c)):
            raise ValidationError("Puiseux coefficients must be a non-empty finite 1-d array")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def truncate(self, N: int) -> PuiseuxSeries:
        c = self.coeffs[: N + 1]
        if len(c) < N + 1:
            c = np.concatenate([c, np.zeros(N + 1 - len(c), dtype=c.dtype)])
        return PuiseuxSeries(self.alpha, c)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        powers = np.power.outer(x, float(self.alpha) * np.arange(len(self.coeffs)))
        return powers @ self.coeffs


def _lgamma_ratio(a: float, b: float) -> float:
    return math.exp(math.lgamma(a) - math.lgamma(b))


def caputo_derivative(f: PuiseuxSeries) -> PuiseuxSeries:
    """Termwise Caputo derivative of order ``alpha``; result has order ``N - 1``."""
    a = float(f.alpha)
    N = f.order
    if N == 0:
        return PuiseuxSeries(f.alpha, np.zeros(1, dtype=f.coeffs.dtype))
    fac = np.array([_lgamma_ratio(1 + a * p, 1 + a * (p - 1)) for p in range(1, N + 1)])
    return PuiseuxSeries(f.alpha, f.coeffs[1:] * fac)


def rl_integral(f: PuiseuxSeries) -> PuiseuxSeries:
    """Termwise Riemann-Liouville integral of order ``alpha``; result has order ``N + 1``."""
    a = float(f.alpha)
    fac = np.array([_lgamma_ratio(1 + a * p, 1 + a * (p + 1)) for p in range(f.order + 1)])
    out = np.zeros(f.order + 2, dtype=np.result_type(f.coeffs, float))
    out[1:] = f.coeffs * fac
    return PuiseuxSeries(f.alpha, out)


def multiply(f: PuiseuxSeries, g: PuiseuxSeries) -> PuiseuxSeries:
    if f.alpha != g.alpha:
        raise ValidationError("Puiseux steps differ", left=str(f.alpha), right=str(g.alpha))
    N = min(f.order, g.order)
    return PuiseuxSeries(f.alpha, np.convolve(f.coeffs[: N + 1], g.coeffs[: N + 1])[: N + 1])


def geometric_kernel(K: float, alpha, N: int) -> PuiseuxSeries:
    """``(1 - K x^alpha)^{-1}`` to order N."""
    return PuiseuxSeries(alpha, float(K) ** np.arange(N + 1))


def check_moment_caputo_identity(f: TruncatedSeries, alpha) -> float:
    """Max defect between ``(d_m f)(z^alpha)`` and ``D^alpha (f(z^alpha))``, ``m = Gamma(1+alpha p)``."""
    alpha = as_fraction(alpha)
    if not 0 < alpha <= 1:
        raise ValidationError("alpha must lie in (0, 1]", field="alpha", value=str(alpha))
    lhs = moment_derivative(f, MomentSequence.gamma_moment(alpha)).coeffs
    rhs = caputo_derivative(PuiseuxSeries(alpha, f.coeffs)).coeffs
    n = min(len(lhs), len(rhs))
    return float(np.abs(lhs[:n] - rhs[:n]).max())


# operation name used by the interface contract
check_identity_155 = check_moment_caputo_identity


def picard_oracle(
    c0: float,
    c: float,
    C_tilde: float,
    K: float,
    alpha,
    J: int,
    N: int,
    B: PuiseuxSeries | None = None,
) -> PuiseuxSeries:
    """``J`` Picard iterations of the comparison integral equation, truncated at order N.

    Coefficient p is final once ``J >= p``.
    """
    if J < 1:
        raise ValidationError("need at least one iteration", field="J", value=J)
    alpha = as_fraction(alpha)
    kernel = geometric_kernel(K, alpha, N)
    forcing = None
    if B is not None:
        if B.alpha != alpha:
            raise ValidationError("forcing series must share alpha", field="B")
        forcing = rl_integral(B.truncate(N)).truncate(N).coeffs
    h = PuiseuxSeries(alpha, np.concatenate([[float(c0)], np.zeros(N)]))
    for _ in range(J):
        nxt = c * C_tilde * rl_integral(multiply(h, kernel)).truncate(N).coeffs
        nxt[0] += c0
        if forcing is not None:
            nxt = nxt + forcing
        h = PuiseuxSeries(alpha, nxt)
    return h


def binomial_series(c0: float, c: float, C_tilde: float, K: float, N: int) -> np.ndarray:
    """Taylor coefficients of ``c0 (1 - K z)^{-c C~ / K}``."""
    e = c * C_tilde / K
    out = np.empty(N + 1)
    out[0] = c0
    for p in range(N):
        out[p + 1] = out[p] * (e + p) / (p + 1) * K
    return out


@dataclass(frozen=True)
class DeltaBound:
    r1: float
    r1_limit: float
    delta: float
    sup: float
    ok: bool


def delta_bound(
    coeffs,
    c0: float,
    c: float,
    C_tilde: float,
    K: float,
    alpha,
    n: int = 1,
    r1: float | None = None,
    forcing_sup: float = 0.0,
    grid: int = 256,
    rtol: float = 1e-9,
) -> DeltaBound:
    """Check ``sup_{[0, r1]} |omega_p| <= Delta`` for all partial sums ``omega_p``.

    ``r1`` must lie below ``(Gamma(1+alpha) / (n c C~ + K Gamma(1+alpha)))^{1/alpha}``
    (defaults to 99% of that limit). ``forcing_sup`` bounds ``B(t^alpha)`` on
    ``[0, r1]``; its integral contributes at most ``forcing_sup r1^alpha / Gamma(1+alpha)``.
    """
    a = float(as_fraction(alpha))
    g = math.gamma(1 + a)
    limit = (g / (n * c * C_tilde + K * g)) ** (1 / a)
    if r1 is None:
        r1 = 0.99 * limit
    if not 0 < r1 < limit:
        raise ValidationError("r1 outside the admissible window", r1=r1, limit=limit)
    u = r1**a
    q = c * C_tilde / g * u / (1 - K * u)
    delta = max(c0, (c0 + forcing_sup * u / g) / (1 - q))
    x = np.linspace(0.0, r1, grid)
    powers = np.power.outer(x, a * np.arange(len(coeffs)))
    partial = np.cumsum(powers * np.abs(np.asarray(coeffs)), axis=1)
    sup = float(partial.max())
    return DeltaBound(r1, limit, delta, sup, sup <= delta * (1 + rtol))


VERIFY_SEED = 1729
VERIFY_GRID = [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0), (2.0, 2.0)]  # (c C~, K)


def _check(defect: float, tol: float) -> dict:
    return {"max_defect": float(defect), "tolerance": tol, "passed": bool(defect <= tol)}


def verify_report(alpha, N: int = 32, grid: int = 256) -> dict:
    """Pass/fail report with max defects for every fractional property at one ``alpha``."""
    alpha = as_fraction(alpha)
    if not 0 < alpha <= 1:
        raise ValidationError("alpha must lie in (0, 1]", field="alpha", value=str(alpha))
    if N < 1:
        raise ValidationError("order must be >= 1", field="order", value=N)
    if grid < 2:
        raise ValidationError("grid needs at least 2 points", field="grid", value=grid)
    rng = np.random.default_rng(VERIFY_SEED)
    report: dict = {"alpha": str(alpha), "order": N, "grid": grid, "properties": {}}
    props = report["properties"]

    f = PuiseuxSeries(alpha, rng.standard_normal(N + 1))
    back = caputo_derivative(rl_integral(f)).coeffs
    props["left_inverse"] = _check(np.abs(back - f.coeffs).max() / np.abs(f.coeffs).max(), 1e-12)

    poly = TruncatedSeries(rng.standard_normal(N + 1))
    props["moment_caputo_identity"] = _check(check_moment_caputo_identity(poly, alpha), 1e-10)

    worst = 0.0
    for cc, K in VERIFY_GRID:
        oracle = picard_oracle(1.0, cc, 1.0, K, alpha, N, N).coeffs
        maj = majorant_coefficients(1.0, cc, K, N, 1.0, alpha)
        worst = max(worst, float(np.max(np.abs(oracle - maj) / maj)))
        if alpha == 1:
            closed = binomial_series(1.0, cc, 1.0, K, N)
            worst = max(worst, float(np.max(np.abs(closed - maj) / maj)))
    props["majorant_equivalence"] = _check(worst, 1e-10)

    # coefficient p is reached at iteration p and never moves afterwards
    cc, K = VERIFY_GRID[-1]
    prev = picard_oracle(1.0, cc, 1.0, K, alpha, 1, N).coeffs
    drop, drift = 0.0, 0.0
    for j in range(2, N + 2):
        cur = picard_oracle(1.0, cc, 1.0, K, alpha, j, N).coeffs
        drop = max(drop, float(np.max(prev - cur)))
        drift = max(drift, float(np.max(np.abs(cur[: j - 1] - prev[: j - 1]) / cur[: j - 1])))
        prev = cur
    props["picard_monotone"] = _check(max(drop, 0.0), 0.0)
    props["picard_stable"] = _check(drift, 1e-14)

    bounds = []
    for cc, K in VERIFY_GRID:
        coeffs = picard_oracle(1.0, cc, 1.0, K, alpha, N, N).coeffs
        d = delta_bound(coeffs, 1.0, cc, 1.0, K, alpha, grid=grid)
        bounds.append({"cC": cc, "K": K, "r1": d.r1, "delta": d.delta, "sup": d.sup, "passed": d.ok})
    props["delta_bound"] = {
        "configurations": bounds,
        "passed": all(b["passed"] for b in bounds),
    }
    report["passed"] = all(p["passed"] for p in props.values())
    return report
