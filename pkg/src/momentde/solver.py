"""Cauchy problem ``d_m y = A(z) y + b(z)``, ``y(0) = y0``, by coefficient recursion.

The solution coefficients satisfy

    y_{p+1} m_{p+1} / m_p = sum_{k<=p} A_{p-k} y_k + b_p,

which is run to the truncation order regardless of whether a convergence
certificate exists. Certificates come from a majorant series built on a
geometric bound ``||A_p|| <= c K^p`` (max-row-sum norm, K just above 1/r).
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError
from .sequences import MomentSequence, SequenceDiagnostics, diagnose, gamma_log_ratios
from .series import MatrixSeries, VectorSeries, moment_derivative, multiply

K_MARGIN = 1e-2
TOL_RESIDUAL = 1e-9
DIAGNOSE_WINDOW = 64


def tolerance_scale() -> float:
    """Multiplier for residual tolerances, read from ``MDE_TOLERANCE_SCALE``."""
    raw = os.environ.get("MDE_TOLERANCE_SCALE", "1")
    try:
        val = float(raw)
    except ValueError:
        raise ValidationError("MDE_TOLERANCE_SCALE must be a number", value=raw) from None
    if not val > 0:
        raise ValidationError("MDE_TOLERANCE_SCALE must be positive", value=raw)
    return val


@dataclass(frozen=True)
class CauchyProblem:
    seq: MomentSequence
    A: MatrixSeries
    y0: np.ndarray
    radius: float
    N: int
    b: VectorSeries | None = None

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValidationError("order must be >= 1", field="order", value=self.N)
        if not (self.radius > 0):
            raise ValidationError("radius must be positive", field="radius", value=self.radius)
        n = self.A.dim
        y0 = np.asarray(self.y0, dtype=complex).reshape(-1)
        if y0.shape != (n,):
            raise ValidationError(f"y0 must have {n} entries", field="y0", got=int(y0.size))
        object.__setattr__(self, "y0", y0)
        # polynomial data is zero-padded, longer data truncated
        object.__setattr__(self, "A", self.A.truncate(self.N))
        if self.b is not None:
            if self.b.dim != n:
                raise ValidationError(f"b must have {n} components", field="b", got=self.b.dim)
            object.__setattr__(self, "b", self.b.truncate(self.N))

    @property
    def n(self) -> int:
        return self.A.dim

    def with_y0(self, y0) -> CauchyProblem:
        return CauchyProblem(self.seq, self.A, np.asarray(y0), self.radius, self.N, self.b)


@dataclass(frozen=True)
class GeometricBound:
    c: float
    K: float


@dataclass(frozen=True)
class RadiusCertificate:
    radius_guaranteed: float | None
    path: str | None
    alpha: float
    c: float
    K: float
    C_tilde: float
    r1_bound: float | None = None

    def to_dict(self) -> dict:
        return {
            "radius_guaranteed": self.radius_guaranteed,
            "path": self.path,
            "alpha": self.alpha,
            "c": self.c,
            "K": self.K,
            "C_tilde": self.C_tilde,
            "r1_bound": self.r1_bound,
        }


@dataclass(frozen=True)
class EmpiricalRadius:
    radius: float
    unbounded: bool
    slope: float | None = None


@dataclass
class SolutionResult:
    y: VectorSeries
    assumption_path: str | None
    alpha: float
    K: float
    c: float
    majorant: np.ndarray | None
    radius_guaranteed: float | None
    radius_empirical: float
    empirical_unbounded: bool
    residual_max: float
    certificate: RadiusCertificate
    diagnostics: SequenceDiagnostics
    notes: list[str] = field(default_factory=list)
    residual_scale: float = 1.0

    def sidecar(self) -> dict:
        return {
            "assumption_path": self.assumption_path,
            "alpha": self.alpha,
            "K": self.K,
            "c": self.c,
            "C_tilde": self.certificate.C_tilde,
            "radius_guaranteed": self.radius_guaranteed,
            "radius_empirical": None if self.empirical_unbounded else self.radius_empirical,
            "empirical_unbounded": self.empirical_unbounded,
            "r1_bound": self.certificate.r1_bound,
            "residual_max": self.residual_max,
            "residual_scale": self.residual_scale,
            "order": self.y.order,
            "dimension": self.y.dim,
            "majorant": None if self.majorant is None else [float(v) for v in self.majorant],
            "diagnostics": self.diagnostics.to_dict(),
            "notes": list(self.notes),
        }


def row_sum_norms(A: MatrixSeries) -> np.ndarray:
    """``||A_p||`` (maximum absolute row sum) for every degree."""
    return np.abs(A.coeffs).sum(axis=2).max(axis=1)


def solve_coefficients(problem: CauchyProblem) -> VectorSeries:
    """Run the recursion for ``y_0..y_N``."""
    N, n = problem.N, problem.n
    A = problem.A.coeffs
    b = None if problem.b is None else problem.b.coeffs
    ratios = problem.seq.ratios(N)
    y = np.zeros((N + 1, n), dtype=complex)
    y[0] = problem.y0
    for p in range(N):
        acc = np.zeros(n, dtype=complex)
        for k in range(p + 1):
            acc += A[p - k] @ y[k]
        if b is not None:
            acc += b[p]
        y[p + 1] = acc / ratios[p]
    return VectorSeries(y)


def residual(problem: CauchyProblem, y: VectorSeries) -> np.ndarray:
    """Coefficients of ``d_m y - A y - b`` through degree ``N - 1``."""
    lhs = moment_derivative(y, problem.seq)
    rhs = multiply(problem.A.truncate(lhs.order), y.truncate(lhs.order))
    if problem.b is not None:
        rhs = rhs + problem.b.truncate(lhs.order)
    return (lhs - rhs).coeffs


def residual_scale(problem: CauchyProblem, y: VectorSeries) -> float:
    """``1 + max |coeff|`` over ``y``, ``d_m y`` and the absolute terms of ``A y + b``.

    Rounding in any evaluation of the residual is proportional to the largest
    term entering it, which can far exceed ``max |y_p|`` when ``||A_p||`` is large.
    """
    lhs = moment_derivative(y, problem.seq)
    terms = multiply(
        MatrixSeries(np.abs(problem.A.truncate(lhs.order).coeffs)),
        VectorSeries(np.abs(y.truncate(lhs.order).coeffs)),
    ).coeffs.real
    if problem.b is not None:
        terms = terms + np.abs(problem.b.truncate(lhs.order).coeffs)
    return 1.0 + max(
        float(np.abs(y.coeffs).max()), float(np.abs(lhs.coeffs).max()), float(terms.max())
    )


def fit_geometric_bound(A: MatrixSeries, r: float, margin: float = K_MARGIN) -> GeometricBound:
    """``K = (1 + margin)/r`` and the smallest ``c`` with ``||A_p|| <= c K^p``."""
    if not r > 0:
        raise ValidationError("radius must be positive", field="radius", value=r)
    K = (1 + margin) / r
    norms = row_sum_norms(A)
    if not np.any(norms):
        # nothing to dominate, so no margin is needed
        return GeometricBound(0.0, 1 / r)
    p = np.arange(len(norms))
    with np.errstate(divide="ignore"):
        logs = np.where(norms > 0, np.log(norms), -np.inf) - p * math.log(K)
    return GeometricBound(float(np.exp(logs.max())), K)


def majorant_coefficients(
    c0: float,
    c: float,
    K: float,
    N: int,
    C_tilde: float = 1.0,
    alpha: float = 1.0,
    b_norms=None,
) -> np.ndarray:
    """``c~_0 = c0`` and ``c~_{p+1} = (c C~ sum_{k<=p} K^{p-k} c~_k + b~_p) / G_{p+1}``.

    ``G_q = Gamma(1+alpha q)/Gamma(1+alpha(q-1))``, so ``alpha = 1`` gives the
    ``1/(p+1)`` recursion of ``h' = c C~ (1-Kz)^{-1} h + B``.
    """
    G = np.arange(1.0, N + 1) if alpha == 1 else np.exp(gamma_log_ratios(alpha, N))
    bt = np.zeros(N) if b_norms is None else np.asarray(b_norms, dtype=float)[:N]
    if len(bt) < N:
        bt = np.concatenate([bt, np.zeros(N - len(bt))])
    out = np.zeros(N + 1)
    out[0] = c0
    s = 0.0
    for p in range(N):
        s = K * s + out[p]
        out[p + 1] = (c * C_tilde * s + bt[p]) / G[p]
    return out


def majorant_sequence(
    problem: CauchyProblem,
    c: float,
    K: float,
    C_tilde: float = 1.0,
    alpha: float = 1.0,
) -> np.ndarray:
    """Majorant ``c~_0..c~_N`` for ``problem`` with ``c~_0 = ||y0||`` and ``b~_p = ||b_p||``."""
    bt = None if problem.b is None else np.abs(problem.b.coeffs).max(axis=1)
    return majorant_coefficients(
        float(np.abs(problem.y0).max()), c, K, problem.N, C_tilde, alpha, bt
    )


def normalized_magnitudes(y: VectorSeries, seq: MomentSequence, alpha: float = 1.0) -> np.ndarray:
    """``m_p ||y_p|| / (m_{p-1} G_p)`` for ``p >= 1`` and ``||y_0||`` at index 0.

    With ``alpha = 1`` this is ``Y_p = m_p ||y_p|| / (m_{p-1} p)``.
    """
    N = y.order
    norms = np.abs(y.coeffs).max(axis=1)
    out = norms.copy()
    if N >= 1:
        out[1:] = norms[1:] * np.exp(seq.log_ratios(N) - gamma_log_ratios(alpha, N))
    return out


def radius_certificate(
    problem: CauchyProblem,
    diagnostics: SequenceDiagnostics | None = None,
    bound: GeometricBound | None = None,
) -> RadiusCertificate:
    """Guaranteed radius: ``r`` on path A, ``1/(c C~/Gamma(1+alpha) + 1/r)`` on path B."""
    diagnostics = diagnostics or diagnose(problem.seq, DIAGNOSE_WINDOW)
    bound = bound or fit_geometric_bound(problem.A, problem.radius)
    path = diagnostics.path
    Ct = diagnostics.C_tilde
    alpha = diagnostics.alpha
    r = problem.radius
    if path is None:
        return RadiusCertificate(None, None, 1.0, bound.c, bound.K, Ct)
    g = math.exp(gammaln(1 + alpha))
    denom = problem.n * bound.c * Ct + bound.K * g
    r1 = (g / denom) ** (1 / alpha)
    if path == "A":
        return RadiusCertificate(r, "A", 1.0, bound.c, bound.K, Ct, r1)
    r0 = 1.0 / (bound.c * Ct / g + 1.0 / r)
    return RadiusCertificate(r0, "B", alpha, bound.c, bound.K, Ct, r1)


def _line_slope(p: np.ndarray, v: np.ndarray) -> float:
    return float(np.polyfit(p, v, 1)[0])


def empirical_radius(y, min_order: int = 16, growth_factor: float = 1.1) -> EmpiricalRadius:
    """Cauchy-Hadamard estimate from a log-linear fit over the last half of degrees.

    Accepts a VectorSeries, TruncatedSeries or a plain coefficient array. The
    tail is flagged unbounded when it is empty or when the radius implied by
    the second half of the tail exceeds the first-half one by ``growth_factor``
    (super-geometric decay).
    """
    c = np.asarray(getattr(y, "coeffs", y))
    norms = np.abs(c).reshape(len(c), -1).max(axis=1)
    N = len(norms) - 1
    if N < min_order:
        raise ValidationError(f"empirical radius needs order >= {min_order}", order=N)
    p = np.arange(N // 2, N + 1)
    v = norms[p]
    keep = v > 1e-300
    p, v = p[keep], np.log(v[keep])
    if len(p) < 4:
        return EmpiricalRadius(math.inf, True)
    slope = _line_slope(p, v)
    half = len(p) // 2
    s1 = _line_slope(p[: half + 1], v[: half + 1])
    s2 = _line_slope(p[half:], v[half:])
    if s1 - s2 > math.log(growth_factor):
        return EmpiricalRadius(math.inf, True, slope)
    return EmpiricalRadius(math.exp(-slope), False, slope)


def solve(problem: CauchyProblem, diagnostics: SequenceDiagnostics | None = None) -> SolutionResult:
    """Solve by recursion and attach the majorant and radius certificates."""
    diagnostics = diagnostics or diagnose(problem.seq, DIAGNOSE_WINDOW)
    y = solve_coefficients(problem)
    res = residual(problem, y)
    residual_max = float(np.abs(res).max()) if res.size else 0.0
    scale = residual_scale(problem, y)
    bound = fit_geometric_bound(problem.A, problem.radius)
    cert = radius_certificate(problem, diagnostics, bound)
    notes: list[str] = []
    majorant = None
    if cert.path is not None:
        majorant = majorant_sequence(problem, bound.c, bound.K, cert.C_tilde, cert.alpha)
    else:
        notes.append("neither assumption holds on the probe window; empirical radius only")
    if problem.N >= 16:
        emp = empirical_radius(y)
    else:
        emp = EmpiricalRadius(math.nan, False)
        notes.append("order below 16; empirical radius not estimated")
    return SolutionResult(
        y=y,
        assumption_path=cert.path,
        alpha=cert.alpha,
        K=bound.K,
        c=bound.c,
        majorant=majorant,
        radius_guaranteed=cert.radius_guaranteed,
        radius_empirical=emp.radius,
        empirical_unbounded=emp.unbounded,
        residual_max=residual_max,
        certificate=cert,
        diagnostics=diagnostics,
        notes=notes,
        residual_scale=scale,
    )


def residual_ok(problem: CauchyProblem, y: VectorSeries, tol: float = TOL_RESIDUAL) -> bool:
    """Per-coefficient check ``|res| <= tol * residual_scale``, tolerance scaled by the environment."""
    res = residual(problem, y)
    scale = residual_scale(problem, y)
    return bool(np.all(np.abs(res) <= tol * tolerance_scale() * scale))


def fundamental_matrix(problem: CauchyProblem) -> MatrixSeries:
    """Columns are the solutions with ``y(0) = e_j`` (homogeneous problems only)."""
    if problem.b is not None and np.any(problem.b.coeffs):
        raise ValidationError("fundamental matrix requires b = 0", field="b")
    cols = [solve_coefficients(problem.with_y0(e)) for e in np.eye(problem.n)]
    return MatrixSeries.from_columns(cols)


def power_solution(seq: MomentSequence, A, k: int, y0, N: int) -> VectorSeries:
    """Closed form for ``A(z) = z^k A``:

    ``y = sum_p (prod_{j<=p} m_{j(k+1)-1} / m_{j(k+1)}) A^p z^{(k+1)p} y0``.
    """
    A = np.asarray(A, dtype=complex)
    y0 = np.asarray(y0, dtype=complex)
    logm = seq.log_values(N)
    out = np.zeros((N + 1, len(y0)), dtype=complex)
    vec = y0.copy()
    logc = 0.0
    p = 0
    while (k + 1) * p <= N:
        out[(k + 1) * p] = math.exp(logc) * vec
        p += 1
        d = (k + 1) * p
        if d > N:
            break
        logc += logm[d - 1] - logm[d]
        vec = A @ vec
    return VectorSeries(out)


def growth_profile(y, alpha: float, k: int) -> np.ndarray:
    """``(||a_d|| d!^{alpha/(k+1)})^{1/d}`` over nonzero degrees ``d >= 1``.

    Entire solutions of ``d_m y = z^k A y`` have coefficients bounded by
    ``C A^d / d!^{alpha/(k+1)}``; this rate stays bounded exactly when such a
    bound holds. Zero coefficients are reported as NaN.
    """
    c = np.asarray(getattr(y, "coeffs", y))
    norms = np.abs(c).reshape(len(c), -1).max(axis=1)
    d = np.arange(1, len(norms))
    with np.errstate(divide="ignore"):
        logs = np.log(norms[1:]) + alpha / (k + 1) * gammaln(d + 1.0)
    rate = np.exp(logs / d)
    rate[norms[1:] == 0] = np.nan
    return rate
