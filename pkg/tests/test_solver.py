from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from helpers import random_problem, random_suite

from momentde.errors import ValidationError
from momentde.sequences import MomentSequence, diagnose
from momentde.series import MatrixSeries, VectorSeries
from momentde.solver import (
    CauchyProblem,
    empirical_radius,
    fit_geometric_bound,
    fundamental_matrix,
    growth_profile,
    majorant_coefficients,
    majorant_sequence,
    normalized_magnitudes,
    power_solution,
    radius_certificate,
    residual,
    residual_ok,
    residual_scale,
    solve,
    solve_coefficients,
    tolerance_scale,
)

FAC = MomentSequence.factorial()
HALF = MomentSequence.gamma_moment(Fraction(1, 2))


def geometric_A(r: float, N: int, base=1.0) -> MatrixSeries:
    base = np.atleast_2d(np.asarray(base, dtype=complex))
    return MatrixSeries(base[None] * (1 / r) ** np.arange(N + 1)[:, None, None])


def test_exp_solution():
    N = 32
    y = solve_coefficients(CauchyProblem(FAC, MatrixSeries(np.ones((1, 1, 1))), [1.0], 10.0, N))
    expected = np.array([1 / math.factorial(p) for p in range(N + 1)])
    assert np.allclose(y.coeffs[:, 0], expected, rtol=1e-14, atol=0)


def test_geometric_coefficient_gives_all_ones():
    N = 32
    y = solve_coefficients(CauchyProblem(FAC, geometric_A(1.0, N), [1.0], 1.0, N))
    assert np.allclose(y.coeffs[:, 0], 1.0, rtol=1e-13)


@pytest.mark.parametrize("seq", [FAC, HALF, MomentSequence.gevrey(2), MomentSequence.q_gevrey(1.5)])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_power_coefficient_closed_form(seq, k):
    rng = np.random.default_rng(k)
    n, N = 3, 30
    A = rng.standard_normal((n, n))
    coeffs = np.zeros((N + 1, n, n))
    coeffs[k] = A
    y0 = rng.standard_normal(n)
    got = solve_coefficients(CauchyProblem(seq, MatrixSeries(coeffs), y0, 1.0, N)).coeffs
    want = power_solution(seq, A, k, y0, N).coeffs
    assert np.allclose(got, want, rtol=1e-10, atol=1e-10 * np.abs(want).max() * 1e-3)


def test_constant_matrix_regression():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((3, 3))
    y0 = rng.standard_normal(3)
    N = 40
    got = solve_coefficients(CauchyProblem(HALF, MatrixSeries(A[None]), y0, 1.0, N)).coeffs
    # (prod_{j<=p} m_{j-1}/m_j) A^p y0 built independently from log-gamma values
    logm = np.array([math.lgamma(1 + p / 2) for p in range(N + 1)])
    v = y0.copy()
    for p in range(N + 1):
        want = math.exp(-logm[p]) * v
        assert np.allclose(got[p], want, rtol=1e-10, atol=1e-10 * np.abs(want).max())
        v = A @ v


def test_nonhomogeneous_recursion():
    rng = np.random.default_rng(5)
    prob = random_problem(rng, HALF, N=24, forcing=True)
    y = solve_coefficients(prob).coeffs
    ratios = HALF.ratios(prob.N)
    A, b = prob.A.coeffs, prob.b.coeffs
    for p in range(prob.N):
        rhs = sum(A[p - k] @ y[k] for k in range(p + 1)) + b[p]
        assert np.allclose(y[p + 1] * ratios[p], rhs, rtol=1e-12, atol=1e-12 * np.abs(rhs).max())
    assert residual_ok(prob, solve_coefficients(prob))


def test_problem_validation():
    A = MatrixSeries(np.zeros((1, 2, 2)))
    with pytest.raises(ValidationError):
        CauchyProblem(FAC, A, [1.0], 1.0, 4)
    with pytest.raises(ValidationError):
        CauchyProblem(FAC, A, [1.0, 0.0], -1.0, 4)
    with pytest.raises(ValidationError):
        CauchyProblem(FAC, A, [1.0, 0.0], 1.0, 0)
    with pytest.raises(ValidationError):
        CauchyProblem(FAC, A, [1.0, 0.0], 1.0, 4, VectorSeries(np.zeros((1, 3))))


def test_fit_geometric_bound_examples():
    r, N = 2.0, 40
    g = fit_geometric_bound(geometric_A(r, N), r)
    assert g.K == pytest.approx(1.01 / r, rel=1e-15)
    assert g.c == pytest.approx(1.0, rel=1e-12)

    A0 = np.array([[1.0, -2.0], [0.5, 0.25]])
    g = fit_geometric_bound(MatrixSeries(A0[None]), 3.0)
    assert g.c == pytest.approx(3.0)

    coeffs = np.zeros((N + 1, 2, 2))
    coeffs[:, 0, 0] = 2 * 3.0 ** np.arange(N + 1)
    g = fit_geometric_bound(MatrixSeries(coeffs), 1 / 3)
    assert g.K == pytest.approx(3.03, rel=1e-12)
    assert g.c == pytest.approx(2.0, rel=1e-12)

    g = fit_geometric_bound(MatrixSeries(np.zeros((5, 2, 2))), 4.0)
    assert g.c == 0 and g.K == pytest.approx(0.25)


def test_fit_bound_dominates_every_degree():
    rng = np.random.default_rng(8)
    for _ in range(20):
        prob = random_problem(rng, FAC)
        g = fit_geometric_bound(prob.A, prob.radius)
        norms = np.abs(prob.A.coeffs).sum(axis=2).max(axis=1)
        assert np.all(norms <= g.c * g.K ** np.arange(len(norms)) * (1 + 1e-12))


def test_majorant_examples():
    assert np.allclose(majorant_coefficients(1.0, 1.0, 1.0, 20), 1.0, rtol=1e-14)
    m = majorant_coefficients(2.5, 0.0, 1.0, 10)
    assert m[0] == 2.5 and np.all(m[1:] == 0)


def test_majorant_dominates_random_2x2():
    rng = np.random.default_rng(21)
    for seq in (FAC, HALF, MomentSequence.gevrey(2)):
        for _ in range(5):
            prob = random_problem(rng, seq)
            prob = CauchyProblem(seq, MatrixSeries(prob.A.coeffs[:, :1, :1].copy()), prob.y0[:1], prob.radius, prob.N)
            d = diagnose(seq)
            res = solve(prob, d)
            Y = step_normalized(res.y, seq)
            assert np.all(Y[1:] <= res.majorant[1:] + 1e-12)


def step_normalized(y: VectorSeries, seq: MomentSequence) -> np.ndarray:
    """``Y_p = m_p ||y_p|| / (m_{p-1} p)``; ``Y_0 = ||y_0||``."""
    norms = np.abs(y.coeffs).max(axis=1)
    N = len(norms) - 1
    p = np.arange(1, N + 1)
    return np.concatenate([[norms[0]], norms[1:] * seq.ratios(N) / p])


def test_gamma_normalization_dominates_step_normalization():
    rng = np.random.default_rng(4)
    prob = random_problem(rng, HALF)
    y = solve_coefficients(prob)
    assert np.all(step_normalized(y, HALF) <= normalized_magnitudes(y, HALF, 0.5) * (1 + 1e-13))


def test_radius_certificate_geometric_factor():
    r, N = 2.0, 64
    cert = radius_certificate(CauchyProblem(FAC, geometric_A(r, N), [1.0], r, N))
    assert cert.path == "A" and cert.radius_guaranteed == r
    cert = radius_certificate(CauchyProblem(HALF, geometric_A(r, N), [1.0], r, N))
    assert cert.path == "B"
    assert cert.radius_guaranteed == pytest.approx(1 / (1 / math.gamma(1.5) + 1 / r), rel=1e-14)


def test_zero_matrix_certificate_and_constant_solution():
    prob = CauchyProblem(HALF, MatrixSeries(np.zeros((1, 2, 2))), [1.0, 2.0], 3.0, 20)
    res = solve(prob)
    assert np.all(res.y.coeffs[1:] == 0) and np.allclose(res.y.coeffs[0], [1, 2])
    # path B with c = 0 leaves the radius untouched
    assert res.radius_guaranteed == pytest.approx(3.0)


def test_empirical_radius_examples():
    N = 64
    exp = np.array([1 / math.factorial(p) for p in range(N + 1)])
    assert empirical_radius(exp).unbounded
    ones = empirical_radius(np.ones(N + 1))
    assert not ones.unbounded and ones.radius == pytest.approx(1.0, abs=0.05)
    two = empirical_radius(2.0 ** np.arange(N + 1))
    assert two.radius == pytest.approx(0.5, abs=0.03)
    z = np.zeros(N + 1)
    z[:3] = 1
    assert empirical_radius(z).unbounded
    with pytest.raises(ValidationError):
        empirical_radius(np.ones(10))


def test_solution_result_sidecar_fields():
    r, N = 2.0, 32
    res = solve(CauchyProblem(HALF, geometric_A(r, N), [1.0], r, N))
    side = res.sidecar()
    for key in ("assumption_path", "K", "c", "majorant", "radius_guaranteed", "radius_empirical", "residual_max"):
        assert key in side
    assert side["assumption_path"] == "B" and len(side["majorant"]) == N + 1


def test_fundamental_matrix_columns_solve():
    rng = np.random.default_rng(12)
    prob = random_problem(rng, HALF)
    Y = fundamental_matrix(prob)
    for j in range(prob.n):
        e = np.eye(prob.n)[j]
        assert np.allclose(Y.column(j).coeffs, solve_coefficients(prob.with_y0(e)).coeffs)


def test_growth_profile_bounded():
    rng = np.random.default_rng(7)
    for alpha in (Fraction(1, 2), Fraction(1, 3)):
        for k in (0, 1, 2):
            A = rng.standard_normal((2, 2))
            y = power_solution(MomentSequence.gamma_moment(alpha), A, k, [1.0, 1.0], 96)
            g = growth_profile(y, float(alpha), k)
            g = g[~np.isnan(g)]
            half = len(g) // 2
            assert g[half:].max() <= 1.1 * g[:half].max()


def test_tolerance_scale_env(monkeypatch):
    monkeypatch.delenv("MDE_TOLERANCE_SCALE", raising=False)
    assert tolerance_scale() == 1.0
    monkeypatch.setenv("MDE_TOLERANCE_SCALE", "10")
    assert tolerance_scale() == 10.0
    monkeypatch.setenv("MDE_TOLERANCE_SCALE", "-1")
    with pytest.raises(ValidationError):
        tolerance_scale()


def test_suite_invariants():
    diags = {}
    for prob in random_suite():
        key = str(prob.seq.describe())
        diags.setdefault(key, diagnose(prob.seq))
        res = solve(prob, diags[key])
        assert np.abs(residual(prob, res.y)).max() <= 1e-9 * residual_scale(prob, res.y)
        Y = step_normalized(res.y, prob.seq)
        assert np.all(Y[1:] <= res.majorant[1:] + 1e-12)
        if not res.empirical_unbounded:
            assert res.radius_empirical >= 0.9 * res.radius_guaranteed
