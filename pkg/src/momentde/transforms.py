"""System <-> equation transformations.

An n-th order equation ``d_m^n y + a_1 d_m^{n-1} y + ... + a_n y = 0`` is the
system ``d_m Y = B(z) Y`` for ``Y = (y, d_m y, ..., d_m^{n-1} y)`` with the
companion matrix

    B = [[0, 1, 0, ...], ..., [-a_n, -a_{n-1}, ..., -a_1]].

The converse needs a constant change of basis ``T`` built from a cyclic
vector ``v0`` of ``A(0)`` (rows ``v0 A0^j``) and the vanishing conditions
``v0 A0^j A_p = 0`` for ``p >= 1``, ``j <= n - 2``; there is no Leibniz rule
for ``d_m`` so a z-dependent ``T`` is not available.

Cyclic-vector existence is decided by Krylov rank rather than by the
gcd-of-minors criterion, whose floating-point polynomial gcd is ill
conditioned.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditionViolationError, NoCyclicVectorError, SingularAtOriginError, ValidationError
from .sequences import MomentSequence
from .series import MatrixSeries, TruncatedSeries, VectorSeries, invert, moment_derivative, multiply

SEED = 0x5EED
N_RANDOM = 32
RANK_TOL = 1e-10
CONDITION_TOL = 1e-10
PATTERN_TOL = 1e-8


@dataclass(frozen=True)
class CyclicVector:
    v0: np.ndarray
    basis: np.ndarray  # rows v0, v0 A0, ..., v0 A0^{n-1}


@dataclass(frozen=True)
class ConditionCheck:
    ok: bool
    violation: tuple[int, int] | None
    max_defect: float


@dataclass(frozen=True)
class CompanionForm:
    a: list[TruncatedSeries]
    B: MatrixSeries
    T: np.ndarray
    v0: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.T))

    def last_row(self) -> np.ndarray:
        """Degree-wise last row of ``B``, shape ``(N + 1, n)``."""
        return self.B.coeffs[:, -1, :]


def _as_matrix_series(A) -> MatrixSeries:
    if isinstance(A, MatrixSeries):
        return A
    return MatrixSeries(np.asarray(A, dtype=complex))


def equation_to_system(a) -> CompanionForm:
    """Companion system for the coefficient series ``a = [a_1, ..., a_n]``."""
    a = [x if isinstance(x, TruncatedSeries) else TruncatedSeries(np.atleast_1d(x)) for x in a]
    n = len(a)
    if n < 1:
        raise ValidationError("equation needs at least one coefficient", field="a")
    N = max(x.order for x in a)
    a = [x.pad(N) for x in a]
    B = np.zeros((N + 1, n, n), dtype=complex)
    for i in range(n - 1):
        B[0, i, i + 1] = 1.0
    for col in range(n):
        B[:, n - 1, col] = -a[n - 1 - col].coeffs
    return CompanionForm(a, MatrixSeries(B), np.eye(n, dtype=complex))


def krylov_matrix(A0: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = A0.shape[0]
    rows = [np.asarray(v, dtype=complex)]
    for _ in range(n - 1):
        rows.append(rows[-1] @ A0)
    return np.array(rows)


def krylov_rank(A0: np.ndarray, v: np.ndarray, tol: float = RANK_TOL) -> int:
    """Rank of ``{v, v A0, ..., v A0^{n-1}}`` by column-pivoted QR on unit rows."""
    K = krylov_matrix(A0, v)
    norms = np.linalg.norm(K, axis=1)
    if norms[0] == 0:
        return 0
    K = K / np.where(norms > 0, norms, 1.0)[:, None]
    R = scipy.linalg.qr(K, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    return int(np.sum(d > tol * max(1.0, d[0])))


def _normalize(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    mags = np.abs(v)
    lead = int(np.argmax(mags > 1e-12 * mags.max()))
    return v / v[lead]


def _candidates(n: int, subspace: np.ndarray | None):
    rng = np.random.default_rng(SEED)
    if subspace is None:
        yield from np.eye(n)
        for _ in range(N_RANDOM):
            yield rng.standard_normal(n)
    else:
        # subspace columns span the admissible vectors
        yield from subspace.T
        for _ in range(N_RANDOM):
            yield subspace @ rng.standard_normal(subspace.shape[1])


def find_cyclic_vector(A0, subspace: np.ndarray | None = None, v0=None) -> CyclicVector | None:
    """First vector in the fixed search order whose Krylov basis spans C^n.

    Search order is ``e_1..e_n`` then 32 seeded Gaussian vectors; with
    ``subspace`` the search runs over that column span instead. An explicit
    ``v0`` is only checked.
    """
    A0 = np.asarray(A0, dtype=complex)
    n = A0.shape[0]
    cands = [np.asarray(v0, dtype=complex)] if v0 is not None else _candidates(n, subspace)
    for v in cands:
        if krylov_rank(A0, v) == n:
            v = _normalize(v)
            return CyclicVector(v, krylov_matrix(A0, v))
    return None


def check_condition_ii(A, v0, tol: float = CONDITION_TOL) -> ConditionCheck:
    """Check ``v0 A0^j A_p = 0`` for ``1 <= p <= N`` and ``0 <= j <= n - 2``."""
    A = _as_matrix_series(A)
    c = A.coeffs
    n = A.dim
    rows = krylov_matrix(c[0], v0)[: max(n - 1, 0)]
    worst = 0.0
    first = None
    for p in range(1, A.order + 1):
        normA = np.abs(c[p]).sum(axis=1).max()
        for j, row in enumerate(rows):
            defect = float(np.abs(row @ c[p]).max())
            scale = normA * max(1.0, float(np.abs(row).max()))
            rel = defect / scale if scale > 0 else 0.0
            worst = max(worst, rel)
            if rel > tol and first is None:
                first = (j, p)
    return ConditionCheck(first is None, first, worst)


def admissible_subspace(A: MatrixSeries) -> np.ndarray | None:
    """Basis (columns) of ``{v : v A0^j A_p = 0}``; None when A is constant."""
    c = A.coeffs
    n = A.dim
    blocks = []
    for p in range(1, A.order + 1):
        if not np.any(c[p]):
            continue
        M = c[p]
        for _ in range(n - 1):
            blocks.append(M)
            M = c[0] @ M
    if not blocks:
        return None
    stacked = np.hstack(blocks)
    scale = max(1.0, float(np.abs(stacked).max()))
    return scipy.linalg.null_space(stacked.T, rcond=1e-12 * scale)


def system_to_equation(A, v0=None) -> CompanionForm:
    """Reduce ``d_m y = A(z) y`` to companion form via ``T = [v0 A0^j]_j``."""
    A = _as_matrix_series(A)
    n = A.dim
    A0 = A.coeffs[0]
    if v0 is not None:
        cyc = find_cyclic_vector(A0, v0=v0)
        if cyc is None:
            raise NoCyclicVectorError(
                "supplied vector is not cyclic for A(0)",
                v0=[[z.real, z.imag] for z in np.asarray(v0, dtype=complex)],
                krylov_rank=krylov_rank(A0, np.asarray(v0, dtype=complex)),
            )
    else:
        sub = admissible_subspace(A)
        if sub is not None and sub.shape[1] == 0:
            cyc = None
        else:
            cyc = find_cyclic_vector(A0, subspace=sub)
        if cyc is None:
            if find_cyclic_vector(A0) is None:
                raise NoCyclicVectorError(
                    "A(0) admits no cyclic vector (minimal polynomial degree < n)",
                    dimension=n,
                )
            raise ConditionViolationError(
                "no cyclic vector of A(0) satisfies v0 A0^j A_p = 0",
                admissible_dimension=0 if sub is None else int(sub.shape[1]),
            )
    check = check_condition_ii(A, cyc.v0)
    if not check.ok:
        j, p = check.violation
        raise ConditionViolationError(
            f"v0 A0^{j} A_{p} != 0", j=j, p=p, max_defect=check.max_defect
        )
    T = cyc.basis
    cond = np.linalg.cond(T)
    if not np.isfinite(cond) or cond > 1 / np.finfo(float).eps:
        raise SingularAtOriginError("Krylov basis matrix is singular", condition_number=None)
    Tinv = np.linalg.inv(T)
    full = T @ A.coeffs @ Tinv
    pattern = np.zeros_like(full)
    for i in range(n - 1):
        pattern[0, i, i + 1] = 1.0
    scale = max(1.0, float(np.abs(full).max()))
    off = np.abs(full[:, : n - 1, :] - pattern[:, : n - 1, :]).max() if n > 1 else 0.0
    if off > PATTERN_TOL * scale:
        raise ConditionViolationError("transformed matrix does not have companion shape", max_defect=float(off))
    B = pattern
    B[:, n - 1, :] = full[:, n - 1, :]
    a = [TruncatedSeries(-B[:, n - 1, n - j]) for j in range(1, n + 1)]
    return CompanionForm(a, MatrixSeries(B), T, cyc.v0)


def transform_solution(y: VectorSeries, T) -> VectorSeries:
    """``T y`` degree-wise; maps solutions of ``A`` to solutions of ``B``."""
    return VectorSeries(y.coeffs @ np.asarray(T, dtype=complex).T)


def recover_matrix_from_fundamental(Y: MatrixSeries, seq: MomentSequence) -> MatrixSeries:
    """``A = (d_m Y) Y^{-1}``, of order ``N - 1``."""
    if Y.order < 1:
        raise ValidationError("fundamental matrix needs order >= 1", order=Y.order)
    dY = moment_derivative(Y, seq)
    return multiply(dY, invert(Y.truncate(dY.order)))
