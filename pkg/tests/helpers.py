"""Shared generators for randomized problem suites."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from momentde.sequences import MomentSequence
from momentde.series import MatrixSeries, VectorSeries
from momentde.solver import CauchyProblem

SUITE_SEED = 20240611
SUITE_SIZE = 100
SUITE_ORDER = 32


def suite_sequences() -> list[MomentSequence]:
    return [
        MomentSequence.factorial(),
        MomentSequence.gevrey(2),
        MomentSequence.gamma_moment(Fraction(1, 2)),
        MomentSequence.q_gevrey(2.0),
    ]


def random_problem(rng: np.random.Generator, seq: MomentSequence, N: int = SUITE_ORDER,
                   forcing: bool = False) -> CauchyProblem:
    """``A_p = M_p / r^p`` with ``||M_p||_inf <= 1`` and complex entries."""
    n = int(rng.integers(1, 5))
    r = float(rng.uniform(0.5, 2.0))
    M = rng.uniform(-1, 1, (N + 1, n, n)) + 1j * rng.uniform(-1, 1, (N + 1, n, n))
    M /= np.abs(M).sum(axis=2).max(axis=1)[:, None, None]
    M *= rng.uniform(0.2, 1.0)
    A = M / r ** np.arange(N + 1)[:, None, None]
    y0 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    b = None
    if forcing:
        b = VectorSeries(rng.uniform(-1, 1, (N + 1, n)) / r ** np.arange(N + 1)[:, None])
    return CauchyProblem(seq, MatrixSeries(A), y0, r, N, b)


def random_suite(size: int = SUITE_SIZE, seed: int = SUITE_SEED, N: int = SUITE_ORDER):
    rng = np.random.default_rng(seed)
    seqs = suite_sequences()
    return [random_problem(rng, seqs[i % len(seqs)], N, forcing=(i % 5 == 4)) for i in range(size)]
