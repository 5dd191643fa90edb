"""Moment sequences, evaluated in the log domain.

A moment sequence ``m = (m_p)`` defines the moment derivative through
``d_m z^p = (m_p / m_{p-1}) z^{p-1}``. Built-in kinds are normalized so that
``m_0 = scale`` (1 by default):

==============  ==========================
kind            m_p / scale
==============  ==========================
factorial       p!
gevrey(a)       (p!)^a
gamma_moment(a) Gamma(1 + a p)
q_gevrey(q)     q^(p^2)
custom          user table (+ extension)
==============  ==========================

For ``gevrey(a)`` and ``gamma_moment(a)`` the growth order ``omega = a`` and
the associated entire kernels have order ``1/a``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .errors import OutOfRangeError, ValidationError

KINDS = ("factorial", "gevrey", "gamma_moment", "q_gevrey", "custom")
EXTENSIONS = (None, "constant_ratio", "factorial")

# relative slack allowed between the last-quartile sup and the earlier sup
# before a quantity is declared divergent on the probe window
TREND_SLACK = 0.05
LOG_DBL_MAX = math.log(sys.float_info.max)


def as_fraction(x: Fraction | int | float | str) -> Fraction:
    """Parse ``"1/2"``, ``0.5`` or ``Fraction(1, 2)`` into a fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**6)
    return Fraction(x)


@dataclass(frozen=True)
class MomentSequence:
    kind: str
    alpha: Fraction | None = None
    q: float | None = None
    values: tuple[float, ...] | None = None
    extension: str | None = None
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown sequence kind {self.kind!r}", field="kind")
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValidationError("scale must be a positive finite number", field="scale")
        if self.kind in ("gevrey", "gamma_moment"):
            if self.alpha is None or self.alpha <= 0:
                raise ValidationError(f"{self.kind} needs a positive alpha", field="alpha")
            object.__setattr__(self, "alpha", as_fraction(self.alpha))
        if self.kind == "q_gevrey" and (self.q is None or not self.q > 1):
            raise ValidationError("q_gevrey needs q > 1", field="q")
        if self.kind == "custom":
            if not self.values:
                raise ValidationError("custom sequence needs a non-empty value table", field="values")
            vals = tuple(float(v) for v in self.values)
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ValidationError("custom values must be positive and finite", field="values")
            object.__setattr__(self, "values", vals)
            if self.extension not in EXTENSIONS:
                raise ValidationError(f"unknown extension rule {self.extension!r}", field="extension")
            if self.extension == "constant_ratio" and len(vals) < 2:
                raise ValidationError("constant_ratio extension needs at least two values", field="values")

    # -- constructors ---------------------------------------------------
    @classmethod
    def factorial(cls, scale: float = 1.0) -> MomentSequence:
        return cls("factorial", scale=scale)

    @classmethod
    def gevrey(cls, alpha, scale: float = 1.0) -> MomentSequence:
        return cls("gevrey", alpha=as_fraction(alpha), scale=scale)

    @classmethod
    def gamma_moment(cls, alpha, scale: float = 1.0) -> MomentSequence:
        return cls("gamma_moment", alpha=as_fraction(alpha), scale=scale)

    @classmethod
    def q_gevrey(cls, q: float, scale: float = 1.0) -> MomentSequence:
        return cls("q_gevrey", q=float(q), scale=scale)

    @classmethod
    def custom(cls, values: Sequence[float], extension: str | None = None) -> MomentSequence:
        return cls("custom", values=tuple(values), extension=extension)

    # -- evaluation -----------------------------------------------------
    @property
    def max_index(self) -> int | None:
        """Largest admissible index, or None when unbounded."""
        if self.kind == "custom" and self.extension is None:
            return len(self.values) - 1
        return None

    @property
    def kernel_order(self) -> float | None:
        """Order ``rho`` of the entire kernel ``E(z) = sum z^p / m_p``, if documented."""
        if self.kind == "factorial":
            return 1.0
        if self.kind in ("gevrey", "gamma_moment"):
            return float(1 / self.alpha)
        return None

    @property
    def kernel_type(self) -> float | None:
        """Type of the kernel at its order: 1 for Mittag-Leffler, ``alpha`` for ``sum z^p / p!^alpha``."""
        if self.kind in ("factorial", "gamma_moment"):
            return 1.0
        if self.kind == "gevrey":
            return float(self.alpha)
        return None

    def log_values(self, upto: int) -> np.ndarray:
        """``log m_p`` for ``p = 0..upto``."""
        if upto < 0:
            return np.empty(0)
        top = self.max_index
        if top is not None and upto > top:
            raise OutOfRangeError(
                f"custom table has {top + 1} values, index {upto} requested",
                field="values",
                index=upto,
            )
        p = np.arange(upto + 1, dtype=float)
        if self.kind == "factorial":
            out = gammaln(p + 1)
        elif self.kind == "gevrey":
            out = float(self.alpha) * gammaln(p + 1)
        elif self.kind == "gamma_moment":
            out = gammaln(1 + float(self.alpha) * p)
        elif self.kind == "q_gevrey":
            out = p * p * math.log(self.q)
        else:
            return self._custom_log_values(upto)
        return out + math.log(self.scale)

    def _custom_log_values(self, upto: int) -> np.ndarray:
        table = np.log(np.asarray(self.values))
        last = len(table) - 1
        if upto <= last:
            return table[: upto + 1].copy()
        extra = np.arange(last + 1, upto + 1, dtype=float)
        if self.extension == "constant_ratio":
            step = table[last] - table[last - 1]
            tail = table[last] + (extra - last) * step
        else:
            tail = table[last] + gammaln(extra + 1) - gammaln(last + 1)
        return np.concatenate([table, tail])

    def log_value(self, p: int) -> float:
        if p < 0:
            raise ValidationError("index must be nonnegative", field="p", value=p)
        return float(self.log_values(p)[p])

    def value(self, p: int) -> float:
        """``m_p`` in linear domain; ``inf`` beyond double range (use ``log_value`` there)."""
        if p < 0:
            raise ValidationError("index must be nonnegative", field="p", value=p)
        exact_power = {"factorial": Fraction(1), "gevrey": self.alpha}.get(self.kind)
        if exact_power is not None and exact_power.denominator == 1 and p <= 170 // int(exact_power):
            return self.scale * float(math.factorial(p) ** int(exact_power))
        lv = self.log_value(p)
        return math.inf if lv > LOG_DBL_MAX else math.exp(lv)

    def log_ratios(self, upto: int) -> np.ndarray:
        """``log(m_p / m_{p-1})`` for ``p = 1..upto`` (index 0 holds p=1)."""
        p = np.arange(1, upto + 1, dtype=float)
        if self.kind == "factorial":
            return np.log(p)
        if self.kind == "gevrey":
            return float(self.alpha) * np.log(p)
        if self.kind == "gamma_moment" and self.alpha == 1:
            return np.log(p)
        if self.kind == "q_gevrey":
            return (2 * p - 1) * math.log(self.q)
        return np.diff(self.log_values(upto))

    def ratios(self, upto: int) -> np.ndarray:
        """``m_p / m_{p-1}`` for ``p = 1..upto``; closed forms where they exist."""
        p = np.arange(1, upto + 1, dtype=float)
        if self.kind == "factorial" or (self.kind == "gamma_moment" and self.alpha == 1):
            return p
        if self.kind == "gevrey" and self.alpha.denominator == 1:
            return p ** int(self.alpha)
        if self.kind == "q_gevrey":
            return self.q ** (2 * p - 1)
        if self.kind == "custom":
            return self._custom_ratios(upto)
        return np.exp(self.log_ratios(upto))

    def _custom_ratios(self, upto: int) -> np.ndarray:
        # direct quotients inside the table: one rounding, exact for (C p!)
        table = np.asarray(self.values, dtype=float)
        last = len(table) - 1
        if upto > last and self.max_index is not None:
            self.log_values(upto)  # raises the out-of-range error
        inside = table[1 : min(upto, last) + 1] / table[: min(upto, last)]
        if upto <= last:
            return inside
        extra = np.arange(last + 1, upto + 1, dtype=float)
        if self.extension == "constant_ratio":
            tail = np.full(len(extra), table[last] / table[last - 1])
        else:
            tail = extra
        return np.concatenate([inside, tail])

    def ratio(self, p: int) -> float:
        if p < 1:
            raise ValidationError("ratio needs p >= 1", field="p", value=p)
        return float(self.ratios(p)[p - 1])

    def describe(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.alpha is not None:
            out["alpha"] = str(self.alpha)
        if self.q is not None:
            out["q"] = self.q
        if self.values is not None:
            out["values"] = list(self.values)
            out["extension"] = self.extension
        if self.scale != 1.0:
            out["scale"] = self.scale
        return out


# -- diagnostics ------------------------------------------------------------


@dataclass(frozen=True)
class AssumptionA:
    holds_on_window: bool
    C_estimate: float


@dataclass(frozen=True)
class AssumptionB:
    holds_on_window: bool
    alpha_estimate: Fraction
    C_estimate: float


@dataclass(frozen=True)
class SequenceDiagnostics:
    assumption_A: AssumptionA
    assumption_B: AssumptionB
    lc_ok: bool
    mg_ok: bool
    A1_estimate: float
    snq_partial_ok: bool
    A2_estimate: float
    probe_window: int
    notes: list[str] = field(default_factory=list)

    @property
    def path(self) -> str | None:
        """Preferred certificate path: ``"A"``, ``"B"`` or None."""
        if self.assumption_A.holds_on_window:
            return "A"
        if self.assumption_B.holds_on_window:
            return "B"
        return None

    @property
    def C_tilde(self) -> float:
        """``max(1, C)`` for the preferred path (1 when no path applies)."""
        if self.path == "A":
            return max(1.0, self.assumption_A.C_estimate)
        if self.path == "B":
            return max(1.0, self.assumption_B.C_estimate)
        return 1.0

    @property
    def alpha(self) -> float:
        """Exponent of the preferred path (1 for path A)."""
        return float(self.assumption_B.alpha_estimate) if self.path == "B" else 1.0

    def to_dict(self) -> dict:
        return {
            "assumption_A": {
                "holds_on_window": self.assumption_A.holds_on_window,
                "C_estimate": self.assumption_A.C_estimate,
            },
            "assumption_B": {
                "holds_on_window": self.assumption_B.holds_on_window,
                "alpha_estimate": str(self.assumption_B.alpha_estimate),
                "C_estimate": self.assumption_B.C_estimate,
            },
            "lc_ok": self.lc_ok,
            "mg_ok": self.mg_ok,
            "A1_estimate": self.A1_estimate,
            "snq_partial_ok": self.snq_partial_ok,
            "A2_estimate": self.A2_estimate,
            "probe_window": self.probe_window,
            "path": self.path,
            "notes": list(self.notes),
        }


def _bounded_trend(x: np.ndarray) -> bool:
    """True unless the last quartile of ``x`` exceeds the earlier sup by more than 5%."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        return False
    cut = max(1, (3 * len(x)) // 4)
    head, tail = x[:cut], x[cut:]
    if len(tail) == 0:
        return True
    ref = head.max()
    return bool(tail.max() <= ref + TREND_SLACK * abs(ref))


def gamma_log_ratios(alpha: float, upto: int) -> np.ndarray:
    """``log(Gamma(1+alpha p) / Gamma(1+alpha(p-1)))`` for ``p = 1..upto``."""
    p = np.arange(1, upto + 1, dtype=float)
    alpha = float(alpha)
    return gammaln(1 + alpha * p) - gammaln(1 + alpha * (p - 1))


def _fit_alpha(log_r: np.ndarray) -> float:
    P = len(log_r)
    p = np.arange(1, P + 1, dtype=float)
    lo = P // 2
    slope = np.polyfit(np.log(p[lo:]), log_r[lo:], 1)[0]
    return float(slope)


def _assumption_b(log_r: np.ndarray) -> AssumptionB:
    P = len(log_r)
    slope = _fit_alpha(log_r)
    eps = Fraction(1, 1000)
    raw = Fraction(slope).limit_denominator(1000)
    raw = min(max(raw, eps), 1 - eps)
    snapped = Fraction(slope).limit_denominator(12)
    candidates = [raw]
    if 0 < snapped < 1 and abs(float(snapped) - slope) <= 0.02:
        candidates.insert(0, snapped)
    best = None
    for a in candidates:
        s = np.exp(gamma_log_ratios(float(a), P) - log_r)
        res = AssumptionB(_bounded_trend(s), a, float(s.max()))
        if res.holds_on_window:
            return res
        best = best or res
    return best


def diagnose(seq: MomentSequence, P: int = 64) -> SequenceDiagnostics:
    """Check the structural assumptions on the window ``1 <= p <= P``."""
    if P < 8:
        raise ValidationError("probe window must be at least 8", field="P", value=P)
    notes: list[str] = []
    top = seq.max_index
    if top is not None and top < P + 1:
        notes.append(f"custom table shorter than window; window cut to {top - 1}")
        P = top - 1
        if P < 8:
            raise ValidationError("custom table too short to diagnose (needs >= 10 values)", field="values")
    snq_top = 4 * P + 1 if top is None else min(4 * P + 1, top)
    logm = seq.log_values(max(P + 1, snq_top))
    log_r = seq.log_ratios(P)  # p = 1..P
    p = np.arange(1, P + 1, dtype=float)

    s_a = p / seq.ratios(P)
    a_res = AssumptionA(_bounded_trend(s_a), float(s_a.max()))
    b_res = _assumption_b(log_r)

    # log-convexity on m itself
    defect = logm[0 : P - 1] + logm[2 : P + 1] - 2 * logm[1:P]
    lc_ok = bool(np.all(defect >= -1e-12 * np.maximum(1.0, np.abs(logm[1:P]))))

    # moderate growth: A1 = sup (M_{p+q} / (M_p M_q))^{1/(p+q)}
    mg_rate = np.empty(P - 1)
    for s in range(2, P + 1):
        j = np.arange(1, s)
        mg_rate[s - 2] = np.max(logm[s] - logm[j] - logm[s - j]) / s
    mg_ok = _bounded_trend(mg_rate)
    A1 = float(np.exp(max(0.0, mg_rate.max())))

    # partial strong non-quasianalyticity: tail truncated at q = 4P
    q = np.arange(0, snq_top)
    terms = np.exp(logm[q] - logm[q + 1] - np.log(q + 1.0))
    tails = np.cumsum(terms[::-1])[::-1]
    snq_ratio = tails[: P + 1] * np.exp(logm[1 : P + 2] - logm[: P + 1])
    snq_ok = _bounded_trend(snq_ratio)
    A2 = float(snq_ratio.max())

    return SequenceDiagnostics(a_res, b_res, lc_ok, mg_ok, A1, snq_ok, A2, P, notes)


def eval_M(seq: MomentSequence, t: float) -> float:
    """``M(t) = sup_p log(t^p / m_p)`` with ``M(0) = 0``.

    The scan window doubles until the maximizer sits in its first half.
    """
    if not math.isfinite(t) or t < 0:
        raise ValidationError("t must be a finite nonnegative real", field="t", value=t)
    if t == 0:
        return 0.0
    lt = math.log(t)
    P = 32
    top = seq.max_index
    while True:
        if top is not None:
            P = min(P, top)
        logm = seq.log_values(P)
        vals = np.arange(P + 1) * lt - (logm - logm[0])
        k = int(np.argmax(vals))
        if k < P / 2 or (top is not None and P == top) or P >= 1 << 22:
            return max(0.0, float(vals[k]))
        P *= 2
