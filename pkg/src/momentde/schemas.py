"""Problem-file schemas for the command-line front end.

Every record rejects unknown fields. A complex entry is a plain number, a
string such as ``"1-2j"`` or an ``[re, im]`` pair; outputs always use pairs.
Pairs are recognized by nesting depth: a field whose entries are matrices per
degree (``"A": [A_0, A_1, ...]``) is three levels deep, and a fourth level of
length 2 holds ``[re, im]``. A two-level ``A`` is a constant real or
string-valued matrix (wrap it as ``[A_0]`` to use pairs). Matrix series may
also be a geometric record ``{"geometric": {"base": M, "ratio": q}}`` meaning
``A_p = M q^p``.

``python -m momentde.schemas DIR`` writes the JSON schemas to ``DIR``.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, RootModel, field_validator

from .errors import ValidationError
from .sequences import MomentSequence, as_fraction
from .series import MatrixSeries, TruncatedSeries, VectorSeries


def _complex_literal(v: str) -> str:
    try:
        z = complex(v.replace(" ", ""))
    except ValueError:
        raise ValueError(f"not a complex number: {v!r}") from None
    if not (np.isfinite(z.real) and np.isfinite(z.imag)):
        raise ValueError(f"complex value must be finite: {v!r}")
    return v


Number = Union[int, float]
ComplexString = Annotated[str, AfterValidator(_complex_literal)]
Pair = Annotated[list[Number], Field(min_length=2, max_length=2)]
ComplexValue = Union[Number, ComplexString, Pair]
Matrix = list[list[ComplexValue]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SequenceSpec(_Strict):
    kind: Literal["factorial", "gevrey", "gamma_moment", "q_gevrey", "custom"]
    alpha: Union[str, Number, None] = None
    q: Union[Number, None] = None
    values: Union[list[Number], None] = None
    extension: Union[Literal["constant_ratio", "factorial"], None] = None
    scale: Number = 1.0

    @field_validator("alpha")
    @classmethod
    def _rational(cls, v):
        if v is None:
            return v
        try:
            as_fraction(v)
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"alpha must be a rational such as '1/2', got {v!r}") from None
        return v

    def build(self) -> MomentSequence:
        return MomentSequence(
            self.kind,
            alpha=None if self.alpha is None else as_fraction(self.alpha),
            q=None if self.q is None else float(self.q),
            values=None if self.values is None else tuple(float(v) for v in self.values),
            extension=self.extension,
            scale=float(self.scale),
        )


class GeometricMatrix(_Strict):
    base: Matrix
    ratio: Number


class GeometricRecord(_Strict):
    geometric: GeometricMatrix


class Tolerances(_Strict):
    residual: float = Field(default=1e-9, gt=0)


class SolveProblem(_Strict):
    sequence: SequenceSpec
    A: Union[list[Matrix], Matrix, GeometricRecord]
    b: Union[list[list[ComplexValue]], list[ComplexValue], None] = None
    y0: list[ComplexValue]
    radius: float = Field(gt=0)
    order: int = Field(default=32, ge=1)
    tolerances: Tolerances = Tolerances()


class EquationProblem(_Strict):
    """``a = [a_1, ..., a_n]``, each a constant or an ascending coefficient list in z."""

    a: list[Union[list[ComplexValue], ComplexValue]] = Field(min_length=1)


class SystemProblem(_Strict):
    A: Union[list[Matrix], Matrix, GeometricRecord]
    order: Union[int, None] = Field(default=None, ge=0)
    cyclic_vector: Union[list[ComplexValue], None] = None


class ConstProblem(_Strict):
    a: list[ComplexValue] = Field(min_length=1)
    cauchy: list[ComplexValue]
    sequence: SequenceSpec
    order: int = Field(default=64, ge=1)
    tolerances: Tolerances = Tolerances()


class DeltaEProblem(_Strict):
    sequence: SequenceSpec
    lam: ComplexValue = Field(alias="lambda")
    h: int = Field(default=0, ge=0)
    order: int = Field(default=64, ge=0)


class SequenceFile(_Strict):
    """A bare sequence record, optionally wrapped as ``{"sequence": {...}}``."""

    sequence: SequenceSpec


class SequenceDocument(RootModel[Union[SequenceSpec, SequenceFile]]):
    """A sequence file: the bare record or the ``{"sequence": ...}`` wrapper."""

    def spec(self) -> SequenceSpec:
        return self.root.sequence if isinstance(self.root, SequenceFile) else self.root


SCHEMAS: dict[str, type[BaseModel]] = {
    "sequence": SequenceDocument,
    "solve": SolveProblem,
    "eq2sys": EquationProblem,
    "sys2eq": SystemProblem,
    "const": ConstProblem,
    "delta_e": DeltaEProblem,
}


# -- conversions ----------------------------------------------------------
def to_complex(v) -> complex:
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, (list, tuple)):
        return complex(float(v[0]), float(v[1]))
    return complex(v)


def _raw(x) -> np.ndarray:
    """Nested lists to a complex array; string leaves parsed, pairs left as an axis."""
    if isinstance(x, list):
        parts = [_raw(t) for t in x]
        if len({p.shape for p in parts}) > 1:
            raise ValidationError("ragged nested list", shapes=sorted({str(p.shape) for p in parts}))
        return np.array(parts, dtype=complex).reshape((len(parts),) + (parts[0].shape if parts else ()))
    return np.array(to_complex(x))


def _array(x, depth: int, field: str) -> np.ndarray:
    """Array of nesting ``depth``; one extra trailing axis of length 2 is read as ``[re, im]``."""
    arr = _raw(x)
    if arr.ndim == depth + 1 and arr.shape[-1] == 2 and not np.any(arr.imag):
        return arr[..., 0].real + 1j * arr[..., 1].real
    if arr.ndim != depth:
        raise ValidationError(f"expected {depth} levels of nesting", field=field, shape=list(arr.shape))
    return arr


def matrix_series(A, N: int | None, field: str = "A") -> MatrixSeries:
    if isinstance(A, GeometricRecord):
        if N is None:
            raise ValidationError("geometric matrix series needs an order", field="order")
        base = _array(A.geometric.base, 2, f"{field}.geometric.base")
        q = float(A.geometric.ratio)
        coeffs = base[None] * q ** np.arange(N + 1)[:, None, None]
    else:
        raw = _raw(A)
        coeffs = raw[None] if raw.ndim == 2 else _array(A, 3, field)
    if coeffs.shape[1] != coeffs.shape[2] or coeffs.shape[1] == 0:
        raise ValidationError("coefficient matrices must be square", field=field, shape=list(coeffs.shape))
    return MatrixSeries(coeffs.astype(complex))


def vector_series(b, n: int, field: str = "b") -> VectorSeries:
    """Per-degree vectors ``[b_0, b_1, ...]``; a flat list of numbers is a constant vector."""
    raw = _raw(b)
    arr = raw[None] if raw.ndim == 1 else _array(b, 2, field)
    if arr.shape[1] != n:
        raise ValidationError(f"b must be a list of {n}-vectors", field=field, shape=list(arr.shape))
    return VectorSeries(arr.astype(complex))


def vector(v, field: str) -> np.ndarray:
    return _array(v, 1, field).astype(complex)


def coefficient_series(a) -> list[TruncatedSeries]:
    """``a_j`` entries: a constant, or an ascending coefficient list in z."""
    out = []
    for j, entry in enumerate(a, start=1):
        raw = _raw(entry)
        coeffs = raw[None] if raw.ndim == 0 else _array(entry, 1, f"a[{j}]")
        out.append(TruncatedSeries(coeffs))
    return out


def export(outdir: Path) -> list[Path]:
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    for name, model in SCHEMAS.items():
        path = outdir / f"{name}.schema.json"
        path.write_text(json.dumps(model.model_json_schema(by_alias=True), indent=2, sort_keys=True) + "\n")
        written.append(path)
    return written


if __name__ == "__main__":  # pragma: no cover
    for p in export(Path(sys.argv[1] if len(sys.argv) > 1 else "docs/schemas")):
        print(p)
