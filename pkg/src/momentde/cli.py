"""Batch command-line front end.

Exit codes: 0 success, 2 invalid input, 3 mathematical failure (no cyclic
vector, condition violation, singular data, failed post-condition). Failures
print a JSON diagnostic on stderr; reports go to stdout unless ``--out`` is
given.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np
import pydantic

from . import __version__
from .constcoeff import (
    cauchy_values,
    delta_e,
    equation_residual,
    estimate_order_type,
    solve_const,
)
from .errors import MomentDEError, ValidationError
from .fractional import verify_report
from .schemas import (
    ConstProblem,
    DeltaEProblem,
    EquationProblem,
    SequenceFile,
    SequenceSpec,
    SolveProblem,
    SystemProblem,
    coefficient_series,
    matrix_series,
    to_complex,
    vector,
    vector_series,
)
from .sequences import diagnose
from .solver import CauchyProblem, solve, tolerance_scale
from .transforms import equation_to_system, system_to_equation

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_MATH = 3

ALIASES = {("const", "solve"): "const-solve", ("frac", "verify"): "frac-verify"}


class CommandFailed(Exception):
    """A command ran but its result violates a post-condition."""

    def __init__(self, msg: str, report: dict) -> None:
        super().__init__(msg)
        self.report = report


# -- serialization ----------------------------------------------------------
def plain(x):
    """Recursively convert to JSON-ready values; complex numbers become ``[re, im]``."""
    if isinstance(x, dict):
        return {str(k): plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [plain(v) for v in x.tolist()]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [plain(float(x.real)), plain(float(x.imag))]
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x + 0.0 if math.isfinite(x) else None  # no negative zeros
    return x


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, shortest round-trip floats."""
    return json.dumps(plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_series_csv(path: Path, coeffs) -> None:
    """Rows ``degree, component (1-based), re, im``."""
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim == 1:
        c = c[:, None]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["degree", "component", "re", "im"])
        for p in range(c.shape[0]):
            for i in range(c.shape[1]):
                w.writerow([p, i + 1, repr(float(c[p, i].real)), repr(float(c[p, i].imag))])


def emit(report: dict, out: str | None) -> None:
    text = dumps(report)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def poly(col: np.ndarray) -> list:
    """Coefficient list with trailing zeros trimmed (at least one entry)."""
    nz = np.nonzero(np.abs(col) > 0)[0]
    return list(col[: (nz[-1] + 1 if len(nz) else 1)])


def polys(coeffs: np.ndarray) -> list:
    """Entries of a matrix series ``(N+1, n, n)`` as nested coefficient lists."""
    c = np.asarray(coeffs, dtype=complex)
    return [[poly(c[:, i, j]) for j in range(c.shape[2])] for i in range(c.shape[1])]


# -- input ------------------------------------------------------------------
def load(path: str, model: type[pydantic.BaseModel]):
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}", field="path") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    return model.model_validate(data)


def load_sequence(path: str) -> SequenceSpec:
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except FileNotFoundError:
        raise ValidationError(f"file not found: {path}", field="path") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"invalid JSON in {path}: {exc.msg}", line=exc.lineno, column=exc.colno) from None
    if isinstance(data, dict) and "sequence" in data:
        return SequenceFile.model_validate(data).sequence
    return SequenceSpec.model_validate(data)


def parse_vector(text: str) -> np.ndarray:
    """``"1,2,1"`` or a JSON list."""
    try:
        raw = json.loads(text) if text.strip().startswith("[") else text.split(",")
        return np.array([to_complex(v.strip() if isinstance(v, str) else v) for v in raw])
    except (ValueError, TypeError, json.JSONDecodeError):
        raise ValidationError(f"cannot parse vector {text!r}", field="--cyclic-vector") from None


# -- commands ---------------------------------------------------------------
def cmd_sequence_check(args) -> int:
    seq = load_sequence(args.spec).build()
    diag = diagnose(seq, args.max_p)
    report = {
        "sequence": seq.describe(),
        "max_p": args.max_p,
        "assumption_A": diag.assumption_A.holds_on_window,
        "assumption_B": diag.assumption_B.holds_on_window,
        "path": diag.path,
        "alpha": diag.alpha,
        "C_tilde": diag.C_tilde,
        "diagnostics": diag.to_dict(),
    }
    emit(report, args.out)
    return EXIT_OK


def build_problem(prob: SolveProblem, order: int | None) -> CauchyProblem:
    N = order if order is not None else prob.order
    if N < 1:
        raise ValidationError("order must be >= 1", field="order", value=N)
    seq = prob.sequence.build()
    A = matrix_series(prob.A, N)
    b = None if prob.b is None else vector_series(prob.b, A.dim)
    return CauchyProblem(seq, A, vector(prob.y0, "y0"), prob.radius, N, b)


def run_solve(problem_path: str, order: int | None, out: str | None) -> dict:
    prob = load(problem_path, SolveProblem)
    problem = build_problem(prob, order)
    res = solve(problem)
    side = res.sidecar()
    tol = prob.tolerances.residual * tolerance_scale()
    side["residual_tolerance"] = tol
    side["residual_ok"] = bool(res.residual_max <= tol * res.residual_scale)
    if out:
        write_series_csv(Path(out), res.y.coeffs)
        Path(out).with_suffix(".json").write_text(dumps(side))
    if not side["residual_ok"]:
        raise CommandFailed("residual exceeds tolerance", side)
    return side


def _solve_one(job):
    path, order, outdir = job
    out = str(Path(outdir) / (Path(path).stem + ".csv"))
    try:
        run_solve(path, order, out)
        return Path(path).name, EXIT_OK, None
    except CommandFailed as exc:
        return Path(path).name, EXIT_MATH, str(exc)
    except (ValidationError, pydantic.ValidationError) as exc:
        return Path(path).name, EXIT_INVALID, str(exc)
    except MomentDEError as exc:
        return Path(path).name, EXIT_MATH, str(exc)


def cmd_solve(args) -> int:
    if args.batch:
        src = Path(args.batch)
        if not src.is_dir():
            raise ValidationError(f"not a directory: {args.batch}", field="--batch")
        if not args.out:
            raise ValidationError("--batch needs --out DIR", field="--out")
        outdir = Path(args.out)
        outdir.mkdir(parents=True, exist_ok=True)
        jobs = [(str(p), args.order, str(outdir)) for p in sorted(src.glob("*.json"))]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(_solve_one, jobs))
        summary = {name: {"exit": code, "message": msg} for name, code, msg in results}
        sys.stdout.write(dumps({"results": summary}))
        return max((code for _, code, _ in results), default=EXIT_OK)
    if not args.problem:
        raise ValidationError("solve needs --problem FILE or --batch DIR", field="--problem")
    side = run_solve(args.problem, args.order, args.out)
    if not args.out:
        sys.stdout.write(dumps(side))
    return EXIT_OK


def cmd_transform(args) -> int:
    if args.direction == "eq2sys":
        if args.cyclic_vector:
            raise ValidationError("--cyclic-vector applies to sys2eq only", field="--cyclic-vector")
        prob = load(args.problem, EquationProblem)
        form = equation_to_system(coefficient_series(prob.a))
        report = {
            "direction": "eq2sys",
            "n": form.n,
            "B": polys(form.B.coeffs),
            "last_row": polys(form.B.coeffs)[-1],
        }
    else:
        prob = load(args.problem, SystemProblem)
        A = matrix_series(prob.A, prob.order)
        if prob.order is not None:
            A = A.truncate(prob.order)
        v0 = None
        if args.cyclic_vector:
            v0 = parse_vector(args.cyclic_vector)
        elif prob.cyclic_vector is not None:
            v0 = vector(prob.cyclic_vector, "cyclic_vector")
        if v0 is not None and v0.shape != (A.dim,):
            raise ValidationError(f"cyclic vector needs {A.dim} entries", field="cyclic_vector")
        form = system_to_equation(A, v0)
        report = {
            "direction": "sys2eq",
            "n": form.n,
            "cyclic_vector": form.v0,
            "krylov_basis": form.T,
            "basis_condition_number": form.condition_number,
            "a": [poly(x.coeffs) for x in form.a],
            "B": polys(form.B.coeffs),
            "last_row": polys(form.B.coeffs)[-1],
        }
    emit(report, args.out)
    return EXIT_OK


def cmd_const_solve(args) -> int:
    prob = load(args.problem, ConstProblem)
    N = args.order if args.order is not None else prob.order
    seq = prob.sequence.build()
    a = vector(prob.a, "a")
    cauchy = vector(prob.cauchy, "cauchy")
    sol = solve_const(a, cauchy, seq, N)
    n = len(a)
    res = np.abs(equation_residual(a, sol.y, seq))
    scale = 1.0 + float(np.abs(sol.y.coeffs).max())
    data_err = float(np.abs(cauchy_values(sol.y, seq, n) - cauchy).max())
    tol = prob.tolerances.residual * tolerance_scale()
    report = sol.to_dict()
    report.update(
        {
            "order": N,
            "sequence": seq.describe(),
            "residual_max": float(res.max()) if res.size else 0.0,
            "cauchy_data_error": data_err,
            "tolerance": tol,
        }
    )
    report["passed"] = bool(report["residual_max"] <= tol * scale and data_err <= tol * scale)
    if args.out:
        write_series_csv(Path(args.out), sol.y.coeffs)
        Path(args.out).with_suffix(".json").write_text(dumps(report))
    else:
        sys.stdout.write(dumps(report))
    if not report["passed"]:
        raise CommandFailed("equation residual or Cauchy data exceeds tolerance", report)
    return EXIT_OK


def cmd_delta_e(args) -> int:
    prob = load(args.problem, DeltaEProblem)
    N = args.order if args.order is not None else prob.order
    if prob.h > N:
        raise ValidationError("need h <= order", field="h", h=prob.h, order=N)
    seq = prob.sequence.build()
    d = delta_e(seq, to_complex(prob.lam), prob.h, N)
    est = estimate_order_type(d.series)
    report = {
        "sequence": seq.describe(),
        "lambda": d.lam,
        "h": d.h,
        "order": N,
        "coefficients": d.series.coeffs,
        "order_type": {
            "rho_hat": est.rho_hat,
            "sigma_hat": est.sigma_hat,
            "entire": est.entire,
            "polynomial": est.polynomial,
        },
    }
    if args.out:
        write_series_csv(Path(args.out), d.series.coeffs)
        report.pop("coefficients")
        Path(args.out).with_suffix(".json").write_text(dumps(report))
    else:
        sys.stdout.write(dumps(report))
    return EXIT_OK


def cmd_frac_verify(args) -> int:
    try:
        alpha = Fraction(args.alpha)
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"alpha must be a rational a/b, got {args.alpha!r}", field="--alpha") from None
    report = verify_report(alpha, args.order, args.grid)
    emit(report, args.out)
    if not report["passed"]:
        raise CommandFailed("fractional verification failed", report)
    return EXIT_OK


# -- parser -----------------------------------------------------------------
def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="momentde", description="Moment differential equation toolkit.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sequence-check", help="check structural assumptions on a moment sequence")
    p.add_argument("--spec", required=True, help="sequence JSON file")
    p.add_argument("--max-p", type=_positive_int, default=64, help="probe window (default 64)")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_sequence_check)

    p = sub.add_parser("solve", help="solve a Cauchy problem")
    p.add_argument("--problem", help="problem JSON file")
    p.add_argument("--order", type=_positive_int, help="truncation order (overrides the file)")
    p.add_argument("--out", help="CSV path (sidecar JSON next to it); output dir with --batch")
    p.add_argument("--batch", help="solve every *.json in this directory")
    p.add_argument("--workers", type=_positive_int, default=None, help="worker processes for --batch")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("transform", help="equation <-> system conversion")
    p.add_argument("direction", choices=["eq2sys", "sys2eq"])
    p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--cyclic-vector", help="explicit cyclic vector for sys2eq, e.g. 1,2,1")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("const-solve", help="constant-coefficient equation via the Delta basis")
    p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--order", type=_positive_int, help="truncation order (overrides the file)")
    p.add_argument("--out", help="CSV path (report JSON next to it)")
    p.set_defaults(func=cmd_const_solve)

    p = sub.add_parser("delta-e", help="materialize Delta_h E(lambda, z)")
    p.add_argument("--problem", required=True, help="problem JSON file")
    p.add_argument("--order", type=_positive_int, help="truncation order (overrides the file)")
    p.add_argument("--out", help="CSV path (report JSON next to it)")
    p.set_defaults(func=cmd_delta_e)

    p = sub.add_parser("frac-verify", help="verify the fractional identities at one alpha")
    p.add_argument("--alpha", required=True, help="rational a/b in (0, 1]")
    p.add_argument("--order", type=_positive_int, default=32)
    p.add_argument("--grid", type=_positive_int, default=256, help="points for the Delta-bound check")
    p.add_argument("--out", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_frac_verify)
    return ap


def _diagnostic(kind: str, msg: str, details: dict | None = None) -> None:
    sys.stderr.write(dumps({"error": {"type": kind, "message": msg, "details": details or {}}}))


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if len(argv) >= 2 and (argv[0], argv[1]) in ALIASES:
        argv = [ALIASES[(argv[0], argv[1])]] + argv[2:]
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        return args.func(args)
    except pydantic.ValidationError as exc:
        errors = [
            {"loc": ".".join(str(x) for x in e["loc"]), "msg": e["msg"], "type": e["type"]}
            for e in exc.errors(include_url=False)
        ]
        _diagnostic("ValidationError", f"{len(errors)} schema error(s)", {"errors": errors})
        return EXIT_INVALID
    except ValidationError as exc:
        _diagnostic("ValidationError", str(exc), exc.details)
        return EXIT_INVALID
    except CommandFailed as exc:
        _diagnostic("PostconditionFailed", str(exc), exc.report)
        return EXIT_MATH
    except MomentDEError as exc:
        _diagnostic(type(exc).__name__, str(exc), exc.details)
        return EXIT_MATH


def main() -> None:  # pragma: no cover
    sys.exit(run())


if __name__ == "__main__":  # pragma: no cover
    main()
