"""Command-line interface.

Usage::

    revembed classify --input m.json [--format json] [--tol db_tol=1e-8]
    revembed log --input m.json --method vdm
    revembed catalog --family dihedral --param which=generator
    revembed probe --input q.json --input r.json --grid 0:3:0.05

Exit codes: 0 for every completed analysis (negative verdicts included),
2 for usage errors, 3 for unreadable or invalid input, 4 for numerical
failures.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, catalog
from .embedding import (
    EIGEN,
    INTEGRAL,
    SERIES,
    VANDERMONDE,
    classify_embeddability,
    log_coefficients_vdm,
    is_markov_generator,
    markov_sqrt_positive,
    principal_log_integral,
    principal_log_reversible,
    principal_log_series,
    theta_set_probe,
)
from .errors import DimensionMismatch, InputError, NonNumeric, NumericalError, ParseError
from .linalg import expm
from .markov import communication_classes, equilibrium_basis, validate_generator, validate_stochastic
from .tolerances import ToleranceConfig

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_NUMERICAL = 4

LOG_METHODS = {"eigen": EIGEN, "series": SERIES, "vdm": VANDERMONDE, "integral": INTEGRAL}
FAMILIES = ("equal_input", "constant_input", "m_delta", "q_pair", "dihedral")


@dataclasses.dataclass
class MatrixFile:
    format: str
    d: int
    rows: np.ndarray
    kind: str | None = None

    def to_dict(self) -> dict:
        out = {"d": self.d, "rows": [[float(x) for x in row] for row in self.rows]}
        if self.kind:
            out["kind"] = self.kind
        return out


def _number(value, line, col):
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise NonNumeric(f"non-numeric entry {value!r}", line, col)
    try:
        x = float(value)
    except ValueError:
        raise NonNumeric(f"non-numeric entry {value!r}", line, col) from None
    if not math.isfinite(x):
        raise NonNumeric(f"non-finite entry {value!r}", line, col)
    return x


def _parse_json(text):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(data, dict) or not isinstance(data.get("rows"), list):
        raise ParseError('expected an object with a "rows" array')
    rows = data["rows"]
    d = data.get("d", len(rows))
    if isinstance(d, bool) or not isinstance(d, int):
        raise ParseError('"d" must be an integer')
    kind = data.get("kind")
    if kind not in (None, "markov", "generator"):
        raise ParseError(f'"kind" must be "markov" or "generator", got {kind!r}')
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list):
            raise ParseError(f"row {i} is not an array", i + 1)
        out.append([_number(v, i + 1, j + 1) for j, v in enumerate(row)])
    if len(out) != d or any(len(r) != d for r in out):
        raise DimensionMismatch(f"declared d = {d} but rows have shape {len(out)} x {[len(r) for r in out]}")
    return out, kind


def _parse_csv(text):
    out = []
    for lineno, fields in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not fields or all(not f.strip() for f in fields):
            continue
        out.append([_number(f.strip(), lineno, col) for col, f in enumerate(fields, start=1)])
    d = len(out)
    if d == 0:
        raise ParseError("no rows found")
    if any(len(r) != d for r in out):
        raise DimensionMismatch(f"{d} rows with lengths {[len(r) for r in out]}; expected a square matrix")
    return out, None


def parse_matrix_file(path, fmt=None) -> MatrixFile:
    """Read a matrix from JSON ``{"d": int, "rows": [[...]]}`` or CSV."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if fmt is None:
        suffix = path.suffix.lower()
        if suffix in (".json", ".csv"):
            fmt = suffix[1:]
        else:
            fmt = "json" if text.lstrip().startswith("{") else "csv"
    if fmt == "json":
        rows, kind = _parse_json(text)
    elif fmt == "csv":
        rows, kind = _parse_csv(text)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    return MatrixFile(fmt, len(rows), np.array(rows, dtype=float).reshape(len(rows), len(rows)), kind)


def format_matrix_file(mf: MatrixFile, fmt="json") -> str:
    if fmt == "json":
        return json.dumps(mf.to_dict()) + "\n"
    return "".join(",".join(repr(float(x)) for x in row) + "\n" for row in mf.rows)


def write_matrix_file(mf: MatrixFile, path, fmt=None) -> None:
    path = Path(path)
    fmt = fmt or ("csv" if path.suffix.lower() == ".csv" else "json")
    path.write_text(format_matrix_file(mf, fmt), encoding="utf-8")


@dataclasses.dataclass
class Report:
    """Outcome of one command, rendered as text or as a stable JSON object."""

    command: str
    verdict: str
    measures: list = dataclasses.field(default_factory=list)
    generators: list = dataclasses.field(default_factory=list)
    spectrum: dict | None = None
    residuals: dict = dataclasses.field(default_factory=dict)
    tolerances: dict = dataclasses.field(default_factory=dict)
    input: dict | None = None
    details: dict = dataclasses.field(default_factory=dict)
    timing: dict | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Report":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


def _plain(x):
    # json-ready copy; numpy scalars and arrays become Python floats and lists
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x)
    if hasattr(x, "entries"):
        return _plain(np.asarray(x.entries, dtype=float))
    return x


def _fmt_vec(v):
    return "(" + ", ".join(f"{float(x):.6g}" for x in v) + ")"


def _fmt_matrix(rows, indent="    "):
    return "\n".join(indent + "  ".join(f"{float(x):>12.6g}" for x in row) for row in rows)


def render_report(report: Report, fmt="text") -> str:
    if fmt == "json":
        return json.dumps(_plain(report.to_dict()), indent=2, sort_keys=True) + "\n"
    lines = [f"{report.command}: {report.verdict}"]
    det = _plain(report.details)
    if "reversibility" in det:
        lines.append(f"reversibility: {det['reversibility']['verdict']}")
    for p in report.measures:
        lines.append(f"p = {_fmt_vec(p)}")
    witness = det.get("reversibility", {}).get("witness")
    if witness:
        states = " -> ".join(str(s) for s in witness["states"])
        lines.append(f"witness ({witness['kind']}): {states}, forward {witness['forward']:.6g}, backward {witness['backward']:.6g}")
    if report.spectrum:
        vals = ", ".join(
            f"{v:.6g}" + (f" (x{k})" if k > 1 else "")
            for v, k in zip(report.spectrum["distinct_values"], report.spectrum["multiplicities"])
        )
        lines.append(f"spectrum: {vals}")
    for key in ("reason", "commuting", "det", "alpha", "hits", "is_generator"):
        if det.get(key) not in (None, "", []):
            value = det[key]
            if isinstance(value, float):
                value = f"{value:.6g}"
            elif isinstance(value, list) and value and isinstance(value[0], float):
                value = _fmt_vec(value)
            lines.append(f"{key}: {value}")
    for v in det.get("violations", []):
        lines.append(f"violation: {v['kind']} at {tuple(v['index'])} = {v['value']:.6g}")
    for note in det.get("notes", []):
        lines.append(f"note: {note}")
    for name, r in report.residuals.items():
        lines.append(f"residual[{name}] = {r:.3e}")
    for k, g in enumerate(report.generators):
        lines.append(f"generator {k}:")
        lines.append(_fmt_matrix(g))
    if "matrix" in det:
        lines.append("matrix:")
        lines.append(_fmt_matrix(det["matrix"]))
    if report.timing:
        lines.append(f"elapsed: {report.timing['seconds']:.4f} s")
    return "\n".join(lines) + "\n"


# -- commands -----------------------------------------------------------------


def _load(args, index=0) -> MatrixFile:
    if not args.input:
        raise argparse.ArgumentTypeError("--input is required")
    return parse_matrix_file(args.input[index])


def _echo(mf: MatrixFile) -> dict:
    return {"format": mf.format, "kind": mf.kind, **mf.to_dict()}


def _cmd_validate(args, tol):
    mf = _load(args)
    kind = args.kind or mf.kind or "markov"
    details = {"kind": kind}
    if kind == "generator":
        validate_generator(mf.rows, tol=tol)
        verdict = "ValidGenerator"
    else:
        M = validate_stochastic(mf.rows, tol=tol).entries
        cs = communication_classes(M, tol=tol)
        details["classes"] = [list(c) for c in cs.classes]
        details["closed"] = list(cs.closed_flags)
        details["equilibria"] = [pv.p for pv in equilibrium_basis(M, tol)]
        verdict = "ValidMarkov"
    return Report("validate", verdict, input=_echo(mf), details=details)


def _cmd_classify(args, tol):
    mf = _load(args)
    rep = classify_embeddability(mf.rows, tol)
    cls = rep.classification
    cert = rep.reversibility
    details = {
        "reversibility": cert.to_dict(),
        "reason": cls.reason,
        "commuting": cls.commuting,
        "pairs": len(cls.pairs),
        "violations": [v.to_dict() for v in cls.violations],
        "notes": list(cls.notes),
        "alpha": rep.alpha,
        "det": rep.det,
    }
    return Report(
        "classify",
        cls.kind,
        measures=list(cert.measures),
        generators=[g.entries for g in cls.generators],
        spectrum=rep.spectrum.to_dict() if rep.spectrum else None,
        residuals=dict(rep.residuals),
        input=_echo(mf),
        details=details,
    )


def _cmd_log(args, tol):
    mf = _load(args)
    M = validate_stochastic(mf.rows, tol=tol).entries
    method = args.method
    alpha = None
    if method == "eigen":
        cand = principal_log_reversible(M, tol=tol)
    elif method == "series":
        cand = principal_log_series(M, tol)
    elif method == "integral":
        cand = principal_log_integral(M)
    else:
        alpha, cand = log_coefficients_vdm(M, tol=tol)
    ok, violations = is_markov_generator(cand.L, tol)
    details = {
        "method": cand.method,
        "alpha": alpha,
        "is_generator": ok,
        "violations": [v.to_dict() for v in violations],
    }
    if args.output:
        write_matrix_file(MatrixFile("json", M.shape[0], cand.L, "generator" if ok else None), args.output)
    return Report("log", cand.method, generators=[cand.L], residuals={cand.method: cand.residual}, input=_echo(mf), details=details)


def _cmd_exp(args, tol):
    mf = _load(args)
    Q = validate_generator(mf.rows, tol=tol).entries
    M = expm(Q)
    if args.output:
        write_matrix_file(MatrixFile("json", M.shape[0], M, "markov"), args.output)
    return Report("exp", "Exponential", input=_echo(mf), details={"matrix": M})


def _cmd_sqrt(args, tol):
    mf = _load(args)
    R = markov_sqrt_positive(mf.rows, tol=tol).entries
    residual = float(np.max(np.sum(np.abs(R @ R - mf.rows), axis=1)))
    if args.output:
        write_matrix_file(MatrixFile("json", R.shape[0], R, "markov"), args.output)
    return Report("sqrt", "SquareRoot", residuals={"square": residual}, input=_echo(mf), details={"matrix": R})


def _params(pairs) -> dict:
    out = {}
    for item in pairs or []:
        key, sep, value = item.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"bad --param {item!r}; expected K=V")
        out[key.strip()] = value.strip()
    return out


def catalog_matrix(family, params) -> MatrixFile:
    """Build a named family instance; raises KeyError on missing parameters."""
    which = params.get("which")
    if family == "equal_input":
        x = [float(v) for v in params["x"].split(",")]
        if which == "generator":
            A, kind = catalog.equal_input_generator(x).entries, "generator"
        else:
            A, kind = catalog.equal_input_markov(x).entries, "markov"
    elif family == "constant_input":
        A, kind = catalog.constant_input_generator(float(params["c"]), int(params.get("d", 3))).entries, "generator"
    elif family == "m_delta":
        delta = catalog.EPSILON if params.get("delta", "epsilon") == "epsilon" else float(params["delta"])
        A, kind = catalog.m_delta(delta).entries, "markov"
    elif family == "q_pair":
        lam = catalog.lambda_k(int(params.get("k", 0))) if "lambda" not in params else float(params["lambda"])
        plus, minus = catalog.q_pair(lam)
        A, kind = (minus if which == "minus" else plus).entries, "generator"
    elif family == "dihedral":
        if which == "generator":
            A, kind = catalog.dihedral_generator().entries, "generator"
        else:
            A, kind = catalog.dihedral_markov().entries, "markov"
    else:
        raise KeyError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    return MatrixFile("json", A.shape[0], np.asarray(A, dtype=float), kind)


def _cmd_probe(args, tol):
    if not args.input or len(args.input) != 2:
        raise argparse.ArgumentTypeError("probe needs exactly two --input files")
    Q, R = (parse_matrix_file(p) for p in args.input)
    start, stop, step = (float(x) for x in args.grid.split(":"))
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    grid = start + step * np.arange(n)
    hits = theta_set_probe(Q.rows, R.rows, grid, tol)
    return Report(
        "probe",
        "Probe",
        input={"first": _echo(Q), "second": _echo(R)},
        details={"grid": [start, stop, step], "hits": hits},
    )


COMMANDS = {
    "validate": _cmd_validate,
    "classify": _cmd_classify,
    "log": _cmd_log,
    "exp": _cmd_exp,
    "sqrt": _cmd_sqrt,
    "probe": _cmd_probe,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", metavar="PATH", help="matrix file (JSON or CSV)")
    common.add_argument("--format", choices=("text", "json"), default="text")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="override a tolerance (repeatable)")
    common.add_argument("--no-timing", action="store_true", help="omit timing from the report")
    common.add_argument("--output", metavar="PATH", help="also write the resulting matrix to PATH")

    parser = argparse.ArgumentParser(prog="revembed", description="Reversibility and embeddability of Markov matrices.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("validate", parents=[common], help="validate a Markov or rate matrix")
    p.add_argument("--kind", choices=("markov", "generator"))
    sub.add_parser("classify", parents=[common], help="decide reversibility and embeddability")
    p = sub.add_parser("log", parents=[common], help="principal logarithm")
    p.add_argument("--method", choices=sorted(LOG_METHODS), default="eigen")
    sub.add_parser("exp", parents=[common], help="exponential of a rate matrix")
    sub.add_parser("sqrt", parents=[common], help="square root with positive spectrum")
    p = sub.add_parser("catalog", parents=[common], help="emit a named matrix family instance")
    p.add_argument("--family", choices=FAMILIES, required=True)
    p.add_argument("--param", action="append", default=[], metavar="K=V")
    p = sub.add_parser("probe", parents=[common], help="times where two semigroups agree")
    p.add_argument("--grid", default="0:3:0.05", metavar="START:STOP:STEP")
    return parser


def _tolerances(items) -> ToleranceConfig:
    base = ToleranceConfig.from_env()
    return ToleranceConfig.from_mapping(_params(items), base) if items else base


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        tol = _tolerances(args.tol)
        if args.command == "catalog":
            mf = catalog_matrix(args.family, _params(args.param))
            if args.output:
                write_matrix_file(mf, args.output)
            stdout.write(format_matrix_file(mf, "json" if args.format == "json" else "csv"))
            return EXIT_OK
        start = time.perf_counter()
        report = COMMANDS[args.command](args, tol)
        report.tolerances = tol.as_dict()
        if not args.no_timing:
            report.timing = {"seconds": time.perf_counter() - start}
    except argparse.ArgumentTypeError as exc:
        stderr.write(f"revembed: error: {exc}\n")
        return EXIT_USAGE
    except (InputError, OSError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        stderr.write(f"revembed: input error: {msg}\n")
        return EXIT_INPUT
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        stderr.write(f"revembed: numerical error: {exc}\n")
        return EXIT_NUMERICAL
    stdout.write(render_report(report, args.format))
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
