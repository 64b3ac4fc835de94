"""Command-line front end: ``indefsl <subcommand> --input problem.json --out DIR``.

Every run writes ``report.json`` and one or more CSV tables into ``--out``.
Exit codes: 0 decided, 3 inconclusive, 1 input error, 2 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bc import BCError, canonicalize
from .criteria import NOT_PI, PI, DegenerateFunctionError, lemma_conditions, local_window, pi_test, turning_point_criteria
from .helpineq import INCONCLUSIVE as HELP_INCONCLUSIVE
from .helpineq import HelpSpec, best_constant_estimate, help_verdict
from .schema import SchemaError, ProblemInput, max_eigs, tolerance, validate_problem
from .spectral import eigenvalues, gram_condition, jordan_chain_at_zero
from .verdict import INCONCLUSIVE, ProblemSpec, decide_rbp
from .weights import IntegralFn, SignPatternError

__all__ = ["RunConfig", "run", "main", "SUBCOMMANDS"]

EXIT_DECIDED = 0
EXIT_INPUT = 1
EXIT_NUMERIC = 2
EXIT_INCONCLUSIVE = 3

DEFAULT_TOL = 1e-10
DEFAULT_MAX_EIGS = 20
DEFAULT_GRAM_SIZES = (10, 20, 30)
DEFAULT_SAMPLES = 201
RESIDUAL_LIMIT = 1e-6


@dataclass
class RunConfig:
    """One CLI invocation.  ``tol`` and ``max_eigs`` override the document options."""

    subcommand: str
    input: Path
    out: Path
    tol: float | None = None
    max_eigs: int | None = None
    format: str = "json"

    @classmethod
    def from_mapping(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise SchemaError(f"/{unknown[0]}", "unknown configuration key")
        return cls(**data)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise SchemaError("/subcommand", f"unknown subcommand {self.subcommand!r}")
        self.input, self.out = Path(self.input), Path(self.out)
        if self.tol is not None:
            self.tol = tolerance(self.tol, "/tol")
        if self.max_eigs is not None:
            self.max_eigs = max_eigs(self.max_eigs, "/max_eigs")
        if self.format not in ("json", "csv"):
            raise SchemaError("/format", "must be 'json' or 'csv'")


@dataclass
class Outcome:
    decided: bool
    result: dict
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    primary: str = ""


# -- JSON / CSV output ----------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [_clean(float(obj.real)), _clean(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isfinite(v):
            return v
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_clean(report), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


PI_HEADER = ["test", "t", "x", "ratio"]


def _pi_rows(name: str, report) -> list[list]:
    return [[name, t, x, r] for t, x, r in report.rows()]


# -- subcommands -------------------------------------------------------------------


def _problem(doc: ProblemInput) -> ProblemSpec:
    doc.require("weight", "bc")
    try:
        return ProblemSpec(doc.weight, doc.bc, doc.q, doc.q_text, doc.options.get("interval_rule", "midpoint"))
    except ValueError as exc:
        raise SchemaError("/weight/sign_changes", str(exc)) from None


def cmd_check_rbp(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Decide the Riesz basis property."""
    verdict = decide_rbp(_problem(doc))
    rows = []
    for lv in verdict.locals:
        b = lv.bundle
        rows += _pi_rows(f"I+@{b.x_k!r}", b.pi_plus) + _pi_rows(f"I-@{b.x_k!r}", b.pi_minus)
    return Outcome(verdict.outcome != INCONCLUSIVE, verdict.to_json(), {"pi_ratios.csv": (PI_HEADER, rows)}, "pi_ratios.csv")


def _boundary_window(weight, end: float) -> float:
    pts = [weight.a, *weight.sign_changes, weight.b]
    gap = pts[1] - pts[0] if end == weight.a else pts[-1] - pts[-2]
    return 2.0 ** math.floor(math.log2(0.5 * gap))


def cmd_pi_test(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Test positive increase of a function or of the weight integrals."""
    pi = doc.options.get("pi", {})
    tests = []
    if "function" in pi:
        F = pi["function"]
        log_f = pi.get("log_function")
        tests.append(("F", pi_test(F, pi["x_max"], log_f=log_f)))
    else:
        doc.require("weight")
        w = doc.weight
        tests.append((f"I+@{w.a!r}", pi_test(IntegralFn(w, w.a, +1), _boundary_window(w, w.a))))
        for x_k in w.sign_changes:
            win = local_window(w, x_k)
            tests.append((f"I-@{x_k!r}", pi_test(IntegralFn(w, x_k, -1), win)))
            tests.append((f"I+@{x_k!r}", pi_test(IntegralFn(w, x_k, +1), win)))
        tests.append((f"I-@{w.b!r}", pi_test(IntegralFn(w, w.b, -1), _boundary_window(w, w.b))))
    rows = [row for name, rep in tests for row in _pi_rows(name, rep)]
    result = {"tests": {name: rep.to_json() for name, rep in tests}}
    if len(tests) == 1:
        result["verdict"] = tests[0][1].verdict
    decided = all(rep.verdict in (PI, NOT_PI) for _, rep in tests)
    return Outcome(decided, result, {"pi_ratios.csv": (PI_HEADER, rows)}, "pi_ratios.csv")


def cmd_criteria(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Evaluate every sufficient and necessary criterion at each turning point."""
    pi = doc.options.get("pi", {})
    result: dict = {}
    status_rows, pi_rows = [], []
    decided = True
    if doc.weight is not None:
        bundles = [turning_point_criteria(doc.weight, x_k) for x_k in doc.weight.sign_changes]
        result["turning_points"] = [b.to_json() for b in bundles]
        for b in bundles:
            outcomes = (b.api_plus, b.ap_suf, b.ap_nec, b.volkmer)
            status_rows += [[b.x_k, o.name, o.status] for o in outcomes]
            pi_rows += _pi_rows(f"I+@{b.x_k!r}", b.pi_plus) + _pi_rows(f"I-@{b.x_k!r}", b.pi_minus)
            decided &= any(o.status != "inconclusive" for o in outcomes[:3])
    if "function" in pi:
        conds = lemma_conditions(pi["function"], pi["x_max"], log_f=pi.get("log_function"))
        result["function_conditions"] = conds
        status_rows += [["F", f"condition_{k}", v] for k, v in conds.items()]
        decided &= any(v != "inconclusive" for v in conds.values())
    if not result:
        raise SchemaError("/weight", "criteria needs a weight or options.pi.function")
    tables = {"criteria.csv": (["x_k", "criterion", "status"], status_rows)}
    if pi_rows:
        tables["pi_ratios.csv"] = (PI_HEADER, pi_rows)
    return Outcome(decided, result, tables, "criteria.csv")


def cmd_canonicalize_bc(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Reduce boundary conditions to their normal form."""
    doc.require("bc")
    canon, M = canonicalize(doc.bc)
    result = canon.to_json()
    result["transform"] = [[[z.real, z.imag] for z in row] for row in M]
    rows = []
    for name, A in (("C", canon.matrices.C), ("D", canon.matrices.D), ("M", M)):
        rows += [[name, i, j, A[i, j].real, A[i, j].imag] for i in range(2) for j in range(2)]
    return Outcome(True, result, {"bc.csv": (["matrix", "row", "col", "re", "im"], rows)}, "bc.csv")


def _tol(doc: ProblemInput, cfg: RunConfig) -> float:
    return cfg.tol if cfg.tol is not None else doc.options.get("tol", DEFAULT_TOL)


def cmd_spectrum(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Eigenvalues nearest 0 with root functions and residuals."""
    doc.require("weight", "bc")
    count = cfg.max_eigs if cfg.max_eigs is not None else doc.options.get("max_eigs", DEFAULT_MAX_EIGS)
    op = (doc.weight, doc.q, doc.bc)
    spec = eigenvalues(op, doc.options.get("box"), count, with_functions=True, tol=_tol(doc, cfg))
    result = spec.to_json()
    try:
        chain = jordan_chain_at_zero(op)
    except ValueError:
        chain = None
    if chain is not None and np.any(np.abs(spec.eigenvalues) < 1e-8):
        result["jordan_chain"] = {
            "gamma": chain.gamma,
            "boundary_values": list(chain.boundary_values),
            "boundary_slopes": list(chain.boundary_slopes),
            "ell_residual": chain.ell_residual,
        }
    x = spec.solver.fine.nodes
    pick = np.unique(np.linspace(0, x.size - 1, doc.options.get("samples", DEFAULT_SAMPLES)).round().astype(int))
    samples = []
    for k, f in enumerate(spec.root_functions):
        for i in pick:
            v = f.nodes[i, 0]
            samples.append([k, f.lam.real, f.lam.imag, f.order, x[i], v.real, v.imag])
    eig_rows = [list(r) for r in spec.eigen_rows()]
    tables = {
        "eigenvalues.csv": (["re", "im", "multiplicity", "residual"], eig_rows),
        "eigenfunctions.csv": (["index", "lambda_re", "lambda_im", "order", "x", "re", "im"], samples),
    }
    ok = bool(spec.residuals.size) and float(np.max(spec.residuals)) <= RESIDUAL_LIMIT
    result["residual_limit"] = RESIDUAL_LIMIT
    return Outcome(ok, result, tables, "eigenvalues.csv")


def cmd_gram(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Condition numbers of Gram matrices of root functions."""
    doc.require("weight", "bc")
    sizes = doc.options.get("gram_sizes", list(DEFAULT_GRAM_SIZES))
    spec = gram_condition((doc.weight, doc.q, doc.bc), sizes, tol=_tol(doc, cfg))
    result = spec.to_json()
    result["kappa_by_size"] = {str(k): v for k, v in sorted(spec.kappa_by_size.items())}
    ks = [spec.kappa[n] for n in sorted(spec.kappa)]
    result["growth"] = ks[-1] / ks[0]
    tables = {
        "kappa.csv": (["N", "functions", "kappa"], [[n, 2 * n, spec.kappa[n]] for n in sorted(spec.kappa)]),
        "kappa_by_size.csv": (["functions", "kappa"], [[k, v] for k, v in sorted(spec.kappa_by_size.items())]),
        "eigenvalues.csv": (["re", "im", "multiplicity", "residual"], [list(r) for r in spec.eigen_rows()]),
    }
    return Outcome(True, result, tables, "kappa.csv")


def cmd_help_inequality(doc: ProblemInput, cfg: RunConfig) -> Outcome:
    """Validity of the HELP inequality and best-constant estimates."""
    doc.require("weight")
    try:
        spec = HelpSpec(doc.weight, doc.q, doc.q_text, doc.q_antiderivative, doc.q_antiderivative_text)
    except ValueError as exc:
        raise SchemaError("/weight", str(exc)) from None
    hopt = doc.options.get("help", {})
    report = help_verdict(spec, window=hopt.get("window"))
    est = best_constant_estimate(spec, hopt.get("N", 16))
    result = report.to_json()
    result["constants"] = est.to_json()
    pi_rows = _pi_rows(f"I+@{spec.weight.a!r}", report.left) + _pi_rows(f"I-@{spec.weight.b!r}", report.right)
    tables = {
        "k_n.csv": (["N", "K"], [[n, k] for n, k in est.rows()]),
        "pi_ratios.csv": (PI_HEADER, pi_rows),
    }
    return Outcome(report.validity != HELP_INCONCLUSIVE, result, tables, "k_n.csv")


SUBCOMMANDS = {
    "check-rbp": cmd_check_rbp,
    "pi-test": cmd_pi_test,
    "criteria": cmd_criteria,
    "canonicalize-bc": cmd_canonicalize_bc,
    "spectrum": cmd_spectrum,
    "gram": cmd_gram,
    "help-inequality": cmd_help_inequality,
}


# -- driver -------------------------------------------------------------------------


def _load(path: Path):
    try:
        text = path.read_text()
    except OSError as exc:
        raise SchemaError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def run(cfg: RunConfig) -> tuple[int, dict]:
    """Execute ``cfg``; return the exit code and the report that was written."""
    report: dict = {
        "tool": "indefsl",
        "version": __version__,
        "subcommand": cfg.subcommand,
        "input": str(cfg.input.name),
        "config": {"tol": cfg.tol, "max_eigs": cfg.max_eigs},
    }
    outcome = None
    try:
        raw = _load(cfg.input)
        doc = validate_problem(raw)
        report["problem"] = raw
        outcome = SUBCOMMANDS[cfg.subcommand](doc, cfg)
    except (SchemaError, DegenerateFunctionError, BCError, SignPatternError) as exc:
        code = EXIT_INPUT
        pointer = getattr(exc, "pointer", "")
        report["status"] = "input-error"
        report["error"] = {"pointer": pointer, "message": str(exc)}
    except (ArithmeticError, RuntimeError, ValueError, np.linalg.LinAlgError, NotImplementedError) as exc:
        code = EXIT_NUMERIC
        report["status"] = "numeric-failure"
        report["error"] = {"type": type(exc).__name__, "message": str(exc)}
    else:
        code = EXIT_DECIDED if outcome.decided else EXIT_INCONCLUSIVE
        report["status"] = "decided" if outcome.decided else "inconclusive"
        report["result"] = outcome.result
        others = sorted(t for t in outcome.tables if t != outcome.primary)
        report["files"] = ["report.json", outcome.primary, *others]
    report["exit_code"] = code
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "report.json").write_text(dumps(report))
    if outcome is not None and code in (EXIT_DECIDED, EXIT_INCONCLUSIVE):
        for name, (header, rows) in sorted(outcome.tables.items()):
            _write_csv(cfg.out / name, header, rows)
    return code, report


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="indefsl", description="Riesz basis and HELP diagnostics for indefinite Sturm-Liouville problems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    for name, fn in SUBCOMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name.replace("-", " ")).strip().splitlines()[0])
        sp.add_argument("--input", required=True, type=Path, help="problem JSON document")
        sp.add_argument("--out", required=True, type=Path, help="output directory")
        sp.add_argument("--tol", type=float, help="solver tolerance (1e-13 to 1e-4)")
        sp.add_argument("--max-eigs", type=int, dest="max_eigs", help="number of eigenvalues (1 to 200)")
        sp.add_argument("--format", choices=("json", "csv"), default="json", help="what to echo on stdout")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = RunConfig.from_mapping(vars(args))
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    code, report = run(cfg)
    if "error" in report:
        print(f"error: {report['error']['message']}", file=sys.stderr)
    elif cfg.format == "json":
        sys.stdout.write(dumps(report))
    else:
        sys.stdout.write((cfg.out / report["files"][1]).read_text())
    return code


if __name__ == "__main__":
    sys.exit(main())
