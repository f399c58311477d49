"""Command-line interface: ``hrsos bound | spectral-norm | gram | check``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import re
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .checks import run_checks
from .gram import build_Nk, build_Pk, write_coo
from .hierarchy import (
    DEFAULT_MAX_DIM,
    HierarchyResult,
    MonotonicityError,
    default_levels,
    hrsos_bound,
    mhrsos_bound,
    spectral_norm_bound,
)
from .oracle import spectral_norm_matrix, upper_bound_sphere
from .polyform import (
    FormError,
    ParseError,
    form_from_records,
    multi_form_from_records,
    parse_form,
    parse_multi_form,
)

log = logging.getLogger("hrsos")

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2
THREADS_ENV = "HRSOS_THREADS"


class InputError(Exception):
    """Bad problem input; maps to exit code 2."""


def load_schema(name: str) -> dict:
    return json.loads(resources.files("hrsos").joinpath("schemas", f"{name}.schema.json").read_text())


def validate_problem(spec: dict) -> None:
    try:
        jsonschema.validate(spec, load_schema("problem"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"problem spec invalid at {where}: {exc.message}") from exc


def _natural_key(name: str):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", name)]


def infer_variables(text: str) -> list[str]:
    names = set(re.findall(r"[A-Za-z_][A-Za-z_0-9]*", text))
    return sorted(names, key=_natural_key)


def _parse_levels(text: str) -> list[int]:
    try:
        levels = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"levels must be comma-separated integers, got {text!r}") from exc
    if not levels:
        raise InputError("at least one level is required")
    return levels


def _parse_groups(text: str) -> list[list[str]]:
    return [[v.strip() for v in g.split(",") if v.strip()] for g in text.split(";") if g.strip()]


def _tensor_from_spec(t) -> np.ndarray:
    if isinstance(t, dict):
        shape = tuple(t["shape"])
        out = np.zeros(shape)
        for entry in t["entries"]:
            if len(entry) != len(shape) + 1:
                raise InputError(f"tensor entry {entry} does not match shape {list(shape)}")
            idx = tuple(int(i) for i in entry[:-1])
            if any(not 0 <= i < n for i, n in zip(idx, shape)):
                raise InputError(f"tensor index {list(idx)} outside shape {list(shape)}")
            out[idx] = entry[-1]
        return out
    try:
        arr = np.array(t, dtype=float)
    except ValueError as exc:
        raise InputError(f"tensor is not a rectangular numeric array: {exc}") from exc
    return arr


def _form_from_spec(spec: dict):
    kind = spec["kind"]
    if "polynomial" in spec:
        variables = spec.get("variables")
        if kind == "sphere-min":
            if variables and isinstance(variables[0], list):
                raise InputError("sphere-min takes a flat variable list")
            return parse_form(spec["polynomial"], variables or infer_variables(spec["polynomial"]))
        if not variables or not isinstance(variables[0], list):
            raise InputError("multi-sphere-min needs variables grouped per factor")
        return parse_multi_form(spec["polynomial"], variables)
    if kind == "sphere-min":
        return form_from_records(spec["terms"])
    return multi_form_from_records(spec["terms"])


def _report(result: HierarchyResult, spec: dict, seed: int, d_offset: int) -> dict:
    levels = []
    for lv in result.levels:
        levels.append(
            {
                "k": lv.k,
                "k_minus_d": lv.k - d_offset,
                "bound": lv.bound,
                "wall_seconds": lv.seconds,
                "iterations": lv.iterations,
                "residual": lv.residual,
                "method": lv.method,
                "dim": lv.dim,
                "gap_bound": lv.gap_bound,
                "error": lv.error,
            }
        )
    return {
        "version": __version__,
        "seed": seed,
        "problem": spec,
        "direction": result.direction,
        "odd_lift_scale": result.scale if result.direction == "lower" else 1.0,
        "levels": levels,
    }


def _csv_text(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "bound", "seconds"])
    for lv in report["levels"]:
        w.writerow([lv["k"], "" if lv["bound"] is None else repr(lv["bound"]), repr(lv["wall_seconds"])])
    return buf.getvalue()


def _emit(report: dict, args) -> None:
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    if args.csv:
        if args.csv == "-":
            sys.stdout.write(_csv_text(report))
        else:
            Path(args.csv).write_text(_csv_text(report))


def _solver_settings(spec: dict, args) -> dict:
    solver = dict(spec.get("solver", {}))
    threads = solver.get("threads") or args.threads or os.environ.get(THREADS_ENV)
    return dict(
        solver=args.solver or solver.get("mode", "auto"),
        tol=args.tol if args.tol is not None else solver.get("tol", 1e-8),
        seed=args.seed if args.seed is not None else solver.get("seed", 0),
        threads=int(threads) if threads else None,
        maxiter=args.max_iter or solver.get("max_iter"),
    )


def _read_spec(path: str) -> dict:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read problem file: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"problem file is not JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from exc


def _default_levels_for(form) -> list[int]:
    degrees = (form.degree,) if hasattr(form, "degree") else form.degrees
    dims = (form.n,) if hasattr(form, "n") else form.dims
    # Odd factors gain one variable and one degree when lifted.
    dims = tuple(n + D % 2 for n, D in zip(dims, degrees))
    d = max((D + 1) // 2 for D in degrees)
    return default_levels(d, max_dim=DEFAULT_MAX_DIM, n=dims)


def _run_hierarchy(fn, *fargs, **kwargs):
    try:
        return fn(*fargs, **kwargs), None
    except MonotonicityError as exc:
        return exc.result, str(exc)


def cmd_bound(args) -> int:
    if args.problem:
        spec = _read_spec(args.problem)
    else:
        if not args.poly:
            raise InputError("give --problem FILE or --poly TEXT")
        spec = {"kind": "multi-sphere-min" if args.groups else "sphere-min", "polynomial": args.poly}
        if args.groups:
            spec["variables"] = _parse_groups(args.groups)
        else:
            spec["variables"] = args.vars.split(",") if args.vars else infer_variables(args.poly)
    if spec.get("kind") == "spectral-norm":
        raise InputError("use the spectral-norm subcommand for tensors")
    if args.levels:
        spec["levels"] = _parse_levels(args.levels)
    if "levels" not in spec and spec.get("kind") in ("sphere-min", "multi-sphere-min"):
        spec["levels"] = _default_levels_for(_form_from_spec(spec))
    validate_problem(spec)
    form = _form_from_spec(spec)
    settings = _solver_settings(spec, args)
    levels = spec["levels"]
    single = spec["kind"] == "sphere-min"
    fn = hrsos_bound if single else mhrsos_bound
    result, mono_err = _run_hierarchy(fn, form, levels, gap=not args.no_gap, **settings)
    d = result.half_degree if isinstance(result.half_degree, int) else max(result.half_degree)
    report = _report(result, spec, settings["seed"], d)
    if args.oracle:
        orc = upper_bound_sphere(form, seed=settings["seed"])
        report["oracle"] = {"method": orc.method, "upper_bound": orc.value, "point": [p.tolist() for p in orc.point]}
    if mono_err:
        report["monotonicity_error"] = mono_err
    _emit(report, args)
    return EXIT_OK if result.ok and not mono_err else EXIT_FAIL


def cmd_spectral_norm(args) -> int:
    if args.tensor:
        spec = _read_spec(args.tensor)
        if not isinstance(spec, dict) or "kind" not in spec:
            spec = {"kind": "spectral-norm", "tensor": spec.get("tensor", spec) if isinstance(spec, dict) else spec}
    elif args.matrix:
        try:
            spec = {"kind": "spectral-norm", "tensor": json.loads(args.matrix)}
        except json.JSONDecodeError as exc:
            raise InputError(f"--matrix is not JSON: {exc.msg} (column {exc.colno})") from exc
    else:
        raise InputError("give --tensor FILE or --matrix JSON")
    if args.levels:
        spec["levels"] = _parse_levels(args.levels)
    spec.setdefault("levels", [1, 2, 4, 8])
    validate_problem(spec)
    if spec["kind"] != "spectral-norm":
        raise InputError("problem kind must be spectral-norm")
    T = _tensor_from_spec(spec["tensor"])
    if T.ndim < 1 or T.size == 0:
        raise InputError("tensor must be a nonempty array")
    if not np.any(T):
        raise InputError("the zero tensor has no spectral-norm hierarchy")
    settings = _solver_settings(spec, args)
    result, mono_err = _run_hierarchy(spectral_norm_bound, T, spec["levels"], **settings)
    report = _report(result, spec, settings["seed"], 1)
    if T.ndim == 2:
        report["oracle"] = {"method": "svd", "spectral_norm": spectral_norm_matrix(T).value}
    if mono_err:
        report["monotonicity_error"] = mono_err
    _emit(report, args)
    return EXIT_OK if result.ok and not mono_err else EXIT_FAIL


def cmd_gram(args) -> int:
    variables = args.vars.split(",") if args.vars else infer_variables(args.poly)
    p = parse_form(args.poly, variables)
    if p.degree % 2:
        raise InputError(f"degree {p.degree} is odd; Gram export needs an even degree")
    d = p.degree // 2
    k = d if args.k is None else args.k
    if k < d:
        raise InputError(f"level {k} is below the half-degree {d}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    P = build_Pk(p, k)
    N = build_Nk(p.n, d, k)
    p_path, n_path = out_dir / f"{args.prefix}P_k{k}.coo", out_dir / f"{args.prefix}N_k{k}.coo"
    write_coo(P, p_path)
    write_coo(N, n_path)
    print(json.dumps({"P": str(p_path), "N": str(n_path), "dim": P.dim, "nnz_P": P.full_nnz, "nnz_N": N.full_nnz}))
    return EXIT_OK


def cmd_check(args) -> int:
    failed = False
    for res in run_checks():
        status = "PASS" if res.passed else ("NOTE" if res.informational else "FAIL")
        print(f"{status}  {res.name}: {res.detail}")
        failed |= not res.passed and not res.informational
    return EXIT_FAIL if failed else EXIT_OK


def _add_solver_flags(sp):
    sp.add_argument("--levels", help="comma-separated absolute levels k (k >= d)")
    sp.add_argument("--solver", choices=["auto", "dense", "sparse", "shift-invert", "lanczos", "lobpcg"])
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-iter", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help=f"worker thread cap (default from ${THREADS_ENV})")
    sp.add_argument("--out", help="write the JSON report here instead of stdout")
    sp.add_argument("--csv", help="write a k,bound,seconds table to this path ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hrsos", description="Spectral lower bounds for forms on spheres.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bound", help="lower bounds on the sphere minimum of a form")
    b.add_argument("--problem", help="ProblemSpec JSON file ('-' for stdin)")
    b.add_argument("--poly", help="polynomial text")
    b.add_argument("--vars", help="comma-separated variable names")
    b.add_argument("--groups", help="variable groups for a multi-form, e.g. 'x1,x2;y1,y2'")
    b.add_argument("--oracle", action="store_true", help="add a gradient-descent upper bound")
    b.add_argument("--no-gap", action="store_true", help="skip a-priori gap annotations")
    _add_solver_flags(b)
    b.set_defaults(func=cmd_bound)

    s = sub.add_parser("spectral-norm", help="upper bounds on a tensor's spectral norm")
    s.add_argument("--tensor", help="JSON file: nested arrays, {shape, entries}, or a ProblemSpec")
    s.add_argument("--matrix", help="inline JSON nested array")
    _add_solver_flags(s)
    s.set_defaults(func=cmd_spectral_norm)

    g = sub.add_parser("gram", help="export the level-k Gram pencil in coordinate format")
    g.add_argument("--poly", required=True)
    g.add_argument("--vars")
    g.add_argument("--k", type=int)
    g.add_argument("--format", choices=["coo"], default="coo")
    g.add_argument("--out-dir", default=".")
    g.add_argument("--prefix", default="")
    g.set_defaults(func=cmd_gram)

    c = sub.add_parser("check", help="run the exact identity self-checks")
    c.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.text:
            print(f"  {exc.text}\n  {' ' * exc.position}^", file=sys.stderr)
        return EXIT_INPUT
    except (InputError, FormError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
