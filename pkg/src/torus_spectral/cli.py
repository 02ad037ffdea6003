"""Command-line entry point: ``torus-spectral <command> ...`` or ``torus-spectral run --config cfg.json``.

Every command writes a table.  CSV output starts with ``#`` metadata lines;
JSON output carries the same metadata under ``"meta"``.  Floats use 17
significant digits and nothing time-dependent is written, so reruns with the
same configuration are byte-identical.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from fractions import Fraction
from importlib import resources

import numpy as np

from . import __version__, bounds, count, lattice, subdet, verify, weyl
from ._common import BudgetExceeded, as_fraction, fmt, fraction_str
from .lattice import enumerate_shell
from .quadform import GenericSampler, QuadForm, evaluate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


# --- value helpers ---------------------------------------------------------------


def _cell(v):
    if isinstance(v, Fraction):
        return fraction_str(v)
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)) or v is None or isinstance(v, str):
        return v if not isinstance(v, np.bool_) else bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    return _cell(v)


def _csv_list(text: str, conv=str) -> list:
    return [conv(x) for x in str(text).split(",") if x.strip() != ""]


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def _form_from_args(a) -> QuadForm:
    if getattr(a, "form", None):
        return QuadForm.from_dict(_load_json(a.form))
    if getattr(a, "diagonal", None):
        return QuadForm.diagonal(_csv_list(a.diagonal, as_fraction))
    if getattr(a, "sample", None):
        return GenericSampler(a.seed, a.sample, a.dim, a.halfwidth).sample(a.index)
    return QuadForm.identity(a.dim)


def _matrix_from_file(path):
    obj = path if isinstance(path, list) else _load_json(path)
    if isinstance(obj, dict):
        obj = obj.get("matrix")
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ConfigError("matrix JSON must be a non-empty list of rows")
    return obj


def _lambda_values(a) -> list:
    if a.lambda_range:
        parts = a.lambda_range.split(":")
        if len(parts) != 3:
            raise ConfigError("--lambda-range needs start:stop:step")
        start, stop, step = (as_fraction(x) for x in parts)
        if step <= 0:
            raise ConfigError("--lambda-range step must be positive")
        out, x = [], start
        while x <= stop:
            out.append(x)
            x += step
        return out
    return _csv_list(a.lam, as_fraction)


# --- commands --------------------------------------------------------------------
# Each returns {"columns": [...], "rows": [[...]], ...}; extra keys appear in JSON only.


MAX_CLI_DIM = 8


def _checked_form(a) -> QuadForm:
    form = _form_from_args(a)
    if form.dim > MAX_CLI_DIM:
        raise ConfigError(f"dimension {form.dim} exceeds the CLI cap of {MAX_CLI_DIM}")
    return form


def _emit_points(path: str, form: QuadForm, q: lattice.ShellQuery, meta: dict) -> None:
    buf = io.StringIO()
    buf.write(f"# tool: torus-spectral {meta['version']}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"n_{i + 1}" for i in range(form.dim)] + ["Q(n)"])
    for n in enumerate_shell(q):
        w.writerow(list(n) + [fraction_str(evaluate(form, n))])
    write_atomic(path, buf.getvalue())


def cmd_count(a) -> dict:
    form = _checked_form(a)
    cutoff = lattice.CutoffSpec(a.cutoff)
    rows = []
    lams = _lambda_values(a)
    for lam in lams:
        res = lattice.count_result(form, lam)
        row = [lam, res.count, res.leading, res.error_term]
        if a.delta is not None:
            q = lattice.ShellQuery(form, lam, as_fraction(a.delta))
            row += [lattice.shell_count(q), lattice.projector_l1linf(q, cutoff)]
        rows.append(row)
    cols = ["lambda", "N", "leading", "P"]
    if a.delta is not None:
        cols += ["shell", f"projector_{a.cutoff}"]
    if a.emit_points:
        if a.delta is None or len(lams) != 1:
            raise ConfigError("--emit-points needs --delta and a single --lambda")
        q = lattice.ShellQuery(form, lams[0], as_fraction(a.delta))
        _emit_points(a.emit_points, form, q, _meta("count", _config_of(a), a.seed))
    return {"columns": cols, "rows": rows, "form": form.to_dict()}


def _weyl_row(p: weyl.WeylParams, t, c0, grid: int, eps: float) -> list:
    lab = weyl.classify_arc(t, p.N, c0)
    approx = weyl.dirichlet_approx(t, p.N)
    lower = weyl.sup_norm_lower(p, t, grid)
    upper = math.sqrt(weyl.sup_norm_upper_weyl_diff(p, t))
    return [t, lab.kind, lab.Q, lab.q, lower, upper, weyl.weyl_bound_rhs(p.N, approx, eps)]


def cmd_weyl(a) -> dict:
    form = _checked_form(a)
    p = weyl.WeylParams(a.N, form)
    c0 = as_fraction(a.c0)
    grid = a.grid or 4 * a.N
    cols = ["t", "arc_kind", "Q", "q", "K_lower", "upper_proxy", "weyl_rhs"]
    if a.scan is not None:
        ts = np.linspace(1.0 / a.N, a.scan, a.samples)
        rows = [_weyl_row(p, float(t), c0, grid, a.eps) for t in ts]
        averages = {
            "lower": float(np.trapezoid([r[4] for r in rows], ts) / a.scan),
            "upper": float(np.trapezoid([r[5] for r in rows], ts) / a.scan),
        }
        return {"columns": cols, "rows": rows, "time_average": averages}
    ts = _csv_list(a.t, as_fraction)
    if not ts:
        raise ConfigError("weyl needs --t or --scan")
    return {"columns": cols, "rows": [_weyl_row(p, t, c0, grid, a.eps) for t in ts]}


def cmd_subdet(a) -> dict:
    M = _matrix_from_file(a.matrix)
    if a.rearrange:
        perm = subdet.rearrange_columns(M)
        ratios = subdet.prefix_ratios(M, perm)
        rows = [[k + 1, perm[k] if k < len(perm) else "", r] for k, r in enumerate(ratios)]
        return {"columns": ["k", "column", "prefix_ratio"], "rows": rows, "permutation": perm,
                "constant": subdet.rearrangement_constant(len(M), len(M[0]))}
    if a.voli:
        mu = _csv_list(a.mu, float)
        b = subdet.voli_bound(M, a.R, a.C, mu, a.A, a.eps)
        row = [a.R, a.C, a.A, b]
        cols = ["R", "C", "A", "voli_bound"]
        if a.trials:
            v, se = subdet.voli_measure_mc(M, a.R, a.C, mu, a.A, a.trials, seed=a.seed)
            row += [v, se]
            cols += ["measure", "stderr"]
        return {"columns": cols, "rows": [row]}
    if a.cover:
        rep = subdet.box_cover_check(subdet.SBoxQuery(M, a.R, a.C), a.trials or 10_000, a.margin, seed=a.seed)
        return {"columns": ["trials", "members", "margin", "max_ratio", "violations"],
                "rows": [[rep.trials, rep.members, rep.margin, rep.max_ratio, len(rep.violations)]],
                "violations": rep.violations}
    prof = subdet.profile(M)
    p, q = prof.shape
    rows = [[k, Dk, s, r, subdet.correspondence_constant(p, q, k)]
            for k, (Dk, s, r) in enumerate(zip(prof.D, prof.sigma, prof.ratios()), start=1)]
    return {"columns": ["k", "D_k", "sigma_k", "ratio", "constant"], "rows": rows}


def cmd_zcount(a) -> dict:
    mu = _csv_list(a.mu, int)
    if a.L:
        q = count.MatrixCountQuery(a.d, a.b, a.lambda0, tuple(mu), tuple(_csv_list(a.L, as_fraction)))
        z = count.z_count(q)
        return {"columns": ["d", "b", "lambda0", "mu", "L", "Z"],
                "rows": [[a.d, a.b, a.lambda0, ";".join(map(str, mu)), ";".join(fraction_str(x) for x in q.L), z]]}
    lam2 = Fraction(a.lambda0) ** 2
    table = count.z_table(a.d, a.b, a.lambda0, mu, [lam2 / 2, lam2, 2 * lam2])
    rows = [[a.d, a.b, a.lambda0, ";".join(map(str, mu)), ";".join(fraction_str(x) for x in L), z]
            for L, z in sorted(table.items())]
    return {"columns": ["d", "b", "lambda0", "mu", "L", "Z"], "rows": rows}


def cmd_moments(a) -> dict:
    delta = as_fraction(a.delta)
    offdiag = _load_json(a.offdiag) if a.offdiag else None
    est = count.moment_lhs(a.d, a.b, a.lambda0, delta, a.samples, seed=a.seed, offdiag=offdiag)
    cols = ["d", "b", "lambda0", "delta", "samples", "lhs", "stderr", "maximized_bound"]
    row = [a.d, a.b, a.lambda0, delta, est.samples, est.value, est.stderr,
           count.maximized_bound(a.d, a.b, a.lambda0, float(delta))]
    out = {"columns": cols, "rows": [row]}
    if a.rhs:
        r = count.moment_rhs_dyadic_max(a.d, a.b, a.lambda0, delta)
        cols += ["rhs_dyadic_max", "lhs_over_rhs"]
        row += [r.value, est.value / r.value]
        out["argmax"] = {"d": r.d_eff, "mu": list(r.mu), "L": [fraction_str(x) for x in r.L], "Z": r.z,
                         "tuples": r.tuples}
    return out


def cmd_bounds(a) -> dict:
    rep = bounds.regime_report(bounds.BoundParams(a.d, a.p, a.lam, a.delta, a.eps))
    d = rep.to_dict()
    rows = [[b.name, b.kind, b.applicable, b.value, b.condition] for b in rep.bounds]
    return {"columns": ["name", "kind", "applicable", "value", "condition"], "rows": rows,
            "bounds": d["bounds"], "minimum": d["minimum"]}


def cmd_verify(a) -> dict:
    only = set(_csv_list(a.only, int)) if a.only else None
    echo = (lambda s: print(s, file=sys.stderr)) if not a.quiet else None
    rep = verify.verify_suite(a.level, a.seed, only, echo)
    rows = [[r["id"], r["name"], r["passed"], r["hard"], r["measured"], r["threshold"]] for r in rep["results"]]
    return {"columns": ["id", "name", "passed", "hard", "measured", "threshold"], "rows": rows,
            "passed": rep["passed"], "results": rep["results"]}


COMMANDS = {
    "count": cmd_count, "weyl": cmd_weyl, "subdet": cmd_subdet, "zcount": cmd_zcount,
    "moments": cmd_moments, "bounds": cmd_bounds, "verify": cmd_verify,
}


# --- parser ----------------------------------------------------------------------


class _JsonFlag(argparse.Action):
    """``--json`` switches the format; ``--json out.json`` also sets the output path."""

    def __call__(self, parser, namespace, value, option_string=None):
        namespace.format = "json"
        if isinstance(value, str):
            namespace.output = value


def _add_common(sp, output: bool = True):
    sp.add_argument("--seed", type=int, default=0)
    if output:
        sp.add_argument("--output", "-o", default=None, help="output path (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--json", nargs="?", const=True, default=None, action=_JsonFlag, metavar="PATH",
                    help="JSON output, optionally to PATH")
    sp.add_argument("--threads", type=int, default=1, help="worker cap; results never depend on it")


def _add_form(sp):
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--form", help="quadratic form JSON file")
    g.add_argument("--diagonal", help="comma-separated diagonal coefficients")
    g.add_argument("--sample", choices=("rectangular", "full"), help="draw a generic form from --seed")
    sp.add_argument("--dim", type=int, default=2)
    sp.add_argument("--index", type=int, default=0, help="sample index within the seeded stream")
    sp.add_argument("--halfwidth", type=float, default=None, help="off-diagonal box half-width for --sample")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="torus-spectral", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"torus-spectral {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("count", help="lattice counts N(lambda), error term and shell sizes")
    _add_form(sp)
    sp.add_argument("--lambda", dest="lam", default="10", help="one value or a comma-separated list")
    sp.add_argument("--lambda-range", default=None, help="start:stop:step")
    sp.add_argument("--delta", default=None, help="shell half-width; pass exact decimals such as 0.2")
    sp.add_argument("--cutoff", choices=("indicator", "smooth"), default="indicator")
    sp.add_argument("--emit-points", default=None, help="CSV of shell points n_1..n_d, Q(n)")
    _add_common(sp)

    sp = sub.add_parser("weyl", help="arc labels and sup-norm proxies of the Weyl-sum kernel")
    _add_form(sp)
    sp.add_argument("-N", "--N", dest="N", type=int, default=64)
    sp.add_argument("--t", default="", help="comma-separated times (exact decimals or p/q)")
    sp.add_argument("--scan", type=float, default=None, help="scan t over [1/N, T] instead of --t")
    sp.add_argument("--samples", type=int, default=256)
    sp.add_argument("--c0", default="1/8")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--grid", type=int, default=None, help="grid points per dimension for the lower bound")
    sp.add_argument("--emit", dest="output", default=None, help="alias of --output")
    _add_common(sp, output=False)

    sp = sub.add_parser("subdet", help="subdeterminant profile, column rearrangement and volume bounds")
    sp.add_argument("--matrix", required=True)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--profile", action="store_true")
    mode.add_argument("--rearrange", action="store_true")
    mode.add_argument("--voli", action="store_true")
    mode.add_argument("--cover", action="store_true")
    sp.add_argument("--R", type=float, default=1.0)
    sp.add_argument("--C", type=float, default=2.0)
    sp.add_argument("--mu", default="")
    sp.add_argument("--A", type=float, default=1.0)
    sp.add_argument("--eps", type=float, default=0.1)
    sp.add_argument("--trials", type=int, default=0)
    sp.add_argument("--margin", type=float, default=None)
    _add_common(sp)

    sp = sub.add_parser("zcount", help="count matrices with prescribed subdeterminant sizes")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--lambda0", type=int, required=True)
    sp.add_argument("--mu", required=True)
    sp.add_argument("--L", default=None, help="omit to tabulate every realised L")
    _add_common(sp)

    sp = sub.add_parser("moments", help="Monte Carlo moment integral and its dyadic upper bound")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--b", type=int, required=True)
    sp.add_argument("--lambda0", type=int, required=True)
    sp.add_argument("--delta", required=True)
    sp.add_argument("--samples", type=int, default=10_000)
    sp.add_argument("--offdiag", default=None, help="JSON file with a symmetric zero-diagonal matrix")
    sp.add_argument("--rhs", action="store_true", help="also run the exhaustive dyadic search")
    _add_common(sp)

    sp = sub.add_parser("bounds", help="evaluate every bound and report the smallest applicable one")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--p", default="inf")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--eps", type=float, default=0.01)
    _add_common(sp)

    sp = sub.add_parser("verify", help="run the acceptance checks")
    sp.add_argument("--level", choices=("fast", "full"), default="fast")
    sp.add_argument("--only", default=None, help="comma-separated criterion numbers")
    sp.add_argument("--quiet", action="store_true")
    _add_common(sp)

    sp = sub.add_parser("run", help="run a JSON experiment config")
    sp.add_argument("--config", required=True)
    return ap


# --- output ----------------------------------------------------------------------


def _meta(command: str, config: dict, seed: int) -> dict:
    return {"tool": "torus-spectral", "version": __version__, "command": command, "seed": seed,
            "config": _jsonable(config)}


def render(result: dict, meta: dict, fmt_name: str) -> str:
    if fmt_name == "json":
        body = {"meta": meta, "columns": result["columns"],
                "rows": [[_jsonable(v) for v in r] for r in result["rows"]]}
        for k, v in result.items():
            if k not in ("columns", "rows"):
                body[k] = _jsonable(v)
        return json.dumps(body, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write(f"# tool: torus-spectral {meta['version']}\n")
    buf.write(f"# command: {meta['command']}\n")
    buf.write(f"# seed: {meta['seed']}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(result["columns"])
    for r in result["rows"]:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _config_of(ns: argparse.Namespace) -> dict:
    skip = {"command", "output", "format", "threads", "quiet", "json"}
    return {k: v for k, v in sorted(vars(ns).items()) if k not in skip}


# --- config files ----------------------------------------------------------------


def load_schema() -> dict:
    text = resources.files("torus_spectral").joinpath("schemas/config.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_config(cfg) -> None:
    import jsonschema

    try:
        jsonschema.validate(cfg, load_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from exc


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for act in parser._actions:
        if isinstance(act, argparse._SubParsersAction):
            return act.choices[name]
    raise KeyError(name)


def namespace_from_config(parser: argparse.ArgumentParser, cfg: dict) -> argparse.Namespace:
    """Defaults of the subcommand, overridden by ``cfg["params"]``."""
    command = cfg["command"]
    sp = _subparser(parser, command)
    actions = {("lambda" if a.dest == "lam" else a.dest): a for a in sp._actions}
    ns = argparse.Namespace(command=command)
    for act in sp._actions:
        if act.dest != "help":
            setattr(ns, act.dest, act.default)
    for key, value in cfg.get("params", {}).items():
        act = actions.get(key)
        if act is None or act.dest in ("help", "json"):
            raise ConfigError(f"unknown parameter {key!r} for command {command!r}")
        if act.type is None and isinstance(value, (int, float)) and not isinstance(value, bool):
            value = repr(value)
        setattr(ns, act.dest, value)
    missing = [k for k, a in actions.items() if a.required and getattr(ns, a.dest) is None]
    if missing:
        raise ConfigError(f"command {command!r} needs parameter(s) {', '.join(missing)}")
    ns.seed = cfg.get("seed", 0)
    ns.output = cfg.get("output")
    ns.format = cfg.get("format", "csv")
    ns.threads = 1
    return ns


def execute(ns: argparse.Namespace) -> int:
    result = COMMANDS[ns.command](ns)
    text = render(result, _meta(ns.command, _config_of(ns), ns.seed), ns.format)
    if ns.output:
        write_atomic(ns.output, text)
    else:
        sys.stdout.write(text)
    if ns.command == "verify" and not result.get("passed", True):
        return EXIT_FAIL
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        if ns.command == "run":
            cfg = _load_json(ns.config)
            validate_config(cfg)
            ns = namespace_from_config(parser, cfg)
        return execute(ns)
    except BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
