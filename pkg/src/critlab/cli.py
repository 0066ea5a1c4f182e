"""Command line front-end: ``crit run|mesh|catalog``.

Configurations are line-based ``section.key = value`` files; see README.md for
the full list of keys.
"""
from __future__ import annotations

import argparse
import ast
import math
import os
import re
import sys
from typing import Dict, List

import numpy as np

from . import criticality, green, spectral
from .discretize import assemble
from .errors import ConfigError, CritError
from .geometry import (
    DomainSpec,
    ExhaustionSpec,
    build_interval_mesh,
    build_polygon_mesh,
    coordinate_is,
    make_exhaustion,
    tag_boundary,
    write_mesh,
)
from .operator import CATALOG, OperatorSpec, RobinData, drift, hardy, laplace, shifted

SCHEMA = {
    "domain": {"shape", "robin", "dirichlet"},
    "operator": {"name", "robin_ratio", "weight"},
    "task": {"type", "x0", "y0", "x1", "lambda", "lambdas", "trials", "seed", "window",
             "probes", "mode", "radius"},
    "numeric": {"n", "h", "k_max", "tol", "max_iter", "window", "window_offset", "mesh_h",
                "grading"},
    "output": {"directory", "profiles"},
}
TASKS = ("eigen", "green", "classify", "scan", "mpcheck")


# ---------------------------------------------------------------------------
# parsing


def parse_config(text: str) -> Dict[str, Dict[str, str]]:
    cfg: Dict[str, Dict[str, str]] = {s: {} for s in SCHEMA}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        lhs, value = (part.strip() for part in line.split("=", 1))
        if "." not in lhs:
            raise ConfigError(f"line {lineno}: key {lhs!r} lacks a section")
        section, key = lhs.split(".", 1)
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key {lhs}")
        if key in cfg[section]:
            raise ConfigError(f"line {lineno}: duplicate key {lhs}")
        cfg[section][key] = value
    return cfg


def _get(cfg, section, key, default=None, required=False):
    if key in cfg[section]:
        return cfg[section][key]
    if required:
        raise ConfigError(f"missing required key {section}.{key}")
    return default


def _number(cfg, section, key, default=None, kind=float, positive=False):
    raw = _get(cfg, section, key)
    if raw is None:
        return default
    try:
        val = kind(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: cannot parse {raw!r} as {kind.__name__}") from None
    if positive and not val > 0:
        raise ConfigError(f"{section}.{key}: must be positive")
    return val


def _floats(text, where):
    try:
        return [float(t) for t in text.replace("(", " ").replace(")", " ").replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as numbers") from None


def _split_args(text):
    out, depth, cur = [], 0, ""
    for ch in text:
        if ch == "," and depth == 0:
            out.append(cur.strip())
            cur = ""
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur += ch
    if cur.strip():
        out.append(cur.strip())
    return out


def _call(text, where):
    m = re.fullmatch(r"\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*", text)
    if not m:
        raise ConfigError(f"{where}: cannot parse {text!r}")
    return m.group(1), _split_args(m.group(2) or "")


def parse_shape(text):
    """``interval(a, b)`` (inf allowed), ``rectangle(x0, y0, x1, y1)`` or ``polygon((x, y), ...)``."""
    name, args = _call(text, "domain.shape")
    if name == "interval" and len(args) == 2:
        return "interval", tuple(_floats(" ".join(args), "domain.shape"))
    if name == "rectangle" and len(args) == 4:
        x0, y0, x1, y1 = _floats(" ".join(args), "domain.shape")
        return "polygon", ((x0, y0), (x1, y0), (x1, y1), (x0, y1))
    if name == "polygon" and len(args) >= 3:
        try:
            pts = tuple(tuple(map(float, ast.literal_eval(a))) for a in args)
        except (ValueError, SyntaxError, TypeError):
            raise ConfigError(f"domain.shape: bad polygon vertex list {text!r}") from None
        return "polygon", pts
    raise ConfigError(f"domain.shape: unknown shape {text!r}")


def _primitive(token, kind, data):
    token = token.strip()
    if token == "all":
        return lambda p: True
    if token == "none":
        return lambda p: False
    if kind == "interval":
        lo, hi = data
    else:
        xs = [p[0] for p in data]
        lo, hi = min(xs), max(xs)
    if token == "left":
        return coordinate_is(lo, 0)
    if token == "right":
        return coordinate_is(hi, 0)
    m = re.fullmatch(r"edge\s+([xy])\s*=\s*(\S+)", token)
    if m:
        axis = "xy".index(m.group(1))
        if kind == "interval" and axis:
            raise ConfigError("domain: 'edge y=...' needs a 2D domain")
        return coordinate_is(_floats(m.group(2), "domain predicate")[0], axis)
    raise ConfigError(f"domain: unknown predicate {token!r}")


def parse_predicate(text, kind, data):
    preds = [_primitive(t, kind, data) for t in re.split(r"[|,]", text)]
    return lambda p: any(f(p) for f in preds)


def parse_domain(cfg) -> DomainSpec:
    kind, data = parse_shape(_get(cfg, "domain", "shape", required=True))
    robin = parse_predicate(_get(cfg, "domain", "robin", "none"), kind, data)
    d = _get(cfg, "domain", "dirichlet")
    dirichlet = None if d is None else parse_predicate(d, kind, data)
    if kind == "interval":
        return DomainSpec.make_interval(*data, robin=robin, dirichlet=dirichlet)
    return DomainSpec.make_polygon(data, robin=robin, dirichlet=dirichlet)


def parse_operator(text, dim=1) -> OperatorSpec:
    """Catalogue expression: laplace, hardy(mu), drift(b...), shifted(expr, lam)."""
    name, args = _call(text, "operator.name")
    try:
        if name == "laplace" and not args:
            return laplace(dim)
        if name == "hardy" and len(args) == 1:
            return hardy(float(args[0]), dim)
        if name == "drift" and args:
            return drift([float(a) for a in args], dim)
        if name == "shifted" and len(args) == 2:
            return shifted(parse_operator(args[0], dim), float(args[1]))
    except ValueError:
        raise ConfigError(f"operator.name: bad parameters in {text!r}") from None
    raise ConfigError(f"operator.name: unknown operator {text!r}")


def build_operator(cfg, dim) -> OperatorSpec:
    text = _get(cfg, "operator", "name")
    if text is None:
        raise ConfigError("missing required key operator.name")
    op = parse_operator(text, dim)
    ratio = _number(cfg, "operator", "robin_ratio", 0.0)
    if ratio:
        op = OperatorSpec(op.coefficients, RobinData(1.0, ratio), op.shift, op.V, op.name)
    return op


def build_exhaustion(cfg, domain: DomainSpec) -> ExhaustionSpec:
    text = _get(cfg, "numeric", "window", "domain" if domain.bounded else None)
    if text is None:
        raise ConfigError("numeric.window is required for unbounded domains")
    name, args = _call(text, "numeric.window")
    offset = _number(cfg, "numeric", "window_offset", 0, int)
    dim = domain.dimension
    if name == "domain":
        if not domain.bounded:
            raise ConfigError("numeric.window: 'domain' needs a bounded domain")
        if domain.kind == "interval":
            lo, hi = domain.interval
            box = ((lo - 1.0, hi + 1.0),)
        else:
            pts = np.array(domain.polygon)
            box = tuple((float(pts[:, i].min()) - 1.0, float(pts[:, i].max()) + 1.0)
                        for i in range(2))

        def window(k):
            return box
    elif name == "dyadic" and not args:
        def window(k):
            r = 2.0 ** (k + offset)
            return ((-r, r),) * dim
    elif name == "geometric" and len(args) == 1:
        base = _floats(args[0], "numeric.window")[0]

        def window(k):
            return ((base ** -(k + offset), base ** (k + offset)),)
    elif name == "linear" and len(args) == 2:
        a, b = _floats(",".join(args), "numeric.window")

        def window(k):
            return ((a / (k + offset), b * (k + offset)),)
    else:
        raise ConfigError(f"numeric.window: unknown window {text!r}")
    grading = _get(cfg, "numeric", "grading", "uniform")
    if grading not in ("uniform", "geometric"):
        raise ConfigError(f"numeric.grading: unknown grading {grading!r}")
    h = _number(cfg, "numeric", "mesh_h", None, positive=True)
    if h is None:
        if domain.bounded and domain.kind == "interval":
            n = _number(cfg, "numeric", "n", 100, int, positive=True)
            h = (domain.interval[1] - domain.interval[0]) / n
        else:
            h = _number(cfg, "numeric", "h", None, positive=True)
            if h is None:
                raise ConfigError("numeric.mesh_h (or numeric.h) is required")
    return ExhaustionSpec(domain, window, lambda k: h, grading)


def build_bounded_mesh(cfg, domain: DomainSpec):
    if domain.kind == "interval":
        n = _number(cfg, "numeric", "n", 100, int, positive=True)
        mesh = build_interval_mesh(*domain.interval, n)
    else:
        h = _number(cfg, "numeric", "h", None, positive=True)
        if h is None:
            raise ConfigError("missing required key numeric.h")
        mesh = build_polygon_mesh(domain.polygon, h)
    return tag_boundary(mesh, domain)


def _point(cfg, key, dim, default=None):
    raw = _get(cfg, "task", key)
    if raw is None:
        if default is None:
            raise ConfigError(f"missing required key task.{key}")
        return default
    vals = _floats(raw, f"task.{key}")
    if len(vals) != dim:
        raise ConfigError(f"task.{key}: expected {dim} coordinates")
    return np.array(vals)


def _probes(cfg, dim):
    raw = _get(cfg, "task", "probes")
    if raw is None:
        return None
    vals = _floats(raw, "task.probes")
    if dim != 1 or len(vals) != 3 or vals[2] < 2:
        raise ConfigError("task.probes: expected 'lo, hi, n' on a 1D domain")
    return np.linspace(vals[0], vals[1], int(vals[2]))


# ---------------------------------------------------------------------------
# output


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class Emitter:
    def __init__(self, directory):
        self.directory = directory
        try:
            os.makedirs(directory, exist_ok=True)
            probe = os.path.join(directory, ".write-test")
            with open(probe, "w"):
                pass
            os.remove(probe)
        except OSError as exc:
            raise ConfigError(f"output.directory: cannot write to {directory!r}: {exc}") from None
        self.files: List[str] = []

    def _write(self, name, text):
        path = os.path.join(self.directory, name)
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        self.files.append(name)
        return name

    def report(self, pairs):
        return self._write("report.txt", "".join(f"{k} = {_fmt(v)}\n" for k, v in pairs))

    def csv(self, name, header, rows):
        lines = [",".join(header)] + [",".join(_fmt(v) for v in r) for r in rows]
        return self._write(name, "\n".join(lines) + "\n")

    def profile(self, k, fe):
        system = fe.system
        full = system.to_vertices(np.nan_to_num(fe.values))
        V = system.mesh.vertices
        order = np.lexsort(V.T[::-1])
        header = ["x", "u"] if V.shape[1] == 1 else ["x", "y", "u"]
        rows = [tuple(V[i]) + (full[i],) for i in order]
        return self.csv(f"profile_{k}.csv", header, rows)


def _trace_rows(values):
    rows = []
    for i, v in enumerate(values):
        inc = math.nan if i == 0 else v - values[i - 1]
        rows.append((i + 1, v, inc))
    return rows


# ---------------------------------------------------------------------------
# tasks


def _job(cfg):
    task = _get(cfg, "task", "type", required=True)
    if task not in TASKS:
        raise ConfigError(f"task.type: unknown task {task!r} (expected one of {', '.join(TASKS)})")
    domain = parse_domain(cfg)
    op = build_operator(cfg, domain.dimension)
    tol = _number(cfg, "numeric", "tol", spectral.DEFAULT_TOL, positive=True)
    max_iter = _number(cfg, "numeric", "max_iter", spectral.DEFAULT_MAX_ITER, int, positive=True)
    out = Emitter(_get(cfg, "output", "directory", "crit-output"))
    profiles = _get(cfg, "output", "profiles", "yes")
    if profiles not in ("yes", "no"):
        raise ConfigError("output.profiles: expected yes or no")
    profiles = profiles == "yes"
    dim = domain.dimension
    summary = []

    if task in ("eigen", "mpcheck") and domain.bounded:
        system = assemble(build_bounded_mesh(cfg, domain), op)
        if task == "eigen":
            rep = spectral.spectral_report(system, None, tol, max_iter)
            keys = ("lambda_c", "lambda_0", "Gamma", "Lambda", "pw_bound", "residual", "iterations")
            out.report([(k, getattr(rep, k)) for k in keys])
            out.csv("trace.csv", ["k", "value", "increment"], [(1, rep.lambda_c, math.nan)])
            if profiles:
                out.profile(1, spectral.principal_eigen(system, tol, max_iter).u_c)
            summary.append(f"lambda_c = {rep.lambda_c!r}")
        else:
            lam = _number(cfg, "task", "lambda", 0.0)
            trials = _number(cfg, "task", "trials", 100, int, positive=True)
            seed = _number(cfg, "task", "seed", 0, int)
            res = spectral.check_max_principle(system, lam, trials, seed)
            out.report([("lambda", lam), ("trials", trials), ("holds", res.holds),
                        ("worst_ratio", res.worst_ratio)])
            summary.append(f"holds = {_fmt(res.holds)}")
        return out, summary

    k_max = _number(cfg, "numeric", "k_max", None, int, positive=True)
    if k_max is None:
        raise ConfigError("missing required key numeric.k_max")
    ex = build_exhaustion(cfg, domain)

    if task == "eigen":
        lt = spectral.lambda0_exhaustion(ex, op, k_max, tol, max_iter)
        out.report([("lambda_c", lt.last), ("lambda_0", lt.extrapolated),
                    ("increment", lt.increment), ("levels", len(lt.levels))])
        out.csv("trace.csv", ["k", "value", "increment"], _trace_rows(lt.values))
        summary.append(f"lambda_0 = {lt.extrapolated!r}")
    elif task == "mpcheck":
        raise ConfigError("task.type: mpcheck needs a bounded domain")
    elif task == "green":
        x0 = _point(cfg, "x0", dim)
        y0 = _point(cfg, "y0", dim)
        x1 = _point(cfg, "x1", dim, y0)
        mode = _get(cfg, "task", "mode", green.VERTEX)
        radius = _number(cfg, "task", "radius", 0.0)
        tr = green.green_minimal(ex, op, x0, y0, x1, k_max, _probes(cfg, dim), mode, radius)
        out.report([("verdict", tr.verdict), ("g_final", tr.g_values[-1]),
                    ("levels", len(tr.g_values))]
                   + [(f"threshold.{k}", v) for k, v in sorted(tr.thresholds.items())])
        out.csv("trace.csv", ["k", "value", "increment", "verdict"], tr.csv_rows())
        if profiles:
            for k, f in enumerate(tr.fields, 1):
                out.profile(k, f.values)
        summary.append(f"verdict = {tr.verdict}")
    elif task == "classify":
        x0 = _point(cfg, "x0", dim)
        y0 = _point(cfg, "y0", dim)
        x1 = _point(cfg, "x1", dim, y0)
        win = _get(cfg, "task", "window")
        window = None if win is None else tuple(_floats(win, "task.window"))
        res = criticality.classify(ex, op, k_max, x0, y0, x1, _probes(cfg, dim), window, tol)
        pairs = [tuple(line.split(" = ", 1)) for line in res.as_text().splitlines()]
        out.csv("trace.csv", ["k", "value", "increment"], _trace_rows(res.lambda_trace.values))
        evidence = ["trace.csv"]
        if res.dichotomy is not None:
            evidence.append(out.csv("green_trace.csv", ["k", "value", "increment", "verdict"],
                                    res.dichotomy.csv_rows()))
        if res.null_trace is not None:
            evidence.append(out.csv("null_trace.csv", ["k", "value", "increment"],
                                    _trace_rows(res.null_trace.minima)))
        if res.profile is not None:
            evidence.append(out.profile(len(res.dichotomy.g_values), res.profile))
        elif res.hardy is not None and profiles:
            H = res.hardy
            V = H.mesh.vertices
            order = np.lexsort(V.T[::-1])
            evidence.append(out.csv("hardy_weight.csv", ["x", "W"] if dim == 1 else ["x", "y", "W"],
                                    [tuple(V[i]) + (H.nodal[i],) for i in order]))
        out.report(pairs + [("evidence", " ".join(evidence))])
        summary.append(f"verdict = {res.verdict}")
    elif task == "scan":
        raw = _get(cfg, "task", "lambdas", required=True)
        lams = _floats(raw, "task.lambdas") if raw.strip() else []
        weight = _number(cfg, "operator", "weight", 1.0)
        res = criticality.lambda_interval_scan(ex, op, weight, lams, k_max)
        out.report([(f"nonnegative[{lam!r}]", ok) for lam, ok in zip(res.lambdas, res.nonnegative)]
                   + [("count", len(res.lambdas))])
        out.csv("trace.csv", ["lambda", "nonnegative", "lambda_c_last"], res.rows())
        summary.append(f"scanned {len(res.lambdas)} values")
    return out, summary


def _load(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None


def cmd_run(path) -> int:
    cfg = _load(path)
    _, summary = _job(cfg)
    for line in summary:
        print(line)
    return 0


def cmd_mesh(path) -> int:
    cfg = _load(path)
    domain = parse_domain(cfg)
    out = Emitter(_get(cfg, "output", "directory", "crit-output"))
    if domain.bounded:
        mesh = build_bounded_mesh(cfg, domain)
    else:
        k = _number(cfg, "numeric", "k_max", 1, int, positive=True)
        mesh = make_exhaustion(build_exhaustion(cfg, domain), k)
    path = os.path.join(out.directory, "mesh.txt")
    with open(path, "w") as fh:
        write_mesh(mesh, fh)
    print(f"{mesh.n_vertices} vertices, {len(mesh.elements)} elements -> {path}")
    return 0


def cmd_catalog() -> int:
    for name in sorted(CATALOG):
        print(CATALOG[name])
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="crit", description="Criticality lab for (P, B).")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("run", "run the job described by a config file"),
                       ("mesh", "write the mesh of a config file")):
        p = sub.add_parser(name, help=text)
        p.add_argument("config")
    sub.add_parser("catalog", help="list catalogue operators")
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config)
        if args.command == "mesh":
            return cmd_mesh(args.config)
        return cmd_catalog()
    except CritError as exc:
        level = getattr(exc, "level", None)
        where = f" (level {level})" if level is not None else ""
        print(f"error: {exc}{where}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
