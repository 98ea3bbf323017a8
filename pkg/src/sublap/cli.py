"""Command-line surface: report | geodesic | solve | walk | check.

Every output embeds the run manifest (command, model, seed, tolerances,
tool version), JSON for summaries and CSV for bulk trajectories/endpoints.
Floats are written in shortest round-trip decimal form.  Exit codes:
0 success, 1 suite failure, 2 input error.
"""

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import __version__, corank1, models, operators, randomwalk
from .checks import SUITES, run_checks
from .compatibility import corank1_solve
from .config import DEFAULTS
from .errors import (InputError, NotContactError, QuasiReebUndefinedError,
                     SublapError)
from .geodesics import integrate_geodesic


def _json_default(o):
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _emit_json(obj, path):
    text = json.dumps(obj, indent=2, default=_json_default)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _manifest(command, args, model_spec=None, extra=None):
    man = {
        "command": command,
        "tool_version": __version__,
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "tolerances": DEFAULTS.asdict(),
    }
    if model_spec is not None:
        man["model"] = model_spec
    if extra:
        man.update(extra)
    return man


# ---------------------------------------------------------------------------
# shared argument helpers

def _parse_vector(text, n, what):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"cannot parse {what} {text!r}: {exc}") from exc
    if len(vals) != n:
        raise InputError(f"{what} must have {n} components, got {len(vals)}")
    return np.array(vals)


def parse_points(spec, n, seed):
    """'random:N[:R]' | 'origin' | 'file:PATH' (JSON list of points)."""
    if spec.startswith("random:"):
        parts = spec.split(":")
        try:
            count = int(parts[1])
            radius = float(parts[2]) if len(parts) > 2 else 1.0
        except (IndexError, ValueError) as exc:
            raise InputError(f"bad points spec {spec!r}") from exc
        rng = np.random.default_rng(seed)
        return rng.uniform(-radius, radius, (count, n))
    if spec == "origin":
        return np.zeros((1, n))
    if spec.startswith("file:"):
        path = spec[5:]
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise InputError(f"cannot read points file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed points file: {exc}") from exc
        pts = np.asarray(data, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != n:
            raise InputError(f"points file must hold an array of {n}-vectors")
        return pts
    raise InputError(f"unrecognized points spec {spec!r}")


def parse_function(expr, n):
    """Monomial expressions like 'x1^2*x3' over chart coordinates."""
    expr = expr.strip()
    if expr in ("1", ""):
        return lambda p: np.ones(np.asarray(p).shape[:-1])
    powers = np.zeros(n, dtype=int)
    for factor in expr.split("*"):
        factor = factor.strip()
        if not factor.startswith("x"):
            raise InputError(f"cannot parse test function factor {factor!r}")
        body = factor[1:]
        if "^" in body:
            idx_s, pow_s = body.split("^", 1)
        else:
            idx_s, pow_s = body, "1"
        try:
            idx, power = int(idx_s), int(pow_s)
        except ValueError as exc:
            raise InputError(f"cannot parse test function factor {factor!r}") from exc
        if not (1 <= idx <= n):
            raise InputError(f"coordinate index out of range in {factor!r}")
        powers[idx - 1] += power

    def f(p):
        p = np.asarray(p, dtype=float)
        out = np.ones(p.shape[:-1])
        for m in range(n):
            if powers[m]:
                out = out * p[..., m] ** int(powers[m])
        return out

    return f


def default_battery(n):
    names = ["x1^2", f"x{n}", f"x1*x{n}"]
    return {nm: parse_function(nm, n) for nm in names}


# ---------------------------------------------------------------------------
# report

def _point_report(model, volume, battery, q):
    s = model.structure
    row = {"point": [float(v) for v in q]}
    row["delta_omega"] = {lb: operators.macroscopic(s, fn, volume, q).asdict()
                          for lb, fn in battery.items()}
    row["l_v"] = {lb: operators.microscopic(s, fn, q).asdict()
                  for lb, fn in battery.items()}
    row["chi"] = [float(v) for v in operators.chi(s, volume, q)]
    if s.k == s.n - 1:
        eta = model.eta if model.eta is not None else corank1.annihilator_one_form(s)
        eta_n = corank1.normalized_one_form(s, eta)
        jm = corank1.j_matrix_normalized(s, eta_n, q)
        sv = np.linalg.svd(jm.m, compute_uv=False)
        lambdas = sorted(float(v) for v in sv[sv > DEFAULTS.contact_min_sv])
        row["J"] = jm.m.tolist()
        row["lambdas"] = lambdas
        try:
            row["reeb"] = corank1.reeb(s, eta_n, q).tolist()
        except NotContactError:
            row["reeb"] = None
        try:
            row["quasi_reeb"] = corank1.quasi_reeb(s, eta_n, q, 1).tolist() \
                if row["reeb"] is None else None
        except (QuasiReebUndefinedError, NotContactError):
            row["quasi_reeb"] = None
        row["popp_density"] = float(corank1.popp_corank1(s, eta_n, q))
        row["solvability"] = corank1_solve(s, volume, eta_n, q).asdict()
    return row


def _report_chunk(payload):
    model = models.model_from_dict(payload["model_spec"])
    volume = models.volume_from_spec(model, payload["volume_spec"])
    battery = {lb: parse_function(lb, model.structure.n)
               for lb in payload["battery"]}
    return [_point_report(model, volume, battery, np.asarray(p))
            for p in payload["points"]]


def _solve_chunk(payload):
    model = models.model_from_dict(payload["model_spec"])
    s = model.structure
    eta = model.eta if model.eta is not None else corank1.annihilator_one_form(s)
    volume = models.volume_from_spec(model, payload["volume_spec"])
    return [corank1_solve(s, volume, eta, np.asarray(p)).asdict()
            for p in payload["points"]]


_CHUNK_WORKERS = {"report": _report_chunk, "solve": _solve_chunk}


def _run_pointwise(kind, model_spec, volume_spec, points, workers,
                   battery_labels=None):
    """Evaluate points in index order, optionally across a process pool.

    Points are independent and chunks are merged in order, so the result
    does not depend on the worker count."""
    worker = _CHUNK_WORKERS[kind]
    payloads = []
    chunk = max(1, len(points) // max(4 * workers, 1)) if workers > 1 else len(points)
    for lo in range(0, len(points), chunk):
        payloads.append({"model_spec": model_spec, "volume_spec": volume_spec,
                         "battery": battery_labels,
                         "points": [list(map(float, p)) for p in points[lo:lo + chunk]]})
    if workers > 1 and len(payloads) > 1:
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                parts = list(pool.map(worker, payloads))
            return [row for part in parts for row in part]
        except (OSError, RuntimeError):
            pass                                   # pool unavailable: run serial
    return [row for payload in payloads for row in worker(payload)]


def cmd_report(args):
    model_spec = models.resolve_model_spec(args.structure)
    model = models.model_from_dict(model_spec)
    volume_spec = args.volume
    models.volume_from_spec(model, volume_spec)    # validate before computing
    points = parse_points(args.points, model.structure.n, args.seed)
    labels = args.functions.split(",") if args.functions else list(default_battery(model.structure.n))
    for lb in labels:
        parse_function(lb, model.structure.n)
    rows = _run_pointwise("report", model_spec, volume_spec, points,
                          args.workers, battery_labels=labels)
    out = {"manifest": _manifest("report", args, model_spec,
                                 {"volume": volume_spec, "functions": labels,
                                  "points_spec": args.points}),
           "points": rows}
    _emit_json(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# geodesic

def cmd_geodesic(args):
    model_spec = models.resolve_model_spec(args.structure)
    model = models.model_from_dict(model_spec)
    s = model.structure
    q0 = _parse_vector(args.q0, s.n, "--q0")
    h0 = _parse_vector(args.h0, s.n, "--h0")
    res = integrate_geodesic(s, q0, h0, args.t, args.step, record=True)
    man = _manifest("geodesic", args, model_spec,
                    {"q0": q0.tolist(), "h0": h0.tolist(),
                     "t": args.t, "step": args.step})
    lines = ["# manifest: " + json.dumps(man, default=_json_default)]
    header = (["t"] + [f"q_{i+1}" for i in range(s.n)]
              + [f"h_{i+1}" for i in range(s.n)] + ["energy_drift"])
    lines.append(",".join(header))
    for (t, q, h, drift) in res.trajectory:
        vals = [t, *q.tolist(), *h.tolist(), float(drift)]
        lines.append(",".join(repr(float(v)) for v in vals))
    text = "\n".join(lines) + "\n"
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


# ---------------------------------------------------------------------------
# solve

def cmd_solve(args):
    model_spec = models.resolve_model_spec(args.structure)
    model = models.model_from_dict(model_spec)
    s = model.structure
    if model.eta is None and s.k == s.n - 1:
        eta = corank1.annihilator_one_form(s)
    else:
        eta = model.eta
    if eta is None or s.k != s.n - 1:
        raise InputError("solve requires a corank-1 structure")
    models.volume_from_spec(model, args.volume)    # validate before computing
    points = parse_points(args.points, s.n, args.seed)
    reports = _run_pointwise("solve", model_spec, args.volume, points,
                             args.workers)
    statuses = {r["status"] for r in reports}
    dims = {r["dim"] for r in reports}
    verdict = {"consistent": len(statuses) == 1 and len(dims) == 1,
               "status": statuses.pop() if len(statuses) == 1 else "mixed",
               "min_residual": min(r["residual"] for r in reports),
               "max_residual": max(r["residual"] for r in reports)}
    out = {"manifest": _manifest("solve", args, model_spec,
                                 {"volume": args.volume, "points_spec": args.points}),
           "reports": [{"point": p.tolist(), **r} for p, r in zip(points, reports)],
           "verdict": verdict}
    _emit_json(out, args.out)
    return 0


# ---------------------------------------------------------------------------
# walk

def _parse_law(text):
    if text == "dirac":
        return "dirac", 0.0
    for name in ("gaussian", "uniform"):
        if text == name:
            return name, 1.0
        if text.startswith(name + ":"):
            try:
                return name, float(text.split(":", 1)[1])
            except ValueError as exc:
                raise InputError(f"bad vertical law {text!r}") from exc
    raise InputError(f"bad vertical law {text!r} "
                     "(want dirac | gaussian[:sigma] | uniform[:width])")


def cmd_walk(args):
    model_spec = models.resolve_model_spec(args.structure)
    model = models.model_from_dict(model_spec)
    s = model.structure
    law, scale = _parse_law(args.vertical_law)
    mspec = randomwalk.MeasureSpec(law, scale, rng_seed=args.seed)
    cfg = randomwalk.WalkConfig(t_step=args.t_step, n_steps=args.n_steps,
                                n_paths=args.n_paths, ode_step=args.ode_step)
    q0 = _parse_vector(args.q0, s.n, "--q0") if args.q0 else np.zeros(s.n)
    res = randomwalk.simulate_walk(s, q0, cfg, mspec)
    labels = (args.functions.split(",") if args.functions
              else list(default_battery(s.n)))
    fns = {lb: parse_function(lb, s.n) for lb in labels}
    stats = randomwalk.endpoint_statistics(res.endpoints, fns)
    man = _manifest("walk", args, model_spec,
                    {"t_step": args.t_step, "n_steps": args.n_steps,
                     "n_paths": args.n_paths, "vertical_law": args.vertical_law,
                     "q0": q0.tolist(), "functions": labels,
                     "geodesic_duration": res.geodesic_duration})
    if args.endpoints:
        lines = ["# manifest: " + json.dumps(man, default=_json_default),
                 ",".join(f"q_{i+1}" for i in range(s.n))]
        for row in res.endpoints:
            lines.append(",".join(repr(float(v)) for v in row))
        with open(args.endpoints, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    summary = {"manifest": man,
               "statistics": stats,
               "discarded_paths": res.n_discarded,
               "regularity": res.regularity(),
               "total_time": res.total_time}
    _emit_json(summary, args.out)
    return 0


# ---------------------------------------------------------------------------
# check

def cmd_check(args):
    results = run_checks(args.suite, mutate=args.mutate)
    ok = all(r.passed for r in results)
    out = {"manifest": _manifest("check", args, extra={"suite": args.suite,
                                                       "mutate": args.mutate}),
           "passed": ok,
           "results": [r.asdict() for r in results]}
    _emit_json(out, args.out)
    for r in results:
        sys.stderr.write(f"[{'PASS' if r.passed else 'FAIL'}] {r.suite}/{r.name}\n")
    return 0 if ok else 1


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(
        prog="sublap",
        description="Sub-Laplacians, geodesic random walks and the "
                    "volume/complement equivalence problem on frame-defined "
                    "sub-Riemannian structures.")
    p.add_argument("--version", action="version", version=f"sublap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int,
                        default=int(os.environ.get("SUBLAP_SEED", "0")),
                        help="RNG seed (env SUBLAP_SEED)")
        sp.add_argument("--workers", type=int,
                        default=int(os.environ.get("SUBLAP_WORKERS",
                                                   str(os.cpu_count() or 1))),
                        help="worker pool size (env SUBLAP_WORKERS)")
        sp.add_argument("--tol", action="append", default=[],
                        metavar="NAME=VALUE", help="override a tolerance")
        sp.add_argument("--out", default=None, help="output path (default stdout)")

    sp = sub.add_parser("report", help="operator values, gap field and "
                                       "corank-1 data on a point batch")
    common(sp)
    sp.add_argument("--structure", required=True, help="builtin id or JSON file")
    sp.add_argument("--volume", default="lebesgue")
    sp.add_argument("--points", default="random:20:1.0")
    sp.add_argument("--functions", default=None, help="comma list of monomials")
    sp.set_defaults(fn=cmd_report)

    sp = sub.add_parser("geodesic", help="integrate one normal geodesic to CSV")
    common(sp)
    sp.add_argument("--structure", required=True)
    sp.add_argument("--q0", required=True, help="comma-separated start point")
    sp.add_argument("--h0", required=True, help="comma-separated frame covector")
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--step", type=float, default=DEFAULTS.ode_step)
    sp.set_defaults(fn=cmd_geodesic)

    sp = sub.add_parser("solve", help="classify compatible complements per point")
    common(sp)
    sp.add_argument("--structure", required=True)
    sp.add_argument("--volume", default="popp")
    sp.add_argument("--points", default="random:20:1.0")
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("walk", help="geodesic random walk endpoints + summary")
    common(sp)
    sp.add_argument("--structure", required=True)
    sp.add_argument("--q0", default=None)
    sp.add_argument("--t-step", type=float, default=0.01, dest="t_step")
    sp.add_argument("--n-steps", type=int, default=100, dest="n_steps")
    sp.add_argument("--n-paths", type=int, default=1000, dest="n_paths")
    sp.add_argument("--ode-step", type=float, default=None, dest="ode_step")
    sp.add_argument("--vertical-law", default="dirac", dest="vertical_law")
    sp.add_argument("--functions", default=None)
    sp.add_argument("--endpoints", default=None, help="endpoint CSV path")
    sp.set_defaults(fn=cmd_walk)

    sp = sub.add_parser("check", help="run the invariant suites")
    common(sp)
    sp.add_argument("--suite", default="all",
                    help=f"all | {' | '.join(SUITES)}")
    sp.add_argument("--mutate", default=None,
                    help="fault-injection hook (chi-sign): suite must fail")
    sp.set_defaults(fn=cmd_check)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        for item in args.tol:
            if "=" not in item:
                raise InputError(f"--tol wants NAME=VALUE, got {item!r}")
            name, value = item.split("=", 1)
            try:
                DEFAULTS.override(**{name: float(value)})
            except KeyError as exc:
                raise InputError(str(exc)) from exc
        return args.fn(args)
    except InputError as exc:
        sys.stderr.write(f"input error: {exc}\n")
        return 2
    except SublapError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
