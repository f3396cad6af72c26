"""Command-line front end: system ingestion, pipeline orchestration, and
plot-data emission.

Every failure exits nonzero with one machine-readable JSON line on stdout:
{"error": <kind>, "message": <detail>}. Exit codes: 0 success, 1 I/O,
2 validation, 3 solver or extraction failure. Solver settings come from
POLYREACH_* environment variables unless overridden by flags.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import reach, sim
from .conic import Settings
from .poly import Polynomial
from .sets import SemiAlgebraicSet, SystemSpec, rescale_inputs
from .synth import (ControllerPoly, build_synthesis_sdp, extract_controller,
                    eval_batch, solve_synthesis)

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2, 3


class CommandError(Exception):
    def __init__(self, code, kind, message):
        super().__init__(message)
        self.code = code
        self.kind = kind


class _Parser(argparse.ArgumentParser):
    # route argparse's own complaints through the JSON error path
    def error(self, message):
        raise CommandError(EXIT_VALIDATION, "usage", message)


def _read_json(path, kind):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))
    except json.JSONDecodeError as exc:
        raise CommandError(EXIT_VALIDATION, kind, f"{path}: {exc}")


def _write_json(path, obj):
    try:
        with open(path, "w") as fh:
            json.dump(obj, fh, indent=1, default=float)
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))


def load_system(path) -> SystemSpec:
    """Read a system file and normalize its input box to [-1, 1]^m."""
    obj = _read_json(path, "bad_system")
    try:
        n, m = int(obj["n"]), int(obj["m"])
        f = [Polynomial.from_json(p) for p in obj["f"]]
        g = [[Polynomial.from_json(p) for p in row] for row in obj["g"]]
        X = SemiAlgebraicSet.from_json(obj["X"])
        U = SemiAlgebraicSet.from_json(obj["U"])
        Z = SemiAlgebraicSet.from_json(obj["Z"])
        return rescale_inputs(n, m, f, g, X, U, Z,
                              fixed_point=obj.get("fixed_point"),
                              name=obj.get("name", ""))
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(EXIT_VALIDATION, "bad_system", f"{path}: {exc}")


def load_controller(path) -> ControllerPoly:
    obj = _read_json(path, "bad_controller")
    try:
        return ControllerPoly.from_json(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(EXIT_VALIDATION, "bad_controller", f"{path}: {exc}")


def _solver_flags(p):
    p.add_argument("--feas-tol", type=float, default=None)
    p.add_argument("--gap-tol", type=float, default=None)
    p.add_argument("--max-iters", type=int, default=None)
    p.add_argument("--time-budget", type=float, default=None)
    p.add_argument("--verbose", action="store_true")


def _settings(args) -> Settings:
    s = Settings.from_env()
    if args.feas_tol is not None:
        s.feas_tol = args.feas_tol
    if args.gap_tol is not None:
        s.gap_tol = args.gap_tol
    if args.max_iters is not None:
        s.max_iters = args.max_iters
    if args.time_budget is not None:
        s.time_budget = args.time_budget
    if args.verbose:
        s.verbose = True
    return s


def parse_grid(text):
    """Grid tokens joined by 'x': a plain vertex count, count@lo:hi with an
    explicit range, or =value fixing that coordinate."""
    entries = []
    try:
        for tok in text.split("x"):
            if tok.startswith("="):
                entries.append(("fix", float(tok[1:])))
            elif "@" in tok:
                cnt, rng = tok.split("@", 1)
                lo, hi = rng.split(":")
                entries.append(("range", int(cnt), float(lo), float(hi)))
            else:
                entries.append(("count", int(tok)))
    except ValueError:
        raise CommandError(EXIT_VALIDATION, "bad_grid",
                           f"cannot parse grid spec {text!r}")
    return entries


def _report_path(out):
    return (out[:-5] if out.endswith(".json") else out) + ".report.json"


def _solution_summary(result):
    sol = result.solution
    info = {"status": result.status,
            "primal_objective": sol.primal_obj,
            "dual_objective": sol.dual_obj,
            "relative_gap": sol.diagnostics.get("rel_gap"),
            "iterations": sol.diagnostics.get("iterations"),
            "solve_seconds": sol.diagnostics.get("time")}
    if result.certificate is not None:
        info["certificate"] = result.certificate.status
        info["certificate_checks"] = result.certificate.checks
    else:
        info["certificate"] = None
    return info


def cmd_synth(args) -> int:
    spec = load_system(args.system)
    if args.controller_degree > args.order:
        raise CommandError(EXIT_VALIDATION, "controller_degree_too_large",
                           "controller degree must not exceed the order")
    try:
        problem = build_synthesis_sdp(spec, args.order)
    except ValueError as exc:
        kind = "order_too_small" if "below the minimum" in str(exc) \
            else "bad_problem"
        raise CommandError(EXIT_VALIDATION, kind, str(exc))
    result = solve_synthesis(problem, _settings(args))
    if result.z is None or result.status not in ("optimal", "inaccurate"):
        raise CommandError(EXIT_SOLVER, "solver",
                           f"synthesis ended with status {result.status}: "
                           f"{result.solution.diagnostics.get('error', '')}")
    try:
        ctrl = extract_controller(result.z, spec.n, spec.m,
                                  args.controller_degree, args.svd_tol,
                                  spec.input_scaling)
    except ValueError as exc:
        raise CommandError(EXIT_SOLVER, "extraction", str(exc))
    try:
        ctrl.save(args.out)
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))
    report = {"system": spec.name, "order": args.order,
              "controller_degree": args.controller_degree}
    report.update(_solution_summary(result))
    _write_json(_report_path(args.out), report)
    print(json.dumps({"controller": args.out,
                      "report": _report_path(args.out),
                      "status": result.status}))
    return EXIT_OK


def cmd_reach(args) -> int:
    spec = load_system(args.system)
    if args.controller:
        ctrl = load_controller(args.controller)
        try:
            aspec = reach.compose_closed_loop(spec, ctrl)
        except ValueError as exc:
            raise CommandError(EXIT_VALIDATION, "dimension_mismatch", str(exc))
    else:
        aspec = reach.AutonomousSpec(spec.n, spec.f, spec.X, spec.Z,
                                     name=spec.name)
    if args.hierarchy:
        try:
            lo, hi = (int(v) for v in args.hierarchy.split(".."))
        except ValueError:
            raise CommandError(EXIT_VALIDATION, "bad_hierarchy",
                               f"cannot parse hierarchy {args.hierarchy!r}")
        if lo > hi:
            raise CommandError(EXIT_VALIDATION, "bad_hierarchy",
                               "hierarchy range is empty")
        orders = list(range(lo, hi + 1))
    elif args.order is not None:
        orders = [args.order]
    else:
        raise CommandError(EXIT_VALIDATION, "missing_order",
                           "need --order or --hierarchy")
    settings = _settings(args)
    try:
        results, cert = reach.solve_reach_hierarchy(aspec, orders, settings)
    except ValueError as exc:
        kind = "order_too_small" if "below the minimum" in str(exc) \
            else "bad_problem"
        raise CommandError(EXIT_VALIDATION, kind, str(exc))
    if cert is None:
        statuses = {r: res.status for r, res in zip(orders, results)}
        raise CommandError(EXIT_SOLVER, "solver",
                           f"no order produced a certificate: {statuses}")
    try:
        cert.save(args.out)
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))
    report = {"system": spec.name, "orders": orders,
              "certificate_status": cert.status,
              "per_order": [dict(order=r, **_solution_summary(res))
                            for r, res in zip(orders, results)]}
    _write_json(_report_path(args.out), report)
    print(json.dumps({"certificate": args.out,
                      "report": _report_path(args.out),
                      "history_length": len(cert.history)}))
    return EXIT_OK


def _verify_grid_spec(args, n):
    entries = parse_grid(args.grid)
    if len(entries) != n:
        raise CommandError(EXIT_VALIDATION, "bad_grid",
                           "grid spec must have one entry per state variable")
    out = []
    for e in entries:
        if e[0] == "count":
            out.append(e[1])
        elif e[0] == "fix":
            out.append(("fix", e[1]))
        else:
            raise CommandError(EXIT_VALIDATION, "bad_grid",
                               "explicit ranges are not supported here; the "
                               "grid spans the state box")
    return out


def cmd_verify(args) -> int:
    spec = load_system(args.system)
    ctrl = load_controller(args.controller)
    grid_spec = _verify_grid_spec(args, spec.n)
    try:
        report = sim.grid_verify(spec, ctrl, grid_spec, args.steps)
    except ValueError as exc:
        raise CommandError(EXIT_VALIDATION, "dimension_mismatch", str(exc))
    try:
        sim.write_grid_csv(args.out, report)
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))
    counts = {}
    for o in report.outcomes:
        counts[o] = counts.get(o, 0) + 1
    print(json.dumps({"grid": args.out, "points": len(report.outcomes),
                      "outcomes": counts}))
    return EXIT_OK


def cmd_rollout(args) -> int:
    spec = load_system(args.system)
    ctrl = load_controller(args.controller)
    try:
        x0 = np.array([float(v) for v in args.x0.split(",")])
    except ValueError:
        raise CommandError(EXIT_VALIDATION, "bad_x0",
                           f"cannot parse initial state {args.x0!r}")
    if x0.shape != (spec.n,):
        raise CommandError(EXIT_VALIDATION, "bad_x0",
                           "initial state dimension mismatch")
    if ctrl.n != spec.n or ctrl.m != spec.m:
        raise CommandError(EXIT_VALIDATION, "dimension_mismatch",
                           "controller dimensions do not match the system")
    if not spec.X.contains(x0):
        result = sim.RolloutResult(sim.OUTSIDE_X, 0, x0[None, :],
                                   ctrl.evaluate(x0)[None, :])
    else:
        result = sim.rollout(spec, ctrl, x0, args.steps)
    try:
        sim.write_trajectory_csv(args.out, result)
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))
    print(json.dumps({"trajectory": args.out, "outcome": result.outcome,
                      "steps": result.steps_used}))
    return EXIT_OK


def cmd_levelset(args) -> int:
    try:
        cert = reach.ReachCertificate.from_json(_read_json(args.cert,
                                                           "bad_certificate"))
    except (KeyError, TypeError, ValueError) as exc:
        raise CommandError(EXIT_VALIDATION, "bad_certificate",
                           f"{args.cert}: {exc}")
    n = cert.w.num_vars
    entries = parse_grid(args.grid)
    if len(entries) != n:
        raise CommandError(EXIT_VALIDATION, "bad_grid",
                           "grid spec must have one entry per variable")
    bbox = None
    if args.system:
        bbox = load_system(args.system).X.bounding_box()
    axes = []
    for i, e in enumerate(entries):
        if e[0] == "fix":
            axes.append(np.array([e[1]]))
        elif e[0] == "range":
            axes.append(np.linspace(e[2], e[3], e[1]))
        else:
            if bbox is None:
                raise CommandError(EXIT_VALIDATION, "bad_grid",
                                   "plain counts need --system to supply "
                                   "axis ranges; use count@lo:hi otherwise")
            lo, hi = bbox[i]
            axes.append(np.linspace(lo, hi, e[1]))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([mm.reshape(-1) for mm in mesh])
    use_intersection = args.intersection
    if use_intersection and not cert.history:
        print("certificate has no history; using the single level set",
              file=sys.stderr)
        use_intersection = False
    if use_intersection:
        member = np.ones(len(pts), dtype=bool)
        for w in cert.history:
            member &= eval_batch(w, pts) >= 1.0
    else:
        member = eval_batch(cert.w, pts) >= 1.0
    try:
        import csv

        with open(args.out, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow([f"x{i + 1}" for i in range(n)] + ["member"])
            for x, is_in in zip(pts, member):
                out.writerow([repr(float(v)) for v in x]
                             + ["true" if is_in else "false"])
    except OSError as exc:
        raise CommandError(EXIT_IO, "io", str(exc))
    print(json.dumps({"levelset": args.out, "points": int(len(pts)),
                      "members": int(member.sum())}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="polyreach",
                description="Polynomial controller synthesis and backward "
                            "reachable set approximation")
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="synthesize a polynomial controller")
    ps.add_argument("--system", required=True)
    ps.add_argument("--order", type=int, required=True)
    ps.add_argument("--controller-degree", type=int, required=True)
    ps.add_argument("--out", required=True)
    ps.add_argument("--svd-tol", type=float, default=1e-8)
    _solver_flags(ps)
    ps.set_defaults(func=cmd_synth)

    pr = sub.add_parser("reach", help="compute a reachable-set certificate")
    pr.add_argument("--system", required=True)
    pr.add_argument("--controller", default=None)
    pr.add_argument("--order", type=int, default=None)
    pr.add_argument("--hierarchy", default=None,
                    help="order range lo..hi; stores every w in the history")
    pr.add_argument("--out", required=True)
    _solver_flags(pr)
    pr.set_defaults(func=cmd_reach)

    pv = sub.add_parser("verify", help="grid controllability map")
    pv.add_argument("--system", required=True)
    pv.add_argument("--controller", required=True)
    pv.add_argument("--grid", required=True)
    pv.add_argument("--steps", type=int, default=sim.DEFAULT_STEPS)
    pv.add_argument("--out", required=True)
    pv.set_defaults(func=cmd_verify)

    po = sub.add_parser("rollout", help="simulate one initial state")
    po.add_argument("--system", required=True)
    po.add_argument("--controller", required=True)
    po.add_argument("--x0", required=True)
    po.add_argument("--steps", type=int, default=sim.DEFAULT_STEPS)
    po.add_argument("--out", required=True)
    po.set_defaults(func=cmd_rollout)

    pl = sub.add_parser("levelset", help="evaluate a certificate on a grid")
    pl.add_argument("--cert", required=True)
    pl.add_argument("--grid", required=True)
    pl.add_argument("--intersection", action="store_true")
    pl.add_argument("--system", default=None,
                    help="supplies axis ranges for plain counts")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_levelset)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except CommandError as exc:
        print(json.dumps({"error": exc.kind, "message": str(exc)}))
        return exc.code
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(json.dumps({"error": "internal",
                          "message": f"{type(exc).__name__}: {exc}"}))
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
