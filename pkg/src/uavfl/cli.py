"""Command surface: run one optimization, sweep a cap, compare schemes,
or validate against the brute-force grid.

Outputs are CSV (schemas below, documented in the README) plus a JSON
dump of the final decision point for `run`.  Exit codes: 0 converged,
2 iteration cap hit, 3 infeasible scenario, 4 malformed scenario file,
5 instance beyond the validator's caps.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

from uavfl import oracle, scenario, solver

SWEEPABLE = ("f_uav_max", "p_cm_max", "f_bs_max", "p_bs_max")

EXIT_OK = 0
EXIT_MAX_ITERS = 2
EXIT_INFEASIBLE = 3
EXIT_BAD_SCENARIO = 4
EXIT_TOO_LARGE = 5


@dataclass(frozen=True)
class SweepSpec:
    """One parameter swept over explicit values for a set of schemes."""

    param: str
    values: tuple
    schemes: tuple

    def __post_init__(self):
        if self.param not in SWEEPABLE:
            raise ValueError(
                f"cannot sweep {self.param!r}; one of {SWEEPABLE}")
        if not self.values or any(v <= 0 for v in self.values):
            raise ValueError("swept values must be strictly positive")
        if not self.schemes:
            raise ValueError("at least one scheme required")


def bundled_scenario_path(name="default"):
    return Path(__file__).parent / "scenarios" / f"{name}.scn"


def _fmt(x):
    return repr(float(x))


def _timestamp_lines(no_timestamp):
    if no_timestamp:
        return []
    now = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return [f"# generated {now}"]


def trace_csv(trace, no_timestamp=False):
    """One row per outer iteration; see README for the exact schema."""
    lines = _timestamp_lines(no_timestamp)
    lines.append(f"# scheme={trace.scheme.value}")
    if trace.pinned:
        pins = ",".join(f"{k}:{v}" for k, v in sorted(trace.pinned.items()))
        lines.append(f"# pinned={pins}")
    lines.append(f"# init_objective_s={_fmt(trace.init_objective)}")
    lines.append("iter,true_objective_s,surrogate_objective_s,"
                 "max_violation,wall_ms")
    for e in trace.entries:
        wall = 0 if no_timestamp else int(round(e.wall_ms))
        lines.append(f"{e.iteration},{_fmt(e.true_objective)},"
                     f"{_fmt(e.surrogate_objective)},"
                     f"{_fmt(e.max_violation)},{wall}")
    return "\n".join(lines) + "\n"


def sweep_rows(config, spec, settings=solver.SolveSettings(), workers=1):
    """(param, value, scheme, final latency, converged) per sweep cell."""
    jobs = [(config, spec.param, value, scheme, settings)
            for value in spec.values for scheme in spec.schemes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(job) for job in jobs]
    return results


def _sweep_job(job):
    config, param, value, scheme, settings = job
    cfg = replace(config, **{param: value})
    trace = solver.run_scheme(cfg, solver.Scheme.parse(scheme), settings)
    return (param, value, scheme, trace.final_objective, trace.converged)


def sweep_csv(rows, no_timestamp=False):
    lines = _timestamp_lines(no_timestamp)
    lines.append("param,value,scheme,final_latency_s,converged")
    for param, value, scheme, latency, converged in rows:
        lines.append(f"{param},{_fmt(value)},{scheme},{_fmt(latency)},"
                     f"{int(converged)}")
    return "\n".join(lines) + "\n"


def compare_rows(config, settings=solver.SolveSettings()):
    """Final latency per scheme plus the joint scheme's saving in percent."""
    finals = {}
    for scheme in solver.Scheme:
        finals[scheme.value] = solver.run_scheme(config, scheme,
                                                 settings).final_objective
    joint = finals["joint"]
    return [(name, latency,
             0.0 if name == "joint" else 100.0 * (latency - joint) / latency)
            for name, latency in finals.items()]


def compare_csv(rows, no_timestamp=False):
    lines = _timestamp_lines(no_timestamp)
    lines.append("scheme,final_latency_s,joint_saving_pct")
    for name, latency, saving in rows:
        lines.append(f"{name},{_fmt(latency)},{_fmt(saving)}")
    return "\n".join(lines) + "\n"


def validate_report(config, grid_points=17,
                    settings=solver.SolveSettings()):
    spec = oracle.GridSpec(points_per_axis=grid_points)
    grid_obj, _ = oracle.grid_search(config, spec)
    trace = solver.run_algorithm1(config, settings)
    gap = abs(trace.final_objective - grid_obj) / grid_obj
    lines = [
        f"algorithm_objective_s = {_fmt(trace.final_objective)}",
        f"grid_objective_s = {_fmt(grid_obj)}",
        f"gap_pct = {_fmt(100.0 * gap)}",
        f"points_per_axis = {grid_points}",
    ]
    return "\n".join(lines) + "\n", gap


def _write(path, text):
    with open(path, "w", newline="\n") as fh:
        fh.write(text)


def _load(args):
    path = args.scenario or bundled_scenario_path()
    return scenario.load_scenario(path)


def _settings(args):
    kw = {}
    if getattr(args, "bcd_tol", None) is not None:
        kw["bcd_tol"] = args.bcd_tol
    if getattr(args, "max_iters", None) is not None:
        kw["max_bcd_iters"] = args.max_iters
    return solver.SolveSettings(**kw)


def cmd_run(args):
    config = _load(args)
    trace = solver.run_scheme(config, solver.Scheme.parse(args.scheme),
                              _settings(args))
    text = trace_csv(trace, no_timestamp=args.no_timestamp)
    if args.out:
        _write(args.out, text)
        point_path = Path(args.out).with_suffix(".point.json")
        _write(point_path, json.dumps(trace.final_dv.to_dict()) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_OK if trace.converged else EXIT_MAX_ITERS


def cmd_sweep(args):
    config = _load(args)
    spec = SweepSpec(param=args.param,
                     values=tuple(float(v) for v in
                                  args.values.split(",")),
                     schemes=tuple(args.schemes.split(",")))
    rows = sweep_rows(config, spec, _settings(args), workers=args.workers)
    text = sweep_csv(rows, no_timestamp=args.no_timestamp)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args):
    config = _load(args)
    rows = compare_rows(config, _settings(args))
    text = compare_csv(rows, no_timestamp=args.no_timestamp)
    if args.out:
        _write(args.out, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args):
    config = _load(args)
    try:
        text, _ = validate_report(config, grid_points=args.grid_points,
                                  settings=_settings(args))
    except oracle.InstanceTooLargeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TOO_LARGE
    if args.out:
        _write(args.out, text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="uavfl",
        description="Latency optimization for federated learning over a "
                    "sensing UAV fleet")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, grid=False):
        p.add_argument("--scenario", help="scenario file "
                       "(default: bundled default scenario)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--bcd-tol", type=float, dest="bcd_tol")
        p.add_argument("--max-iters", type=int, dest="max_iters")
        p.add_argument("--no-timestamp", action="store_true",
                       help="suppress the timestamp header and zero the "
                            "wall-time column for byte-stable output")

    p_run = sub.add_parser("run", help="run one scheme to convergence")
    common(p_run)
    p_run.add_argument("--scheme", default="joint",
                       choices=[s.value for s in solver.Scheme])
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="sweep one cap over values")
    common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=SWEEPABLE)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values, SI units")
    p_sweep.add_argument("--schemes", default="joint",
                         help="comma-separated scheme names")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    p_cmp = sub.add_parser("compare",
                           help="run all schemes from one initialization")
    common(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_val = sub.add_parser("validate",
                           help="check the solver against the grid oracle")
    common(p_val)
    p_val.add_argument("--grid-points", type=int, default=17,
                       dest="grid_points")
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except scenario.ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_SCENARIO
    except solver.InfeasibleScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
