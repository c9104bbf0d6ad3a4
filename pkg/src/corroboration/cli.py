"""Command-line entry point.

Exit status: 0 on success, 2 when the request is infeasible, 3 on invalid
input. Numbers are printed with six significant digits.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .assignment import Assignment
from .bench import BenchSpec, run_bench, summarize, write_rows
from .dp import MaxCProblem, MinCProblem, solve_maxc_dp, solve_minc_dp
from .errors import CorroborationError, Infeasible, InfeasibleFrame, ParseError
from .files import (
    STUDY_FORMATS,
    distribution_from_json,
    load_distribution,
    load_rule_table,
    load_scenario,
    random_scenario,
    save_scenario,
    read_json,
    scenario_from_json,
    scenario_to_json,
    stand_in_scenario,
)
from .flow import solve_maxc_mcf, solve_minc_mcf
from .model import FormatSet, build_matrix
from .renewals import ControllerConfig, MaxCS, MinCS, PowerAware, generate_events, run
from .rules import Incredible, ReportPool, satisfy
from .structured import maxc_two_format, preselect_formats, solve_maxc_ann, solve_minc_ann

EXIT_OK, EXIT_INFEASIBLE, EXIT_INVALID = 0, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse would exit with 2, which is reserved for infeasibility here
        self.print_usage(sys.stderr)
        raise UsageError(message)


def sig6(obj):
    """Round every float in a JSON-like structure to six significant digits."""
    if isinstance(obj, float):
        return obj if obj != obj or obj in (float("inf"), float("-inf")) else float(f"{obj:.6g}")
    if isinstance(obj, dict):
        return {k: sig6(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sig6(v) for v in obj]
    return obj


def _emit(doc, args) -> None:
    text = json.dumps(sig6(doc), indent=2)
    if getattr(args, "json", None):
        Path(args.json).write_text(text + "\n")
    print(text)


def _assignment_doc(a: Assignment, scenario) -> dict:
    doc = a.to_json([f.id for f in scenario.formats])
    doc["reporters"] = [r.id for r in scenario.reporters]
    doc["active"] = a.active
    return doc


def _write_assignment_csv(path, a: Assignment, scenario) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["reporter", "format"])
        for r, k in zip(scenario.reporters, a.choices):
            out.writerow([r.id, "" if k < 0 else scenario.formats[k].id])


def cmd_minc(args) -> int:
    scen = load_scenario(args.scenario)
    matrix = build_matrix(scen)
    if args.solver == "dp":
        a = solve_minc_dp(MinCProblem(matrix, scen.formats, args.target, args.zeta, scen.corroboration))
    elif args.solver == "mcf":
        a = solve_minc_mcf(matrix, scen.formats, args.target, scen.corroboration)
    elif args.solver == "ann":
        a = solve_minc_ann(preselect_formats(matrix, scen.formats), args.target, args.zeta, scen.corroboration)
    else:
        raise UsageError(f"solver {args.solver} does not handle minc")
    if args.csv:
        _write_assignment_csv(args.csv, a, scen)
    _emit(_assignment_doc(a, scen), args)
    return EXIT_OK


def cmd_maxc(args) -> int:
    scen = load_scenario(args.scenario)
    matrix = build_matrix(scen)
    if args.solver == "dp":
        a = solve_maxc_dp(MaxCProblem(matrix, scen.formats, args.budget, args.eta, scen.corroboration))
    elif args.solver == "mcf":
        a = solve_maxc_mcf(matrix, scen.formats, args.budget, scen.corroboration)
    elif args.solver == "ann":
        a = solve_maxc_ann(preselect_formats(matrix, scen.formats), args.budget, args.eta, scen.corroboration)
    else:
        a = maxc_two_format(matrix, scen.formats, args.budget)
    if args.csv:
        _write_assignment_csv(args.csv, a, scen)
    _emit(_assignment_doc(a, scen), args)
    return EXIT_OK


def cmd_rules(args) -> int:
    scen = load_scenario(args.scenario)
    table = load_rule_table(args.table)
    matrix = build_matrix(scen)
    profile = preselect_formats(matrix, scen.formats)
    pool = ReportPool.from_profile(profile, matrix.distances, [r.id for r in scen.reporters])
    verdict = satisfy(table, pool)
    _emit(verdict.to_json(), args)
    return EXIT_INFEASIBLE if isinstance(verdict, Incredible) else EXIT_OK


def _controller(args, n: int) -> ControllerConfig:
    if args.mode == "maxcs":
        constraint = MaxCS(args.e_av, args.c_min)
    elif args.mode == "mincs":
        constraint = MinCS(args.c_av)
    else:
        p = [float(x) for x in args.p_av.split(",")]
        if len(p) == 1:
            p = p * n
        if len(p) != n:
            raise UsageError(f"--p-av needs 1 or {n} values")
        constraint = PowerAware(tuple(p), args.c_min, args.b_max, args.relax_bandwidth)
    return ControllerConfig(args.v, constraint, "decentralized" if args.decentralized else "centralized",
                            args.frame_solver)


def _simulate(args, v: float):
    scen = load_scenario(args.scenario)
    # without --dist every frame replays the scenario itself
    dist = load_distribution(args.dist, scen) if args.dist else distribution_from_json({"kind": "discrete"}, scen)
    args.v = v
    cfg = _controller(args, scen.n)
    return run(cfg, generate_events(dist, args.seed, args.frames))


def _trace_summary(trace, v: float) -> dict:
    return {
        "v": v,
        "frames": trace.k,
        "avg_cost": trace.avg_cost,
        "avg_credibility": trace.avg_credibility,
        "tail_avg_cost": trace.tail_avg_cost(),
        "tail_avg_credibility": trace.tail_avg_credibility(),
        "avg_y": list(trace.avg_y),
        "final_z": list(trace.final_z),
        "max_z": [float(x) for x in (trace.z.max(axis=0) if trace.k else trace.final_z)],
    }


def cmd_simulate(args) -> int:
    trace = _simulate(args, args.v)
    if args.csv:
        trace.write_csv(args.csv)
    _emit(_trace_summary(trace, args.v), args)
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = [float(x) for x in args.v_grid.split(",")]
    rows = [_trace_summary(_simulate(args, v), v) for v in grid]
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["v", "avg_credibility", "avg_cost", "tail_avg_cost", "max_z1", "final_z1"])
            for r in rows:
                out.writerow([f"{x:.6g}" for x in (r["v"], r["avg_credibility"], r["avg_cost"],
                                                    r["tail_avg_cost"], r["max_z"][0], r["final_z"][0])])
    _emit(rows, args)
    return EXIT_OK


def _parse_k(text: str | None):
    if not text:
        return None
    if ":" in text:
        lo, hi = (int(x) for x in text.split(":"))
        return list(range(lo, hi + 1))
    return [int(x) for x in text.split(",")]


def _formats_arg(value: str | None) -> FormatSet:
    if value is None or value == "study":
        return STUDY_FORMATS
    doc = read_json(value)
    return scenario_from_json({"reporters": [{"x": 0, "y": 0}], "event": {"x": 0, "y": 0, "h0": 1},
                               "formats": doc["formats"] if isinstance(doc, dict) else doc}).formats


def cmd_bench(args) -> int:
    if args.scenario:
        scenarios = [(Path(args.scenario).stem, load_scenario(args.scenario))]
    elif args.stand_in:
        scenarios = [(kind, stand_in_scenario(kind, args.seed)) for kind in args.stand_in.split(",")]
    else:
        formats = _formats_arg(args.formats)
        scenarios = [(f"random{i}", random_scenario(args.n, args.extent, formats, args.seed + i, args.h0))
                     for i in range(args.instances)]
    spec = BenchSpec(scenarios, _parse_k(args.k_grid), tuple(args.solvers.split(",")), args.repetitions)
    rows = run_bench(spec)
    if args.csv:
        write_rows(rows, args.csv)
    else:
        write_rows(rows, sys.stdout)
    if args.json:
        s = summarize(rows)
        Path(args.json).write_text(json.dumps(sig6({"mean_gap": s.mean_gap, "skipped": s.skipped,
                                                    "median_runtime_us": s.median_runtime_us}), indent=2) + "\n")
    return EXIT_OK


def cmd_gen_scenario(args) -> int:
    scen = random_scenario(args.n, args.extent, _formats_arg(args.formats), args.seed, args.h0, args.transform)
    if args.out:
        save_scenario(scen, args.out)
    else:
        print(json.dumps(scenario_to_json(scen), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--csv", help="write a CSV table here")
    common.add_argument("--json", help="also write the JSON result here")

    p = _Parser(prog="corroborate", description="Reporter/format selection for corroborated event reports.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    m = sub.add_parser("minc", parents=[common], help="cheapest selection reaching a credibility target")
    m.add_argument("--target", type=float, required=True)
    m.add_argument("--solver", choices=["dp", "mcf", "ann"], default="dp")
    m.add_argument("--zeta", type=float, help="credibility grid step")
    m.set_defaults(func=cmd_minc, needs_scenario=True)

    m = sub.add_parser("maxc", parents=[common], help="most credible selection within a budget")
    m.add_argument("--budget", type=float, required=True)
    m.add_argument("--solver", choices=["dp", "mcf", "ann", "two-format"], default="dp")
    m.add_argument("--eta", type=float, help="cost grid step")
    m.set_defaults(func=cmd_maxc, needs_scenario=True)

    m = sub.add_parser("rules", parents=[common], help="rule-based credibility verdict")
    m.add_argument("--table", required=True)
    m.set_defaults(func=cmd_rules, needs_scenario=True)

    def sim_args(q):
        q.add_argument("--dist", help="event distribution JSON (default: the scenario itself every frame)")
        q.add_argument("--mode", choices=["maxcs", "mincs", "power"], default="maxcs")
        q.add_argument("--frames", type=int, default=10_000)
        q.add_argument("--decentralized", action="store_true")
        q.add_argument("--frame-solver", choices=["dp", "ann"], default="dp")
        q.add_argument("--e-av", type=float, default=1.0)
        q.add_argument("--c-min", type=float, default=0.0)
        q.add_argument("--c-av", type=float, default=1.0)
        q.add_argument("--p-av", default="1.0", help="average power limit, one value or one per reporter")
        q.add_argument("--b-max", type=float, default=float("inf"))
        q.add_argument("--relax-bandwidth", action="store_true")

    m = sub.add_parser("simulate", parents=[common], help="run the frame controller")
    sim_args(m)
    m.add_argument("--v", type=float, default=10.0)
    m.set_defaults(func=cmd_simulate, needs_scenario=True)

    m = sub.add_parser("sweep", parents=[common], help="controller over a grid of V values")
    sim_args(m)
    m.add_argument("--v-grid", default="1,5,25,125")
    m.set_defaults(func=cmd_sweep, needs_scenario=True)

    m = sub.add_parser("bench", help="benchmarks")
    bsub = m.add_subparsers(dest="bench", required=True, parser_class=_Parser)
    g = bsub.add_parser("gap", parents=[common], help="optimality gap and runtime of minc solvers")
    g.add_argument("--n", type=int, default=100, help="reporters per random topology")
    g.add_argument("--extent", type=float, default=10.0, help="disc radius of random topologies")
    g.add_argument("--h0", type=float, default=1.0)
    g.add_argument("--instances", type=int, default=1)
    g.add_argument("--formats", help="'study' (default) or a JSON file with a formats list")
    g.add_argument("--stand-in", help="comma list of local,national,global synthetic events")
    g.add_argument("--k-grid", help="'lo:hi' or comma list (default: 1.. until saturation)")
    g.add_argument("--solvers", default="dp,ann")
    g.add_argument("--repetitions", type=int, default=1)
    g.set_defaults(func=cmd_bench, needs_scenario=False)

    m = sub.add_parser("gen-scenario", parents=[common], help="random scenario in a disc")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--extent", type=float, required=True)
    m.add_argument("--h0", type=float, default=1.0)
    m.add_argument("--formats", help="'study' (default) or a JSON file with a formats list")
    m.add_argument("--transform", choices=["none", "log10"], default="none")
    m.add_argument("--out")
    m.set_defaults(func=cmd_gen_scenario, needs_scenario=False)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.needs_scenario and not args.scenario:
            raise UsageError("--scenario is required")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (Infeasible, InfeasibleFrame) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParseError, ValueError, CorroborationError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
