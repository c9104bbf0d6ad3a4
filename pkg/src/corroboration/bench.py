"""Optimality-gap and runtime sweep of the approximate MinC solver against the exact DP."""

from __future__ import annotations

import csv
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .assignment import Assignment
from .dp import MinCProblem, default_grid, solve_minc_dp
from .errors import CorroborationError, Infeasible
from .flow import solve_minc_mcf
from .model import FormatSet, Scenario, build_matrix
from .structured import preselect_formats, solve_minc_ann

REFERENCE = "dp"
CSV_COLUMNS = ("event", "k", "solver", "feasible", "cost", "credibility", "runtime_us", "gap")


def _dp(matrix, formats, target, zeta, corroboration):
    return solve_minc_dp(MinCProblem(matrix, formats, target, zeta, corroboration))


def _ann(matrix, formats, target, zeta, corroboration):
    return solve_minc_ann(preselect_formats(matrix, formats), target, zeta, corroboration)


def _mcf(matrix, formats, target, zeta, corroboration):
    return solve_minc_mcf(matrix, formats, target, corroboration)


SOLVERS: dict[str, Callable] = {"dp": _dp, "ann": _ann, "mcf": _mcf}


@dataclass(frozen=True)
class BenchSpec:
    """Scenarios to sweep, each paired with a label.

    The target for grid point ``k`` is the credibility of ``k`` reports of
    the priciest format taken at distance ``h0``. ``k_grid=None`` sweeps
    ``k = 1, 2, ...`` until the exact solver saturates.
    """

    scenarios: Sequence[tuple[str, Scenario]]
    k_grid: Sequence[int] | None = None
    solvers: Sequence[str] = ("dp", "ann")
    repetitions: int = 1
    max_k: int = 10_000

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be at least 1")
        if self.k_grid is not None and any(int(k) != k or k < 1 for k in self.k_grid):
            raise ValueError("k values must be integers >= 1")
        unknown = set(self.solvers) - set(SOLVERS)
        if unknown:
            raise ValueError(f"unknown solvers {sorted(unknown)}")


@dataclass(frozen=True)
class BenchRow:
    event: str
    k: int
    solver: str
    feasible: bool
    cost: float | None
    credibility: float | None
    runtime_us: float | None
    gap: float | None = None
    error: str | None = field(default=None, compare=False)


def k_target(formats: FormatSet, h0: float, k: int) -> float:
    top = formats[-1]
    return k * top.gamma / h0 ** top.delta


def _timed(fn, reps: int) -> tuple[Assignment, float]:
    times, out = [], None
    for _ in range(reps):
        start = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - start)
    return out, statistics.median(times) * 1e6


def bench_scenario(label: str, scenario: Scenario, spec: BenchSpec) -> list[BenchRow]:
    matrix = build_matrix(scenario)
    formats = scenario.formats
    zeta = default_grid(matrix)
    solvers = [REFERENCE] + [s for s in spec.solvers if s != REFERENCE]
    grid = spec.k_grid if spec.k_grid is not None else range(1, spec.max_k + 1)
    rows: list[BenchRow] = []
    for k in grid:
        target = k_target(formats, scenario.event.h0, int(k))
        ref_cost = None
        saturated = False
        for name in solvers:
            fn = SOLVERS[name]
            try:
                result, us = _timed(lambda: fn(matrix, formats, target, zeta, scenario.corroboration),
                                    spec.repetitions)
            except Infeasible as exc:
                if name == REFERENCE:
                    saturated = True
                rows.append(BenchRow(label, int(k), name, False, None, None, None, None, str(exc)))
                continue
            except CorroborationError as exc:
                rows.append(BenchRow(label, int(k), name, False, None, None, None, None, str(exc)))
                continue
            if name == REFERENCE:
                ref_cost = result.total_cost
            gap = None
            if ref_cost is not None:
                gap = 0.0 if name == REFERENCE else (result.total_cost - ref_cost) / ref_cost if ref_cost > 0 else 0.0
            rows.append(BenchRow(label, int(k), name, True, result.total_cost, result.total_credibility, us, gap))
        if saturated and spec.k_grid is None:
            break
    return [r for r in rows if r.solver in spec.solvers or r.solver == REFERENCE]


def run_bench(spec: BenchSpec, csv_path=None) -> list[BenchRow]:
    rows: list[BenchRow] = []
    for label, scenario in spec.scenarios:
        rows.extend(bench_scenario(label, scenario, spec))
    order = {name: i for i, name in enumerate([REFERENCE, *spec.solvers])}
    rows.sort(key=lambda r: (r.event, r.k, order.get(r.solver, len(order))))
    if csv_path is not None:
        write_rows(rows, csv_path)
    return rows


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def write_rows(rows: Sequence[BenchRow], path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        out = csv.writer(fh)
        out.writerow(CSV_COLUMNS)
        for r in rows:
            out.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])
    finally:
        if own:
            fh.close()


@dataclass(frozen=True)
class GapSummary:
    """Per-event mean gap of one solver over the k values where both it and the reference succeed."""

    mean_gap: dict
    skipped: dict  # k values where the reference is feasible but the solver is not
    median_runtime_us: dict


def summarize(rows: Sequence[BenchRow], solver: str = "ann") -> GapSummary:
    gaps: dict[str, list[float]] = {}
    skipped: dict[str, int] = {}
    ref_ok = {(r.event, r.k) for r in rows if r.solver == REFERENCE and r.feasible}
    runtimes: dict[str, list[float]] = {}
    for r in rows:
        if r.feasible and r.runtime_us is not None:
            runtimes.setdefault(r.solver, []).append(r.runtime_us)
        if r.solver != solver or (r.event, r.k) not in ref_ok:
            continue
        if r.feasible:
            gaps.setdefault(r.event, []).append(r.gap)
        else:
            skipped[r.event] = skipped.get(r.event, 0) + 1
    mean = {e: math.fsum(g) / len(g) for e, g in gaps.items() if g}
    med = {s: statistics.median(v) for s, v in runtimes.items()}
    return GapSummary(mean, skipped, med)
