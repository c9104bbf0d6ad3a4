"""Rule-based (boolean) credibility.

A rule table splits every format's applicable distance range into
categories (nested upper bounds) and lists rules, each demanding a number
of reports per category. A report at distance ``d`` can fill any category
of its format whose bound is at least ``d``, so a close report may stand
in for a far one but not the other way round.

When no rule is met directly, lower-format reporters left over can be
switched to a higher format. Scanning a rule's signed surplus/deficit
from the lowest format's tightest category to the highest format's
loosest one, the rule is reachable this way iff the running sum never
drops below zero.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import CategoryMismatch, Infeasible, InvariantViolation
from .model import CredibilityMatrix, FormatSet
from .structured import PreferredProfile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Category:
    format: int  # 0-based position of the format in the table
    bound: float

    @property
    def label(self) -> str:
        return f"{self.format + 1}:{self.bound:g}"


@dataclass(frozen=True)
class Rule:
    name: str
    cost: float
    requirements: tuple[int, ...]


@dataclass(frozen=True)
class RuleTable:
    """Categories per format (bounds increasing) and rules sorted by cost."""

    bounds: tuple[tuple[float, ...], ...]
    rules: tuple[Rule, ...]
    format_costs: tuple[float, ...] | None = None
    format_names: tuple[str, ...] | None = None

    def __post_init__(self):
        bounds = tuple(tuple(float(b) for b in fb) for fb in self.bounds)
        for j, fb in enumerate(bounds):
            if any(b2 <= b1 for b1, b2 in zip(fb, fb[1:])):
                raise InvariantViolation(f"format {j + 1}: category bounds must increase")
        object.__setattr__(self, "bounds", bounds)
        width = sum(len(fb) for fb in bounds)
        for rule in self.rules:
            if len(rule.requirements) != width:
                raise CategoryMismatch(f"{rule.name}: {len(rule.requirements)} counts for {width} categories")
            if any(c < 0 for c in rule.requirements):
                raise InvariantViolation(f"{rule.name}: negative requirement")
        object.__setattr__(self, "rules", tuple(sorted(self.rules, key=lambda r: r.cost)))
        if self.format_costs is not None:
            for rule in self.rules:
                estimate = self.estimate_cost(rule)
                if not math.isclose(estimate, rule.cost, rel_tol=1e-9):
                    log.warning("%s: stated cost %g, reports cost %g", rule.name, rule.cost, estimate)

    @property
    def categories(self) -> tuple[Category, ...]:
        return tuple(Category(j, b) for j, fb in enumerate(self.bounds) for b in fb)

    @property
    def num_formats(self) -> int:
        return len(self.bounds)

    def estimate_cost(self, rule: Rule) -> float:
        costs = self.format_costs
        return math.fsum(n * costs[cat.format] for n, cat in zip(rule.requirements, self.categories))

    def rule(self, name: str) -> Rule:
        for r in self.rules:
            if r.name == name:
                return r
        raise KeyError(name)

    @classmethod
    def from_json(cls, doc: dict) -> "RuleTable":
        formats = doc.get("formats") or []
        ids = [int(f["id"]) for f in formats] if formats else sorted(int(k) for k in doc["categories"])
        bounds = [tuple(doc["categories"][str(i)]) for i in ids]
        table_cats = [f"{pos + 1}:{float(b):g}" for pos, fb in enumerate(bounds) for b in fb]
        rules = []
        for k, r in enumerate(doc["rules"]):
            req = dict(r.get("requirements", {}))
            counts = []
            for pos, fb in enumerate(bounds):
                for b in fb:
                    counts.append(int(req.pop(f"{ids[pos]}:{float(b):g}", 0)))
            if req:
                raise CategoryMismatch(f"rule {r.get('name', k)}: unknown categories {sorted(req)}; known {table_cats}")
            rules.append(Rule(r.get("name", f"rule{k + 1}"), float(r["cost"]), tuple(counts)))
        costs = tuple(float(f["cost"]) for f in formats) if formats and all("cost" in f for f in formats) else None
        names = tuple(f.get("name", str(f["id"])) for f in formats) if formats else None
        return cls(tuple(bounds), tuple(rules), costs, names)


@dataclass(frozen=True)
class Report:
    reporter: int
    format: int  # 0-based
    distance: float


@dataclass(frozen=True)
class ReportPool:
    reports: tuple[Report, ...]

    @classmethod
    def from_profile(cls, profile: PreferredProfile, distances: Sequence[float],
                     reporter_ids: Sequence[int] | None = None) -> "ReportPool":
        ids = list(range(profile.n)) if reporter_ids is None else list(reporter_ids)
        return cls(tuple(Report(ids[i], int(profile.formats[i]), float(distances[i])) for i in range(profile.n)))

    def counts(self, table: RuleTable) -> tuple[int, ...]:
        """Reports per category, each counted in the tightest category it fits."""
        cats = table.categories
        out = [0] * len(cats)
        for rep in self.reports:
            pos = _home(table, rep)
            if pos is not None:
                out[pos] += 1
        return tuple(out)

    def with_formats(self, changes: dict[int, int]) -> "ReportPool":
        return ReportPool(tuple(Report(r.reporter, changes.get(r.reporter, r.format), r.distance)
                                for r in self.reports))


def _home(table: RuleTable, rep: Report) -> int | None:
    if rep.format >= table.num_formats:
        raise CategoryMismatch(f"report format {rep.format + 1} not in the table")
    offset = sum(len(fb) for fb in table.bounds[: rep.format])
    for k, b in enumerate(table.bounds[rep.format]):
        if rep.distance <= b:
            return offset + k
    return None


@dataclass(frozen=True)
class Fill:
    """Outcome of filling one rule from a pool.

    ``got[c]`` reports placed in category ``c``; ``signed[c]`` is the
    deficit (negative) where a category fell short, or the count of unused
    reports originating there (positive).
    """

    rule: Rule
    got: tuple[int, ...]
    signed: tuple[int, ...]
    used: tuple[int, ...]  # reporter ids placed in the rule
    spare: tuple[Report, ...]  # usable reports left over

    @property
    def satisfied(self) -> bool:
        return all(s >= 0 for s in self.signed) and all(g >= n for g, n in zip(self.got, self.rule.requirements))


def fill_rule(table: RuleTable, rule: Rule, pool: ReportPool) -> Fill:
    cats = table.categories
    got = [0] * len(cats)
    signed = [0] * len(cats)
    used: list[int] = []
    spare: list[Report] = []
    offset = 0
    for j, fb in enumerate(table.bounds):
        mine = [(rep, _home(table, rep)) for rep in pool.reports if rep.format == j]
        usable = [(rep, h) for rep, h in mine if h is not None]
        taken = set()
        for k, b in enumerate(fb):
            need = rule.requirements[offset + k]
            # farthest eligible first keeps close reporters spare for upgrades
            eligible = sorted((x for x in usable if x[0].reporter not in taken and x[0].distance <= b),
                              key=lambda x: (-x[0].distance, x[0].reporter))
            for rep, _ in eligible[:need]:
                taken.add(rep.reporter)
                used.append(rep.reporter)
            got[offset + k] = min(need, len(eligible))
            if len(eligible) < need:
                signed[offset + k] = got[offset + k] - need
        for rep, h in usable:
            if rep.reporter not in taken:
                signed[h] += 1
                spare.append(rep)
        offset += len(fb)
    return Fill(rule, tuple(got), tuple(signed), tuple(used), tuple(spare))


def fill(table: RuleTable, pool: ReportPool) -> list[Fill]:
    return [fill_rule(table, rule, pool) for rule in table.rules]


def adjustable(rule_fill: Fill) -> bool:
    running = 0
    for s in rule_fill.signed:
        running += s
        if running < 0:
            return False
    return True


@dataclass(frozen=True)
class Credible:
    rule: str
    upgrades: dict = field(default_factory=dict)  # reporter id -> new 0-based format
    activated: tuple[int, ...] = ()
    cost: float | None = None

    def to_json(self) -> dict:
        return {
            "verdict": "credible",
            "rule": self.rule,
            "upgrades": [{"reporter": k, "format": v + 1} for k, v in sorted(self.upgrades.items())],
            "activated": list(self.activated),
            "cost": self.cost,
        }


@dataclass(frozen=True)
class Incredible:
    def to_json(self) -> dict:
        return {"verdict": "incredible"}


def upgrade_plan(table: RuleTable, rule_fill: Fill) -> dict[int, int]:
    """Switch spare lower-format reporters up to cover each deficit, closest first."""
    cats = table.categories
    plan: dict[int, int] = {}
    spare_by_cat: dict[int, list[Report]] = {}
    for rep in rule_fill.spare:
        spare_by_cat.setdefault(_home(table, rep), []).append(rep)
    available: list[Report] = []
    for c, cat in enumerate(cats):
        available.extend(spare_by_cat.get(c, []))
        short = -rule_fill.signed[c] if rule_fill.signed[c] < 0 else 0
        if not short:
            continue
        lower = sorted((r for r in available if r.format < cat.format), key=lambda r: (r.distance, r.reporter))
        if len(lower) < short:
            raise Infeasible(f"{rule_fill.rule.name}: not enough spare reporters to upgrade")
        for rep in lower[:short]:
            plan[rep.reporter] = cat.format
            available.remove(rep)
    return plan


def satisfy(table: RuleTable, pool: ReportPool) -> Credible | Incredible:
    """Cheapest directly satisfied rule, else cheapest rule reachable by upgrades."""
    fills = fill(table, pool)
    for f in fills:
        if f.satisfied:
            return Credible(f.rule.name, {}, tuple(sorted(f.used)), _cost(table, pool, f.used))
    for f in fills:
        if not adjustable(f):
            continue
        try:
            plan = upgrade_plan(table, f)
        except Infeasible:
            continue
        upgraded = pool.with_formats(plan)
        check = fill_rule(table, f.rule, upgraded)
        if not check.satisfied:
            # an upgraded reporter sits beyond the categories it was meant to fill
            log.info("%s: upgrade plan does not satisfy the rule at real distances", f.rule.name)
            continue
        return Credible(f.rule.name, plan, tuple(sorted(check.used)), _cost(table, upgraded, check.used))
    return Incredible()


def _cost(table: RuleTable, pool: ReportPool, used) -> float | None:
    if table.format_costs is None:
        return None
    fmt = {r.reporter: r.format for r in pool.reports}
    return math.fsum(table.format_costs[fmt[u]] for u in used)


def upgrade_to_feasible(profile: PreferredProfile, matrix: CredibilityMatrix, formats: FormatSet,
                        target: float) -> PreferredProfile:
    """Promote all format-``i`` reporters to ``i+1`` (i = 1, 2, ...) until the
    preferred reports reach ``target``; Infeasible if format R is not enough."""
    ks = np.array(profile.formats, dtype=int)
    values = matrix.values
    rows = np.arange(profile.n)
    e = formats.costs

    def total(k):
        return math.fsum(values[rows, k])

    level = 0
    while total(ks) < target and level < len(formats) - 1:
        mask = ks == level
        if np.any(values[mask, level + 1] < values[mask, level]):
            raise InvariantViolation(
                f"promoting format {level + 1} to {level + 2} lowers credibility for some reporter"
            )
        ks = np.where(mask, level + 1, ks)
        level += 1
    if total(ks) < target:
        raise Infeasible("target exceeds the credibility of all reporters at their promoted formats")
    return PreferredProfile(ks, values[rows, ks], e[ks])
