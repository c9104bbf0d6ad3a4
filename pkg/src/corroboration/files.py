"""JSON scenario, rule-table and event-distribution files, plus random scenarios."""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, ParseError
from .model import (
    ADDITIVE,
    CorroborationFn,
    Event,
    Format,
    FormatSet,
    NoiseSource,
    Reporter,
    Scenario,
    build_matrix,
)
from .renewals import DiscreteDistribution, EventDistribution, FrameEvent, JitterDistribution, MarkovDistribution
from .rules import RuleTable

# four formats used throughout the approximation-gap study
STUDY_FORMATS = FormatSet.from_params([1, 1, 1, 1], [2, 1.5, 1, 0.5], [1, 2.2, 5.4, 13.7])


def read_json(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


def _need(doc: dict, key: str, where: str):
    if not isinstance(doc, dict) or key not in doc:
        raise ParseError(f"{where}: missing key {key!r}")
    return doc[key]


def _num(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _point(doc: dict, where: str) -> tuple[float, float]:
    return _num(_need(doc, "x", where), f"{where}.x"), _num(_need(doc, "y", where), f"{where}.y")


def scenario_from_json(doc: dict, source: str = "scenario") -> Scenario:
    """Validate a parsed scenario document; messages name the offending entry."""
    if not isinstance(doc, dict):
        raise ParseError(f"{source}: top level must be an object")
    reporters = []
    for i, r in enumerate(_need(doc, "reporters", source)):
        where = f"{source}: reporters[{i}]"
        reporters.append(Reporter(int(r.get("id", i + 1)), _point(r, where)))
    formats = []
    for j, f in enumerate(_need(doc, "formats", source)):
        where = f"{source}: formats[{j}]"
        try:
            formats.append(Format(int(f.get("id", j + 1)), _num(_need(f, "gamma", where), where),
                                  _num(_need(f, "delta", where), where), _num(_need(f, "cost", where), where)))
        except InvariantViolation as exc:
            raise InvariantViolation(f"{where}: {exc}") from None
    ev = _need(doc, "event", source)
    where = f"{source}: event"
    noise = []
    for p, s in enumerate(doc.get("noise", [])):
        w = f"{source}: noise[{p}]"
        try:
            noise.append(NoiseSource(_point(s, w), _num(_need(s, "sigma", w), w)))
        except InvariantViolation as exc:
            raise InvariantViolation(f"{w}: {exc}") from None
    corr = doc.get("corroboration", {"kind": "additive"})
    try:
        event = Event(_point(ev, where), _num(_need(ev, "h0", where), where))
        fn = CorroborationFn(corr.get("kind", "additive"), tuple(tuple(p) for p in corr.get("points", ())))
        fset = FormatSet(formats)
        return Scenario(tuple(reporters), fset, event, tuple(noise), fn, doc.get("distance_transform", "none"))
    except InvariantViolation as exc:
        raise InvariantViolation(f"{source}: {exc}") from None


def scenario_to_json(scenario: Scenario) -> dict:
    return {
        "reporters": [{"id": r.id, "x": r.position[0], "y": r.position[1]} for r in scenario.reporters],
        "formats": [{"id": f.id, "gamma": f.gamma, "delta": f.delta, "cost": f.cost} for f in scenario.formats],
        "event": {"x": scenario.event.location[0], "y": scenario.event.location[1], "h0": scenario.event.h0},
        "noise": [{"x": s.position[0], "y": s.position[1], "sigma": s.sigma} for s in scenario.noise],
        "corroboration": scenario.corroboration.to_json(),
        "distance_transform": scenario.distance_transform,
    }


def normalize_scenario(doc: dict) -> dict:
    """Canonical form of a scenario document (defaults filled, formats sorted by id)."""
    return scenario_to_json(scenario_from_json(doc))


def load_scenario(path) -> Scenario:
    return scenario_from_json(read_json(path), str(path))


def save_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_json(scenario), indent=2) + "\n")


def random_scenario(n: int, extent: float, formats: FormatSet = STUDY_FORMATS, seed: int | None = None,
                    h0: float = 1.0, distance_transform: str = "none") -> Scenario:
    """``n`` reporters uniform in the disc of radius ``extent`` around an event at the origin."""
    if n < 1:
        raise InvariantViolation("a random scenario needs at least one reporter")
    rng = np.random.default_rng(seed)
    radius = extent * np.sqrt(rng.random(n))
    angle = rng.uniform(0.0, 2 * math.pi, n)
    reporters = tuple(Reporter(i + 1, (float(r * math.cos(a)), float(r * math.sin(a))))
                      for i, (r, a) in enumerate(zip(radius, angle)))
    return Scenario(reporters, formats, Event((0.0, 0.0), h0), (), ADDITIVE, distance_transform)


# reporter counts of the three news-derived events; log10-distance spreads are synthetic
STAND_INS = {
    "local": (31, (2.0, 3.5)),
    "national": (63, (2.5, 6.0)),
    "global": (88, (3.0, 7.0)),
}


def stand_in_scenario(kind: str, seed: int | None = 0, formats: FormatSet = STUDY_FORMATS) -> Scenario:
    """Synthetic event with a given reporter count and log10-distance spread (h0 = 100 m)."""
    n, (lo, hi) = STAND_INS[kind]
    rng = np.random.default_rng(seed)
    dist = 10.0 ** rng.uniform(lo, hi, n)
    angle = rng.uniform(0.0, 2 * math.pi, n)
    reporters = tuple(Reporter(i + 1, (float(d * math.cos(a)), float(d * math.sin(a))))
                      for i, (d, a) in enumerate(zip(dist, angle)))
    return Scenario(reporters, formats, Event((0.0, 0.0), 2.0), (), ADDITIVE, "log10")


def load_rule_table(path) -> RuleTable:
    doc = read_json(path)
    try:
        return RuleTable.from_json(doc)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{path}: malformed rule table ({exc})") from None


def _outcome(doc: dict, base: Scenario | None, where: str) -> tuple[FrameEvent, float]:
    prob = float(doc.get("probability", 1.0))
    label = str(doc.get("label", ""))
    if "values" in doc:
        costs = doc.get("costs", None if base is None else list(base.formats.costs))
        if costs is None:
            raise ParseError(f"{where}: explicit values need costs")
        event = FrameEvent(doc["values"], costs, power=doc.get("power"), bandwidth=doc.get("bandwidth"), label=label)
        return event, prob
    if "scenario" in doc:
        scen = scenario_from_json(doc["scenario"], where)
    elif "positions" in doc:
        if base is None:
            raise ParseError(f"{where}: positions need a base scenario")
        pos = doc["positions"]
        if len(pos) != base.n:
            raise ParseError(f"{where}: {len(pos)} positions for {base.n} reporters")
        reporters = tuple(Reporter(r.id, (float(p[0]), float(p[1]))) for r, p in zip(base.reporters, pos))
        scen = Scenario(reporters, base.formats, base.event, base.noise, base.corroboration, base.distance_transform)
    elif base is not None:
        scen = base
    else:
        raise ParseError(f"{where}: outcome needs values, scenario or positions")
    values = build_matrix(scen).values
    scale = float(doc.get("cost_scale", 1.0))
    event = FrameEvent(values, scen.formats.costs * scale, power=doc.get("power"),
                       bandwidth=doc.get("bandwidth"), label=label)
    return event, prob


def distribution_from_json(doc: dict, base: Scenario | None = None, source: str = "distribution") -> EventDistribution:
    """Event distributions: ``discrete`` (outcomes with probabilities),
    ``markov`` (outcomes plus a transition matrix) or ``jitter`` (Gaussian
    moves of the base scenario's reporters)."""
    kind = doc.get("kind", "discrete")
    timing = {"duration": doc.get("duration", "fixed"), "duration_mean": float(doc.get("duration_mean", 1.0))}
    if timing["duration"] not in ("fixed", "exponential"):
        raise ParseError(f"{source}: duration must be fixed or exponential")
    if kind == "jitter":
        if base is None:
            raise ParseError(f"{source}: jitter needs a base scenario")
        return JitterDistribution(base, float(doc.get("position_sigma", 0.0)), float(doc.get("cost_spread", 0.0)),
                                  **timing)
    outcomes = doc.get("outcomes") or [{}]
    parsed = [_outcome(o, base, f"{source}: outcomes[{i}]") for i, o in enumerate(outcomes)]
    events = [e for e, _ in parsed]
    if kind == "discrete":
        probs = [p for _, p in parsed]
        if len(events) > 1 and not any("probability" in o for o in outcomes):
            probs = None
        return DiscreteDistribution(events, probs, **timing)
    if kind == "markov":
        return MarkovDistribution(events, _need(doc, "transitions", source), int(doc.get("start", 0)), **timing)
    raise ParseError(f"{source}: unknown distribution kind {kind!r}")


def load_distribution(path, base: Scenario | None = None) -> EventDistribution:
    return distribution_from_json(read_json(path), base, str(path))
