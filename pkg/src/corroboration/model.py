"""Credibility, noise and corroboration model.

A report from reporter ``i`` in format ``j`` is worth
``gamma_j / max(d, h0) ** delta_j`` where ``d`` is the reporter-event
distance. Point noise sources scale that value by ``(1 - G)`` each, with
``G = 1 / (1 + d_noise) ** (1 / sigma)``. Everything downstream consumes a
:class:`CredibilityMatrix` built from a :class:`Scenario`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvariantViolation

Point = tuple[float, float]


def _dist(a: Point, b: Point) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


@dataclass(frozen=True)
class Format:
    id: int
    gamma: float
    delta: float
    cost: float

    def __post_init__(self):
        for name in ("gamma", "delta", "cost"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvariantViolation(f"format {self.id}: {name} must be positive, got {value}")


class FormatSet(tuple):
    """Ordered, validated tuple of :class:`Format`.

    Formats are sorted by id; gamma must be non-decreasing and delta
    strictly decreasing along that order.
    """

    def __new__(cls, formats: Sequence[Format]):
        formats = sorted(formats, key=lambda f: f.id)
        if not formats:
            raise InvariantViolation("a format set needs at least one format")
        ids = [f.id for f in formats]
        if len(set(ids)) != len(ids):
            raise InvariantViolation(f"duplicate format ids: {ids}")
        for a, b in zip(formats, formats[1:]):
            if b.gamma < a.gamma:
                raise InvariantViolation(
                    f"gamma must be non-decreasing: format {a.id} has {a.gamma}, format {b.id} has {b.gamma}"
                )
            if not b.delta < a.delta:
                raise InvariantViolation(
                    f"delta must be strictly decreasing: format {a.id} has {a.delta}, format {b.id} has {b.delta}"
                )
        return super().__new__(cls, formats)

    @classmethod
    def from_params(cls, gammas, deltas, costs) -> "FormatSet":
        if not len(gammas) == len(deltas) == len(costs):
            raise InvariantViolation("gamma, delta and cost lists differ in length")
        return cls([Format(j + 1, float(g), float(d), float(e))
                    for j, (g, d, e) in enumerate(zip(gammas, deltas, costs))])

    @property
    def gammas(self) -> np.ndarray:
        return np.array([f.gamma for f in self])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([f.delta for f in self])

    @property
    def costs(self) -> np.ndarray:
        return np.array([f.cost for f in self])


@dataclass(frozen=True)
class Reporter:
    id: int
    position: Point


@dataclass(frozen=True)
class Event:
    location: Point
    h0: float

    def __post_init__(self):
        if not (math.isfinite(self.h0) and self.h0 > 0):
            raise InvariantViolation(f"h0 must be positive, got {self.h0}")


@dataclass(frozen=True)
class NoiseSource:
    position: Point
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise InvariantViolation(f"noise sigma must be positive, got {self.sigma}")


@dataclass(frozen=True)
class CorroborationFn:
    """Map from summed credibility to corroborated credibility.

    ``kind="additive"`` is the identity. ``kind="table"`` is a
    piecewise-linear non-decreasing interpolation through ``points``,
    held flat outside the first and last breakpoints.
    """

    kind: str = "additive"
    points: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "additive":
            if self.points:
                raise InvariantViolation("additive corroboration takes no points")
            return
        if self.kind != "table":
            raise InvariantViolation(f"unknown corroboration kind {self.kind!r}")
        pts = tuple((float(x), float(y)) for x, y in self.points)
        if not pts:
            raise InvariantViolation("table corroboration needs at least one point")
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise InvariantViolation("table breakpoints must have strictly increasing x")
        if any(b < a for a, b in zip(ys, ys[1:])):
            raise InvariantViolation("table corroboration must be non-decreasing")
        object.__setattr__(self, "points", pts)

    @property
    def is_additive(self) -> bool:
        return self.kind == "additive"

    def __call__(self, total: float) -> float:
        if self.is_additive:
            return float(total)
        xs, ys = zip(*self.points)
        return float(np.interp(total, xs, ys))

    def required_sum(self, target: float) -> float:
        """Smallest summed credibility ``x >= 0`` with ``I(x) >= target``.

        Returns ``inf`` when the table never reaches ``target``. Because
        ``I`` is non-decreasing this turns any corroborated target into an
        equivalent additive one.
        """
        if self.is_additive:
            return max(float(target), 0.0)
        if self(0.0) >= target:
            return 0.0
        pts = self.points
        if pts[-1][1] < target:
            return math.inf
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if y1 >= target:
                if y1 == y0:
                    return max(x1, 0.0)
                return max(x0 + (target - y0) * (x1 - x0) / (y1 - y0), 0.0)
        # single point table whose value reaches target only at/after x0
        return max(pts[0][0], 0.0)

    def to_json(self) -> dict:
        if self.is_additive:
            return {"kind": "additive"}
        return {"kind": "table", "points": [list(p) for p in self.points]}


ADDITIVE = CorroborationFn()


@dataclass(frozen=True)
class Scenario:
    reporters: tuple[Reporter, ...]
    formats: FormatSet
    event: Event
    noise: tuple[NoiseSource, ...] = ()
    corroboration: CorroborationFn = ADDITIVE
    distance_transform: str = "none"

    def __post_init__(self):
        object.__setattr__(self, "reporters", tuple(self.reporters))
        object.__setattr__(self, "noise", tuple(self.noise))
        if not isinstance(self.formats, FormatSet):
            object.__setattr__(self, "formats", FormatSet(self.formats))
        if not self.reporters:
            raise InvariantViolation("a scenario needs at least one reporter")
        ids = [r.id for r in self.reporters]
        if len(set(ids)) != len(ids):
            raise InvariantViolation("reporter ids must be unique")
        if self.distance_transform not in ("none", "log10"):
            raise InvariantViolation(f"unknown distance_transform {self.distance_transform!r}")

    @property
    def n(self) -> int:
        return len(self.reporters)

    @property
    def r(self) -> int:
        return len(self.formats)


@dataclass(frozen=True, eq=False)
class CredibilityMatrix:
    """Post-noise credibility ``values[i, j]`` plus reporter-event distances."""

    values: np.ndarray
    distances: np.ndarray = field(default=None)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2:
            raise InvariantViolation(f"credibility values must be a 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise InvariantViolation("credibility values must be finite and non-negative")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.distances is None:
            distances = np.zeros(values.shape[0])
        else:
            distances = np.array(self.distances, dtype=float).reshape(-1)
        if distances.shape[0] != values.shape[0]:
            raise InvariantViolation("distances must have one entry per reporter")
        distances.setflags(write=False)
        object.__setattr__(self, "distances", distances)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]


def credibility(reporter: Reporter, fmt: Format, event: Event, *, transform: str = "none") -> float:
    """Noise-free credibility of one report (power-law decay clamped at h0)."""
    d = _transform(_dist(reporter.position, event.location), transform)
    return credibility_at(d, fmt, event.h0)


def credibility_at(d: float, fmt: Format, h0: float) -> float:
    return fmt.gamma / max(d, h0) ** fmt.delta


def _transform(d: float, transform: str) -> float:
    if transform == "log10":
        return math.log10(d) if d > 0 else -math.inf
    return d


def noise_factor(reporter: Reporter, source: NoiseSource) -> float:
    """Noise intensity ``G`` felt by a reporter; lies in (0, 1]."""
    d = _dist(reporter.position, source.position)
    return 1.0 / (1.0 + d) ** (1.0 / source.sigma)


def noisy_credibility(base: float, reporter: Reporter, noise: Sequence[NoiseSource]) -> float:
    out = base
    for source in noise:
        out *= 1.0 - noise_factor(reporter, source)
    return out


def build_matrix(scenario: Scenario) -> CredibilityMatrix:
    formats = scenario.formats
    event = scenario.event
    values = np.empty((scenario.n, scenario.r))
    distances = np.empty(scenario.n)
    for i, rep in enumerate(scenario.reporters):
        distances[i] = _transform(_dist(rep.position, event.location), scenario.distance_transform)
        for j, fmt in enumerate(formats):
            base = credibility_at(distances[i], fmt, event.h0)
            values[i, j] = noisy_credibility(base, rep, scenario.noise)
    return CredibilityMatrix(values, distances)


def corroborate(fn: CorroborationFn, credibilities: Sequence[float]) -> float:
    return fn(math.fsum(credibilities))


@dataclass(frozen=True)
class Thresholds:
    """Crossover distances between cost-efficiency of adjacent formats.

    ``values[k]`` is the distance at which formats ``k`` and ``k+1``
    (0-based) have equal credibility per unit cost. ``bands`` lists the
    formats that are actually most cost-efficient somewhere on
    ``[h0, inf)`` as ``(format_index, start, end)``; when the adjacent
    crossovers are increasing and above ``h0`` this is every format with
    ``values`` as breakpoints.
    """

    values: tuple[float, ...]
    bands: tuple[tuple[int, float, float], ...]

    @property
    def increasing(self) -> bool:
        return all(b > a for a, b in zip(self.values, self.values[1:]))

    @property
    def subset(self) -> tuple[int, ...]:
        return tuple(b[0] for b in self.bands)


def format_thresholds(formats: FormatSet, h0: float = 0.0) -> Thresholds:
    """Distances where the preferred (max credibility-per-cost) format changes.

    With equal gammas the crossover of formats ``k`` and ``k+1`` is
    ``(e_{k+1} / e_k) ** (1 / (delta_k - delta_{k+1}))``; unequal gammas
    add a ``gamma_k / gamma_{k+1}`` factor inside the power. Noise does
    not enter: it scales a reporter's whole row by one factor.
    """
    if len(formats) < 2:
        raise InvariantViolation("thresholds need at least two formats")
    g, dl, e = formats.gammas, formats.deltas, formats.costs
    values = tuple(
        float(((g[k] * e[k + 1]) / (g[k + 1] * e[k])) ** (1.0 / (dl[k] - dl[k + 1])))
        for k in range(len(formats) - 1)
    )
    return Thresholds(values, _envelope(g, dl, e, h0))


def _envelope(g, dl, e, h0) -> tuple[tuple[int, float, float], ...]:
    # log(c_k / e_k) = a_k - delta_k * t with t = log d; upper envelope over t >= log h0.
    a = np.log(g) - np.log(e)
    t0 = math.log(h0) if h0 > 0 else -math.inf
    r = len(a)

    def score(k, t):
        return a[k] - dl[k] * t

    bands = []
    t = t0
    if not math.isfinite(t):
        # no clamp: evaluate left of every pairwise crossing
        cross = [(a[k] - a[m]) / (dl[k] - dl[m]) for k in range(r) for m in range(k + 1, r)]
        t = min(cross) - 1.0
    current = max(range(r), key=lambda k: (score(k, t), -k))
    start = t0
    while True:
        # next format overtaking `current`: any m with smaller delta, earliest crossing after t
        best = None
        for m in range(current + 1, r):
            tc = (a[current] - a[m]) / (dl[current] - dl[m])
            tc = max(tc, t)
            if best is None or tc < best[0] - 1e-15 or (abs(tc - best[0]) <= 1e-15 and m > best[1]):
                best = (tc, m)
        if best is None:
            bands.append((current, math.exp(start), math.inf))
            break
        tc, m = best
        # several formats crossing at one point: jump straight to the flattest
        if tc > start:
            bands.append((current, math.exp(start), math.exp(tc)))
        start, t, current = tc, tc, m
    return tuple(bands)


def preferred_format_at(d: float, formats: FormatSet, h0: float) -> int:
    """0-based index of the format with largest credibility per unit cost at distance ``d``."""
    ratios = [credibility_at(d, f, h0) / f.cost for f in formats]
    return int(np.argmax(ratios))
