"""Frame-by-frame stochastic control with virtual queues.

Every frame an event ``omega = (c, e)`` is revealed and the controller
picks one option (idle or a format) per reporter by minimizing
``V * y0 + sum_m Z_m * y_m``. Each virtual queue ``Z_m`` then absorbs the
frame's constraint attribute ``y_m`` via ``Z <- max(Z + y, 0)``; bounded
queues imply the time-average constraints hold.

Three problems are wired in:

``MaxCS``      maximize average credibility, average cost <= e_av,
               per-frame credibility >= c_min.
``MinCS``      minimize average cost, average credibility >= c_av.
``PowerAware`` maximize average credibility, per-reporter average power
               <= P_n (normalized by frame length), per-frame bandwidth
               <= b_max (or, relaxed, on average) and credibility >= c_min.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .assignment import IDLE
from .dp import _SNAP, minc_core, round_up, truncate
from .errors import Infeasible, InfeasibleFrame, InvariantViolation
from .model import CredibilityMatrix, Reporter, Scenario, build_matrix
from .structured import preselect_formats


# ---------------------------------------------------------------------------
# events


@dataclass(frozen=True, eq=False)
class FrameEvent:
    """One realized event.

    ``power`` and ``bandwidth`` are per-reporter, per-format (``N x R``);
    they default to the format costs when omitted.
    """

    values: np.ndarray
    costs: np.ndarray
    duration: float = 1.0
    power: np.ndarray | None = None
    bandwidth: np.ndarray | None = None
    label: str = ""
    index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        costs = np.asarray(self.costs, dtype=float)
        if values.ndim != 2 or costs.shape != (values.shape[1],):
            raise InvariantViolation("event needs an N x R credibility matrix and R costs")
        if not (np.all(np.isfinite(values)) and np.all(np.isfinite(costs))):
            raise InvariantViolation("event entries must be finite")
        if np.any(costs < 0) or np.any(values < 0):
            raise InvariantViolation("event costs and credibilities must be non-negative")
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise InvariantViolation("frame duration must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "costs", costs)
        for name in ("power", "bandwidth"):
            arr = getattr(self, name)
            arr = np.broadcast_to(costs, values.shape) if arr is None else np.asarray(arr, dtype=float)
            if arr.shape != values.shape or np.any(arr < 0):
                raise InvariantViolation(f"{name} must be a non-negative N x R matrix")
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def at(self, index: int, duration: float | None = None) -> "FrameEvent":
        return FrameEvent(self.values, self.costs, self.duration if duration is None else duration,
                          self.power, self.bandwidth, self.label, index)

    @classmethod
    def from_scenario(cls, scenario: Scenario, label: str = "") -> "FrameEvent":
        return cls(build_matrix(scenario).values, scenario.formats.costs, label=label)


class EventDistribution:
    """Source of i.i.d. (or ergodic) frame events.

    Subclasses implement :meth:`stream`, which receives a numpy Generator
    and yields events forever. Frame lengths are fixed at ``duration_mean``
    unless ``duration`` is ``"exponential"``.
    """

    duration: str = "fixed"
    duration_mean: float = 1.0

    def stream(self, rng: np.random.Generator) -> Iterator[FrameEvent]:
        raise NotImplementedError

    def _durations(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.duration == "exponential":
            return rng.exponential(self.duration_mean, size)
        return np.full(size, float(self.duration_mean))


_BLOCK = 4096


@dataclass(eq=False)
class DiscreteDistribution(EventDistribution):
    """Finitely many outcomes drawn with given probabilities (one outcome = deterministic)."""

    outcomes: Sequence[FrameEvent]
    probabilities: Sequence[float] | None = None
    duration: str = "fixed"
    duration_mean: float = 1.0

    def __post_init__(self):
        if not self.outcomes:
            raise InvariantViolation("a discrete distribution needs at least one outcome")
        p = np.full(len(self.outcomes), 1 / len(self.outcomes)) if self.probabilities is None \
            else np.asarray(self.probabilities, dtype=float)
        if p.shape != (len(self.outcomes),) or np.any(p < 0) or not math.isclose(p.sum(), 1.0, rel_tol=1e-9):
            raise InvariantViolation("probabilities must be non-negative and sum to 1")
        self.probabilities = p
        self._cdf = np.cumsum(p)
        self._cdf[-1] = 1.0

    def stream(self, rng):
        while True:
            picks = np.searchsorted(self._cdf, rng.random(_BLOCK), side="right")
            durations = self._durations(rng, _BLOCK)
            for idx, t in zip(picks, durations):
                yield self.outcomes[idx].at(0, float(t)), int(idx)


@dataclass(eq=False)
class MarkovDistribution(EventDistribution):
    """Outcomes follow a Markov chain (ergodic but not i.i.d.)."""

    outcomes: Sequence[FrameEvent]
    transitions: Sequence[Sequence[float]]
    start: int = 0
    duration: str = "fixed"
    duration_mean: float = 1.0

    def __post_init__(self):
        p = np.asarray(self.transitions, dtype=float)
        m = len(self.outcomes)
        if p.shape != (m, m) or np.any(p < 0) or not np.allclose(p.sum(axis=1), 1.0):
            raise InvariantViolation("transition matrix must be square and row-stochastic")
        self.transitions = p
        self._cdf = np.cumsum(p, axis=1)
        self._cdf[:, -1] = 1.0

    def stream(self, rng):
        state = self.start
        while True:
            draws = rng.random(_BLOCK)
            durations = self._durations(rng, _BLOCK)
            for u, t in zip(draws, durations):
                yield self.outcomes[state].at(0, float(t)), state
                state = int(np.searchsorted(self._cdf[state], u, side="right"))


@dataclass(eq=False)
class JitterDistribution(EventDistribution):
    """Reporter positions jittered by isotropic Gaussian noise around a base scenario.

    Format costs are optionally scaled by a factor drawn uniformly from
    ``[1 - cost_spread, 1 + cost_spread]`` each frame.
    """

    scenario: Scenario
    position_sigma: float = 0.0
    cost_spread: float = 0.0
    duration: str = "fixed"
    duration_mean: float = 1.0

    def stream(self, rng):
        base = self.scenario
        pos = np.array([r.position for r in base.reporters], dtype=float)
        while True:
            moved = pos + rng.normal(0.0, self.position_sigma, pos.shape) if self.position_sigma > 0 else pos
            reporters = tuple(Reporter(r.id, (float(x), float(y))) for r, (x, y) in zip(base.reporters, moved))
            scen = Scenario(reporters, base.formats, base.event, base.noise, base.corroboration,
                            base.distance_transform)
            scale = rng.uniform(1 - self.cost_spread, 1 + self.cost_spread) if self.cost_spread > 0 else 1.0
            t = float(self._durations(rng, 1)[0])
            yield FrameEvent(build_matrix(scen).values, base.formats.costs * scale, t), 0


def generate_events(dist: EventDistribution, seed: int | None, k: int) -> Iterator[FrameEvent]:
    """First ``k`` events of the stream seeded with ``seed``; frames are numbered from 1."""
    rng = np.random.default_rng(seed)
    for index, (event, _) in zip(range(1, k + 1), dist.stream(rng)):
        yield event.at(index)


def generate_labeled(dist: EventDistribution, seed: int | None, k: int) -> Iterator[tuple[FrameEvent, int]]:
    """Like :func:`generate_events` but also yields the outcome index."""
    rng = np.random.default_rng(seed)
    for index, (event, which) in zip(range(1, k + 1), dist.stream(rng)):
        yield event.at(index), which


# ---------------------------------------------------------------------------
# queues and configuration


@dataclass(frozen=True)
class VirtualQueueState:
    z: tuple[float, ...]

    @classmethod
    def zeros(cls, m: int) -> "VirtualQueueState":
        return cls((0.0,) * m)

    def __post_init__(self):
        if any(not (v >= 0) for v in self.z):
            raise InvariantViolation("virtual queues must be non-negative")


def queue_update(state: VirtualQueueState, y: Sequence[float]) -> VirtualQueueState:
    if len(y) != len(state.z):
        raise InvariantViolation(f"{len(y)} attributes for {len(state.z)} queues")
    return VirtualQueueState(tuple(max(z + v, 0.0) for z, v in zip(state.z, y)))


@dataclass(frozen=True)
class MaxCS:
    e_av: float
    c_min: float = 0.0


@dataclass(frozen=True)
class MinCS:
    c_av: float


@dataclass(frozen=True)
class PowerAware:
    p_av: tuple[float, ...]
    c_min: float = 0.0
    b_max: float = math.inf
    relax_bandwidth: bool = False

    def __post_init__(self):
        object.__setattr__(self, "p_av", tuple(float(p) for p in self.p_av))


@dataclass(frozen=True)
class ControllerConfig:
    """``zeta`` is the credibility grid for per-frame floors (default 1e-3 of
    the frame's largest credibility); ``bandwidth_unit`` the bandwidth grid
    (default b_max / 1000)."""

    v: float
    constraint: MaxCS | MinCS | PowerAware
    mode: str = "centralized"
    frame_solver: str = "dp"
    zeta: float | None = None
    bandwidth_unit: float | None = None

    def __post_init__(self):
        if not (self.v > 0 and math.isfinite(self.v)):
            raise InvariantViolation("V must be positive")
        if self.mode not in ("centralized", "decentralized"):
            raise InvariantViolation(f"unknown mode {self.mode!r}")
        if self.frame_solver not in ("dp", "ann"):
            raise InvariantViolation(f"unknown frame solver {self.frame_solver!r}")
        if self.mode == "decentralized":
            c = self.constraint
            if isinstance(c, MaxCS) and c.c_min != 0:
                raise InvariantViolation("decentralized maxCS requires c_min = 0")
            if isinstance(c, PowerAware) and (c.c_min != 0 or (math.isfinite(c.b_max) and not c.relax_bandwidth)):
                raise InvariantViolation("decentralized power-aware control needs c_min = 0 and no per-frame bandwidth cap")

    @property
    def num_queues(self) -> int:
        c = self.constraint
        if isinstance(c, PowerAware):
            return len(c.p_av) + (1 if c.relax_bandwidth else 0)
        return 1


@dataclass(frozen=True)
class FrameDecision:
    choices: tuple[int, ...]
    cost: float
    credibility: float
    y: tuple[float, ...]  # constraint attributes, one per virtual queue
    bandwidth: float = 0.0


def _totals(event: FrameEvent, choices) -> tuple[float, float, float]:
    cost, cred, bw = [], [], []
    for i, k in enumerate(choices):
        if k != IDLE:
            cost.append(event.costs[k])
            cred.append(event.values[i, k])
            bw.append(event.bandwidth[i, k])
    return math.fsum(cost), math.fsum(cred), math.fsum(bw)


def _grid(event: FrameEvent, cfg: ControllerConfig) -> float:
    if cfg.zeta is not None:
        return cfg.zeta
    top = float(event.values.max(initial=0.0))
    return 1e-3 * top if top > 0 else 1e-3


def _min_weighted(event: FrameEvent, weights: np.ndarray, c_min: float, cfg: ControllerConfig) -> list[int]:
    """Minimize sum of per-option weights (idle weighs 0) with credibility >= c_min.

    The knapsack core accepts signed weights, so no shift is applied. With
    ``c_min = 0`` the credibility grid is irrelevant and every ``q`` is zero,
    which leaves a plain per-reporter argmin (idle first on ties).
    """
    n, r = weights.shape
    if c_min <= 0:
        q = np.zeros((n, r), dtype=np.int64)
        units = 0
    else:
        zeta = _grid(event, cfg)
        q = truncate(event.values, zeta)
        units = int(math.ceil(c_min / zeta - _SNAP))
    if cfg.frame_solver == "ann":
        profile = preselect_formats(CredibilityMatrix(event.values), _CostView(event.costs))
        rows = np.arange(n)
        picks = minc_core(q[rows, profile.formats][:, None], weights[rows, profile.formats][:, None], units)
        return [int(profile.formats[i]) if k != IDLE else IDLE for i, k in enumerate(picks)]
    return minc_core(q, weights, units)


class _CostView:
    """Just enough of a FormatSet for :func:`preselect_formats`."""

    def __init__(self, costs):
        self.costs = np.asarray(costs, dtype=float)


def step_maxcs(event: FrameEvent, z1: float, cfg: ControllerConfig) -> FrameDecision:
    c = cfg.constraint
    weights = z1 * event.costs[None, :] - cfg.v * event.values
    try:
        choices = _min_weighted(event, weights, c.c_min, cfg)
    except Infeasible as exc:
        raise InfeasibleFrame(str(exc), event.index) from None
    cost, cred, bw = _totals(event, choices)
    return FrameDecision(tuple(choices), cost, cred, (cost - c.e_av,), bw)


def decentralized_choice(row_credibility: Sequence[float], costs: Sequence[float], z1: float, v: float) -> int:
    """One reporter's decision from its own row and the broadcast queue weight."""
    best, best_w = IDLE, 0.0
    for j, (cij, ej) in enumerate(zip(row_credibility, costs)):
        w = z1 * ej - v * cij
        if w < best_w:
            best, best_w = j, w
    return best


def step_decentralized(event: FrameEvent, z1: float, v: float) -> tuple[int, ...]:
    return tuple(decentralized_choice(event.values[i], event.costs, z1, v) for i in range(event.n))


def step_mincs(event: FrameEvent, z1: float, cfg: ControllerConfig) -> FrameDecision:
    c = cfg.constraint
    if cfg.mode == "decentralized":
        choices = [decentralized_choice(event.values[i] * z1, event.costs * cfg.v, 1.0, 1.0) for i in range(event.n)]
    else:
        weights = cfg.v * event.costs[None, :] - z1 * event.values
        choices = _min_weighted(event, weights, 0.0, cfg)
    cost, cred, bw = _totals(event, choices)
    return FrameDecision(tuple(choices), cost, cred, (c.c_av - cred,), bw)


def step_power_aware(event: FrameEvent, z: Sequence[float], cfg: ControllerConfig) -> FrameDecision:
    """Maximize ``V c - sum_n Z_n p_n`` (minus ``Z_b b`` when bandwidth is relaxed).

    Per-frame floors and caps are handled by a knapsack over a bandwidth grid
    (rounded up) and a credibility grid capped at the floor (truncated).
    """
    c = cfg.constraint
    n = event.n
    z = np.asarray(z, dtype=float)
    zn = z[:n]
    value = cfg.v * event.values - zn[:, None] * event.power
    if c.relax_bandwidth:
        value = value - z[n] * event.bandwidth
    capped = math.isfinite(c.b_max) and not c.relax_bandwidth
    if capped:
        unit = cfg.bandwidth_unit or (c.b_max / 1000 if c.b_max > 0 else 1.0)
        bw_units = round_up(event.bandwidth, unit)
        bw_cap = int(math.floor(c.b_max / unit + _SNAP))
    else:
        bw_units = np.zeros(event.values.shape, dtype=np.int64)
        bw_cap = 0
    if c.c_min > 0:
        zeta = _grid(event, cfg)
        q = truncate(event.values, zeta)
        need = int(math.ceil(c.c_min / zeta - _SNAP))
    else:
        q = np.zeros(event.values.shape, dtype=np.int64)
        need = 0
    try:
        choices = _two_constraint_knapsack(value, bw_units, bw_cap, q, need)
    except Infeasible as exc:
        raise InfeasibleFrame(str(exc), event.index) from None
    cost, cred, bw = _totals(event, choices)
    p = [event.power[i, k] if k != IDLE else 0.0 for i, k in enumerate(choices)]
    y = [p[i] - c.p_av[i] * event.duration for i in range(n)]
    if c.relax_bandwidth:
        y.append(bw - c.b_max)
    return FrameDecision(tuple(choices), cost, cred, tuple(y), bw)


def _two_constraint_knapsack(value, bw_units, bw_cap, q, need) -> list[int]:
    """Max sum of option values with sum(bw) <= bw_cap and sum(q) >= need.

    State ``(b, s)``: bandwidth units used (at most ``b``) and credibility
    units reached, capped at ``need``. Idle is option 0 with zero value;
    ties keep the earlier option and the smaller predecessor.
    """
    n, r = value.shape
    if n and int(np.minimum(q.max(axis=1), need).sum()) < need:
        raise Infeasible("credibility floor unreachable this frame")
    table = np.full((bw_cap + 1, need + 1), -np.inf)
    table[:, 0] = 0.0
    picks = np.zeros((n, bw_cap + 1, need + 1), dtype=np.int16)
    prev = np.zeros((n, bw_cap + 1, need + 1), dtype=np.int64)
    cols = np.arange(need + 1)
    for l in range(n):
        new = table.copy()
        prev[l] = cols
        for k in range(r):
            w = int(bw_units[l, k])
            if w > bw_cap:
                continue
            qk = min(int(q[l, k]), need)
            src = table[: bw_cap + 1 - w]
            cand = np.full_like(table, -np.inf)
            back = np.zeros(table.shape, dtype=np.int64)
            if qk == 0:
                cand[w:] = src
                back[w:] = cols
            else:
                cand[w:, qk:need] = src[:, : need - qk]
                back[w:, qk:need] = cols[: need - qk]
                top = src[:, need - qk:]
                cand[w:, need] = top.max(axis=1)
                back[w:, need] = need - qk + top.argmax(axis=1)
            cand += value[l, k]
            better = cand > new
            new[better] = cand[better]
            picks[l][better] = k + 1
            prev[l][better] = back[better]
        table = new
    if n and not np.isfinite(table[bw_cap, need]):
        raise Infeasible("no selection meets the bandwidth cap and credibility floor")
    choices = [IDLE] * n
    b, s = bw_cap, need
    for l in range(n - 1, -1, -1):
        k = int(picks[l, b, s])
        if k == 0:
            continue
        choices[l] = k - 1
        s = int(prev[l, b, s])
        b -= int(bw_units[l, k - 1])
    return choices


# ---------------------------------------------------------------------------
# run loop


@dataclass(eq=False)
class FrameTrace:
    """Per-frame record of decisions, attributes and queues.

    ``z[k]`` is the queue vector *after* frame ``k``'s update.
    """

    choices: np.ndarray
    cost: np.ndarray
    credibility: np.ndarray
    y: np.ndarray
    z: np.ndarray
    duration: np.ndarray
    bandwidth: np.ndarray
    queue_names: tuple[str, ...] = ()
    window: float = 0.25

    @property
    def k(self) -> int:
        return len(self.cost)

    def _running(self, x: np.ndarray) -> np.ndarray:
        return np.cumsum(x) / np.arange(1, len(x) + 1) if len(x) else np.zeros(0)

    @property
    def running_avg_cost(self) -> np.ndarray:
        return self._running(self.cost)

    @property
    def running_avg_cred(self) -> np.ndarray:
        return self._running(self.credibility)

    @property
    def avg_cost(self) -> float:
        return math.fsum(self.cost) / self.k if self.k else 0.0

    @property
    def avg_credibility(self) -> float:
        return math.fsum(self.credibility) / self.k if self.k else 0.0

    @property
    def avg_y(self) -> np.ndarray:
        if not self.k:
            return np.zeros(self.y.shape[1])
        return np.array([math.fsum(col) / self.k for col in self.y.T])

    @property
    def final_z(self) -> np.ndarray:
        return self.z[-1] if self.k else np.zeros(self.y.shape[1])

    def tail(self) -> slice:
        """Frames in the measurement window (last quarter by default)."""
        start = self.k - max(1, int(round(self.k * self.window))) if self.k else 0
        return slice(start, self.k)

    def tail_avg_cost(self) -> float:
        part = self.cost[self.tail()]
        return math.fsum(part) / len(part) if len(part) else 0.0

    def tail_avg_credibility(self) -> float:
        part = self.credibility[self.tail()]
        return math.fsum(part) / len(part) if len(part) else 0.0

    def write_csv(self, path, digits: int = 6) -> None:
        names = self.queue_names or tuple(f"z{m + 1}" for m in range(self.y.shape[1]))
        fmt = f"{{:.{digits}g}}".format
        rc, rq = self.running_avg_cost, self.running_avg_cred
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["k", "cost", "credibility", *names, "running_avg_cost", "running_avg_cred"])
            for k in range(self.k):
                out.writerow([k + 1, fmt(self.cost[k]), fmt(self.credibility[k]),
                              *(fmt(v) for v in self.z[k]), fmt(rc[k]), fmt(rq[k])])


def step(event: FrameEvent, state: VirtualQueueState, cfg: ControllerConfig) -> FrameDecision:
    c = cfg.constraint
    if isinstance(c, MaxCS):
        if cfg.mode == "decentralized":
            choices = step_decentralized(event, state.z[0], cfg.v)
            cost, cred, bw = _totals(event, choices)
            return FrameDecision(choices, cost, cred, (cost - c.e_av,), bw)
        return step_maxcs(event, state.z[0], cfg)
    if isinstance(c, MinCS):
        return step_mincs(event, state.z[0], cfg)
    return step_power_aware(event, state.z, cfg)


def run(cfg: ControllerConfig, events: Iterable[FrameEvent], k: int | None = None) -> FrameTrace:
    """Drive the controller over ``k`` frames (all of ``events`` if ``k`` is None)."""
    m = cfg.num_queues
    state = VirtualQueueState.zeros(m)
    rows_choice, cost, cred, ys, zs, durs, bws = [], [], [], [], [], [], []
    stream = events if k is None else itertools.islice(events, k)
    for frame, event in enumerate(stream, start=1):
        try:
            dec = step(event, state, cfg)
        except InfeasibleFrame as exc:
            raise InfeasibleFrame(str(exc).split(": ", 1)[-1], frame) from None
        state = queue_update(state, dec.y)
        rows_choice.append(dec.choices)
        cost.append(dec.cost)
        cred.append(dec.credibility)
        ys.append(dec.y)
        zs.append(state.z)
        durs.append(event.duration)
        bws.append(dec.bandwidth)
    n = len(rows_choice[0]) if rows_choice else 0
    c = cfg.constraint
    if isinstance(c, PowerAware):
        names = tuple(f"z_power{i + 1}" for i in range(len(c.p_av))) + (("z_bandwidth",) if c.relax_bandwidth else ())
    else:
        names = ("z1",)
    return FrameTrace(
        np.array(rows_choice, dtype=np.int32).reshape(len(rows_choice), n),
        np.array(cost), np.array(cred),
        np.array(ys, dtype=float).reshape(len(ys), m),
        np.array(zs, dtype=float).reshape(len(zs), m),
        np.array(durs), np.array(bws), names,
    )
