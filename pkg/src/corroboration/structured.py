"""Solvers that use the shape of the credibility function.

* ``solve_maxc_two_format``: exact greedy for two formats (cheap/expensive).
* ``preselect_formats`` + ``solve_minc_ann`` / ``solve_maxc_ann``: every
  reporter is pinned to its best credibility-per-cost format, which turns
  the multiple-choice knapsack into a plain 0/1 knapsack over reporters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .assignment import IDLE, Assignment, evaluate, within
from .dp import _SNAP, _check_unit, maxc_core, minc_core, round_up, truncate
from .errors import Infeasible, InvariantViolation
from .model import ADDITIVE, CorroborationFn, CredibilityMatrix, FormatSet


@dataclass(frozen=True, eq=False)
class TwoFormatInstance:
    """Rows sorted by distance; column 0 is the expensive format (cost ``beta``),
    column 1 the cheap one (cost 1)."""

    values: np.ndarray
    beta: float
    budget: float
    distances: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or values.shape[1] != 2:
            raise InvariantViolation("a two-format instance needs an N x 2 matrix")
        if not self.beta > 1:
            raise InvariantViolation(f"beta must exceed 1, got {self.beta}")
        if np.any(values[:, 0] < values[:, 1]):
            raise InvariantViolation("the expensive format must be at least as credible as the cheap one")
        if self.distances is not None:
            d = np.asarray(self.distances, dtype=float)
            if np.any(np.diff(d) < 0):
                raise InvariantViolation("rows must be sorted by distance")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]


def solve_maxc_two_format(instance: TwoFormatInstance) -> Assignment:
    """Optimal two-format MaxC.

    For each count ``i`` of expensive reports, activate the ``i + Y``
    closest reporters (``Y`` = cheap reports still affordable) and hand the
    expensive format to the ``i`` active reporters that gain the most from
    it. Choices index the instance columns; cost is in units of the cheap
    format.
    """
    c = instance.values
    n, beta, budget = instance.n, instance.beta, instance.budget
    gain = c[:, 0] - c[:, 1]
    costs = np.array([beta, 1.0])
    best, best_cred = [IDLE] * n, -math.inf
    top = min(int(math.floor(budget / beta + _SNAP)), n) if budget >= 0 else -1
    for i in range(top + 1):
        y = max(0, min(n - i, int(math.floor(budget - beta * i + _SNAP))))
        active = i + y
        # stable sort on -gain keeps lower reporter index first on ties
        order = sorted(range(active), key=lambda m: -gain[m])
        expensive = set(order[:i])
        choices = [0 if m in expensive else 1 for m in range(active)] + [IDLE] * (n - active)
        cred = math.fsum(c[m, 1] for m in range(active)) + math.fsum(gain[m] for m in expensive)
        if cred > best_cred:
            best, best_cred = choices, cred
    return evaluate(best, c, costs)


def maxc_two_format(matrix: CredibilityMatrix, formats: FormatSet, budget: float) -> Assignment:
    """Run the two-format greedy on a 2-format scenario and map back to its reporters."""
    if len(formats) != 2:
        raise InvariantViolation("the two-format solver needs exactly two formats")
    cheap, dear = (0, 1) if formats[0].cost <= formats[1].cost else (1, 0)
    unit = formats[cheap].cost
    order = np.argsort(matrix.distances, kind="stable")
    values = matrix.values[order][:, [dear, cheap]]
    inst = TwoFormatInstance(values, formats[dear].cost / unit, budget / unit, matrix.distances[order])
    local = solve_maxc_two_format(inst)
    choices = [IDLE] * matrix.n
    for pos, k in enumerate(local.choices):
        if k != IDLE:
            choices[order[pos]] = dear if k == 0 else cheap
    return evaluate(choices, matrix, formats.costs)


@dataclass(frozen=True, eq=False)
class PreferredProfile:
    """Each reporter's most cost-efficient format and its (credibility, cost)."""

    formats: np.ndarray
    credibility: np.ndarray
    cost: np.ndarray

    @property
    def n(self) -> int:
        return len(self.formats)


def preselect_formats(matrix: CredibilityMatrix, formats: FormatSet) -> PreferredProfile:
    e = formats.costs
    values = matrix.values
    k = np.argmax(values / e, axis=1) if values.size else np.zeros(0, dtype=int)
    rows = np.arange(matrix.n)
    return PreferredProfile(k.astype(int), values[rows, k], e[k])


def _profile_assignment(profile: PreferredProfile, picked, corroboration) -> Assignment:
    choices = tuple(int(profile.formats[i]) if picked[i] else IDLE for i in range(profile.n))
    cost = math.fsum(profile.cost[i] for i in range(profile.n) if picked[i])
    cred = math.fsum(profile.credibility[i] for i in range(profile.n) if picked[i])
    return Assignment(choices, cost, corroboration(cred))


def solve_minc_ann(profile: PreferredProfile, target: float, zeta: float | None = None,
                   corroboration: CorroborationFn = ADDITIVE) -> Assignment:
    """0/1 knapsack over the preselected reports, complemented like minCDP."""
    if zeta is None:
        top = float(profile.credibility.max(initial=0.0))
        zeta = 1e-3 * top if top > 0 else 1e-3
    _check_unit(zeta)
    need = corroboration.required_sum(target)
    if math.isinf(need) or math.fsum(profile.credibility) < need - 1e-12 * max(1.0, need):
        raise Infeasible("preselected reports cannot reach the target")
    q = truncate(profile.credibility, zeta)[:, None]
    units = int(math.ceil(need / zeta - _SNAP)) if need > 0 else 0
    picks = minc_core(q, profile.cost[:, None], units)
    return _profile_assignment(profile, [k != IDLE for k in picks], corroboration)


def solve_maxc_ann(profile: PreferredProfile, budget: float, eta: float | None = None,
                   corroboration: CorroborationFn = ADDITIVE) -> Assignment:
    if eta is None:
        top = float(profile.cost.max(initial=0.0))
        eta = 1e-3 * top if top > 0 else 1e-3
    _check_unit(eta)
    if within(math.fsum(profile.cost), budget):
        # every report fits; grid rounding must not drop any of them
        return _profile_assignment(profile, [True] * profile.n, corroboration)
    u = round_up(profile.cost, eta)[:, None]
    picks = maxc_core(u, profile.credibility[:, None], int(math.floor(budget / eta + _SNAP)))
    return _profile_assignment(profile, [k != IDLE for k in picks], corroboration)
