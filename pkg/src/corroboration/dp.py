"""Exact discretized dynamic programs for MinC / MaxC plus a brute-force oracle.

MinC is solved in complemented form: with ``y = 1 - x`` every reporter
"gives back" the credibility of the formats it does *not* use, and the
total given back must stay within ``W = sum(c) - C``. Maximizing the
cost given back minimizes the cost spent. Credibilities are truncated
down to the ``zeta`` grid so a grid-feasible answer is truly feasible.

MaxC runs the usual multiple-choice knapsack over a cost grid with costs
rounded *up* to multiples of ``eta``, so the true cost never exceeds the
budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .assignment import IDLE, Assignment, evaluate, meets, within
from .errors import Infeasible, InvalidDiscretization, TooLarge
from .model import ADDITIVE, CorroborationFn, CredibilityMatrix, FormatSet

# snap slack when mapping reals onto a grid (absorbs x/zeta = 2.9999999)
_SNAP = 1e-9
BRUTE_FORCE_LIMIT = 10**7


@dataclass(frozen=True)
class MinCProblem:
    matrix: CredibilityMatrix
    formats: FormatSet
    target: float
    discretization: float | None = None
    corroboration: CorroborationFn = ADDITIVE

    @property
    def zeta(self) -> float:
        return default_grid(self.matrix) if self.discretization is None else self.discretization

    @property
    def slack(self) -> float:
        """``W``: total credibility on offer minus the target."""
        return float(self.matrix.values.sum()) - self.corroboration.required_sum(self.target)


@dataclass(frozen=True)
class MaxCProblem:
    matrix: CredibilityMatrix
    formats: FormatSet
    budget: float
    discretization: float | None = None
    corroboration: CorroborationFn = ADDITIVE

    @property
    def eta(self) -> float:
        if self.discretization is not None:
            return self.discretization
        return 1e-3 * float(np.max(self.formats.costs))


@dataclass(frozen=True)
class MinC:
    target: float


@dataclass(frozen=True)
class MaxC:
    budget: float


def default_grid(matrix: CredibilityMatrix) -> float:
    top = float(matrix.values.max()) if matrix.values.size else 0.0
    return 1e-3 * top if top > 0 else 1e-3


def truncate(values, unit: float) -> np.ndarray:
    """Credibility grid indices, rounded toward zero."""
    return np.floor(np.asarray(values, dtype=float) / unit + _SNAP).astype(np.int64)


def round_up(values, unit: float) -> np.ndarray:
    return np.ceil(np.asarray(values, dtype=float) / unit - _SNAP).astype(np.int64)


def _check_unit(unit: float) -> None:
    if not (unit > 0 and math.isfinite(unit)):
        raise InvalidDiscretization(f"discretization unit must be positive, got {unit}")


# ---------------------------------------------------------------------------
# DP cores on integer grids. Options per reporter: idle first, then formats
# in index order; updates use strict ">" so ties keep idle / lower index.


def minc_core(q: np.ndarray, cost: np.ndarray, target_units: int,
              idle_cost: np.ndarray | None = None) -> list[int]:
    """Minimum total option cost subject to ``sum(q) >= target_units``.

    ``q`` holds integer credibility units and ``cost`` the cost per option,
    both ``N x R``. ``idle_cost`` (default zeros) is the cost of leaving a
    reporter idle. Returns the chosen option per reporter.
    """
    q = np.asarray(q, dtype=np.int64)
    cost = np.asarray(cost, dtype=float)
    n, r = q.shape
    if idle_cost is None:
        idle_cost = np.zeros(n)
    target_units = max(int(target_units), 0)
    if n == 0:
        if target_units > 0:
            raise Infeasible("no reporters")
        return []
    if int(q.max(axis=1).sum()) < target_units:
        raise Infeasible("target exceeds the credibility of every reporter at its best format")

    total = q.sum(axis=1)
    capacity = int(total.sum()) - target_units
    # weight of an option = credibility units the reporter gives back; the
    # DP maximizes the negated cost directly (exact, and signed costs work)
    weights = np.concatenate([total[:, None], total[:, None] - q], axis=1)
    gains = -np.concatenate([idle_cost[:, None], cost], axis=1)

    table = np.zeros(capacity + 1)
    new = np.empty(capacity + 1)
    cand = np.empty(capacity + 1)
    better = np.empty(capacity + 1, dtype=bool)
    picks = np.full((n, capacity + 1), -1, dtype=np.int8 if r < 127 else np.int32)
    for l in range(n):
        new.fill(-np.inf)
        pick = picks[l]
        for k in range(r + 1):
            w = int(weights[l, k])
            if w > capacity:
                continue
            span = capacity + 1 - w
            np.add(table[:span], gains[l, k], out=cand[:span])
            np.greater(cand[:span], new[w:], out=better[:span])
            np.copyto(new[w:], cand[:span], where=better[:span])
            np.copyto(pick[w:], k, where=better[:span])
        table, new = new, table

    choices = [IDLE] * n
    s = capacity
    for l in range(n - 1, -1, -1):
        k = int(picks[l, s])
        choices[l] = IDLE if k == 0 else k - 1
        s -= int(weights[l, k])
    return choices


def maxc_core(u: np.ndarray, value: np.ndarray, budget_units: int) -> list[int]:
    """Maximize ``sum(value)`` subject to ``sum(u) <= budget_units``; idle costs nothing."""
    u = np.asarray(u, dtype=np.int64)
    value = np.asarray(value, dtype=float)
    n, r = u.shape
    budget_units = int(budget_units)
    if budget_units < 0 or n == 0:
        return [IDLE] * n
    table = np.zeros(budget_units + 1)
    picks = np.zeros((n, budget_units + 1), dtype=np.int8 if r < 127 else np.int32)
    for l in range(n):
        new = table.copy()
        pick = np.zeros(budget_units + 1, dtype=picks.dtype)
        for k in range(r):
            w = int(u[l, k])
            if w > budget_units:
                continue
            cand = table[: budget_units + 1 - w] + value[l, k]
            better = cand > new[w:]
            new[w:][better] = cand[better]
            pick[w:][better] = k + 1
        table = new
        picks[l] = pick

    choices = [IDLE] * n
    s = budget_units
    for l in range(n - 1, -1, -1):
        k = int(picks[l, s])
        if k:
            choices[l] = k - 1
            s -= int(u[l, k - 1])
    return choices


# ---------------------------------------------------------------------------


def solve_minc_dp(problem: MinCProblem) -> Assignment:
    """Minimum-cost assignment whose truncated credibility reaches the target."""
    zeta = problem.zeta
    _check_unit(zeta)
    matrix, formats = problem.matrix, problem.formats
    need = problem.corroboration.required_sum(problem.target)
    if math.isinf(need):
        raise Infeasible(f"corroboration never reaches {problem.target}")
    q = truncate(matrix.values, zeta)
    target_units = int(math.ceil(need / zeta - _SNAP)) if need > 0 else 0
    cost = np.broadcast_to(formats.costs, q.shape)
    choices = minc_core(q, cost, target_units)
    return evaluate(choices, matrix, formats.costs, problem.corroboration)


def solve_maxc_dp(problem: MaxCProblem) -> Assignment:
    """Maximum-credibility assignment whose rounded-up cost fits the budget."""
    eta = problem.eta
    _check_unit(eta)
    matrix, formats = problem.matrix, problem.formats
    u = np.broadcast_to(round_up(formats.costs, eta), matrix.values.shape)
    budget_units = int(math.floor(problem.budget / eta + _SNAP))
    choices = maxc_core(u, matrix.values, budget_units)
    return evaluate(choices, matrix, formats.costs, problem.corroboration)


def brute_force(
    matrix: CredibilityMatrix,
    formats: FormatSet,
    objective: MinC | MaxC,
    corroboration: CorroborationFn = ADDITIVE,
    limit: int = BRUTE_FORCE_LIMIT,
) -> Assignment:
    """Exact optimum by enumerating all ``(R+1)**N`` assignments.

    Ties (within rounding) go to fewer active reporters, then to the
    lexicographically smallest choice vector.
    """
    n, r = matrix.values.shape
    if (r + 1) ** n > limit:
        raise TooLarge(f"(R+1)^N = {(r + 1) ** n} exceeds the limit {limit}")
    if n == 0:
        return evaluate((), matrix, formats.costs, corroboration)

    options = np.array(list(itertools.product(range(-1, r), repeat=n)), dtype=np.int64)
    c_ext = np.concatenate([np.zeros((n, 1)), matrix.values], axis=1)
    e_ext = np.concatenate([[0.0], formats.costs])
    rows = np.arange(n)
    cred = c_ext[rows, options + 1].sum(axis=1)
    cost = e_ext[options + 1].sum(axis=1)

    if isinstance(objective, MinC):
        total = cred if corroboration.is_additive else np.array([corroboration(x) for x in cred])
        ok = total >= objective.target - 1e-9 * max(1.0, abs(objective.target))
        score = np.where(ok, cost, np.inf)
        keep = (lambda a: meets(a.total_credibility, objective.target))
        value = (lambda a: a.total_cost)
    else:
        ok = cost <= objective.budget + 1e-9 * max(1.0, abs(objective.budget))
        score = np.where(ok, -cred, np.inf)
        keep = (lambda a: within(a.total_cost, objective.budget))
        value = (lambda a: -a.total_credibility)
    # numpy sums pick a near-optimal band; exact (fsum) totals settle it
    while np.isfinite(score).any():
        best = score.min()
        band = np.flatnonzero(score <= best + 1e-9 * max(1.0, abs(best)))
        cands = [evaluate(options[i], matrix, formats.costs, corroboration) for i in band]
        cands = [a for a in cands if keep(a)]
        if cands:
            top = min(value(a) for a in cands)
            return min((a for a in cands if value(a) == top), key=Assignment.sort_key)
        score[band] = np.inf
    raise Infeasible("no assignment reaches the target")
