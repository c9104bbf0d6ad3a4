"""Assignment of formats to reporters, shared by every solver."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import ADDITIVE, CorroborationFn, CredibilityMatrix

IDLE = -1

# Relative slack for credibility/budget comparisons on undiscretized values.
TOL = 1e-12


def meets(value: float, target: float) -> bool:
    """``value >= target`` up to a relative rounding slack."""
    return value >= target - TOL * max(1.0, abs(target))


def within(value: float, budget: float) -> bool:
    return value <= budget + TOL * max(1.0, abs(budget))


@dataclass(frozen=True)
class Assignment:
    """Per-reporter format choice (0-based format index, ``IDLE`` = -1)."""

    choices: tuple[int, ...]
    total_cost: float
    total_credibility: float

    @property
    def active(self) -> int:
        return sum(1 for k in self.choices if k != IDLE)

    def counts(self, r: int) -> tuple[int, ...]:
        out = [0] * r
        for k in self.choices:
            if k != IDLE:
                out[k] += 1
        return tuple(out)

    def sort_key(self) -> tuple:
        """Deterministic tie-break: fewer active reporters, then smallest choice vector."""
        return (self.active, self.choices)

    def to_json(self, format_ids: Sequence[int] | None = None) -> dict:
        ids = format_ids or [k + 1 for k in range(max(self.choices, default=-1) + 1)]
        return {
            "choices": [None if k == IDLE else ids[k] for k in self.choices],
            "cost": self.total_cost,
            "credibility": self.total_credibility,
        }


def evaluate(
    choices: Sequence[int],
    matrix: CredibilityMatrix | np.ndarray,
    costs: Sequence[float],
    corroboration: CorroborationFn = ADDITIVE,
) -> Assignment:
    """Build an :class:`Assignment` with exactly rounded totals.

    ``costs`` is either the per-format cost vector or an ``N x R`` array of
    per-reporter costs.
    """
    values = matrix.values if isinstance(matrix, CredibilityMatrix) else np.asarray(matrix)
    costs = np.asarray(costs, dtype=float)
    choices = tuple(int(k) for k in choices)
    cred, cost = [], []
    for i, k in enumerate(choices):
        if k == IDLE:
            continue
        cred.append(values[i, k])
        cost.append(costs[i, k] if costs.ndim == 2 else costs[k])
    return Assignment(choices, math.fsum(cost), corroboration(math.fsum(cred)))


def idle_assignment(n: int) -> Assignment:
    return Assignment((IDLE,) * n, 0.0, 0.0)
