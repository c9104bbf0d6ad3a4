import itertools
import math

import numpy as np
import pytest

from conftest import dyadic_instance
from corroboration.assignment import IDLE
from corroboration.dp import MaxC, MaxCProblem, MinC, brute_force, solve_maxc_dp
from corroboration.errors import Infeasible, InfeasibleVector, VectorTooLarge
from corroboration.flow import (
    EnumerationTooLarge,
    build_network,
    solve_maxc_mcf,
    solve_minc_mcf,
    solve_network,
    solve_vector,
)
from corroboration.model import CredibilityMatrix, FormatSet


def test_smallest_network():
    net = build_network(CredibilityMatrix([[0.7]]), [1])
    assert len(net.edges) == 3
    sink = [e for e in net.edges if e.head == net.sink]
    assert len(sink) == 1 and sink[0].lower == sink[0].upper == 1


def test_assignment_edge_costs():
    values = [[0.9, 0.4], [0.2, 0.6]]
    net = build_network(CredibilityMatrix(values), [1, 1])
    mid = [e for e in net.edges if 1 <= e.tail <= 2 and e.head > 2]
    assert len(mid) == 4
    for e in mid:
        i, j = e.tail - 1, e.head - 1 - net.n
        assert e.cost == pytest.approx(0.9 - values[i][j])
        assert e.cost >= 0
    assert net.num_nodes == 2 + 2 + 2


def test_zero_vector_is_empty():
    a = solve_vector(CredibilityMatrix([[0.3, 0.2]]), [0, 0])
    assert a.choices == (IDLE,) and a.total_credibility == 0


def test_vector_too_large():
    with pytest.raises(VectorTooLarge):
        build_network(CredibilityMatrix([[0.3]]), [2])
    with pytest.raises(VectorTooLarge):
        build_network(CredibilityMatrix([[0.3]]), [1, 0])


def test_dominant_row():
    a = solve_vector(CredibilityMatrix([[0.9], [0.1]]), [1])
    assert a.choices == (0, IDLE)


def test_all_equal_matrix_value():
    a = solve_vector(CredibilityMatrix(np.full((4, 2), 0.25)), [1, 2])
    assert a.total_credibility == 0.75
    assert a.counts(2) == (1, 2)


def _constrained_best(values, alpha):
    n, r = values.shape
    best = -math.inf
    for choice in itertools.product(range(-1, r), repeat=n):
        if tuple(sum(1 for c in choice if c == j) for j in range(r)) != tuple(alpha):
            continue
        best = max(best, math.fsum(values[i, c] for i, c in enumerate(choice) if c >= 0))
    return best


@pytest.mark.parametrize("seed", range(30))
def test_vector_oracle_count_and_duality(seed):
    rng = np.random.default_rng(seed)
    n, r = int(rng.integers(1, 7)), int(rng.integers(1, 4))
    values = rng.integers(0, 17, size=(n, r)) / 16
    alpha = rng.multinomial(int(rng.integers(0, n + 1)), [1 / r] * r)
    m = CredibilityMatrix(values)
    a = solve_vector(m, alpha)
    assert a.counts(r) == tuple(alpha)
    assert a.total_credibility == _constrained_best(values, alpha)
    _, flow_cost = solve_network(build_network(m, alpha))
    assert flow_cost + a.total_credibility == pytest.approx(sum(alpha) * values.max())


@pytest.mark.parametrize("seed", range(40))
def test_mcf_equals_brute_force(seed):
    rng = np.random.default_rng(1000 + seed)
    values, formats = dyadic_instance(rng, n_max=7)
    m = CredibilityMatrix(values)
    target = rng.integers(0, int(values.max(axis=1).sum() * 16) + 1) / 16
    budget = rng.integers(0, 25) / 4
    assert solve_minc_mcf(m, formats, target).total_cost == brute_force(m, formats, MinC(target)).total_cost
    assert solve_maxc_mcf(m, formats, budget).total_credibility == \
        brute_force(m, formats, MaxC(budget)).total_credibility


def test_single_format_matches_dp():
    fs = FormatSet.from_params([1], [1], [1.5])
    m = CredibilityMatrix([[0.5], [0.25], [0.75], [0.125]])
    for b in range(0, 8):
        assert solve_maxc_mcf(m, fs, b).total_credibility == \
            solve_maxc_dp(MaxCProblem(m, fs, b, 0.5)).total_credibility


def test_minc_infeasible():
    fs = FormatSet.from_params([1, 1], [2, 1], [1, 2])
    with pytest.raises(Infeasible):
        solve_minc_mcf(CredibilityMatrix([[0.2, 0.3], [0.1, 0.4]]), fs, 0.71)


def test_single_reporter_takes_cheapest_sufficient_format():
    fs = FormatSet.from_params([1, 1, 1], [3, 2, 1], [1, 2, 4])
    a = solve_minc_mcf(CredibilityMatrix([[0.2, 0.5, 0.9]]), fs, 0.4)
    assert a.choices == (1,) and a.total_cost == 2


def test_zero_budget_idle():
    fs = FormatSet.from_params([1, 1], [2, 1], [1, 2])
    a = solve_maxc_mcf(CredibilityMatrix([[0.2, 0.3], [0.1, 0.4]]), fs, 0.0)
    assert a.choices == (IDLE, IDLE)


def test_enumeration_limit():
    fs = FormatSet.from_params([1, 1, 1], [3, 2, 1], [1, 1, 1])
    with pytest.raises(EnumerationTooLarge):
        solve_minc_mcf(CredibilityMatrix(np.ones((20, 3))), fs, 1.0, limit=10)


def test_infeasible_vector_type():
    assert issubclass(InfeasibleVector, Exception)
