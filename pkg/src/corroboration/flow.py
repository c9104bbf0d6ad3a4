"""Min-cost-flow solvers over the bipartite credibility network.

For a fixed report vector ``alpha`` (``alpha[j]`` reporters on format ``j``)
the best assignment is a min-cost flow: source -> reporter (cap 1) ->
format (cap 1, cost ``cmax - c[i, j]``) -> sink (exactly ``alpha[j]``).
MinC and MaxC then enumerate report vectors.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .assignment import IDLE, Assignment, evaluate, meets, within
from .errors import CorroborationError, Infeasible, InfeasibleVector, VectorTooLarge
from .model import ADDITIVE, CorroborationFn, CredibilityMatrix, FormatSet

ENUMERATION_LIMIT = 10**6


class EnumerationTooLarge(CorroborationError):
    pass


@dataclass(frozen=True)
class FlowEdge:
    tail: int
    head: int
    lower: int
    upper: int
    cost: float


@dataclass(frozen=True)
class FlowNetwork:
    """Node 0 is the source, ``1..N`` reporters, ``N+1..N+R`` formats, last is the sink."""

    n: int
    r: int
    edges: tuple[FlowEdge, ...]
    demand: int

    @property
    def source(self) -> int:
        return 0

    @property
    def sink(self) -> int:
        return self.n + self.r + 1

    @property
    def num_nodes(self) -> int:
        return self.n + self.r + 2

    def reporter(self, i: int) -> int:
        return 1 + i

    def format(self, j: int) -> int:
        return 1 + self.n + j


def build_network(matrix: CredibilityMatrix, vector) -> FlowNetwork:
    values = matrix.values
    n, r = values.shape
    alpha = [int(a) for a in vector]
    if len(alpha) != r or any(a < 0 for a in alpha):
        raise VectorTooLarge(f"report vector {alpha} does not match {r} formats")
    if sum(alpha) > n:
        raise VectorTooLarge(f"report vector {alpha} asks for more than {n} reporters")
    cmax = float(values.max()) if values.size else 0.0
    edges = []
    for i in range(n):
        edges.append(FlowEdge(0, 1 + i, 0, 1, 0.0))
    for i in range(n):
        for j in range(r):
            edges.append(FlowEdge(1 + i, 1 + n + j, 0, 1, cmax - float(values[i, j])))
    for j in range(r):
        edges.append(FlowEdge(1 + n + j, n + r + 1, alpha[j], alpha[j], 0.0))
    return FlowNetwork(n, r, tuple(edges), sum(alpha))


class MinCostFlow:
    """Successive shortest augmenting paths with node potentials.

    Potentials start from Bellman-Ford (so negative edge costs are allowed)
    and are refreshed with Dijkstra distances after every augmentation.
    """

    def __init__(self, num_nodes: int):
        self.n = num_nodes
        # edge record: [head, residual capacity, cost, index of reverse edge]
        self.graph: list[list[list]] = [[] for _ in range(num_nodes)]

    def add_edge(self, u: int, v: int, capacity: int, cost: float) -> tuple[int, int]:
        self.graph[u].append([v, capacity, cost, len(self.graph[v])])
        self.graph[v].append([u, 0, -cost, len(self.graph[u]) - 1])
        return u, len(self.graph[u]) - 1

    def flow_on(self, handle: tuple[int, int]) -> int:
        u, idx = handle
        v, _, _, rev = self.graph[u][idx]
        return self.graph[v][rev][1]

    def _bellman_ford(self, s: int) -> list[float]:
        dist = [math.inf] * self.n
        dist[s] = 0.0
        for _ in range(self.n - 1):
            changed = False
            for u in range(self.n):
                if dist[u] == math.inf:
                    continue
                for v, cap, cost, _ in self.graph[u]:
                    if cap > 0 and dist[u] + cost < dist[v]:
                        dist[v] = dist[u] + cost
                        changed = True
            if not changed:
                break
        return dist

    def solve(self, s: int, t: int, required: int) -> tuple[int, float]:
        """Push up to ``required`` units from ``s`` to ``t`` at minimum cost."""
        potential = [0.0 if d == math.inf else d for d in self._bellman_ford(s)]
        flow, total = 0, 0.0
        while flow < required:
            dist = [math.inf] * self.n
            prev: list[tuple[int, int] | None] = [None] * self.n
            dist[s] = 0.0
            heap = [(0.0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                pu = potential[u]
                for idx, (v, cap, cost, _) in enumerate(self.graph[u]):
                    if cap <= 0:
                        continue
                    nd = d + max(cost + pu - potential[v], 0.0)
                    if nd < dist[v]:
                        dist[v] = nd
                        prev[v] = (u, idx)
                        heapq.heappush(heap, (nd, v))
            if dist[t] == math.inf:
                break
            for v in range(self.n):
                if dist[v] < math.inf:
                    potential[v] += dist[v]
            push = required - flow
            v = t
            while v != s:
                u, idx = prev[v]
                push = min(push, self.graph[u][idx][1])
                v = u
            v = t
            while v != s:
                u, idx = prev[v]
                edge = self.graph[u][idx]
                edge[1] -= push
                self.graph[v][edge[3]][1] += push
                total += push * edge[2]
                v = u
            flow += push
        return flow, total


def solve_network(network: FlowNetwork) -> tuple[list[int], float]:
    """Run min-cost flow on a credibility network; returns (choices, flow cost)."""
    mcf = MinCostFlow(network.num_nodes)
    handles = {}
    for e in network.edges:
        h = mcf.add_edge(e.tail, e.head, e.upper, e.cost)
        if 1 <= e.tail <= network.n and e.head > network.n:
            handles[(e.tail - 1, e.head - 1 - network.n)] = h
    flow, cost = mcf.solve(network.source, network.sink, network.demand)
    if flow < network.demand:
        raise InfeasibleVector(f"only {flow} of {network.demand} units routed")
    choices = [IDLE] * network.n
    for (i, j), h in handles.items():
        if mcf.flow_on(h):
            choices[i] = j
    return choices, cost


def solve_vector(matrix: CredibilityMatrix, vector, costs=None,
                 corroboration: CorroborationFn = ADDITIVE) -> Assignment:
    """Max-credibility assignment using exactly ``vector[j]`` reporters on format ``j``."""
    network = build_network(matrix, vector)
    choices, _ = solve_network(network)
    if costs is None:
        costs = np.zeros(matrix.r)
    return evaluate(choices, matrix, costs, corroboration)


def _vector_cost(alpha, costs) -> float:
    return math.fsum(itertools.chain.from_iterable([c] * a for a, c in zip(alpha, costs)))


def _vectors(n: int, r: int):
    for alpha in itertools.product(range(n + 1), repeat=r):
        if sum(alpha) <= n:
            yield alpha


def _better_max(a: Assignment, b: Assignment | None) -> bool:
    if b is None:
        return True
    if a.total_credibility != b.total_credibility:
        return a.total_credibility > b.total_credibility
    if a.total_cost != b.total_cost:
        return a.total_cost < b.total_cost
    return a.sort_key() < b.sort_key()


def solve_maxc_mcf(matrix: CredibilityMatrix, formats: FormatSet, budget: float,
                   corroboration: CorroborationFn = ADDITIVE,
                   limit: int = ENUMERATION_LIMIT) -> Assignment:
    """Best report-vector assignment whose cost fits the budget.

    Vectors that could take one more report within budget (with an idle
    reporter left) are skipped: credibilities are non-negative, so such a
    vector is never strictly better than its extension.
    """
    n, r = matrix.values.shape
    e = formats.costs
    best, seen = None, 0
    for alpha in _vectors(n, r):
        cost = _vector_cost(alpha, e)
        if not within(cost, budget):
            continue
        if sum(alpha) < n and any(within(cost + e[j], budget) for j in range(r)):
            continue
        seen += 1
        if seen > limit:
            raise EnumerationTooLarge(f"more than {limit} report vectors")
        cand = solve_vector(matrix, alpha, e, corroboration)
        if _better_max(cand, best):
            best = cand
    if best is None:
        return evaluate([IDLE] * n, matrix, e, corroboration)
    return best


def solve_minc_mcf(matrix: CredibilityMatrix, formats: FormatSet, target: float,
                   corroboration: CorroborationFn = ADDITIVE,
                   limit: int = ENUMERATION_LIMIT) -> Assignment:
    """Cheapest report vector whose best assignment reaches ``target``.

    Vectors are tried by total cost, ties by lexicographic ``alpha``.
    """
    n, r = matrix.values.shape
    e = formats.costs
    need = corroboration.required_sum(target)
    if matrix.values.max(axis=1, initial=0.0).sum() < need - 1e-12 * max(1.0, need):
        raise Infeasible("target exceeds the credibility of every reporter at its best format")
    vectors = list(_vectors(n, r))
    if len(vectors) > limit:
        raise EnumerationTooLarge(f"{len(vectors)} report vectors exceed the limit {limit}")
    vectors.sort(key=lambda a: (_vector_cost(a, e), a))
    best = None
    for alpha in vectors:
        cost = _vector_cost(alpha, e)
        if best is not None and cost > best.total_cost:
            break
        cand = solve_vector(matrix, alpha, e, corroboration)
        if meets(cand.total_credibility, target):
            if best is None or cand.sort_key() < best.sort_key():
                best = cand
    if best is None:
        raise Infeasible("no report vector reaches the target")
    return best
