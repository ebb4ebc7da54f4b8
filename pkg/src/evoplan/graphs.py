"""Domain transition graphs, the causal graph and backward distance tables.

A variable's domain transition graph (DTG) has one node per value and one
edge per (operator, effect-on-the-variable) pair; the edge source is the
operator's precondition value on that variable, or WILDCARD when it has
none.  Wildcard edges are kept symbolic and expanded on demand during
traversal, so graph size stays linear in the number of operators.

The causal graph (CG) has an edge v -> w whenever some operator with w in
its effect mentions v in its precondition or effect (v != w).

Distance arithmetic saturates on the INFINITY sentinel so unreachability
propagates exactly; nothing here ever overflows or wraps.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .sas import INFINITY, Task

WILDCARD = -1


@dataclass(frozen=True)
class DtgEdge:
    source: int  # value index, or WILDCARD for any source value
    target: int
    operator: int
    cost: int

    @property
    def changes_value(self) -> bool:
        # A wildcard edge can always fire from a value != target.
        return self.source == WILDCARD or self.source != self.target


@dataclass(frozen=True)
class DomainTransitionGraph:
    variable: int
    num_values: int
    edges: tuple[DtgEdge, ...]
    # Per target value: indices into `edges` (wildcard edges included).
    incoming: tuple[tuple[int, ...], ...]
    # Per source value: indices of edges rooted at exactly that value.
    outgoing: tuple[tuple[int, ...], ...]
    wildcard_edges: tuple[int, ...]


@dataclass(frozen=True)
class CausalGraph:
    predecessors: tuple[frozenset[int], ...]
    successors: tuple[frozenset[int], ...]


@dataclass(frozen=True)
class DtgDistanceTable:
    """Cheapest cost from each value to the goal value; INFINITY if unreachable."""

    variable: int
    goal_value: int
    dist: tuple[float, ...]


def build_dtg(task: Task, var: int) -> DomainTransitionGraph:
    num_values = task.variables[var].domain_size
    edges = []
    for op_id, op in enumerate(task.operators):
        post = op.effect.value_of(var)
        if post is None:
            continue
        pre = op.precondition.value_of(var)
        edges.append(DtgEdge(WILDCARD if pre is None else pre, post, op_id, op.cost))
    incoming = [[] for _ in range(num_values)]
    outgoing = [[] for _ in range(num_values)]
    wildcards = []
    for idx, edge in enumerate(edges):
        incoming[edge.target].append(idx)
        if edge.source == WILDCARD:
            wildcards.append(idx)
        else:
            outgoing[edge.source].append(idx)
    return DomainTransitionGraph(
        variable=var,
        num_values=num_values,
        edges=tuple(edges),
        incoming=tuple(tuple(ix) for ix in incoming),
        outgoing=tuple(tuple(ix) for ix in outgoing),
        wildcard_edges=tuple(wildcards),
    )


def build_dtgs(task: Task) -> list[DomainTransitionGraph]:
    return [build_dtg(task, var) for var in range(len(task.variables))]


def build_causal_graph(task: Task) -> CausalGraph:
    n = len(task.variables)
    preds = [set() for _ in range(n)]
    succs = [set() for _ in range(n)]
    for op in task.operators:
        effect_vars = [var for var, _ in op.effect]
        mentioned = {var for var, _ in op.precondition} | set(effect_vars)
        for target in effect_vars:
            for source in mentioned:
                if source != target:
                    preds[target].add(source)
                    succs[source].add(target)
    return CausalGraph(
        predecessors=tuple(frozenset(p) for p in preds),
        successors=tuple(frozenset(s) for s in succs),
    )


def backward_goal_distances(
    dtg: DomainTransitionGraph,
    goal_value: int,
    weights: list[float] | None = None,
) -> DtgDistanceTable:
    """Dijkstra on the reversed DTG from the goal value.

    `weights`, when given, overrides the per-edge cost (aligned with
    `dtg.edges`); the default is the owning operator's cost.
    """
    if not 0 <= goal_value < dtg.num_values:
        raise ValueError(f"goal value {goal_value} out of range for variable {dtg.variable}")

    def weight(idx: int) -> float:
        return dtg.edges[idx].cost if weights is None else weights[idx]

    dist = [INFINITY] * dtg.num_values
    dist[goal_value] = 0
    heap = [(0, goal_value)]
    while heap:
        d, value = heapq.heappop(heap)
        if d > dist[value]:
            continue
        for idx in dtg.incoming[value]:
            w = weight(idx)
            if w == INFINITY:
                continue
            candidate = d + w
            edge = dtg.edges[idx]
            if edge.source == WILDCARD:
                for source in range(dtg.num_values):
                    if candidate < dist[source]:
                        dist[source] = candidate
                        heapq.heappush(heap, (candidate, source))
            elif candidate < dist[edge.source]:
                dist[edge.source] = candidate
                heapq.heappush(heap, (candidate, edge.source))
    return DtgDistanceTable(dtg.variable, goal_value, tuple(dist))


def cheapest_changing_edge(dtg: DomainTransitionGraph) -> float:
    """Minimum cost over value-changing edges; INFINITY for static variables."""
    costs = [edge.cost for edge in dtg.edges if edge.changes_value]
    return min(costs) if costs else INFINITY


def next_operator_table(
    dtg: DomainTransitionGraph,
    table: DtgDistanceTable,
    weights: list[float] | None = None,
) -> tuple[int | None, ...]:
    """For each value, the operator on the first edge of a shortest path to the goal.

    Defined wherever the distance is finite and nonzero; ties between equally
    good first edges go to the lowest operator id.
    """

    def weight(idx: int) -> float:
        return dtg.edges[idx].cost if weights is None else weights[idx]

    result: list[int | None] = [None] * dtg.num_values
    for value in range(dtg.num_values):
        d = table.dist[value]
        if d == INFINITY or d == 0:
            continue
        best: tuple[float, int] | None = None
        for idx in list(dtg.outgoing[value]) + list(dtg.wildcard_edges):
            edge = dtg.edges[idx]
            total = weight(idx) + table.dist[edge.target]
            if total == d and (best is None or edge.operator < best[1]):
                best = (total, edge.operator)
        if best is not None:
            result[value] = best[1]
    return tuple(result)


def dtg_to_dot(dtg: DomainTransitionGraph, task: Task) -> str:
    var = task.variables[dtg.variable]
    lines = [f'digraph "dtg_{var.name}" {{']
    for val, name in enumerate(var.value_names):
        lines.append(f'  v{val} [label="{name}"];')
    for edge in dtg.edges:
        src = f"v{edge.source}" if edge.source != WILDCARD else "any"
        lines.append(f'  {src} -> v{edge.target} [label="op{edge.operator} c{edge.cost}"];')
    if any(e.source == WILDCARD for e in dtg.edges):
        lines.insert(1, '  any [label="*", shape=diamond];')
    lines.append("}")
    return "\n".join(lines)


def causal_graph_to_dot(cg: CausalGraph, task: Task) -> str:
    lines = ["digraph causal_graph {"]
    for var in task.variables:
        lines.append(f'  v{var.id} [label="{var.name}"];')
    for target, preds in enumerate(cg.predecessors):
        for source in sorted(preds):
            lines.append(f"  v{source} -> v{target};")
    lines.append("}")
    return "\n".join(lines)
