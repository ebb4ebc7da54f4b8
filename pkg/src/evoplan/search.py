"""Greedy best-first search with resource accounting, plus test oracles.

The search is eager: every newly generated state is evaluated exactly once
and queued; expansion pops the open entry with minimum heuristic value,
breaking ties first-in-first-out.  Duplicate detection happens at
generation time on the full assignment, so no state is evaluated or
expanded twice and re-opening never occurs.  States whose heuristic value
is the dead-end sentinel are never queued.

Memory accounting approximates the resident growth of the search's own
structures (generated-state store, open list, parent pointers), sampled
every expansion batch; it is deterministic for a given platform, unlike
process-level measurements.
"""

from __future__ import annotations

import heapq
import sys
import time
import traceback
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

from .sas import INFINITY, State, Task, is_goal

_MEMORY_SAMPLE_INTERVAL = 128
_PER_ENTRY_OVERHEAD = 200  # dict slot + heap tuple + parent pointer, rough bytes


class SearchOutcome(str, Enum):
    SOLVED = "SOLVED"
    OUT_OF_TIME = "OUT_OF_TIME"
    OUT_OF_MEMORY = "OUT_OF_MEMORY"
    UNSOLVABLE = "UNSOLVABLE"  # open list exhausted without reaching a goal
    DEAD_END_FALSE = "DEAD_END_FALSE"  # post-hoc: exhaustion despite a provably solvable task
    CRASH = "CRASH"


@dataclass(frozen=True)
class SearchLimits:
    time_limit: float = 1800.0
    memory_limit: int = 8 * 1024**3

    def __post_init__(self):
        if self.time_limit <= 0 or self.memory_limit <= 0:
            raise ValueError("search limits must be positive")


@dataclass
class SearchResult:
    outcome: SearchOutcome
    plan: list[int] | None = None
    plan_cost: int = 0
    evaluations: int = 0
    expansions: int = 0
    wall_time: float = 0.0
    peak_memory: int = 0
    error: str | None = None

    @property
    def solved(self) -> bool:
        return self.outcome is SearchOutcome.SOLVED


def gbfs(task: Task, heuristic, limits: SearchLimits) -> SearchResult:
    """Run greedy best-first search; the heuristic must already be initialized."""
    start = time.perf_counter()
    operators = task.operators
    goal_pairs = task.goal.pairs

    evaluations = 0
    expansions = 0
    peak_memory = 0

    root = task.initial_state.values
    state_bytes = sys.getsizeof(root) + _PER_ENTRY_OVERHEAD
    seen = {root}
    parents: dict[tuple, tuple] = {}
    open_heap: list[tuple] = []

    def structure_estimate() -> int:
        return len(seen) * state_bytes + len(open_heap) * 100

    def result(outcome: SearchOutcome, plan=None, error=None) -> SearchResult:
        cost = sum(operators[op].cost for op in plan) if plan is not None else 0
        return SearchResult(
            outcome=outcome,
            plan=plan,
            plan_cost=cost,
            evaluations=evaluations,
            expansions=expansions,
            wall_time=time.perf_counter() - start,
            peak_memory=max(peak_memory, structure_estimate()),
            error=error,
        )

    def extract_plan(values) -> list[int]:
        plan = []
        while values != root:
            values, op_id = parents[values]
            plan.append(op_id)
        plan.reverse()
        return plan

    evaluations += 1
    try:
        h = heuristic.evaluate(State(root))
    except Exception:
        return result(SearchOutcome.CRASH, error=traceback.format_exc(limit=5))
    counter = 0
    if h != INFINITY:
        open_heap.append((h, counter, root))

    while open_heap:
        _, _, values = heapq.heappop(open_heap)

        goal_reached = True
        for var, val in goal_pairs:
            if values[var] != val:
                goal_reached = False
                break
        if goal_reached:
            return result(SearchOutcome.SOLVED, plan=extract_plan(values))

        if time.perf_counter() - start > limits.time_limit:
            return result(SearchOutcome.OUT_OF_TIME)

        for op_id, op in enumerate(operators):
            applicable = True
            for var, val in op.precondition.pairs:
                if values[var] != val:
                    applicable = False
                    break
            if not applicable:
                continue
            succ = list(values)
            for var, val in op.effect.pairs:
                succ[var] = val
            succ = tuple(succ)
            if succ in seen:
                continue
            seen.add(succ)
            evaluations += 1
            try:
                h = heuristic.evaluate(State(succ))
            except Exception:
                return result(SearchOutcome.CRASH, error=traceback.format_exc(limit=5))
            if h == INFINITY:
                continue
            parents[succ] = (values, op_id)
            counter += 1
            heapq.heappush(open_heap, (h, counter, succ))
        expansions += 1

        if expansions % _MEMORY_SAMPLE_INTERVAL == 0:
            estimate = structure_estimate()
            peak_memory = max(peak_memory, estimate)
            if estimate > limits.memory_limit:
                return result(SearchOutcome.OUT_OF_MEMORY)

    return result(SearchOutcome.UNSOLVABLE)


def validate_plan(task: Task, plan: list[int]) -> tuple[bool, str]:
    """Check applicability step by step and the goal at the end."""
    state = task.initial_state
    for i, op_id in enumerate(plan):
        if not 0 <= op_id < len(task.operators):
            return False, f"step {i}: operator id {op_id} out of range"
        op = task.operators[op_id]
        if not op.applicable_in(state):
            return False, f"step {i}: operator '{op.name}' not applicable"
        values = list(state.values)
        for var, val in op.effect:
            values[var] = val
        state = State(tuple(values))
    if not is_goal(state, task):
        return False, "final state does not satisfy the goal"
    return True, "ok"


class StateSpaceTooLarge(RuntimeError):
    """The reachable state space exceeds the enumeration cap."""


def optimal_cost_oracle(task: Task, cap: int = 50_000) -> dict[State, float]:
    """Exact goal distance for every reachable state.

    Enumerates the reachable space forward, then runs uniform-cost search
    from all goal-satisfying states over the reversed transition relation.
    Raises StateSpaceTooLarge when more than `cap` states are reachable.
    """
    root = task.initial_state.values
    index = {root: 0}
    states = [root]
    transitions: list[tuple[int, int, int]] = []  # (source, op, target)
    frontier = [root]
    while frontier:
        next_frontier = []
        for values in frontier:
            src = index[values]
            for op_id, op in enumerate(task.operators):
                if not all(values[var] == val for var, val in op.precondition):
                    continue
                succ = list(values)
                for var, val in op.effect:
                    succ[var] = val
                succ = tuple(succ)
                tgt = index.get(succ)
                if tgt is None:
                    if len(states) >= cap:
                        raise StateSpaceTooLarge(
                            f"more than {cap} reachable states; refusing to enumerate"
                        )
                    tgt = len(states)
                    index[succ] = tgt
                    states.append(succ)
                    next_frontier.append(succ)
                transitions.append((src, op_id, tgt))
        frontier = next_frontier

    reverse: list[list[tuple[int, int]]] = [[] for _ in states]  # target -> [(source, cost)]
    for src, op_id, tgt in transitions:
        reverse[tgt].append((src, task.operators[op_id].cost))

    dist = [INFINITY] * len(states)
    heap = []
    goal_pairs = task.goal.pairs
    for i, values in enumerate(states):
        if all(values[var] == val for var, val in goal_pairs):
            dist[i] = 0
            heap.append((0, i))
    heapq.heapify(heap)
    while heap:
        d, i = heapq.heappop(heap)
        if d > dist[i]:
            continue
        for src, cost in reverse[i]:
            candidate = d + cost
            if candidate < dist[src]:
                dist[src] = candidate
                heapq.heappush(heap, (candidate, src))

    return {State(values): dist[i] for i, values in enumerate(states)}


def reclassify_unsolvable(result: SearchResult, task: Task, cap: int = 50_000) -> SearchResult:
    """Post-hoc check of an UNSOLVABLE verdict against the exact oracle.

    Flips the outcome to DEAD_END_FALSE when a plan provably exists, which
    means the heuristic pruned a reachable solution as a dead end.
    """
    if result.outcome is not SearchOutcome.UNSOLVABLE:
        return result
    costs = optimal_cost_oracle(task, cap=cap)
    if costs[task.initial_state] != INFINITY:
        result.outcome = SearchOutcome.DEAD_END_FALSE
        result.error = "search exhausted the open list although the task is solvable"
    return result


def write_plan_file(path: str | Path, task: Task, plan: list[int]):
    """Write a plan in the conventional validator format: one '(name)' line per action."""
    lines = [f"({task.operators[op].name})" for op in plan]
    cost = sum(task.operators[op].cost for op in plan)
    kind = "general cost" if task.metric_uses_costs else "unit cost"
    lines.append(f"; cost = {cost} ({kind})")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
