"""Delete-relaxation machinery: additive/max fact costs and relaxed plans.

Fact costs are computed by a generalized Dijkstra sweep over (variable,
value) facts.  An operator becomes ready when all its precondition facts
are finalized; it then offers cost(op) + combine(precondition costs) to
each of its effect facts, where combine is sum for the additive variant
and max for the critical-path variant.  Facts of the evaluated state seed
the sweep at cost zero.

Two details are pinned down here because downstream consumers depend on
them being reproducible and independent of early termination:

* Best supporter of a fact: the achiever of its final additive cost; on
  cost ties a lower operator id wins, but only until the fact is
  finalized, after which the supporter is frozen.  Every precondition of
  a recorded supporter is therefore finalized before the supported fact,
  which makes supporters (and everything extracted from them) identical
  whether the sweep runs to completion or stops once all goal facts are
  finalized.

* Plan extraction processes needed facts in reverse finalization order,
  counts each operator once at the first fact it supports and enqueues
  the operator's precondition facts that are not true in the evaluated
  state.  Reversing the counted order yields a sequence executable under
  delete-free semantics (facts accumulate and are never removed).

Additive costs saturate at a large finite cap below the dead-end
sentinel, so deeply nested sums cannot be mistaken for unreachability.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from ..sas import INFINITY, State, Task

HADD_CAP = 2**40


def saturating_add(a: int, b) -> int | float:
    if a == INFINITY or b == INFINITY:
        return INFINITY
    total = a + b
    return total if total < HADD_CAP else HADD_CAP


class FactIndex:
    """Dense indexing of (variable, value) facts and per-operator fact lists."""

    def __init__(self, task: Task):
        self.task = task
        self.offsets = []
        total = 0
        for var in task.variables:
            self.offsets.append(total)
            total += var.domain_size
        self.num_facts = total
        self.fact_var = [0] * total
        self.fact_val = [0] * total
        for var in task.variables:
            for val in range(var.domain_size):
                f = self.offsets[var.id] + val
                self.fact_var[f] = var.id
                self.fact_val[f] = val

        self.op_costs = [op.cost for op in task.operators]
        self.pre_facts = []
        self.eff_facts = []
        self.consumers: list[list[int]] = [[] for _ in range(total)]
        self.no_pre_ops = []
        for op_id, op in enumerate(task.operators):
            pre = tuple(self.offsets[var] + val for var, val in op.precondition)
            eff = tuple(self.offsets[var] + val for var, val in op.effect)
            self.pre_facts.append(pre)
            self.eff_facts.append(eff)
            if pre:
                for f in pre:
                    self.consumers[f].append(op_id)
            else:
                self.no_pre_ops.append(op_id)
        self.pre_counts = [len(p) for p in self.pre_facts]
        self.goal_facts = tuple(self.offsets[var] + val for var, val in task.goal)
        self.goal_fact_set = frozenset(self.goal_facts)

    def fact_id(self, var: int, val: int) -> int:
        return self.offsets[var] + val


@dataclass
class FactCostTables:
    """Per-fact additive and max costs plus the goal aggregates.

    The totals are DEAD_END (infinity) when some goal fact is unreachable
    in the relaxation.
    """

    add_costs: list
    max_costs: list
    h_add_total: int | float
    h_max_total: int | float


@dataclass
class RelaxedPlanResult:
    h_ff: int
    plan_ops: tuple[int, ...]  # extraction order: reverse finalization order
    h_add_per_goal: dict[tuple[int, int], int]
    h_add_total: int | float


class DeleteRelaxation:
    """Reference engine: fresh cost arrays per evaluation, full sweeps."""

    def __init__(self, task: Task):
        self.index = FactIndex(task)

    def _sweep(self, state: State, additive: bool, early_stop: bool):
        idx = self.index
        n = idx.num_facts
        cost: list = [INFINITY] * n
        supporter = [-1] * n
        pop_seq = [-1] * n
        remaining = list(idx.pre_counts)
        op_costs = idx.op_costs
        pre_facts = idx.pre_facts
        eff_facts = idx.eff_facts

        heap = []
        for var, val in enumerate(state.values):
            f = idx.offsets[var] + val
            cost[f] = 0
            heap.append((0, f))
        heapq.heapify(heap)

        def relax(op_id: int):
            if additive:
                total = op_costs[op_id]
                for p in pre_facts[op_id]:
                    total += cost[p]
                if total > HADD_CAP:
                    total = HADD_CAP
            else:
                total = 0
                for p in pre_facts[op_id]:
                    if cost[p] > total:
                        total = cost[p]
                total += op_costs[op_id]
            for e in eff_facts[op_id]:
                current = cost[e]
                if total < current:
                    cost[e] = total
                    supporter[e] = op_id
                    heapq.heappush(heap, (total, e))
                elif total == current and pop_seq[e] < 0 and supporter[e] >= 0 and op_id < supporter[e]:
                    supporter[e] = op_id

        for op_id in idx.no_pre_ops:
            relax(op_id)

        goals_remaining = len(idx.goal_facts)
        pops = 0
        consumers = idx.consumers
        while heap:
            c, f = heapq.heappop(heap)
            if pop_seq[f] >= 0 or c > cost[f]:
                continue
            pop_seq[f] = pops
            pops += 1
            if f in idx.goal_fact_set:
                goals_remaining -= 1
            for op_id in consumers[f]:
                remaining[op_id] -= 1
                if remaining[op_id] == 0:
                    relax(op_id)
            if early_stop and goals_remaining == 0:
                break
        return cost, supporter, pop_seq

    def fact_costs(self, state: State, early_stop: bool = False) -> FactCostTables:
        """Additive and max cost tables with the goal totals (both sweeps)."""
        idx = self.index
        add_costs, _, _ = self._sweep(state, additive=True, early_stop=early_stop)
        max_costs, _, _ = self._sweep(state, additive=False, early_stop=early_stop)
        h_add: int | float = 0
        h_max: int | float = 0
        for f in idx.goal_facts:
            h_add = saturating_add(h_add, add_costs[f])
            if max_costs[f] > h_max:
                h_max = max_costs[f]
        return FactCostTables(add_costs, max_costs, h_add, h_max)

    def relaxed_plan(self, state: State) -> RelaxedPlanResult | None:
        """Extract a relaxed plan via best supporters; None on a relaxed dead end."""
        idx = self.index
        cost, supporter, pop_seq = self._sweep(state, additive=True, early_stop=False)
        for f in idx.goal_facts:
            if cost[f] == INFINITY:
                return None
        plan = self._extract(state, supporter, pop_seq)
        h_ff = sum(idx.op_costs[op] for op in plan)
        per_goal = {
            (idx.fact_var[f], idx.fact_val[f]): cost[f] for f in idx.goal_facts
        }
        h_add_total: int | float = 0
        for f in idx.goal_facts:
            h_add_total = saturating_add(h_add_total, cost[f])
        return RelaxedPlanResult(h_ff, tuple(plan), per_goal, h_add_total)

    def _extract(self, state: State, supporter, pop_seq) -> list[int]:
        idx = self.index
        values = state.values
        heap = [
            (-pop_seq[f], f)
            for f in idx.goal_facts
            if values[idx.fact_var[f]] != idx.fact_val[f]
        ]
        heapq.heapify(heap)
        processed = [False] * idx.num_facts
        counted = set()
        plan = []
        while heap:
            _, f = heapq.heappop(heap)
            if processed[f]:
                continue
            processed[f] = True
            op_id = supporter[f]
            if op_id < 0 or op_id in counted:
                continue
            counted.add(op_id)
            plan.append(op_id)
            for p in idx.pre_facts[op_id]:
                if not processed[p] and values[idx.fact_var[p]] != idx.fact_val[p]:
                    heapq.heappush(heap, (-pop_seq[p], p))
        return plan


class HMax:
    """Critical-path estimate: max over goal facts of their relaxed cost."""

    name = "hmax"

    def initialize(self, task: Task):
        self._engine = DeleteRelaxation(task)

    def evaluate(self, state: State):
        idx = self._engine.index
        costs, _, _ = self._engine._sweep(state, additive=False, early_stop=True)
        best: int | float = 0
        for f in idx.goal_facts:
            c = costs[f]
            if c == INFINITY:
                return INFINITY
            if c > best:
                best = c
        return best


class HAdd:
    """Additive estimate: sum over goal facts of their relaxed cost."""

    name = "hadd"

    def initialize(self, task: Task):
        self._engine = DeleteRelaxation(task)

    def evaluate(self, state: State):
        idx = self._engine.index
        costs, _, _ = self._engine._sweep(state, additive=True, early_stop=True)
        total: int | float = 0
        for f in idx.goal_facts:
            c = costs[f]
            if c == INFINITY:
                return INFINITY
            total = saturating_add(total, c)
        return total


class FF:
    """Cost of an extracted relaxed plan; the classic satisficing estimate."""

    name = "ff"

    def initialize(self, task: Task):
        self._engine = DeleteRelaxation(task)

    def evaluate(self, state: State):
        result = self._engine.relaxed_plan(state)
        return INFINITY if result is None else result.h_ff

    def relaxed_plan(self, state: State) -> RelaxedPlanResult | None:
        return self._engine.relaxed_plan(state)
