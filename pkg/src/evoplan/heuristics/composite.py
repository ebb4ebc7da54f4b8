"""Heuristics built from data: weight vectors and source text.

The weighted combination is the genome format used by the deterministic
mutation operator: four nonnegative weights over relaxed-plan cost,
additive cost, goal count and causal-weighted goal distances.  The
all-zero vector degenerates to a constant (blind-equivalent) estimate and
(1, 0, 0, 0) reproduces the relaxed-plan baseline.

Source-text genomes are Python modules defining an `EvolvedHeuristic`
class; they are compiled with a small import allowlist.  This is a guard
against accidents, not a sandbox, and is only used for explicitly
configured runs.
"""

from __future__ import annotations

import ast
import math

from ..graphs import backward_goal_distances, build_causal_graph, build_dtg
from ..sas import INFINITY, State, Task
from .relaxation import DeleteRelaxation

DEAD_END = INFINITY

GENOME_SIZE = 4
GENOME_COMPONENTS = ("relaxed_plan", "additive", "goal_count", "dtg_distances")

# Per-evaluation cost multipliers for the simulated timing model, by component.
# Tuned so that uninformed genomes pay for their evaluation volume and
# informed ones for their per-state work, keeping the time score away from
# its saturation points on fixture-sized tasks.
_SIM_BASE_SECONDS = 2e-2
_SIM_COMPONENT_FACTORS = (1.0, 0.75, 0.1, 0.25)


class GenomeError(ValueError):
    """The genome cannot be turned into a working heuristic."""


def validate_genome(genome) -> tuple[float, ...]:
    try:
        weights = tuple(float(w) for w in genome)
    except (TypeError, ValueError) as exc:
        raise GenomeError(f"genome is not a sequence of numbers: {exc}") from None
    if len(weights) != GENOME_SIZE:
        raise GenomeError(f"genome must have {GENOME_SIZE} weights, got {len(weights)}")
    for i, w in enumerate(weights):
        if not math.isfinite(w):
            raise GenomeError(f"weight {GENOME_COMPONENTS[i]} is not finite")
        if w < 0:
            raise GenomeError(f"weight {GENOME_COMPONENTS[i]} is negative")
    return weights


class WeightedCombination:
    """round(w0*relaxed_plan + w1*additive + w2*goalcount + w3*dtg_sum).

    Only components with positive weight are computed; any active component
    reporting a dead end makes the whole estimate a dead end (both the
    relaxation and the distance tables are dead-end sound).
    """

    name = "weighted-combo"

    def __init__(self, genome=(0.0, 0.0, 0.0, 0.0)):
        self.weights = validate_genome(genome)

    @property
    def genome(self) -> tuple[float, ...]:
        return self.weights

    @property
    def simulated_seconds_per_evaluation(self) -> float:
        factor = 1.0 + sum(
            f for f, w in zip(_SIM_COMPONENT_FACTORS, self.weights) if w > 0
        )
        return _SIM_BASE_SECONDS * factor

    def initialize(self, task: Task):
        w_ff, w_add, w_gc, w_dtg = self.weights
        self._relax = DeleteRelaxation(task) if (w_ff > 0 or w_add > 0) else None
        self._goal_pairs = task.goal.pairs if w_gc > 0 else ()
        self._dtg_entries = ()
        if w_dtg > 0:
            cg = build_causal_graph(task)
            entries = []
            for var, val in task.goal:
                table = backward_goal_distances(build_dtg(task, var), val)
                entries.append((var, table.dist, 1 + len(cg.predecessors[var])))
            self._dtg_entries = tuple(entries)

    def evaluate(self, state: State):
        w_ff, w_add, w_gc, w_dtg = self.weights
        total = 0.0
        if self._relax is not None:
            if w_ff > 0:
                plan = self._relax.relaxed_plan(state)
                if plan is None:
                    return DEAD_END
                total += w_ff * plan.h_ff
                if w_add > 0:
                    total += w_add * plan.h_add_total
            else:
                tables = self._relax.fact_costs(state, early_stop=True)
                if tables.h_add_total == INFINITY:
                    return DEAD_END
                total += w_add * tables.h_add_total
        if w_gc > 0:
            values = state.values
            unsat = sum(1 for var, val in self._goal_pairs if values[var] != val)
            total += w_gc * unsat
        if w_dtg > 0:
            values = state.values
            for var, dist, weight in self._dtg_entries:
                d = dist[values[var]]
                if d == INFINITY:
                    return DEAD_END
                total += w_dtg * d * weight
        return int(round(total))


_ALLOWED_IMPORT_ROOTS = {"math", "heapq", "collections", "itertools", "functools", "evoplan"}


def build_source_heuristic(source: str):
    """Compile a source-text genome into a heuristic instance.

    The module must define an `EvolvedHeuristic` class with the usual
    initialize/evaluate surface.  Imports outside a small allowlist are
    rejected before execution.
    """
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise GenomeError(f"source does not parse: {exc}") from None
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            roots = [alias.name.split(".")[0] for alias in node.names]
        elif isinstance(node, ast.ImportFrom):
            roots = [(node.module or "").split(".")[0]]
        else:
            continue
        for root in roots:
            if root not in _ALLOWED_IMPORT_ROOTS:
                raise GenomeError(f"import of '{root}' is not allowed in heuristic source")

    from . import DEAD_END as dead_end_value
    from . import Heuristic

    namespace = {
        "Heuristic": Heuristic,
        "DEAD_END": dead_end_value,
        "INFINITY": INFINITY,
        "math": math,
    }
    try:
        exec(compile(tree, "<heuristic-source>", "exec"), namespace)
    except Exception as exc:
        raise GenomeError(f"source failed to execute: {exc}") from None
    cls = namespace.get("EvolvedHeuristic")
    if cls is None or not isinstance(cls, type):
        raise GenomeError("source must define an EvolvedHeuristic class")
    try:
        instance = cls()
    except Exception as exc:
        raise GenomeError(f"EvolvedHeuristic() failed: {exc}") from None
    if not hasattr(instance, "evaluate") or not hasattr(instance, "initialize"):
        raise GenomeError("EvolvedHeuristic must provide initialize() and evaluate()")
    return instance
