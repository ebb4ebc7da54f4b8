"""Heuristic interface and the catalog of built-in estimators.

A heuristic maps states to nonnegative integers, or to DEAD_END for states
it proves unsolvable.  Instances own mutable scratch buffers, so a single
instance must not be shared between concurrently running searches; distinct
instances over the same task are safe.
"""

from __future__ import annotations

from ..sas import State, Task

DEAD_END = float("inf")


class Heuristic:
    """Base interface: initialize once per task, then evaluate states.

    evaluate() must be a pure function of (task, state) after
    initialization and must never return a negative value.
    """

    name = "heuristic"

    def initialize(self, task: Task):
        raise NotImplementedError

    def evaluate(self, state: State):
        raise NotImplementedError


from .baselines import Blind, GoalCount  # noqa: E402
from .relaxation import FF, DeleteRelaxation, HAdd, HMax, RelaxedPlanResult  # noqa: E402
from .evolved import (  # noqa: E402
    DtgNextActionUnmet,
    FastRelaxedPlan,
    GenerationScratch,
    RelaxedPlanConflicts,
    WeightedDtgLandmarks,
)
from .composite import (  # noqa: E402
    GENOME_SIZE,
    GenomeError,
    WeightedCombination,
    build_source_heuristic,
    validate_genome,
)

HEURISTICS = {
    "blind": Blind,
    "goalcount": GoalCount,
    "hmax": HMax,
    "hadd": HAdd,
    "ff": FF,
    "ff-conflicts": RelaxedPlanConflicts,
    "ff-fast": FastRelaxedPlan,
    "dtg-landmarks": WeightedDtgLandmarks,
    "dtg-unmet": DtgNextActionUnmet,
}


def build_heuristic(name: str) -> Heuristic:
    """Construct a fresh, uninitialized heuristic by registry name."""
    try:
        return HEURISTICS[name]()
    except KeyError:
        known = ", ".join(sorted(HEURISTICS))
        raise KeyError(f"unknown heuristic '{name}' (known: {known})") from None


__all__ = [
    "DEAD_END",
    "Heuristic",
    "HEURISTICS",
    "build_heuristic",
    "Blind",
    "GoalCount",
    "HMax",
    "HAdd",
    "FF",
    "DeleteRelaxation",
    "RelaxedPlanResult",
    "RelaxedPlanConflicts",
    "FastRelaxedPlan",
    "WeightedDtgLandmarks",
    "DtgNextActionUnmet",
    "GenerationScratch",
    "WeightedCombination",
    "GenomeError",
    "GENOME_SIZE",
    "validate_genome",
    "build_source_heuristic",
]
