from evoplan.heuristics.relaxation import DeleteRelaxation


class EvolvedHeuristic(Heuristic):
    """Cost of an extracted delete-relaxed plan."""

    name = "seed-ff"

    def initialize(self, task):
        self._engine = DeleteRelaxation(task)

    def evaluate(self, state):
        result = self._engine.relaxed_plan(state)
        return DEAD_END if result is None else result.h_ff
