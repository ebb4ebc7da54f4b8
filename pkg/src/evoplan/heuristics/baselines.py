"""The two trivial baselines: blind and goal-count."""

from __future__ import annotations

from ..sas import State, Task, is_goal


class Blind:
    """0 at goal states, the minimum positive action cost everywhere else."""

    name = "blind"

    def initialize(self, task: Task):
        self._task = task
        self._min_cost = task.min_positive_cost

    def evaluate(self, state: State) -> int:
        return 0 if is_goal(state, self._task) else self._min_cost


class GoalCount:
    """Number of goal pairs the state does not satisfy."""

    name = "goalcount"

    def initialize(self, task: Task):
        self._goal_pairs = task.goal.pairs

    def evaluate(self, state: State) -> int:
        values = state.values
        return sum(1 for var, val in self._goal_pairs if values[var] != val)
