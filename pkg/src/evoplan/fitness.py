"""Per-task budgets, the blended fitness score and the archive features.

The score blends coverage with a time score that decays logarithmically
from 1 to 0 as solving time approaches the per-task budget; the blend
constant defaults to 0.25.  Budgets are calibrated per task from a
baseline run of the reference relaxed-plan heuristic: max(30 s, 1.3x its
time).  The 30-second floor exists to absorb heavy precomputation, so a
heuristic's initialization time counts toward its per-task time.

Archive features: evaluations normalized per task against the baseline
(failure sentinel 10) and raw evaluations per second (failure sentinel 0).
On a failed task the remainder of that domain is marked failed without
being run, conserving budget for promising candidates.

Two timing models are supported.  Wall-clock is the default for
benchmarking.  The simulated model derives task time from the evaluation
count and a per-heuristic cost factor, which makes whole evolution runs
bit-reproducible and keeps the time score discriminative on fixture-sized
tasks that real hardware solves in milliseconds.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from .heuristics import FF
from .sas import Operator, PartialAssignment, State, Task, Variable, load_task
from .search import SearchLimits, gbfs

DEFAULT_ALPHA = 0.25
DEFAULT_BUDGET_FLOOR = 30.0
DEFAULT_MEMORY_LIMIT = 8 * 1024**3
EVALS_FAILURE_SENTINEL = 10.0
SPEED_FAILURE_SENTINEL = 0.0


def task_budget(t_ff: float, floor: float = DEFAULT_BUDGET_FLOOR) -> float:
    """Per-task time limit: max(floor, 1.3 * baseline time)."""
    return max(floor, 1.3 * t_ff)


def agile(t: float, budget: float) -> float:
    """Time score: 1 up to one second, 0 at the budget, logarithmic between."""
    if t > budget:
        return 0.0
    if t <= 1.0:
        return 1.0
    return 1.0 - math.log(t) / math.log(budget)


@dataclass(frozen=True)
class TrainingTask:
    domain: str
    name: str
    task: Task
    t_ff: float
    e_ff: int
    path: str | None = None


@dataclass(frozen=True)
class TrainingSet:
    """Calibrated tasks, grouped by domain and ascending in baseline time."""

    tasks: tuple[TrainingTask, ...]

    @classmethod
    def build(cls, entries) -> "TrainingSet":
        by_domain: dict[str, list[TrainingTask]] = {}
        for entry in entries:
            by_domain.setdefault(entry.domain, []).append(entry)
        ordered = []
        for domain_tasks in by_domain.values():
            ordered.extend(sorted(domain_tasks, key=lambda e: (e.t_ff, e.name)))
        return cls(tuple(ordered))

    def domains(self) -> list[str]:
        seen = []
        for entry in self.tasks:
            if entry.domain not in seen:
                seen.append(entry.domain)
        return seen

    def save_calibration(self, path: str | Path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["domain", "name", "path", "t_ff", "e_ff"])
            for entry in self.tasks:
                writer.writerow([entry.domain, entry.name, entry.path or "", entry.t_ff, entry.e_ff])


def load_calibration(path: str | Path) -> TrainingSet:
    """Load a calibration file, re-parsing each task from its recorded path."""
    entries = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            entries.append(
                TrainingTask(
                    domain=row["domain"],
                    name=row["name"],
                    task=load_task(row["path"]),
                    t_ff=float(row["t_ff"]),
                    e_ff=int(row["e_ff"]),
                    path=row["path"],
                )
            )
    return TrainingSet.build(entries)


@dataclass
class EvalRecord:
    domain: str
    name: str
    solved: bool
    time: float
    evaluations: int
    budget: float
    executed: bool
    outcome: str


@dataclass
class FitnessReport:
    score: float
    evals_feature: float
    speed_feature: float
    records: list[EvalRecord]

    @property
    def features(self) -> tuple[float, float]:
        return (self.evals_feature, self.speed_feature)

    def save(self, path: str | Path):
        payload = {
            "score": self.score,
            "evals_feature": self.evals_feature,
            "speed_feature": self.speed_feature,
            "records": [asdict(r) for r in self.records],
        }
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")


def fitness_score(records, training: TrainingSet, alpha: float = DEFAULT_ALPHA) -> float:
    """Mean over tasks of alpha*solved + (1-alpha)*agile; unsolved tasks add 0."""
    if not training.tasks:
        return 0.0
    total = 0.0
    for record in records:
        if record.solved:
            total += alpha + (1.0 - alpha) * agile(record.time, record.budget)
    return total / len(training.tasks)


def features(records, training: TrainingSet) -> tuple[float, float]:
    """(normalized evaluations, evaluations per second), with failure sentinels.

    Solved tasks may legitimately exceed the 10x sentinel on the first axis;
    only failures are pinned to it.
    """
    if not training.tasks:
        return (EVALS_FAILURE_SENTINEL, SPEED_FAILURE_SENTINEL)
    evals_total = 0.0
    speed_total = 0.0
    for record, entry in zip(records, training.tasks, strict=True):
        if record.solved:
            evals_total += record.evaluations / entry.e_ff
            speed_total += record.evaluations / max(record.time, 1e-9)
        else:
            evals_total += EVALS_FAILURE_SENTINEL
            speed_total += SPEED_FAILURE_SENTINEL
    n = len(training.tasks)
    return (evals_total / n, speed_total / n)


class WallClockTiming:
    """Task time = initialization plus measured search wall time."""

    mode = "wall"

    def task_time(self, heuristic, init_seconds: float, result) -> float:
        return init_seconds + result.wall_time


class SimulatedTiming:
    """Deterministic task time derived from the evaluation count.

    Heuristics may declare `simulated_seconds_per_evaluation`; everything
    else uses the default.  Scores and run logs become bit-reproducible.
    """

    mode = "simulated"

    def __init__(self, default_seconds_per_evaluation: float = 1e-2):
        self.default_seconds_per_evaluation = default_seconds_per_evaluation

    def task_time(self, heuristic, init_seconds: float, result) -> float:
        per_eval = getattr(
            heuristic, "simulated_seconds_per_evaluation", self.default_seconds_per_evaluation
        )
        return result.evaluations * per_eval


def _minimal_task() -> Task:
    variable = Variable(0, "switch", 2, ("off", "on"))
    operator = Operator(
        "flip",
        PartialAssignment(((0, 0),)),
        PartialAssignment(((0, 1),)),
        1,
    )
    return Task(
        variables=(variable,),
        operators=(operator,),
        initial_state=State((0,)),
        goal=PartialAssignment(((0, 1),)),
        metric_uses_costs=True,
    )


MINIMAL_TASK = _minimal_task()


class SmokeCheckFailure(Exception):
    """The candidate could not be constructed or evaluated on a minimal task."""

    def __init__(self, diagnostic: str):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic


def smoke_check(heuristic):
    """Initialize on the minimal task and evaluate its initial state."""
    try:
        heuristic.initialize(MINIMAL_TASK)
        value = heuristic.evaluate(MINIMAL_TASK.initial_state)
    except Exception as exc:
        raise SmokeCheckFailure(f"{type(exc).__name__}: {exc}") from exc
    if value == math.inf:
        return
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise SmokeCheckFailure(
            f"evaluate() must return a nonnegative integer or the dead-end value, got {value!r}"
        )


def evaluate_heuristic(
    heuristic,
    training: TrainingSet,
    *,
    memory_limit: int = DEFAULT_MEMORY_LIMIT,
    alpha: float = DEFAULT_ALPHA,
    budget_floor: float = DEFAULT_BUDGET_FLOOR,
    timing=None,
) -> FitnessReport:
    """Score a heuristic over the training set under calibrated budgets.

    Tasks run grouped by domain in ascending baseline time; the first
    failure in a domain marks its remaining tasks failed without running
    them.  Raises SmokeCheckFailure before running anything when the
    candidate fails the minimal-task check.
    """
    timing = timing or WallClockTiming()
    smoke_check(heuristic)
    records: list[EvalRecord] = []
    aborted: set[str] = set()
    for entry in training.tasks:
        budget = task_budget(entry.t_ff, floor=budget_floor)
        if entry.domain in aborted:
            records.append(
                EvalRecord(entry.domain, entry.name, False, 0.0, 0, budget, False, "ABORTED")
            )
            continue
        start = time.perf_counter()
        try:
            heuristic.initialize(entry.task)
        except Exception as exc:
            records.append(
                EvalRecord(
                    entry.domain, entry.name, False, 0.0, 0, budget, True,
                    f"CRASH: {type(exc).__name__}: {exc}",
                )
            )
            aborted.add(entry.domain)
            continue
        init_seconds = time.perf_counter() - start
        remaining = max(0.01, budget - init_seconds)
        result = gbfs(entry.task, heuristic, SearchLimits(remaining, memory_limit))
        t = timing.task_time(heuristic, init_seconds, result)
        solved = result.solved and t <= budget
        records.append(
            EvalRecord(
                entry.domain, entry.name, solved, t, result.evaluations, budget, True,
                result.outcome.value,
            )
        )
        if not solved:
            aborted.add(entry.domain)
    evals_feature, speed_feature = features(records, training)
    return FitnessReport(
        score=fitness_score(records, training, alpha),
        evals_feature=evals_feature,
        speed_feature=speed_feature,
        records=records,
    )


def calibrate(
    entries,
    *,
    calibration_cap: float = 300.0,
    memory_limit: int = DEFAULT_MEMORY_LIMIT,
    timing=None,
) -> TrainingSet:
    """Run the relaxed-plan baseline over (domain, name, task, path) entries.

    Tasks the baseline cannot solve within the cap are dropped: budgets and
    the evaluation features are undefined without a finite baseline.
    """
    timing = timing or WallClockTiming()
    calibrated = []
    for domain, name, task, path in entries:
        baseline = FF()
        start = time.perf_counter()
        baseline.initialize(task)
        init_seconds = time.perf_counter() - start
        result = gbfs(task, baseline, SearchLimits(calibration_cap, memory_limit))
        if not result.solved:
            continue
        t_ff = timing.task_time(baseline, init_seconds, result)
        calibrated.append(
            TrainingTask(domain, name, task, t_ff, max(1, result.evaluations), path)
        )
    return TrainingSet.build(calibrated)
