"""Analysis artifacts computed from a benchmark outcome matrix.

Every report is a pure function of the matrix rows: re-running a report
never re-runs a search.  Outputs are CSV with a one-line header (JSON
mirrors available behind a flag in the CLI) so external tooling does the
plotting.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

from .search import SearchOutcome

SOLVED, OOT, OOM, OTHER = "SOLVED", "OOT", "OOM", "OTHER"

_OUTCOME_CLASS = {
    SearchOutcome.SOLVED: SOLVED,
    SearchOutcome.OUT_OF_TIME: OOT,
    SearchOutcome.OUT_OF_MEMORY: OOM,
    SearchOutcome.UNSOLVABLE: OTHER,
    SearchOutcome.DEAD_END_FALSE: OTHER,
    SearchOutcome.CRASH: OTHER,
}


def outcome_class(outcome) -> str:
    if isinstance(outcome, SearchOutcome):
        return _OUTCOME_CLASS[outcome]
    if outcome in (SOLVED, OOT, OOM, OTHER):
        return outcome
    return _OUTCOME_CLASS[SearchOutcome(outcome)]


@dataclass(frozen=True)
class MatrixRow:
    heuristic: str
    domain: str
    task: str
    outcome: str  # one of SOLVED / OOT / OOM / OTHER
    wall_time: float
    evaluations: int
    expansions: int
    plan_cost: int


MATRIX_HEADER = ["heuristic", "domain", "task", "outcome", "wall_time", "evaluations", "expansions", "plan_cost"]


def save_matrix(path: str | Path, rows: list[MatrixRow]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(MATRIX_HEADER)
        for row in rows:
            writer.writerow(
                [row.heuristic, row.domain, row.task, row.outcome,
                 row.wall_time, row.evaluations, row.expansions, row.plan_cost]
            )


def load_matrix(path: str | Path) -> list[MatrixRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        for record in csv.DictReader(fh):
            rows.append(
                MatrixRow(
                    heuristic=record["heuristic"],
                    domain=record["domain"],
                    task=record["task"],
                    outcome=record["outcome"],
                    wall_time=float(record["wall_time"]),
                    evaluations=int(record["evaluations"]),
                    expansions=int(record["expansions"]),
                    plan_cost=int(record["plan_cost"]),
                )
            )
    return rows


def rows_to_json(rows) -> str:
    return json.dumps([asdict(r) if hasattr(r, "__dataclass_fields__") else r for r in rows],
                      indent=2, sort_keys=True)


def _heuristic_names(rows: list[MatrixRow]) -> list[str]:
    names = []
    for row in rows:
        if row.heuristic not in names:
            names.append(row.heuristic)
    return names


def _task_keys(rows: list[MatrixRow]) -> list[tuple[str, str]]:
    keys = []
    for row in rows:
        key = (row.domain, row.task)
        if key not in keys:
            keys.append(key)
    return keys


def cactus_rows(rows: list[MatrixRow]) -> list[tuple[str, float, int]]:
    """Per heuristic: solved wall times ascending with a cumulative count."""
    result = []
    for name in _heuristic_names(rows):
        times = sorted(r.wall_time for r in rows if r.heuristic == name and r.outcome == SOLVED)
        for count, t in enumerate(times, 1):
            result.append((name, t, count))
    return result


def _geometric_mean(values: list[float]) -> float:
    return math.exp(sum(math.log(v) for v in values) / len(values))


def pareto_rows(
    rows: list[MatrixRow], ff_name: str = "ff"
) -> tuple[list[tuple[str, float, float]], str | None]:
    """Baseline-normalized (informedness, throughput) per heuristic.

    Heuristics solving fewer than a third of the tasks are dropped (except
    the normalization baseline, which is always retained); scores are
    geometric means over the tasks solved by every retained heuristic, so
    the baseline maps to exactly (1.0, 1.0).  Returns the rows and an
    optional warning when the common task set is empty.
    """
    names = _heuristic_names(rows)
    if ff_name not in names:
        raise ValueError(f"baseline heuristic '{ff_name}' is not in the matrix")
    tasks = _task_keys(rows)
    total = len(tasks)
    per_heuristic: dict[str, dict[tuple[str, str], MatrixRow]] = {n: {} for n in names}
    for row in rows:
        per_heuristic[row.heuristic][(row.domain, row.task)] = row

    def solved_set(name: str) -> set[tuple[str, str]]:
        return {k for k, r in per_heuristic[name].items() if r.outcome == SOLVED}

    kept = [n for n in names if 3 * len(solved_set(n)) >= total]
    if ff_name not in kept:
        kept.insert(0, ff_name)
    common = set(tasks)
    for name in kept:
        common &= solved_set(name)
    if not common:
        return [], "empty report: no task is solved by every retained heuristic"
    common_order = [k for k in tasks if k in common]

    result = []
    for name in kept:
        informedness_ratios = []
        speed_ratios = []
        for key in common_order:
            mine = per_heuristic[name][key]
            base = per_heuristic[ff_name][key]
            my_evals = max(mine.evaluations, 1)  # hand-made files may carry zeros
            base_evals = max(base.evaluations, 1)
            informedness_ratios.append(base_evals / my_evals)
            my_rate = my_evals / max(mine.wall_time, 1e-9)
            base_rate = base_evals / max(base.wall_time, 1e-9)
            speed_ratios.append(my_rate / base_rate)
        result.append((name, _geometric_mean(informedness_ratios), _geometric_mean(speed_ratios)))
    return result, None


def similarity_rows(
    rows: list[MatrixRow],
) -> tuple[list[tuple[str, str, float]], list[tuple[str, str, float]]]:
    """Jaccard similarity of solved sets and the pairwise domination share.

    Jaccard of two empty sets is defined as 1; domination(row, col) is the
    fraction of all tasks that the row solves and the column does not.
    """
    names = _heuristic_names(rows)
    tasks = _task_keys(rows)
    total = len(tasks)
    solved: dict[str, set] = {n: set() for n in names}
    for row in rows:
        if row.outcome == SOLVED:
            solved[row.heuristic].add((row.domain, row.task))
    jaccard = []
    domination = []
    for a in names:
        for b in names:
            union = solved[a] | solved[b]
            inter = solved[a] & solved[b]
            jaccard.append((a, b, len(inter) / len(union) if union else 1.0))
            domination.append((a, b, len(solved[a] - solved[b]) / total if total else 0.0))
    return jaccard, domination


def save_csv(path: str | Path, header: list[str], rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
