"""Quality-diversity evolution: adaptive-grid archives, islands, and the loop.

Each island owns a grid keyed by the two archive features (normalized
evaluations, evaluations per second).  Bin edges divide the observed
feature range evenly and adapt as new extremes arrive; adapting re-maps
every elite, and elites colliding in one cell keep the higher score, so
some diversity can be lost at re-bin but the archive maximum never is.

The loop: sample a parent round-robin across islands and uniformly within
one, ask the mutation operator for a child, smoke-check it, feed failures
back through a bounded repair budget, evaluate survivors on the training
set and insert them into the parent's island.  Periodically each island's
best elite is offered (copied, never moved) to every other island.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from pathlib import Path

from .fitness import (
    DEFAULT_ALPHA,
    DEFAULT_BUDGET_FLOOR,
    DEFAULT_MEMORY_LIMIT,
    SimulatedTiming,
    SmokeCheckFailure,
    TrainingSet,
    evaluate_heuristic,
)
from .heuristics import GenomeError, WeightedCombination, validate_genome


class MutationFailure(Exception):
    """A mutation or repair call produced nothing usable."""

    def __init__(self, diagnostic: str):
        super().__init__(diagnostic)
        self.diagnostic = diagnostic


@dataclass
class Individual:
    id: str
    genome: object
    score: float | None = None
    features: tuple[float, float] | None = None
    parent: str | None = None
    island: int = 0
    iteration: int = 0
    repair_attempts: int = 0

    def to_dict(self) -> dict:
        genome = list(self.genome) if isinstance(self.genome, tuple) else self.genome
        return {
            "id": self.id,
            "genome": genome,
            "score": self.score,
            "features": list(self.features) if self.features else None,
            "parent": self.parent,
            "island": self.island,
            "iteration": self.iteration,
            "repair_attempts": self.repair_attempts,
        }


@dataclass
class PlacementReport:
    placed: bool
    cell: tuple[int, int]
    displaced: str | None = None
    rebinned: bool = False


class Archive:
    """Best-per-cell grid with evenly spaced, adaptively widening bins."""

    def __init__(self, dims: tuple[int, int] = (4, 4)):
        self.dims = dims
        self.lower: list[float | None] = [None, None]
        self.upper: list[float | None] = [None, None]
        self.cells: dict[tuple[int, int], Individual] = {}
        self.insertion_log: list[PlacementReport] = []

    def _bin(self, value: float, dim: int) -> int:
        lo, hi = self.lower[dim], self.upper[dim]
        if lo is None or hi is None or hi == lo:
            return 0
        index = int((value - lo) / (hi - lo) * self.dims[dim])
        return min(max(index, 0), self.dims[dim] - 1)

    def cell_of(self, features: tuple[float, float]) -> tuple[int, int]:
        return (self._bin(features[0], 0), self._bin(features[1], 1))

    def _extend_bounds(self, features: tuple[float, float]) -> bool:
        changed = False
        for dim in (0, 1):
            value = features[dim]
            if self.lower[dim] is None or value < self.lower[dim]:
                self.lower[dim] = value
                changed = True
            if self.upper[dim] is None or value > self.upper[dim]:
                self.upper[dim] = value
                changed = True
        return changed

    def _rebin(self):
        elites = sorted(self.cells.values(), key=lambda e: (-e.score, e.id))
        self.cells = {}
        for elite in elites:
            cell = self.cell_of(elite.features)
            if cell not in self.cells:  # losers of a collision are dropped
                self.cells[cell] = elite

    def insert(self, individual: Individual) -> PlacementReport:
        if individual.score is None or individual.features is None:
            raise ValueError("only evaluated individuals can be archived")
        rebinned = False
        if self._extend_bounds(individual.features):
            rebinned = bool(self.cells)
            if rebinned:
                self._rebin()
        cell = self.cell_of(individual.features)
        incumbent = self.cells.get(cell)
        if incumbent is None or individual.score > incumbent.score:
            self.cells[cell] = individual
            report = PlacementReport(True, cell, incumbent.id if incumbent else None, rebinned)
        else:
            report = PlacementReport(False, cell, None, rebinned)
        self.insertion_log.append(report)
        return report

    def elites(self) -> list[Individual]:
        return [self.cells[cell] for cell in sorted(self.cells)]

    def best(self) -> Individual | None:
        if not self.cells:
            return None
        return max(self.cells.values(), key=lambda e: (e.score, e.id))

    def top(self, k: int) -> list[Individual]:
        return sorted(self.cells.values(), key=lambda e: (-e.score, e.id))[:k]


class IslandSet:
    """Round-robin parent sampling over independent archives, with migration."""

    def __init__(
        self,
        num_islands: int = 3,
        dims: tuple[int, int] = (4, 4),
        migration_interval: int = 10,
    ):
        if num_islands < 1:
            raise ValueError("need at least one island")
        self.islands = [Archive(dims) for _ in range(num_islands)]
        self.migration_interval = migration_interval
        self.cursor = 0
        self.iteration_counts = [0] * num_islands

    def sample_parent(self, rng: random.Random) -> tuple[int, Individual]:
        """Next non-empty island in rotation, then a uniform occupied cell."""
        n = len(self.islands)
        for offset in range(n):
            index = (self.cursor + offset) % n
            archive = self.islands[index]
            if archive.cells:
                self.cursor = (index + 1) % n
                cells = sorted(archive.cells)
                cell = cells[rng.randrange(len(cells))]
                return index, archive.cells[cell]
        raise ValueError("all islands are empty; insert a seed first")

    def record_iteration(self, island: int) -> bool:
        self.iteration_counts[island] += 1
        return self.iteration_counts[island] % self.migration_interval == 0

    def migrate(self, source: int) -> list[dict]:
        """Offer the source island's best elite to every other island."""
        best = self.islands[source].best()
        if best is None:
            return []
        events = []
        for target, archive in enumerate(self.islands):
            if target == source:
                continue
            report = archive.insert(best)
            events.append(
                {
                    "from": source,
                    "to": target,
                    "individual": best.id,
                    "placed": report.placed,
                }
            )
        return events

    def best(self) -> Individual | None:
        candidates = [a.best() for a in self.islands if a.best() is not None]
        if not candidates:
            return None
        return max(candidates, key=lambda e: (e.score, e.id))


class IdentityMutator:
    """Returns the parent genome unchanged; useful for smoke runs and tests."""

    def propose(self, parent: Individual, inspirations):
        return parent.genome

    def repair(self, genome, diagnostic: str):
        return genome


class ParametricMutator:
    """Log-normal weight perturbations with occasional uniform crossover.

    Perturbing a zero weight draws a fresh positive value; multiplicative
    steps have median 1.  Crossover picks each weight from the parent or a
    uniformly chosen inspiration, staying inside their bounding box.
    """

    def __init__(
        self,
        rng: random.Random,
        step_sigma: float = 0.4,
        crossover_rate: float = 0.2,
        second_weight_rate: float = 0.3,
    ):
        self.rng = rng
        self.step_sigma = step_sigma
        self.crossover_rate = crossover_rate
        self.second_weight_rate = second_weight_rate

    def _perturb(self, value: float) -> float:
        if value <= 1e-12:
            return self.rng.lognormvariate(math.log(0.5), 0.5)
        return value * self.rng.lognormvariate(0.0, self.step_sigma)

    def propose(self, parent: Individual, inspirations):
        weights = list(validate_genome(parent.genome))
        mates = [ind for ind in inspirations if ind.id != parent.id]
        if mates and self.rng.random() < self.crossover_rate:
            mate = validate_genome(mates[self.rng.randrange(len(mates))].genome)
            return tuple(
                w if self.rng.random() < 0.5 else m for w, m in zip(weights, mate)
            )
        count = 2 if self.rng.random() < self.second_weight_rate else 1
        for index in self.rng.sample(range(len(weights)), count):
            weights[index] = self._perturb(weights[index])
        return tuple(weights)

    def repair(self, genome, diagnostic: str):
        """Clamp non-finite or negative weights to zero."""
        try:
            values = [float(w) for w in genome]
        except (TypeError, ValueError):
            raise MutationFailure(f"genome is not numeric: {diagnostic}") from None
        return tuple(w if math.isfinite(w) and w >= 0 else 0.0 for w in values)


def parametric_seed(name: str) -> tuple[float, ...]:
    """Weight-vector seeds: the blind-equivalent zero vector, or the
    relaxed-plan baseline as (1, 0, 0, 0)."""
    if name == "blind":
        return (0.0, 0.0, 0.0, 0.0)
    if name == "ff":
        return (1.0, 0.0, 0.0, 0.0)
    raise ValueError(f"unknown seed name '{name}' (expected 'blind' or 'ff')")


def build_parametric_heuristic(genome) -> WeightedCombination:
    return WeightedCombination(genome)


@dataclass
class EvolveConfig:
    iterations: int = 200
    grid_dims: tuple[int, int] = (4, 4)
    islands: int = 3
    migration_interval: int = 10
    alpha: float = DEFAULT_ALPHA
    repair_budget: int = 4
    seed: int = 0
    budget_floor: float = DEFAULT_BUDGET_FLOOR
    memory_limit: int = DEFAULT_MEMORY_LIMIT
    inspiration_count: int = 3


@dataclass
class EvolutionResult:
    islands: IslandSet
    log: list[dict] = field(default_factory=list)
    best: Individual | None = None


def evolve_loop(
    seed_genome,
    mutator,
    training: TrainingSet,
    config: EvolveConfig,
    build_heuristic_fn=build_parametric_heuristic,
    timing=None,
    log_sink=None,
) -> EvolutionResult:
    """Run the generate / check / repair / evaluate / store loop.

    The seed must evaluate successfully; it is installed on every island.
    The run log gets one record per iteration (outcome, repairs used,
    score, features, placement, migrations) and is deterministic under the
    simulated timing model and a fixed random seed.
    """
    rng = random.Random(config.seed)
    timing = timing or SimulatedTiming()

    def evaluate_genome(genome):
        heuristic = build_heuristic_fn(genome)
        return evaluate_heuristic(
            heuristic,
            training,
            memory_limit=config.memory_limit,
            alpha=config.alpha,
            budget_floor=config.budget_floor,
            timing=timing,
        )

    seed_report = evaluate_genome(seed_genome)
    islands = IslandSet(config.islands, config.grid_dims, config.migration_interval)
    log: list[dict] = []

    def emit(record: dict):
        log.append(record)
        if log_sink is not None:
            log_sink(record)

    for index, archive in enumerate(islands.islands):
        seed_individual = Individual(
            id=f"seed-{index}",
            genome=seed_genome,
            score=seed_report.score,
            features=seed_report.features,
            island=index,
        )
        archive.insert(seed_individual)
    emit(
        {
            "iteration": 0,
            "outcome": "seed",
            "score": seed_report.score,
            "features": list(seed_report.features),
        }
    )

    for iteration in range(1, config.iterations + 1):
        island_index, parent = islands.sample_parent(rng)
        inspirations = islands.islands[island_index].top(config.inspiration_count)

        diagnostic = None
        genome = None
        failing_source = parent.genome
        try:
            genome = mutator.propose(parent, inspirations)
        except MutationFailure as exc:
            diagnostic = exc.diagnostic

        repairs = 0
        report = None
        while True:
            if genome is not None:
                failing_source = genome
                try:
                    report = evaluate_genome(genome)
                    break
                except (SmokeCheckFailure, GenomeError) as exc:
                    diagnostic = str(exc)
            if repairs >= config.repair_budget:
                break
            repairs += 1
            try:
                genome = mutator.repair(failing_source, diagnostic or "")
            except MutationFailure as exc:
                diagnostic = exc.diagnostic
                genome = None

        if report is None:
            emit(
                {
                    "iteration": iteration,
                    "island": island_index,
                    "parent": parent.id,
                    "outcome": "failed",
                    "repairs": repairs,
                    "diagnostic": (diagnostic or "")[:500],
                }
            )
            continue

        child = Individual(
            id=f"i{iteration:05d}",
            genome=genome,
            score=report.score,
            features=report.features,
            parent=parent.id,
            island=island_index,
            iteration=iteration,
            repair_attempts=repairs,
        )
        placement = islands.islands[island_index].insert(child)
        migrations = []
        if islands.record_iteration(island_index):
            migrations = islands.migrate(island_index)
        emit(
            {
                "iteration": iteration,
                "island": island_index,
                "parent": parent.id,
                "child": child.id,
                "outcome": "ok" if repairs == 0 else "repaired",
                "repairs": repairs,
                "score": child.score,
                "features": list(child.features),
                "placed": placement.placed,
                "cell": list(placement.cell),
                "migrations": migrations,
            }
        )

    return EvolutionResult(islands=islands, log=log, best=islands.best())


def archives_to_dict(islands: IslandSet) -> dict:
    return {
        "islands": [
            {
                "bounds": {"lower": archive.lower, "upper": archive.upper},
                "elites": [
                    {"cell": list(cell), **archive.cells[cell].to_dict()}
                    for cell in sorted(archive.cells)
                ],
            }
            for archive in islands.islands
        ]
    }


def save_archives(path: str | Path, islands: IslandSet):
    Path(path).write_text(
        json.dumps(archives_to_dict(islands), indent=2, sort_keys=True), encoding="utf-8"
    )
