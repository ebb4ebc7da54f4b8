"""Command-line surface: solve, bench, evolve and the report generators.

Exit codes: 0 success, 1 usage error, 2 input error (unparseable task,
bad manifest or config), 3 internal failure or crash.
"""

from __future__ import annotations

import hashlib
import json
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from . import evolution, fitness, llm, reports
from .heuristics import (
    HEURISTICS,
    WeightedCombination,
    build_heuristic,
    build_source_heuristic,
)
from .sas import SasParseError, load_task
from .search import SearchLimits, SearchOutcome, gbfs, write_plan_file

DEFAULT_TIME_LIMIT = 1800.0
DEFAULT_MEMORY_LIMIT = 8 * 1024**3


class InputError(Exception):
    """Bad input data (distinct from bad command-line usage)."""


def resolve_heuristic(name: str):
    """Registry name, or path to an exported genome definition (.json)."""
    if name in HEURISTICS:
        return build_heuristic(name)
    path = Path(name)
    if path.suffix == ".json":
        if not path.exists():
            raise click.UsageError(f"heuristic definition file not found: {name}")
        return load_heuristic_definition(path)
    raise click.UsageError(
        f"unknown heuristic '{name}' (known: {', '.join(sorted(HEURISTICS))}, or a .json genome file)"
    )


def load_heuristic_definition(path: Path):
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
        kind = payload["kind"]
        if kind == "parametric":
            return WeightedCombination(payload["genome"])
        if kind == "source":
            return build_source_heuristic(payload["genome"])
    except InputError:
        raise
    except Exception as exc:
        raise InputError(f"cannot load heuristic definition {path}: {exc}") from exc
    raise InputError(f"unknown heuristic definition kind '{kind}' in {path}")


@click.group()
def cli():
    """Planning toolkit: search, benchmarking, reports and heuristic evolution."""


@cli.command()
@click.argument("task_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--heuristic", "-H", "heuristic_name", default="ff", show_default=True)
@click.option("--time-limit", default=DEFAULT_TIME_LIMIT, show_default=True)
@click.option("--memory-limit", default=DEFAULT_MEMORY_LIMIT, show_default=True)
@click.option("--plan-file", default="plan.out", show_default=True)
def solve(task_path, heuristic_name, time_limit, memory_limit, plan_file):
    """Solve one task and print a machine-readable stats line."""
    task = load_task(task_path)
    heuristic = resolve_heuristic(heuristic_name)
    start = time.perf_counter()
    heuristic.initialize(task)
    init_seconds = time.perf_counter() - start
    result = gbfs(task, heuristic, SearchLimits(time_limit, memory_limit))
    if result.solved:
        write_plan_file(plan_file, task, result.plan)
    click.echo(
        f"outcome={result.outcome.value} time={init_seconds + result.wall_time:.6f} "
        f"evaluations={result.evaluations} expansions={result.expansions} "
        f"cost={result.plan_cost} plan_length={len(result.plan) if result.plan else 0}"
    )
    if result.outcome is SearchOutcome.CRASH:
        click.echo(f"crash diagnostic: {result.error}", err=True)
        raise click.exceptions.Exit(3)


def _bench_one(heuristic_name, domain, task_name, task_path, time_limit, memory_limit) -> dict:
    task = load_task(task_path)
    heuristic = resolve_heuristic(heuristic_name)
    start = time.perf_counter()
    heuristic.initialize(task)
    init_seconds = time.perf_counter() - start
    result = gbfs(task, heuristic, SearchLimits(time_limit, memory_limit))
    return {
        "heuristic": heuristic_name,
        "domain": domain,
        "task": task_name,
        "outcome": reports.outcome_class(result.outcome),
        "wall_time": init_seconds + result.wall_time,
        "evaluations": result.evaluations,
        "expansions": result.expansions,
        "plan_cost": result.plan_cost,
    }


def read_manifest(path: Path) -> list[tuple[str, str, str]]:
    """Manifest lines: 'domain,task_path'; the task name is the file stem."""
    entries = []
    for line_no, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise InputError(f"{path}:{line_no}: expected 'domain,task_path', got '{raw}'")
        domain, task_path = parts
        if not Path(task_path).exists():
            raise InputError(f"{path}:{line_no}: task file not found: {task_path}")
        entries.append((domain, Path(task_path).stem, task_path))
    if not entries:
        raise InputError(f"manifest {path} lists no tasks")
    return entries


@cli.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--heuristic", "-H", "heuristic_names", multiple=True, required=True)
@click.option("--time-limit", default=DEFAULT_TIME_LIMIT, show_default=True)
@click.option("--memory-limit", default=DEFAULT_MEMORY_LIMIT, show_default=True)
@click.option("--out", default="matrix.csv", show_default=True)
@click.option("--cache-dir", default=None, type=click.Path(file_okay=False))
@click.option("--workers", default=1, show_default=True)
@click.option("--json", "json_mirror", is_flag=True, help="Also write a JSON mirror.")
def bench(manifest, heuristic_names, time_limit, memory_limit, out, cache_dir, workers, json_mirror):
    """Run a heuristic x task matrix; resumable through the result cache."""
    entries = read_manifest(Path(manifest))
    for name in heuristic_names:
        resolve_heuristic(name)  # fail fast on unknown names

    cache = Path(cache_dir) if cache_dir else None
    if cache:
        cache.mkdir(parents=True, exist_ok=True)

    def cache_key(heuristic, task_path) -> Path:
        digest = hashlib.sha1(
            f"{heuristic}|{task_path}|{time_limit}|{memory_limit}".encode()
        ).hexdigest()
        return cache / f"{digest}.json"

    jobs = []
    records: dict[tuple[str, str, str], dict] = {}
    for name in heuristic_names:
        for domain, task_name, task_path in entries:
            if cache:
                hit = cache_key(name, task_path)
                if hit.exists():
                    records[(name, domain, task_name)] = json.loads(hit.read_text())
                    continue
            jobs.append((name, domain, task_name, task_path))

    if jobs:
        if workers > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(
                    pool.map(
                        _bench_one,
                        *zip(*[(n, d, t, p) for n, d, t, p in jobs]),
                        [time_limit] * len(jobs),
                        [memory_limit] * len(jobs),
                    )
                )
        else:
            results = [
                _bench_one(n, d, t, p, time_limit, memory_limit) for n, d, t, p in jobs
            ]
        for (name, domain, task_name, task_path), record in zip(jobs, results):
            records[(name, domain, task_name)] = record
            if cache:
                cache_key(name, task_path).write_text(json.dumps(record, sort_keys=True))

    rows = [
        reports.MatrixRow(**records[(name, domain, task_name)])
        for name in heuristic_names
        for domain, task_name, _ in entries
    ]
    reports.save_matrix(out, rows)
    if json_mirror:
        Path(out).with_suffix(".json").write_text(reports.rows_to_json(rows), encoding="utf-8")
    solved = sum(1 for r in rows if r.outcome == reports.SOLVED)
    click.echo(f"wrote {out}: {len(rows)} rows, {solved} solved")


@cli.command("report-cactus")
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="cactus.csv", show_default=True)
@click.option("--json", "json_mirror", is_flag=True)
def report_cactus(matrix, out, json_mirror):
    """Sorted solve times with cumulative coverage, per heuristic."""
    rows = reports.cactus_rows(reports.load_matrix(matrix))
    reports.save_csv(out, ["heuristic", "solve_time", "cumulative_solved"], rows)
    if json_mirror:
        Path(out).with_suffix(".json").write_text(reports.rows_to_json(rows), encoding="utf-8")
    click.echo(f"wrote {out}: {len(rows)} rows")


@cli.command("report-pareto")
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", default="pareto.csv", show_default=True)
@click.option("--baseline", default="ff", show_default=True)
@click.option("--json", "json_mirror", is_flag=True)
def report_pareto(matrix, out, baseline, json_mirror):
    """Baseline-normalized informedness and throughput per heuristic."""
    try:
        rows, warning = reports.pareto_rows(reports.load_matrix(matrix), ff_name=baseline)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    if warning:
        click.echo(f"warning: {warning}", err=True)
    reports.save_csv(out, ["heuristic", "informedness", "speed"], rows)
    if json_mirror:
        Path(out).with_suffix(".json").write_text(reports.rows_to_json(rows), encoding="utf-8")
    click.echo(f"wrote {out}: {len(rows)} rows")


@cli.command("report-similarity")
@click.argument("matrix", type=click.Path(exists=True, dir_okay=False))
@click.option("--jaccard-out", default="jaccard.csv", show_default=True)
@click.option("--domination-out", default="domination.csv", show_default=True)
@click.option("--json", "json_mirror", is_flag=True)
def report_similarity(matrix, jaccard_out, domination_out, json_mirror):
    """Jaccard similarity of solved sets plus the pairwise domination share."""
    jaccard, domination = reports.similarity_rows(reports.load_matrix(matrix))
    reports.save_csv(jaccard_out, ["heuristic_a", "heuristic_b", "jaccard"], jaccard)
    reports.save_csv(domination_out, ["heuristic_a", "heuristic_b", "domination"], domination)
    if json_mirror:
        for path, rows in ((jaccard_out, jaccard), (domination_out, domination)):
            Path(path).with_suffix(".json").write_text(
                reports.rows_to_json(rows), encoding="utf-8"
            )
    click.echo(f"wrote {jaccard_out} and {domination_out}")


def _validate_evolve_config(raw: dict, config_dir: Path):
    """Collect every problem before doing any work."""
    errors = []

    def need(key, kind, default=None):
        value = raw.get(key, default)
        if value is None:
            errors.append(f"missing required key '{key}'")
            return None
        if kind is float and isinstance(value, int):
            value = float(value)
        if not isinstance(value, kind):
            errors.append(f"key '{key}' must be {kind.__name__}, got {type(value).__name__}")
            return None
        return value

    iterations = need("iterations", int, 200)
    seed = need("seed", int, 0)
    alpha = need("alpha", float, 0.25)
    islands = need("islands", int, 3)
    migration = need("migration_interval", int, 10)
    repair_budget = need("repair_budget", int, 4)
    budget_floor = need("budget_floor", float, 30.0)
    memory_limit = need("memory_limit", int, DEFAULT_MEMORY_LIMIT)
    grid = raw.get("grid_dims", [4, 4])
    if not (isinstance(grid, list) and len(grid) == 2 and all(isinstance(g, int) and g > 0 for g in grid)):
        errors.append("key 'grid_dims' must be a list of two positive integers")
        grid = [4, 4]
    timing_mode = raw.get("timing", "simulated")
    if timing_mode not in ("simulated", "wall"):
        errors.append("key 'timing' must be 'simulated' or 'wall'")
    if alpha is not None and not 0.0 <= alpha <= 1.0:
        errors.append("key 'alpha' must lie in [0, 1]")

    mutator_cfg = raw.get("mutator", {"kind": "parametric"})
    kind = mutator_cfg.get("kind")
    if kind not in ("parametric", "identity", "llm"):
        errors.append("mutator.kind must be one of parametric, identity, llm")

    seed_cfg = raw.get("seed_heuristic", "blind")
    if isinstance(seed_cfg, str):
        if seed_cfg not in ("blind", "ff"):
            errors.append("seed_heuristic must be 'blind', 'ff', a genome or a source_file")
    elif isinstance(seed_cfg, dict):
        if "genome" not in seed_cfg and "source_file" not in seed_cfg:
            errors.append("seed_heuristic object needs 'genome' or 'source_file'")
        if "source_file" in seed_cfg and not (config_dir / seed_cfg["source_file"]).exists():
            errors.append(f"seed source file not found: {seed_cfg['source_file']}")
    else:
        errors.append("seed_heuristic must be a string or an object")

    training_cfg = raw.get("training")
    if not isinstance(training_cfg, dict):
        errors.append("missing required key 'training' (calibration file or task list)")
    else:
        if "calibration" in training_cfg:
            if not (config_dir / training_cfg["calibration"]).exists():
                errors.append(f"calibration file not found: {training_cfg['calibration']}")
        elif "tasks" in training_cfg:
            for i, entry in enumerate(training_cfg["tasks"]):
                if not isinstance(entry, dict) or "domain" not in entry or "path" not in entry:
                    errors.append(f"training.tasks[{i}] needs 'domain' and 'path'")
                elif not (config_dir / entry["path"]).exists():
                    errors.append(f"training.tasks[{i}]: file not found: {entry['path']}")
        else:
            errors.append("training needs 'calibration' or 'tasks'")

    if errors:
        raise llm.ConfigError("invalid evolve config:\n  - " + "\n  - ".join(errors))
    return {
        "iterations": iterations,
        "seed": seed,
        "alpha": alpha,
        "islands": islands,
        "migration_interval": migration,
        "repair_budget": repair_budget,
        "budget_floor": budget_floor,
        "memory_limit": memory_limit,
        "grid_dims": tuple(grid),
        "timing": timing_mode,
        "mutator": mutator_cfg,
        "seed_heuristic": seed_cfg,
        "training": training_cfg,
        "out_dir": raw.get("out_dir", "evolve-out"),
    }


def _build_mutator(cfg: dict, seed: int):
    kind = cfg["kind"]
    if kind == "identity":
        return evolution.IdentityMutator(), "parametric"
    if kind == "parametric":
        return evolution.ParametricMutator(random.Random(seed + 1)), "parametric"
    pools = llm.ModelPool(
        generation=tuple(llm.PoolMember(**m) for m in cfg["generation_pool"]),
        repair=tuple(llm.PoolMember(**m) for m in cfg["repair_pool"]),
    )
    templates = (
        llm.PromptTemplates.load(cfg["templates_dir"])
        if "templates_dir" in cfg
        else llm.PromptTemplates.defaults()
    )
    return llm.LlmMutator(pools, templates, rng=random.Random(seed + 1)), "source"


@cli.command()
@click.argument("config_path", type=click.Path(exists=True, dir_okay=False))
def evolve(config_path):
    """Run the evolution loop as described by a JSON config file."""
    config_file = Path(config_path)
    try:
        raw = json.loads(config_file.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"config is not valid JSON: {exc}") from exc
    cfg = _validate_evolve_config(raw, config_file.parent)

    mutator, genome_kind = _build_mutator(cfg["mutator"], cfg["seed"])

    timing = fitness.SimulatedTiming() if cfg["timing"] == "simulated" else fitness.WallClockTiming()
    training_cfg = cfg["training"]
    if "calibration" in training_cfg:
        training = fitness.load_calibration(config_file.parent / training_cfg["calibration"])
    else:
        entries = []
        for entry in training_cfg["tasks"]:
            path = config_file.parent / entry["path"]
            entries.append((entry["domain"], path.stem, load_task(path), str(path)))
        training = fitness.calibrate(
            entries,
            calibration_cap=training_cfg.get("calibration_cap", 300.0),
            memory_limit=cfg["memory_limit"],
            timing=timing,
        )
    if not training.tasks:
        raise InputError("calibration left no usable training tasks")

    seed_cfg = cfg["seed_heuristic"]
    if genome_kind == "parametric":
        if isinstance(seed_cfg, str):
            seed_genome = evolution.parametric_seed(seed_cfg)
        else:
            seed_genome = tuple(float(w) for w in seed_cfg["genome"])
        build_fn = evolution.build_parametric_heuristic
    else:
        if isinstance(seed_cfg, str):
            seed_genome = llm.load_seed_source(seed_cfg)
        else:
            seed_genome = (config_file.parent / seed_cfg["source_file"]).read_text(encoding="utf-8")
        build_fn = build_source_heuristic

    econfig = evolution.EvolveConfig(
        iterations=cfg["iterations"],
        grid_dims=cfg["grid_dims"],
        islands=cfg["islands"],
        migration_interval=cfg["migration_interval"],
        alpha=cfg["alpha"],
        repair_budget=cfg["repair_budget"],
        seed=cfg["seed"],
        budget_floor=cfg["budget_floor"],
        memory_limit=cfg["memory_limit"],
    )

    out_dir = Path(cfg["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    log_path = out_dir / "run_log.jsonl"
    with open(log_path, "w", encoding="utf-8") as log_file:
        result = evolution.evolve_loop(
            seed_genome,
            mutator,
            training,
            econfig,
            build_heuristic_fn=build_fn,
            timing=timing,
            log_sink=lambda rec: log_file.write(json.dumps(rec, sort_keys=True) + "\n"),
        )
    evolution.save_archives(out_dir / "archives.json", result.islands)
    best = result.best
    (out_dir / "best.json").write_text(
        json.dumps(
            {
                "kind": genome_kind,
                "genome": list(best.genome) if isinstance(best.genome, tuple) else best.genome,
                "score": best.score,
                "features": list(best.features),
                "id": best.id,
            },
            indent=2,
            sort_keys=True,
        ),
        encoding="utf-8",
    )
    click.echo(
        f"evolved {econfig.iterations} iterations: best score {best.score:.4f} "
        f"({best.id}), outputs in {out_dir}"
    )


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except (SasParseError, InputError, llm.ConfigError, fitness.SmokeCheckFailure) as exc:
        click.echo(f"input error: {exc}", err=True)
        return 2
    except click.Abort:
        return 1
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to exit code 3
        click.echo(f"internal error: {type(exc).__name__}: {exc}", err=True)
        return 3


if __name__ == "__main__":
    sys.exit(main())
