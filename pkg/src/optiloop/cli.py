"""Command-line entry point.

Thin shell over the library: every subcommand delegates to store,
optimizer, scheduler or service functions. Exit codes: 0 success,
1 user error (bad flags, invalid input), 2 internal error.
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import yaml

from . import optimizer, evaluators
from .errors import OptiloopError
from .problem import load_problem
from .scheduler import EvaluatorBinding, Scheduler
from .store import ExperimentStore, import_archive

MODES = {"seq": "sequential", "sync": "sync_batch", "async": "async_batch"}


@click.group()
def cli():
    """Multi-objective experiment design: suggest, evaluate, record, repeat."""


@cli.command()
@click.option("--problem", "problem_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--db", "db_path", required=True, type=click.Path())
def init(problem_path, config_path, db_path):
    """Create a new experiment database; prints its id."""
    problem = load_problem(problem_path)
    with open(config_path, "r", encoding="utf-8") as handle:
        config_doc = yaml.safe_load(handle) or {}
    config = optimizer.run_config_from_dict(config_doc)
    config.validate()
    name = config_doc.get("name") or Path(db_path).stem
    store = ExperimentStore.create(
        db_path, problem, optimizer.run_config_to_dict(config), name=name
    )
    click.echo(store.name)
    store.close()


@cli.command()
@click.option("--db", "db_path", required=True, type=click.Path(exists=True))
@click.option("--evaluator", default=None, help="program path or builtin name")
@click.option("--budget", type=int, default=None)
@click.option("--mode", type=click.Choice(sorted(MODES)), default=None)
@click.option("--batch", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--timeout", type=float, default=None, help="evaluation timeout (s)")
def run(db_path, evaluator, budget, mode, batch, seed, timeout):
    """Run the optimize/evaluate loop.

    Without --evaluator this performs one manual-mode step: it inserts the
    next suggested batch as pending records, prints them, and exits.
    """
    store = ExperimentStore(db_path)
    try:
        config_doc = store.run_config_doc
        config = optimizer.run_config_from_dict(config_doc)
        if budget is not None:
            config.budget = budget
        if mode is not None:
            config.eval_mode = MODES[mode]
        if batch is not None:
            config.batch_size = batch
            if config.eval_mode == "sequential" and batch > 1:
                config.eval_mode = "sync_batch"
        if seed is not None:
            config.seed = seed
            config.solver.seed = seed
        config.validate()
        store.update_run_config(optimizer.run_config_to_dict(config))

        if evaluator is None:
            batch_out = optimizer.suggest(
                store.problem, store.records(), config, config.batch_size
            )
            iteration = (
                max((r.iteration for r in store.records()), default=0) + 1
            )
            ids = store.insert_pending(
                batch_out.designs, "suggested", iteration, actor="cli"
            )
            for rid, design, posts in zip(
                ids, batch_out.designs, batch_out.predicted
            ):
                prediction = ", ".join(
                    f"{o.name}={p.mean:.6g}±{p.std:.3g}"
                    for o, p in zip(store.problem.objectives, posts)
                )
                click.echo(f"record {rid}: {json.dumps(design)}  [{prediction}]")
            return

        binding_kwargs = {"kind": "external_program", "program": evaluator}
        if timeout is not None:
            binding_kwargs["timeout"] = timeout
        scheduler = Scheduler(store, config, EvaluatorBinding(**binding_kwargs))
        state = scheduler.run()
        evaluated = len(store.records(status="evaluated"))
        failed = len(store.records(status="failed"))
        click.echo(
            f"stopped: {state.stopping} (evaluated {evaluated}, failed {failed})"
        )
    finally:
        store.close()


def _record_rows(store, records):
    var_cols = [v.name for v in store.problem.variables]
    obj_cols = [o.name for o in store.problem.objectives]
    header = (
        ["id", "status", "source", "iteration"]
        + var_cols
        + obj_cols
        + ["requested_at", "started_at", "finished_at", "worker", "note"]
    )
    rows = [header]
    for r in records:
        design_cells = [r.design[name] for name in var_cols]
        objective_cells = (
            list(r.objectives) if r.objectives is not None else [""] * len(obj_cols)
        )
        rows.append(
            [r.id, r.status, r.source, r.iteration]
            + design_cells
            + objective_cells
            + [r.requested_at, r.started_at or "", r.finished_at or "", r.worker or "", r.note]
        )
    return rows


@cli.command()
@click.option("--db", "db_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv")
def report(db_path, fmt):
    """Statistics, Pareto front and hypervolume trajectory on stdout."""
    store = ExperimentStore(db_path)
    try:
        stats = store.statistics()
        records = store.records()
        front = [r for r in records if r.id in set(stats.front_ids)]
        if fmt == "json":
            click.echo(
                json.dumps(
                    {
                        "experiment": store.name,
                        "counts": stats.counts,
                        "front": [
                            {
                                "id": r.id,
                                "design": r.design,
                                "objectives": list(r.objectives),
                            }
                            for r in front
                        ],
                        "hypervolume_trajectory": [
                            [k, hv] for k, hv in stats.hypervolume_by_iteration
                        ],
                        "reference_point": stats.reference_point,
                    },
                    indent=2,
                )
            )
            return
        writer = csv.writer(sys.stdout)
        writer.writerow(["status", "count"])
        for status, count in stats.counts.items():
            writer.writerow([status, count])
        click.echo("")
        for row in _record_rows(store, front):
            writer.writerow(row)
        click.echo("")
        writer.writerow(["iteration", "hypervolume"])
        for k, hv in stats.hypervolume_by_iteration:
            writer.writerow([k, repr(hv)])
    finally:
        store.close()


@cli.command()
@click.option("--db", "db_path", required=True, type=click.Path(exists=True))
@click.option("--record", "record_id", required=True, type=int)
@click.option("--objectives", required=True, help="comma-separated values")
def enter(db_path, record_id, objectives):
    """Manually enter evaluation results for a record."""
    store = ExperimentStore(db_path)
    try:
        values = [float(v) for v in objectives.split(",") if v.strip() != ""]
        updated = store.transition(
            record_id, "evaluated", objectives=values, actor="cli"
        )
        click.echo(f"record {updated.id}: {updated.status} {list(updated.objectives)}")
    finally:
        store.close()


@cli.command("export")
@click.option("--db", "db_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
def export_cmd(db_path, out_path):
    """Write a self-contained archive of the experiment."""
    store = ExperimentStore(db_path)
    try:
        store.export_archive(out_path)
        click.echo(out_path)
    finally:
        store.close()


@cli.command("import")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--db", "db_path", required=True, type=click.Path())
def import_cmd(in_path, db_path):
    """Recreate an experiment database from an archive."""
    store = import_archive(in_path, db_path)
    click.echo(store.name)
    store.close()


@cli.command()
@click.option("--db-root", required=True, type=click.Path())
@click.option("--port", type=int, default=8080)
@click.option("--users", "users_path", required=True, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1")
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="directory of web UI assets to serve at /")
def serve(db_root, port, users_path, host, static_dir):
    """Start the HTTP service (blocking)."""
    from .service import serve as run_service

    run_service(db_root, port, users_path, host=host, static_dir=static_dir)


@cli.command()
@click.option("--problem", "problem_name", required=True,
              type=click.Choice(sorted(evaluators.BUILTIN_NAMES)))
@click.option("--preset", required=True,
              type=click.Choice(["parego", "tsemo_style", "usemo_style", "random"]))
@click.option("--budget", type=int, default=40)
@click.option("--seeds", type=int, default=5)
@click.option("--n-init", type=int, default=10)
@click.option("--dim", type=int, default=6)
@click.option("--ref", default=None, help="comma-separated reference point")
def benchmark(problem_name, preset, budget, seeds, n_init, dim, ref):
    """Desk-scale benchmark: hypervolume vs evaluations CSV on stdout."""
    rows = benchmark_runs(problem_name, preset, budget, seeds, n_init, dim, ref)
    writer = csv.writer(sys.stdout)
    writer.writerow(["problem", "preset", "seed", "evaluations", "hypervolume"])
    for row in rows:
        writer.writerow(row)


def benchmark_runs(problem_name, preset, budget, seeds, n_init, dim, ref=None):
    """In-process benchmark loop shared by the CLI and the test suite."""
    import numpy as np

    from . import pareto
    from .solver import SolverConfig

    problem = evaluators.builtin_problem(problem_name, dim=dim)
    if ref is None:
        ref_point = np.full(problem.n_objectives, 11.0) if problem_name.startswith(
            "zdt"
        ) else np.full(problem.n_objectives, 2.5)
    else:
        ref_point = np.array([float(v) for v in str(ref).split(",")])

    rows = []
    for seed in range(seeds):
        ys: list[list[float]] = []
        records: list = []

        def note(design):
            y = evaluators.evaluate(problem_name, design)
            ys.append(y)
            records.append(
                _BenchRecord(design=design, objectives=y, iteration=len(records))
            )
            clipped = np.minimum(np.array(ys), ref_point)
            hv = pareto.hypervolume(clipped, ref_point)
            rows.append([problem_name, preset, seed, len(ys), repr(hv)])

        rng = np.random.default_rng(seed)
        for design in optimizer.initial_designs(problem, n_init, seed=seed):
            note(design)
        if preset == "random":
            while len(ys) < budget:
                from .problem import decode

                note(decode(problem, rng.uniform(size=problem.encoded_dim())))
            continue
        config = optimizer.RunConfig(
            preset=preset,
            budget=budget,
            n_init=n_init,
            seed=seed,
            solver=SolverConfig(population_size=50, generations=40, seed=seed),
            surrogate_restarts=3,
            ts_grid_size=512,
        )
        while len(ys) < budget:
            batch = optimizer.suggest(
                problem, records, config, count=1, iteration=len(ys)
            )
            note(batch.designs[0])
    return rows


class _BenchRecord:
    __slots__ = ("design", "objectives", "iteration", "status")

    def __init__(self, design, objectives, iteration):
        self.design = design
        self.objectives = objectives
        self.iteration = iteration
        self.status = "evaluated"


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()  # usage errors include the usage text
        return 1
    except OptiloopError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except Exception as exc:  # noqa: BLE001 - the exit-code contract
        click.echo(f"internal error: {exc!r}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
