"""Evaluation loop: alternate between suggesting designs and evaluating them.

One state machine drives all three modes:

    sequential   one suggestion, one evaluation, repeat
    sync_batch   suggest a whole batch, wait for every evaluation in the
                 batch to finish, then re-optimize
    async_batch  keep exactly batch_size evaluations in flight; each
                 completion immediately triggers one replacement suggestion

The clock and the dispatch mechanism are injected through an evaluation
backend, so the virtual-clock simulator exercises the exact production
logic. Every scheduler action is appended to an event trace
(suggest / dispatch / complete) used by tests and reports.
"""

from __future__ import annotations

import heapq
import json
import os
import queue
import subprocess
import sys
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from . import optimizer
from .errors import EvaluatorConfigError, SchedulerError
from .problem import Design
from .store import ExperimentStore

DEFAULT_TIMEOUT = 24 * 3600.0
SUGGEST_FAILURE_LIMIT = 3


@dataclass(frozen=True)
class EvaluatorBinding:
    """How records get evaluated: an external program or manual entry."""

    kind: str  # "external_program" | "manual"
    program: str | None = None
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.kind not in ("external_program", "manual"):
            raise SchedulerError(f"unknown binding kind {self.kind!r}")
        if self.kind == "external_program" and not self.program:
            raise SchedulerError("external_program binding needs a program path")
        if self.timeout <= 0:
            raise SchedulerError("timeout must be positive")


@dataclass
class EvaluationOutcome:
    status: str  # "evaluated" | "failed"
    objectives: list[float] | None = None
    note: str = ""


@dataclass(frozen=True)
class CompletionEvent:
    record_id: int
    outcome: EvaluationOutcome


@dataclass
class TraceEvent:
    time: float
    kind: str  # "suggest" | "dispatch" | "complete"
    record_id: int | None = None
    detail: dict = field(default_factory=dict)


@dataclass
class SchedulerState:
    mode: str
    in_flight: set[int] = field(default_factory=set)
    budget_remaining: int = 0
    stopping: str = "none"  # "budget_exhausted" | "user_stop" | "none"
    clock: float = 0.0


# ---------------------------------------------------------------------------
# evaluation backends


class ProgramBackend:
    """Runs the evaluation program in worker threads (wall clock)."""

    def __init__(self, binding: EvaluatorBinding):
        self.binding = binding
        self._queue: queue.Queue[CompletionEvent] = queue.Queue()
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def start(self, record_id: int, design: Design) -> None:
        thread = threading.Thread(
            target=lambda: self._queue.put(
                CompletionEvent(record_id, run_program(self.binding, record_id, design))
            ),
            daemon=True,
        )
        thread.start()

    def next_completion(self, timeout: float | None = None) -> CompletionEvent | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


class ManualBackend:
    """Completions arrive from outside (service submissions, CLI entry)."""

    def __init__(self):
        self._queue: queue.Queue[CompletionEvent] = queue.Queue()
        self._t0 = time.monotonic()

    def now(self) -> float:
        return time.monotonic() - self._t0

    def start(self, record_id: int, design: Design) -> None:
        pass  # records stay pending until a worker claims them

    def notify(self, record_id: int, outcome: EvaluationOutcome) -> None:
        self._queue.put(CompletionEvent(record_id, outcome))

    def next_completion(self, timeout: float | None = None) -> CompletionEvent | None:
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None


class SimulatedBackend:
    """Virtual clock; durations drawn from a seeded model per dispatch."""

    def __init__(self, duration_model: Callable, seed: int, objective_fn=None):
        import numpy as np

        self._rng = np.random.default_rng(seed)
        self._duration_model = duration_model
        self._objective_fn = objective_fn or (lambda design: [0.0, 0.0])
        self._clock = 0.0
        self._heap: list[tuple[float, int, CompletionEvent]] = []
        self._seq = 0

    def now(self) -> float:
        return self._clock

    def start(self, record_id: int, design: Design) -> None:
        duration = float(self._duration_model(self._rng))
        objectives = self._objective_fn(design)
        if objectives is None:  # simulated evaluation failure
            outcome = EvaluationOutcome(status="failed", note="simulated failure")
        else:
            outcome = EvaluationOutcome(status="evaluated", objectives=list(objectives))
        self._seq += 1
        heapq.heappush(
            self._heap,
            (self._clock + duration, self._seq, CompletionEvent(record_id, outcome)),
        )

    def next_completion(self, timeout: float | None = None) -> CompletionEvent | None:
        if not self._heap:
            return None
        finish, _, event = heapq.heappop(self._heap)
        self._clock = max(self._clock, finish)
        return event


# ---------------------------------------------------------------------------
# external-program dispatch


def run_program(
    binding: EvaluatorBinding, record_id: int, design: Design
) -> EvaluationOutcome:
    """Invoke the evaluation program under the documented contract.

    The program gets one argument, the path of a JSON document
    ``{"design": {...}, "record_id": N}``, and must print
    ``{"objectives": [...]}`` (optionally ``{"feasible": false}``) to
    stdout. Exit code 0 means success. stderr lands in the record note.
    """
    argv = resolve_program(binding.program)
    with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as handle:
        json.dump({"design": design, "record_id": record_id}, handle)
        arg_path = handle.name
    try:
        try:
            proc = subprocess.run(
                argv + [arg_path],
                capture_output=True,
                text=True,
                timeout=binding.timeout,
            )
        except subprocess.TimeoutExpired:
            return EvaluationOutcome(status="failed", note="timeout")
        except OSError as exc:
            return EvaluationOutcome(status="failed", note=f"launch error: {exc}")
    finally:
        Path(arg_path).unlink(missing_ok=True)
    stderr = proc.stderr.strip()
    if proc.returncode != 0:
        note = f"exit code {proc.returncode}"
        if stderr:
            note += f": {stderr}"
        return EvaluationOutcome(status="failed", note=note)
    try:
        payload = json.loads(proc.stdout)
    except json.JSONDecodeError:
        return EvaluationOutcome(
            status="failed", note=f"malformed program output: {proc.stdout!r}"
        )
    if payload.get("feasible") is False:
        return EvaluationOutcome(
            status="failed", note="blackbox constraint violated", objectives=None
        )
    objectives = payload.get("objectives")
    if not isinstance(objectives, list):
        return EvaluationOutcome(
            status="failed", note=f"program output missing objectives: {proc.stdout!r}"
        )
    return EvaluationOutcome(status="evaluated", objectives=objectives, note=stderr)


def resolve_program(program: str) -> list[str]:
    """Expand an evaluator reference to an argv prefix.

    Builtin names map to ``python -m optiloop.evaluators <name>``; anything
    else must be an executable path.
    """
    from .evaluators import BUILTIN_NAMES

    if program in BUILTIN_NAMES:
        return [sys.executable, "-m", "optiloop.evaluators", program]
    path = Path(program)
    if not path.exists():
        raise EvaluatorConfigError(f"evaluation program not found: {program}")
    if not os.access(path, os.X_OK):
        raise EvaluatorConfigError(f"evaluation program not executable: {program}")
    # absolute path: bare "prog" would otherwise be looked up on PATH by exec
    return [str(path.resolve())]


def check_binding(binding: EvaluatorBinding) -> None:
    """Raise EvaluatorConfigError for unusable bindings (no transitions yet)."""
    if binding.kind == "external_program":
        resolve_program(binding.program)  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# the loop


class Scheduler:
    """Drives one experiment's optimize/evaluate loop."""

    def __init__(
        self,
        store: ExperimentStore,
        config: optimizer.RunConfig,
        binding: EvaluatorBinding,
        backend=None,
        suggest_fn: Callable[[ExperimentStore, int, int], list[Design]] | None = None,
        poll_interval: float = 0.05,
    ):
        config.validate()
        check_binding(binding)
        self.store = store
        self.config = config
        self.binding = binding
        if backend is None:
            backend = (
                ManualBackend()
                if binding.kind == "manual"
                else ProgramBackend(binding)
            )
        self.backend = backend
        self.suggest_fn = suggest_fn or self._model_suggest
        self.poll_interval = poll_interval
        self.trace: list[TraceEvent] = []
        self.state = SchedulerState(mode=config.eval_mode)
        self._suggest_failures = 0
        self._initial_pool: list[Design] = []

    # -- suggestion sources -------------------------------------------------

    def _model_suggest(self, store: ExperimentStore, count: int, iteration: int):
        batch = optimizer.suggest(
            store.problem, store.records(), self.config, count, iteration=iteration
        )
        return batch.designs

    def _next_designs(self, count: int, iteration: int) -> tuple[list[Design], str]:
        """Pull from the initial Latin hypercube pool first, then the model."""
        drawn_initial = len(self.store.records(source="initial"))
        if drawn_initial < self.config.n_init:
            if not self._initial_pool:
                self._initial_pool = optimizer.initial_designs(
                    self.store.problem, self.config.n_init, seed=self.config.seed
                )[drawn_initial:]
            take = min(count, self.config.n_init - drawn_initial, len(self._initial_pool))
            if take > 0:
                designs = self._initial_pool[:take]
                self._initial_pool = self._initial_pool[take:]
                return designs, "initial"
        for _ in range(SUGGEST_FAILURE_LIMIT):
            try:
                designs = self.suggest_fn(self.store, count, iteration)
                self._suggest_failures = 0
                return designs, "suggested"
            except Exception as exc:  # noqa: BLE001 - failure accounting
                self._suggest_failures += 1
                last_error = exc
                if self._suggest_failures >= SUGGEST_FAILURE_LIMIT:
                    raise SchedulerError(
                        f"suggest failed {self._suggest_failures} times in a row: "
                        f"{last_error}"
                    ) from exc
        raise SchedulerError(f"suggest failed: {last_error}")

    # -- budget accounting ----------------------------------------------------

    def _spent(self) -> int:
        evaluated = len(self.store.records(status="evaluated"))
        failed = len(self.store.records(status="failed"))
        return evaluated + (failed if self.config.failed_consume_budget else 0)

    def _budget_left(self) -> int:
        return max(self.config.budget - self._spent() - len(self.state.in_flight), 0)

    # -- dispatching ------------------------------------------------------------

    def _suggest_and_queue(self, count: int, iteration: int) -> list[int]:
        designs, source = self._next_designs(count, iteration)
        ids = self.store.insert_pending(designs, source, iteration, actor="scheduler")
        self.trace.append(
            TraceEvent(
                time=self.backend.now(),
                kind="suggest",
                detail={"count": len(designs), "source": source, "iteration": iteration},
            )
        )
        return ids

    def _dispatch(self, record_id: int) -> None:
        record = self.store.get_record(record_id)
        if self.binding.kind != "manual":
            record = self.store.transition(
                record_id, "in_evaluation", worker="scheduler", actor="scheduler"
            )
        self.state.in_flight.add(record_id)
        self.trace.append(
            TraceEvent(time=self.backend.now(), kind="dispatch", record_id=record_id)
        )
        self.backend.start(record_id, record.design)

    def _apply_completion(self, event: CompletionEvent) -> None:
        record = self.store.get_record(event.record_id)
        if record.status in ("pending", "in_evaluation"):
            # manual-mode completions arrive already transitioned by the worker
            outcome = event.outcome
            if outcome.status == "evaluated":
                self.store.transition(
                    event.record_id,
                    "evaluated",
                    objectives=outcome.objectives,
                    note=outcome.note,
                    actor="scheduler",
                )
            else:
                self.store.transition(
                    event.record_id, "failed", note=outcome.note, actor="scheduler"
                )
        self.state.in_flight.discard(event.record_id)
        self.trace.append(
            TraceEvent(
                time=self.backend.now(),
                kind="complete",
                record_id=event.record_id,
                detail={"status": self.store.get_record(event.record_id).status},
            )
        )

    def _wait_completion(
        self, stop_signal: threading.Event | None, abandon=None
    ) -> bool:
        """Block for the next completion; False when a stop preempts the wait.

        A graceful stop keeps waiting while program evaluations are truly
        running; manual-mode records are not physically running and a hard
        stop abandons them, so both yield immediately.
        """
        while True:
            event = self.backend.next_completion(timeout=self.poll_interval)
            if event is not None:
                self._apply_completion(event)
                return True
            if isinstance(self.backend, SimulatedBackend):
                return False  # virtual time: empty heap means nothing in flight
            if stop_signal is not None and stop_signal.is_set():
                abandoning = abandon() if callable(abandon) else bool(abandon)
                if abandoning or self.binding.kind == "manual" or not self.state.in_flight:
                    return False

    # -- main loop -----------------------------------------------------------------

    def run(
        self,
        stop_signal: threading.Event | None = None,
        hard_stop: bool | threading.Event = False,
    ) -> SchedulerState:
        """Run until the budget is spent or a stop is requested.

        Graceful stops let in-flight evaluations finish and record them; a
        hard stop (a bool, or an Event checked dynamically) marks in-flight
        records failed("aborted") immediately.
        """
        config = self.config
        state = self.state

        def hard() -> bool:
            if isinstance(hard_stop, threading.Event):
                return hard_stop.is_set()
            return hard_stop

        def stopping() -> bool:
            return stop_signal is not None and stop_signal.is_set()

        iteration = max((r.iteration for r in self.store.records()), default=0) + 1

        # resume: adopt pre-existing pending records as the current backlog
        backlog = [r.id for r in self.store.records(status="pending")]

        while True:
            state.budget_remaining = self._budget_left()
            if stopping():
                state.stopping = "user_stop"
                break
            if state.budget_remaining == 0 and not state.in_flight:
                # backlog records (if any) stay pending for a later run
                state.stopping = "budget_exhausted"
                break

            capacity = config.batch_size - len(state.in_flight)
            # fill capacity from backlog first
            while backlog and capacity > 0 and self._budget_left() > 0:
                self._dispatch(backlog.pop(0))
                capacity -= 1

            if not backlog and capacity > 0 and self._budget_left() > 0:
                if config.eval_mode in ("sequential", "sync_batch"):
                    if not state.in_flight:  # re-optimize only between batches
                        want = min(config.batch_size, self._budget_left())
                        backlog.extend(self._suggest_and_queue(want, iteration))
                        iteration += 1
                        continue
                else:  # async_batch: one replacement per free slot
                    for _ in range(min(capacity, self._budget_left())):
                        backlog.extend(self._suggest_and_queue(1, iteration))
                        iteration += 1
                    continue

            if state.in_flight:
                progressed = self._wait_completion(stop_signal, abandon=hard)
                if not progressed and stopping():
                    state.stopping = "user_stop"
                    break
            elif not backlog:
                # nothing in flight, nothing queued, no budget for more
                state.stopping = (
                    "user_stop" if stopping() else "budget_exhausted"
                )
                break

        if hard() and state.in_flight:
            for record_id in sorted(state.in_flight):
                record = self.store.get_record(record_id)
                if record.status == "in_evaluation":
                    self.store.transition(
                        record_id, "failed", note="aborted", actor="scheduler"
                    )
                self.trace.append(
                    TraceEvent(
                        time=self.backend.now(),
                        kind="complete",
                        record_id=record_id,
                        detail={"status": "failed", "aborted": True},
                    )
                )
            state.in_flight.clear()
        elif state.in_flight and self.binding.kind != "manual":
            # graceful: drain whatever is still running; manual-mode records
            # are not physically running and simply stay pending
            while state.in_flight:
                if not self._wait_completion(None):
                    break
        state.budget_remaining = max(config.budget - self._spent(), 0)
        state.clock = self.backend.now()
        if state.stopping == "none":
            state.stopping = "budget_exhausted"
        return state


# ---------------------------------------------------------------------------
# virtual-clock simulation


@dataclass
class SimulationResult:
    trace: list[TraceEvent]
    makespan: float
    evaluated: int
    throughput: float
    state: SchedulerState
    records: list = field(default_factory=list)


def two_point_durations(low: float = 1.0, high: float = 10.0, p_high: float = 0.5):
    def model(rng):
        return high if rng.random() < p_high else low

    return model


def simulate(
    run_config: optimizer.RunConfig,
    duration_model: Callable,
    seed: int,
    problem=None,
    suggest_stub: bool = True,
    objective_fn=None,
) -> SimulationResult:
    """Run the real scheduler state machine on a virtual clock.

    Suggestions default to a seeded space-filling stub so traces measure
    scheduling behaviour, not model quality. Deterministic given the seed.
    """
    import numpy as np

    from .evaluators import builtin_problem

    if problem is None:
        problem = builtin_problem("zdt1", dim=2)

    with tempfile.TemporaryDirectory() as tmp:
        store = ExperimentStore.create(
            Path(tmp) / "sim.db",
            problem,
            optimizer.run_config_to_dict(run_config),
            name="simulation",
        )
        backend = SimulatedBackend(duration_model, seed=seed, objective_fn=objective_fn)

        suggest_fn = None
        if suggest_stub:
            stub_rng = np.random.default_rng((seed, 1))

            def suggest_fn(st, count, iteration):
                from .problem import decode

                dim = problem.encoded_dim()
                return [decode(problem, stub_rng.uniform(size=dim)) for _ in range(count)]

        scheduler = Scheduler(
            store,
            run_config,
            EvaluatorBinding(kind="external_program", program="zdt1"),
            backend=backend,
            suggest_fn=suggest_fn,
        )
        state = scheduler.run()
        records = store.records()
        evaluated = sum(r.status == "evaluated" for r in records)
        store.close()
    completes = [e.time for e in scheduler.trace if e.kind == "complete"]
    makespan = max(completes, default=0.0)
    return SimulationResult(
        trace=scheduler.trace,
        makespan=makespan,
        evaluated=evaluated,
        throughput=evaluated / makespan if makespan > 0 else 0.0,
        state=state,
        records=records,
    )
