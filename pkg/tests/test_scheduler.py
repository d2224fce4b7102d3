import stat
import threading

import numpy as np
import pytest

from optiloop import scheduler as sched
from optiloop.errors import EvaluatorConfigError, SchedulerError
from optiloop.evaluators import builtin_problem
from optiloop.optimizer import RunConfig, run_config_to_dict
from optiloop.scheduler import (
    EvaluatorBinding,
    ManualBackend,
    ProgramBackend,
    Scheduler,
    SimulatedBackend,
    run_program,
    simulate,
    two_point_durations,
)
from optiloop.solver import SolverConfig
from optiloop.store import ExperimentStore


def config(mode="sequential", batch=1, budget=5, n_init=2, seed=0, **kw):
    return RunConfig(
        preset="parego",
        eval_mode=mode,
        batch_size=batch,
        budget=budget,
        n_init=n_init,
        seed=seed,
        solver=SolverConfig(population_size=10, generations=5, seed=0),
        surrogate_restarts=1,
        **kw,
    )


def constant_durations(value=1.0):
    return lambda rng: value


def sequence_durations(values):
    it = iter(values)
    return lambda rng: next(it)


def max_in_flight(trace):
    current = peak = 0
    for e in trace:
        if e.kind == "dispatch":
            current += 1
            peak = max(peak, current)
        elif e.kind == "complete":
            current -= 1
    return peak


def assert_async_replacement(trace):
    """Between any completion and the next dispatch: exactly one suggest-of-one."""
    events = [e for e in trace if e.kind in ("suggest", "dispatch", "complete")]
    for i, e in enumerate(events):
        if e.kind != "complete":
            continue
        suggests = []
        for later in events[i + 1 :]:
            if later.kind == "suggest":
                suggests.append(later.detail["count"])
            elif later.kind == "dispatch":
                assert suggests == [1], f"completion followed by suggests {suggests}"
                break


class TestSimulatedRuns:
    def test_sequential_budget_exact(self):
        result = simulate(config(budget=5), constant_durations(), seed=0)
        assert result.evaluated == 5
        iterations = sorted(r.iteration for r in result.records)
        assert iterations == [1, 2, 3, 4, 5]
        assert result.state.stopping == "budget_exhausted"

    def test_sync_reoptimizes_after_slowest(self):
        result = simulate(
            config(mode="sync_batch", batch=3, budget=6, n_init=3),
            sequence_durations([1.0, 5.0, 9.0, 1.0, 1.0, 1.0]),
            seed=0,
        )
        suggest_times = [e.time for e in result.trace if e.kind == "suggest"]
        # one wave of three at t=0, the second only once all three are done
        assert suggest_times == [0.0, 9.0]

    def test_async_replaces_immediately(self):
        result = simulate(
            config(mode="async_batch", batch=2, budget=6, n_init=2),
            sequence_durations([1.0, 9.0, 1.0, 1.0, 1.0, 1.0]),
            seed=0,
        )
        assert max_in_flight(result.trace) <= 2
        dispatches = [e.time for e in result.trace if e.kind == "dispatch"]
        # the t=1 completion triggers a dispatch while the t=9 one still runs
        assert any(abs(t - 1.0) < 1e-9 for t in dispatches)
        assert_async_replacement(result.trace)

    def test_constant_durations_equal_makespans(self):
        sync = simulate(
            config(mode="sync_batch", batch=4, budget=12, n_init=4),
            constant_durations(2.0),
            seed=3,
        )
        async_ = simulate(
            config(mode="async_batch", batch=4, budget=12, n_init=4),
            constant_durations(2.0),
            seed=3,
        )
        assert sync.makespan == pytest.approx(async_.makespan)

    def test_async_never_slower_two_point(self):
        strict = 0
        for seed in range(10):
            model = two_point_durations(1.0, 10.0, 0.5)
            sync = simulate(
                config(mode="sync_batch", batch=4, budget=20, n_init=4),
                model,
                seed=seed,
            )
            async_ = simulate(
                config(mode="async_batch", batch=4, budget=20, n_init=4),
                two_point_durations(1.0, 10.0, 0.5),
                seed=seed,
            )
            assert async_.makespan <= sync.makespan + 1e-9
            if async_.makespan < sync.makespan - 1e-9:
                strict += 1
            assert max_in_flight(sync.trace) <= 4
            assert max_in_flight(async_.trace) <= 4
            assert_async_replacement(async_.trace)
        assert strict >= 8

    def test_budget_zero_empty_trace(self):
        result = simulate(config(budget=0), constant_durations(), seed=0)
        assert result.trace == []
        assert result.evaluated == 0

    def test_determinism(self):
        a = simulate(config(mode="async_batch", batch=3, budget=9, n_init=3),
                     two_point_durations(), seed=11)
        b = simulate(config(mode="async_batch", batch=3, budget=9, n_init=3),
                     two_point_durations(), seed=11)
        assert [(e.time, e.kind, e.record_id) for e in a.trace] == [
            (e.time, e.kind, e.record_id) for e in b.trace
        ]

    def test_failures_recorded_and_loop_continues(self):
        calls = {"n": 0}

        def flaky(design):
            calls["n"] += 1
            return None if calls["n"] % 3 == 0 else [0.0, 0.0]

        result = simulate(
            config(budget=6), constant_durations(), seed=0, objective_fn=flaky
        )
        statuses = [r.status for r in result.records]
        assert statuses.count("failed") >= 1
        # failures consume budget: total terminal records equals budget
        assert statuses.count("failed") + statuses.count("evaluated") == 6

    def test_failures_exempt_flag(self):
        calls = {"n": 0}

        def flaky(design):
            calls["n"] += 1
            return None if calls["n"] == 2 else [0.0, 0.0]

        result = simulate(
            config(budget=4, failed_consume_budget=False),
            constant_durations(),
            seed=0,
            objective_fn=flaky,
        )
        statuses = [r.status for r in result.records]
        assert statuses.count("evaluated") == 4
        assert statuses.count("failed") == 1

    def test_in_flight_overshoot_bound(self):
        for seed in range(5):
            batch = 3
            result = simulate(
                config(mode="async_batch", batch=batch, budget=7, n_init=3),
                two_point_durations(),
                seed=seed,
            )
            terminal = sum(r.status in ("evaluated", "failed") for r in result.records)
            assert terminal <= 7 + batch - 1

    def test_scheduler_transitions_always_legal(self):
        # random duration/failure mix: any illegal transition would raise
        rng = np.random.default_rng(0)

        def flaky(design):
            return None if rng.random() < 0.3 else [0.0, 0.0]

        for seed in range(4):
            simulate(
                config(mode="async_batch", batch=2, budget=8, n_init=2),
                lambda r: float(r.uniform(0.5, 3.0)),
                seed=seed,
                objective_fn=flaky,
            )


@pytest.fixture
def store(tmp_path):
    problem = builtin_problem("zdt1", dim=2)
    s = ExperimentStore.create(
        tmp_path / "exp.db", problem, run_config_to_dict(config()), name="exp"
    )
    yield s
    s.close()


def write_script(tmp_path, name, body):
    path = tmp_path / name
    path.write_text("#!/bin/sh\n" + body)
    path.chmod(path.stat().st_mode | stat.S_IEXEC)
    return str(path)


class TestDispatch:
    def test_echo_program_evaluates(self, tmp_path):
        program = write_script(tmp_path, "ok.sh", 'echo \'{"objectives": [1.0, 2.0]}\'\n')
        binding = EvaluatorBinding(kind="external_program", program=program)
        outcome = run_program(binding, 1, {"x1": 0.5, "x2": 0.5})
        assert outcome.status == "evaluated"
        assert outcome.objectives == [1.0, 2.0]

    def test_nonzero_exit_fails(self, tmp_path):
        program = write_script(tmp_path, "bad.sh", "exit 1\n")
        binding = EvaluatorBinding(kind="external_program", program=program)
        outcome = run_program(binding, 1, {"x1": 0.5})
        assert outcome.status == "failed"
        assert "exit code 1" in outcome.note

    def test_timeout_fails(self, tmp_path):
        program = write_script(tmp_path, "slow.sh", "sleep 5\n")
        binding = EvaluatorBinding(kind="external_program", program=program, timeout=0.3)
        outcome = run_program(binding, 1, {"x1": 0.5})
        assert outcome.status == "failed"
        assert outcome.note == "timeout"

    def test_malformed_output_fails(self, tmp_path):
        program = write_script(tmp_path, "junk.sh", "echo not-json\n")
        binding = EvaluatorBinding(kind="external_program", program=program)
        outcome = run_program(binding, 1, {"x1": 0.5})
        assert outcome.status == "failed"
        assert "malformed" in outcome.note

    def test_blackbox_infeasible_flag(self, tmp_path):
        program = write_script(tmp_path, "infeas.sh", 'echo \'{"feasible": false}\'\n')
        binding = EvaluatorBinding(kind="external_program", program=program)
        outcome = run_program(binding, 1, {"x1": 0.5})
        assert outcome.status == "failed"
        assert "constraint" in outcome.note

    def test_stderr_captured_in_note(self, tmp_path):
        program = write_script(
            tmp_path,
            "chatty.sh",
            'echo warning >&2\necho \'{"objectives": [0.0, 0.0]}\'\n',
        )
        binding = EvaluatorBinding(kind="external_program", program=program)
        outcome = run_program(binding, 1, {"x1": 0.5})
        assert outcome.status == "evaluated"
        assert "warning" in outcome.note

    def test_missing_program_is_config_error(self, store):
        binding = EvaluatorBinding(
            kind="external_program", program="/nonexistent/prog"
        )
        with pytest.raises(EvaluatorConfigError):
            Scheduler(store, config(), binding)
        assert store.records() == []  # no transitions happened

    def test_builtin_name_resolves(self):
        argv = sched.resolve_program("zdt1")
        assert argv[-1] == "zdt1"


class TestProgramLoopEndToEnd:
    def test_sequential_run_with_builtin_evaluator(self, store):
        binding = EvaluatorBinding(kind="external_program", program="zdt1")
        scheduler = Scheduler(store, config(budget=3, n_init=2), binding)
        state = scheduler.run()
        assert state.stopping == "budget_exhausted"
        evaluated = store.records(status="evaluated")
        assert len(evaluated) == 3
        for r in evaluated:
            assert len(r.objectives) == 2

    def test_failing_program_consumes_budget_and_continues(self, store, tmp_path):
        program = write_script(tmp_path, "half.sh", "exit 3\n")
        binding = EvaluatorBinding(kind="external_program", program=program)
        scheduler = Scheduler(store, config(budget=3, n_init=2), binding)
        state = scheduler.run()
        assert state.stopping == "budget_exhausted"
        assert len(store.records(status="failed")) == 3

    def test_repeated_suggest_failure_aborts(self, store):
        binding = EvaluatorBinding(kind="external_program", program="zdt1")

        def broken(st, count, iteration):
            raise RuntimeError("model exploded")

        scheduler = Scheduler(
            store, config(budget=5, n_init=2), binding, suggest_fn=broken
        )
        # skip the initial pool so the model path is exercised immediately
        scheduler.config.n_init = 2
        ids = store.insert_pending(
            [{"x1": 0.1, "x2": 0.1}, {"x1": 0.9, "x2": 0.9}], "initial", 1
        )
        for rid in ids:
            store.transition(rid, "evaluated", objectives=(0.5, 0.5))
        with pytest.raises(SchedulerError, match="3 times"):
            scheduler.run()


class TestManualMode:
    def test_manual_waits_for_external_transitions(self, store):
        binding = EvaluatorBinding(kind="manual")
        backend = ManualBackend()
        scheduler = Scheduler(store, config(budget=2, n_init=2), binding, backend=backend)

        def worker():
            import time as time_mod

            seen = set()
            deadline = time_mod.monotonic() + 10
            while time_mod.monotonic() < deadline:
                pending = [r for r in store.records(status="pending") if r.id not in seen]
                for r in pending:
                    store.transition(r.id, "evaluated", objectives=(1.0, 1.0), actor="human")
                    backend.notify(r.id, sched.EvaluationOutcome("evaluated", [1.0, 1.0]))
                    seen.add(r.id)
                if len(seen) >= 2:
                    return
                time_mod.sleep(0.01)

        thread = threading.Thread(target=worker)
        thread.start()
        state = scheduler.run()
        thread.join()
        assert state.stopping == "budget_exhausted"
        assert len(store.records(status="evaluated")) == 2

    def test_graceful_stop_leaves_pending(self, store):
        binding = EvaluatorBinding(kind="manual")
        scheduler = Scheduler(store, config(budget=5, n_init=2), binding)
        stop = threading.Event()

        def stopper():
            import time as time_mod

            deadline = time_mod.monotonic() + 10
            while time_mod.monotonic() < deadline:
                if store.records(status="pending"):
                    stop.set()
                    return
                time_mod.sleep(0.01)

        thread = threading.Thread(target=stopper)
        thread.start()
        state = scheduler.run(stop_signal=stop)
        thread.join()
        assert state.stopping == "user_stop"
        assert store.records(status="pending")  # left for later entry


class TestHardStop:
    def test_hard_stop_marks_in_flight_failed(self, tmp_path):
        problem = builtin_problem("zdt1", dim=2)
        s = ExperimentStore.create(
            tmp_path / "hs.db", problem, run_config_to_dict(config()), name="hs"
        )
        program = write_script(tmp_path, "slow.sh", "sleep 30\n")
        binding = EvaluatorBinding(kind="external_program", program=program, timeout=60)
        scheduler = Scheduler(s, config(budget=3, n_init=2), binding)
        stop = threading.Event()

        def stopper():
            import time as time_mod

            deadline = time_mod.monotonic() + 10
            while time_mod.monotonic() < deadline:
                if s.records(status="in_evaluation"):
                    stop.set()
                    return
                time_mod.sleep(0.01)

        thread = threading.Thread(target=stopper)
        thread.start()
        state = scheduler.run(stop_signal=stop, hard_stop=True)
        thread.join()
        assert state.stopping == "user_stop"
        failed = s.records(status="failed")
        assert failed and all(r.note == "aborted" for r in failed)
        s.close()
