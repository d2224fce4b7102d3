"""HTTP API for distributed, multi-user operation.

Wraps the store, optimizer and scheduler behind a versioned JSON API with
bearer-token authentication and nested role capabilities
(manager > scientist > technician). Endpoints (under /v1):

    POST   /experiments                create experiment        scientist
    GET    /experiments                list experiments         technician
    GET    /experiments/{id}/status    records + statistics     technician
    GET    /experiments/{id}/suggestions  pending suggestions   technician
    POST   /experiments/{id}/runs      start scheduler          scientist
    DELETE /experiments/{id}/runs      stop scheduler           scientist
    POST   /experiments/{id}/claim     claim oldest pending     technician
    POST   /records/{id}/result        submit result            technician
    POST   /experiments/{id}/predict   posterior for a design   scientist
    GET    /experiments/{id}/export    archive download         scientist
    POST   /users                      add account              manager
    DELETE /experiments/{id}           delete experiment        manager

Errors use ``{"error": <machine code>, "detail": <text>}``. Mutating
endpoints honor an ``Idempotency-Key`` header: retries with the same key
replay the stored response instead of re-executing.
"""

from __future__ import annotations

import re
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml
from fastapi import Depends, FastAPI, Header, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import optimizer, scheduler as sched, surrogate
from .errors import (
    IllegalTransition,
    OptiloopError,
    StoreError,
    ValidationError,
)
from .problem import problem_from_dict, validate
from .store import ExperimentRecord, ExperimentStore

ROLES = ("technician", "scientist", "manager")

_TECHNICIAN = {"view", "claim", "submit"}
_SCIENTIST = _TECHNICIAN | {
    "create_experiment",
    "configure_run",
    "control_scheduler",
    "predict",
    "export",
}
_MANAGER = _SCIENTIST | {"manage_users", "delete_experiment"}

PERMISSIONS: dict[str, frozenset[str]] = {
    "technician": frozenset(_TECHNICIAN),
    "scientist": frozenset(_SCIENTIST),
    "manager": frozenset(_MANAGER),
}

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_-]*$")


@dataclass(frozen=True)
class UserAccount:
    username: str
    role: str
    token: str


class ApiError(Exception):
    def __init__(self, status: int, code: str, detail: str):
        self.status = status
        self.code = code
        self.detail = detail
        super().__init__(detail)


@dataclass
class SchedulerHandle:
    scheduler: sched.Scheduler
    thread: threading.Thread
    stop_signal: threading.Event
    hard_signal: threading.Event
    binding: sched.EvaluatorBinding

    @property
    def running(self) -> bool:
        return self.thread.is_alive()


@dataclass
class ServiceState:
    db_root: Path
    users_path: Path | None
    users_by_token: dict[str, UserAccount] = field(default_factory=dict)
    stores: dict[str, ExperimentStore] = field(default_factory=dict)
    schedulers: dict[str, SchedulerHandle] = field(default_factory=dict)
    idempotency: dict[tuple[str, str], tuple[int, Any]] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def store_for(self, experiment_id: str) -> ExperimentStore:
        with self.lock:
            if experiment_id in self.stores:
                return self.stores[experiment_id]
            path = self.db_root / f"{experiment_id}.db"
            if not path.exists():
                raise ApiError(404, "unknown_experiment", f"no experiment {experiment_id!r}")
            store = ExperimentStore(path)
            self.stores[experiment_id] = store
            return store

    def experiment_ids(self) -> list[str]:
        return sorted(p.stem for p in self.db_root.glob("*.db"))


def load_users(path: str | Path) -> list[UserAccount]:
    with open(path, "r", encoding="utf-8") as handle:
        docs = yaml.safe_load(handle) or []
    users = []
    for doc in docs:
        role = doc["role"]
        if role not in ROLES:
            raise ValidationError(f"unknown role {role!r} for user {doc.get('username')}")
        users.append(UserAccount(doc["username"], role, str(doc["token"])))
    return users


def record_json(record: ExperimentRecord) -> dict[str, Any]:
    return {
        "id": record.id,
        "status": record.status,
        "source": record.source,
        "iteration": record.iteration,
        "design": record.design,
        "objectives": list(record.objectives) if record.objectives else None,
        "requested_at": record.requested_at,
        "started_at": record.started_at,
        "finished_at": record.finished_at,
        "worker": record.worker,
        "note": record.note,
    }


def _load_or_fit_models(state: ServiceState, store: ExperimentStore):
    """Models from the store if present, otherwise fit-and-persist."""
    problem = store.problem
    docs = store.load_models()
    names = [o.name for o in problem.objectives]
    if all(name in docs for name in names):
        return [surrogate.gp_from_dict(docs[name]) for name in names]
    records = store.records(status="evaluated")
    if len(records) < 2:
        raise ApiError(409, "no_model", "need at least 2 evaluated records to fit models")
    config = optimizer.run_config_from_dict(store.run_config_doc)
    obs = optimizer.gather_observations(problem, records)
    models = optimizer.fit_models(problem, obs, config, iteration=0)
    store.save_models(
        {name: surrogate.gp_to_dict(model) for name, model in zip(names, models)}
    )
    return models


def create_app(
    db_root: str | Path,
    users: list[UserAccount] | None = None,
    users_path: str | Path | None = None,
) -> FastAPI:
    db_root = Path(db_root)
    db_root.mkdir(parents=True, exist_ok=True)
    if users is None:
        if users_path is None:
            raise ValidationError("create_app needs users or a users file")
        users = load_users(users_path)

    state = ServiceState(
        db_root=db_root,
        users_path=Path(users_path) if users_path else None,
        users_by_token={u.token: u for u in users},
    )
    app = FastAPI(title="optiloop service", version="1")
    app.state.service = state

    @app.exception_handler(ApiError)
    async def api_error_handler(request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status, content={"error": exc.code, "detail": exc.detail}
        )

    @app.exception_handler(RequestValidationError)
    async def request_error_handler(request: Request, exc: RequestValidationError):
        return JSONResponse(
            status_code=422,
            content={"error": "bad_request", "detail": str(exc.errors())},
        )

    @app.exception_handler(OptiloopError)
    async def domain_error_handler(request: Request, exc: OptiloopError):
        if isinstance(exc, IllegalTransition):
            status, code = 409, "illegal_transition"
        elif isinstance(exc, (ValidationError,)):
            status, code = 422, "validation_error"
        elif isinstance(exc, StoreError):
            status, code = 404, "store_error"
        else:
            status, code = 500, "internal_error"
        return JSONResponse(
            status_code=status, content={"error": code, "detail": str(exc)}
        )

    def auth(action: str):
        def dependency(authorization: str | None = Header(default=None)) -> UserAccount:
            if not authorization or not authorization.startswith("Bearer "):
                raise ApiError(401, "unauthenticated", "bearer token required")
            token = authorization.removeprefix("Bearer ").strip()
            user = state.users_by_token.get(token)
            if user is None:
                raise ApiError(401, "unauthenticated", "unknown token")
            if action not in PERMISSIONS[user.role]:
                raise ApiError(
                    403,
                    "forbidden",
                    f"role {user.role!r} may not perform {action!r}",
                )
            return user

        return Depends(dependency)

    def idempotent(request: Request, response_builder):
        """Replay cached responses for repeated Idempotency-Key headers."""
        key = request.headers.get("Idempotency-Key")
        cache_key = (request.method + " " + request.url.path, key or "")
        if key:
            with state.lock:
                if cache_key in state.idempotency:
                    status, body = state.idempotency[cache_key]
                    return JSONResponse(status_code=status, content=body)
        status, body = response_builder()
        if key:
            with state.lock:
                state.idempotency[cache_key] = (status, body)
        return JSONResponse(status_code=status, content=body)

    # -- experiments ---------------------------------------------------------

    @app.post("/v1/experiments")
    def api_create_experiment(
        payload: dict,
        request: Request,
        user: UserAccount = auth("create_experiment"),
    ):
        def build():
            name = str(payload.get("name", "")).strip()
            if not _NAME_RE.match(name):
                raise ApiError(
                    422, "bad_name", "experiment name must be alphanumeric/_/-"
                )
            problem_doc = payload.get("problem")
            if not isinstance(problem_doc, dict):
                raise ApiError(422, "bad_problem", "problem document required")
            problem = problem_from_dict(problem_doc)
            violations = validate(problem)
            if violations:
                raise ApiError(422, "invalid_problem", "; ".join(violations))
            config_doc = payload.get("run_config") or {}
            optimizer.run_config_from_dict(config_doc).validate()
            path = db_root / f"{name}.db"
            if path.exists():
                raise ApiError(409, "name_conflict", f"experiment {name!r} exists")
            store = ExperimentStore.create(path, problem, config_doc, name=name)
            with state.lock:
                state.stores[name] = store
            return 201, {"experiment_id": name}

        return idempotent(request, build)

    @app.get("/v1/experiments")
    def api_list_experiments(user: UserAccount = auth("view")):
        return {"experiments": state.experiment_ids()}

    @app.get("/v1/experiments/{experiment_id}/status")
    def api_status(experiment_id: str, user: UserAccount = auth("view")):
        store = state.store_for(experiment_id)
        stats = store.statistics()
        handle = state.schedulers.get(experiment_id)
        if handle and handle.running:
            scheduler_state = {
                "running": True,
                "mode": handle.scheduler.state.mode,
                "in_flight": sorted(handle.scheduler.state.in_flight),
                "budget_remaining": handle.scheduler.state.budget_remaining,
                "stopping": handle.scheduler.state.stopping,
                "draining": handle.stop_signal.is_set(),
            }
        else:
            scheduler_state = {"running": False}
        return {
            "experiment": store.name,
            "problem": yaml.safe_load(store._meta("problem")),
            "run_config": store.run_config_doc,
            "counts": stats.counts,
            "records": [record_json(r) for r in store.records()],
            "front_ids": stats.front_ids,
            "hypervolume_trajectory": [
                [k, hv] for k, hv in stats.hypervolume_by_iteration
            ],
            "reference_point": stats.reference_point,
            "scheduler": scheduler_state,
        }

    @app.get("/v1/experiments/{experiment_id}/suggestions")
    def api_suggestions(experiment_id: str, user: UserAccount = auth("view")):
        store = state.store_for(experiment_id)
        pending = [r for r in store.records(status="pending")]
        predictions: dict[int, list[dict[str, float]] | None] = {}
        models = None
        try:
            models = _load_or_fit_models(state, store)
        except ApiError:
            pass
        for record in pending:
            if models is None:
                predictions[record.id] = None
                continue
            posts = optimizer.predict_design(models, store.problem, record.design)
            predictions[record.id] = [
                {"mean": p.mean, "std": p.std} for p in posts
            ]
        return {
            "suggestions": [
                {"record": record_json(r), "predicted": predictions[r.id]}
                for r in pending
            ]
        }

    @app.delete("/v1/experiments/{experiment_id}")
    def api_delete_experiment(
        experiment_id: str,
        request: Request,
        user: UserAccount = auth("delete_experiment"),
    ):
        def build():
            store = state.store_for(experiment_id)
            handle = state.schedulers.pop(experiment_id, None)
            if handle and handle.running:
                handle.stop_signal.set()
                handle.thread.join(timeout=10)
            store.close()
            with state.lock:
                state.stores.pop(experiment_id, None)
            (db_root / f"{experiment_id}.db").unlink()
            return 200, {"deleted": experiment_id}

        return idempotent(request, build)

    # -- scheduler control -----------------------------------------------------

    @app.post("/v1/experiments/{experiment_id}/runs")
    def api_start_run(
        experiment_id: str,
        payload: dict,
        request: Request,
        user: UserAccount = auth("control_scheduler"),
    ):
        def build():
            store = state.store_for(experiment_id)
            existing = state.schedulers.get(experiment_id)
            if existing and existing.running:
                raise ApiError(409, "already_running", "scheduler already running")
            config_doc = dict(store.run_config_doc)
            config_doc.update(payload.get("run_config") or {})
            config = optimizer.run_config_from_dict(config_doc)
            config.validate()
            store.update_run_config(optimizer.run_config_to_dict(config))
            evaluator = payload.get("evaluator")
            if evaluator:
                binding = sched.EvaluatorBinding(
                    kind="external_program",
                    program=str(evaluator),
                    timeout=float(payload.get("timeout", sched.DEFAULT_TIMEOUT)),
                )
            else:
                binding = sched.EvaluatorBinding(kind="manual")
            scheduler = sched.Scheduler(store, config, binding)
            stop_signal = threading.Event()
            hard_signal = threading.Event()
            thread = threading.Thread(
                target=scheduler.run,
                kwargs={"stop_signal": stop_signal, "hard_stop": hard_signal},
                daemon=True,
            )
            handle = SchedulerHandle(
                scheduler=scheduler,
                thread=thread,
                stop_signal=stop_signal,
                hard_signal=hard_signal,
                binding=binding,
            )
            state.schedulers[experiment_id] = handle
            thread.start()
            return 201, {"started": True, "mode": config.eval_mode}

        return idempotent(request, build)

    @app.delete("/v1/experiments/{experiment_id}/runs")
    def api_stop_run(
        experiment_id: str,
        request: Request,
        hard: bool = False,
        user: UserAccount = auth("control_scheduler"),
    ):
        def build():
            state.store_for(experiment_id)  # 404 on unknown experiment
            handle = state.schedulers.get(experiment_id)
            if handle is None or not handle.running:
                return 200, {"stopped": False, "detail": "no scheduler running"}
            if hard:
                handle.hard_signal.set()
            handle.stop_signal.set()
            if hard:
                handle.thread.join(timeout=30)
            return 200, {"stopped": True, "draining": not hard}

        return idempotent(request, build)

    # -- worker endpoints --------------------------------------------------------

    @app.post("/v1/experiments/{experiment_id}/claim")
    def api_claim_next(
        experiment_id: str,
        payload: dict,
        request: Request,
        user: UserAccount = auth("claim"),
    ):
        def build():
            store = state.store_for(experiment_id)
            worker = str(payload.get("worker") or user.username)
            record = store.claim_next(worker, actor=user.username)
            if record is None:
                return 200, {"status": "none_pending", "record": None}
            return 200, {"status": "claimed", "record": record_json(record)}

        return idempotent(request, build)

    @app.post("/v1/records/{record_id}/result")
    def api_submit_result(
        record_id: int,
        payload: dict,
        request: Request,
        user: UserAccount = auth("submit"),
    ):
        def build():
            experiment_id = payload.get("experiment_id")
            if not experiment_id:
                raise ApiError(422, "missing_experiment", "experiment_id required")
            store = state.store_for(str(experiment_id))
            record = store.get_record(record_id)
            failure = payload.get("failure")
            if failure is not None:
                if record.status == "pending":
                    store.transition(
                        record_id, "in_evaluation",
                        worker=user.username, actor=user.username,
                    )
                updated = store.transition(
                    record_id, "failed", note=str(failure), actor=user.username
                )
                outcome = sched.EvaluationOutcome(status="failed", note=str(failure))
            else:
                objectives = payload.get("objectives")
                if not isinstance(objectives, list):
                    raise ApiError(422, "bad_objectives", "objectives list required")
                updated = store.transition(
                    record_id,
                    "evaluated",
                    objectives=objectives,
                    note=str(payload.get("note", "")),
                    actor=user.username,
                )
                outcome = sched.EvaluationOutcome(
                    status="evaluated", objectives=[float(v) for v in objectives]
                )
            handle = state.schedulers.get(str(experiment_id))
            if handle and handle.running and isinstance(
                handle.scheduler.backend, sched.ManualBackend
            ):
                handle.scheduler.backend.notify(record_id, outcome)
            return 200, {"record": record_json(updated)}

        return idempotent(request, build)

    # -- model queries --------------------------------------------------------------

    @app.post("/v1/experiments/{experiment_id}/predict")
    def api_predict(
        experiment_id: str,
        payload: dict,
        user: UserAccount = auth("predict"),
    ):
        store = state.store_for(experiment_id)
        design = payload.get("design")
        if not isinstance(design, dict):
            raise ApiError(422, "bad_design", "design mapping required")
        models = _load_or_fit_models(state, store)
        posts = optimizer.predict_design(models, store.problem, design)
        return {
            "predicted": [
                {"objective": o.name, "mean": p.mean, "std": p.std}
                for o, p in zip(store.problem.objectives, posts)
            ]
        }

    @app.get("/v1/experiments/{experiment_id}/export")
    def api_export(experiment_id: str, user: UserAccount = auth("export")):
        store = state.store_for(experiment_id)
        handle = tempfile.NamedTemporaryFile(suffix=".zip", delete=False)
        handle.close()
        store.export_archive(handle.name)
        return FileResponse(
            handle.name,
            media_type="application/zip",
            filename=f"{experiment_id}.zip",
        )

    # -- user management ---------------------------------------------------------------

    @app.post("/v1/users")
    def api_create_user(
        payload: dict,
        request: Request,
        user: UserAccount = auth("manage_users"),
    ):
        def build():
            username = str(payload.get("username", "")).strip()
            role = payload.get("role")
            token = str(payload.get("token", "")).strip()
            if not username or not token:
                raise ApiError(422, "bad_user", "username and token required")
            if role not in ROLES:
                raise ApiError(422, "bad_role", f"role must be one of {ROLES}")
            if any(u.username == username for u in state.users_by_token.values()):
                raise ApiError(409, "user_exists", f"user {username!r} exists")
            account = UserAccount(username, role, token)
            state.users_by_token[token] = account
            if state.users_path:
                docs = [
                    {"username": u.username, "role": u.role, "token": u.token}
                    for u in state.users_by_token.values()
                ]
                state.users_path.write_text(yaml.safe_dump(docs, sort_keys=False))
            return 201, {"username": username, "role": role}

        return idempotent(request, build)

    return app


def serve(
    db_root: str | Path,
    port: int,
    users_path: str | Path,
    host: str = "127.0.0.1",
    static_dir: str | Path | None = None,
) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    app = create_app(db_root, users_path=users_path)
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    uvicorn.run(app, host=host, port=port, log_level="warning")
