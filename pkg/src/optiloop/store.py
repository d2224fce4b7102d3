"""Persistent experiment database: one sqlite file per experiment.

Holds the problem and run configuration, every experiment record with its
lifecycle status, an append-only transition log (replaying it reproduces
the record table), and serialized surrogate models. All mutations are
serialized through a per-store lock (single writer, consistent reads).

Record lifecycle::

    pending -> in_evaluation -> evaluated | failed
    pending -> evaluated                     (manual entry)

Export produces a zip archive: problem.conf, config.conf (structured
text), records.csv, log.csv (UTF-8, comma-delimited, quoted per RFC 4180,
header row mandatory). Import refuses schema-version mismatches.
"""

from __future__ import annotations

import csv
import io
import json
import sqlite3
import threading
import zipfile
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import yaml

from . import pareto
from .errors import IllegalTransition, SchemaVersionError, StoreError, ValidationError
from .problem import (
    Design,
    Problem,
    encode,
    problem_from_dict,
    problem_to_dict,
    require_valid,
)

SCHEMA_VERSION = 1

STATUSES = ("pending", "in_evaluation", "evaluated", "failed")
SOURCES = ("initial", "suggested", "manual")
LEGAL_TRANSITIONS = {
    ("pending", "in_evaluation"),
    ("in_evaluation", "evaluated"),
    ("in_evaluation", "failed"),
    ("pending", "evaluated"),
}


def utc_now_ms() -> str:
    """Current UTC time, millisecond resolution, Z-suffixed ISO-8601."""
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


@dataclass(frozen=True)
class ExperimentRecord:
    id: int
    status: str
    source: str
    iteration: int
    design: Design
    objectives: tuple[float, ...] | None
    requested_at: str
    started_at: str | None
    finished_at: str | None
    worker: str | None
    note: str


@dataclass(frozen=True)
class LogEntry:
    seq: int
    ts: str
    record_id: int
    transition: str
    actor: str
    payload: dict


@dataclass
class Statistics:
    counts: dict[str, int]
    front_ids: list[int]
    hypervolume_by_iteration: list[tuple[int, float]]
    reference_point: list[float] | None


_SCHEMA = """
CREATE TABLE meta (key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE records (
    id INTEGER PRIMARY KEY AUTOINCREMENT,
    status TEXT NOT NULL,
    source TEXT NOT NULL,
    iteration INTEGER NOT NULL,
    design TEXT NOT NULL,
    objectives TEXT,
    requested_at TEXT NOT NULL,
    started_at TEXT,
    finished_at TEXT,
    worker TEXT,
    note TEXT NOT NULL DEFAULT ''
);
CREATE TABLE log (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    ts TEXT NOT NULL,
    record_id INTEGER NOT NULL,
    transition TEXT NOT NULL,
    actor TEXT NOT NULL,
    payload TEXT NOT NULL
);
CREATE TABLE models (objective TEXT PRIMARY KEY, doc TEXT NOT NULL);
"""


class ExperimentStore:
    """Handle to one experiment database file."""

    def __init__(self, path: str | Path, _connection: sqlite3.Connection | None = None):
        self.path = Path(path)
        if _connection is None:
            if not self.path.exists():
                raise StoreError(f"no experiment database at {self.path}")
            _connection = sqlite3.connect(self.path, check_same_thread=False)
        self._conn = _connection
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._lock = threading.RLock()
        self._problem: Problem | None = None

    # -- creation ----------------------------------------------------------

    @classmethod
    def create(
        cls,
        path: str | Path,
        problem: Problem,
        run_config_doc: Mapping[str, Any],
        name: str,
    ) -> "ExperimentStore":
        path = Path(path)
        if path.exists():
            raise StoreError(f"experiment database already exists: {path}")
        require_valid(problem)
        path.parent.mkdir(parents=True, exist_ok=True)
        conn = sqlite3.connect(path, check_same_thread=False)
        try:
            conn.executescript(_SCHEMA)
            meta = {
                "schema_version": str(SCHEMA_VERSION),
                "name": name,
                "created_at": utc_now_ms(),
                "problem": yaml.safe_dump(problem_to_dict(problem), sort_keys=False),
                "config": yaml.safe_dump(dict(run_config_doc), sort_keys=False),
            }
            conn.executemany("INSERT INTO meta VALUES (?, ?)", meta.items())
            conn.commit()
        except Exception:
            conn.close()
            path.unlink(missing_ok=True)
            raise
        return cls(path, _connection=conn)

    def close(self) -> None:
        self._conn.close()

    # -- metadata ----------------------------------------------------------

    def _meta(self, key: str) -> str:
        row = self._conn.execute("SELECT value FROM meta WHERE key=?", (key,)).fetchone()
        if row is None:
            raise StoreError(f"corrupt experiment database: missing meta {key!r}")
        return row[0]

    @property
    def name(self) -> str:
        return self._meta("name")

    @property
    def problem(self) -> Problem:
        if self._problem is None:
            self._problem = problem_from_dict(yaml.safe_load(self._meta("problem")))
        return self._problem

    @property
    def run_config_doc(self) -> dict[str, Any]:
        return yaml.safe_load(self._meta("config")) or {}

    def update_run_config(self, doc: Mapping[str, Any]) -> None:
        with self._lock:
            self._conn.execute(
                "UPDATE meta SET value=? WHERE key='config'",
                (yaml.safe_dump(dict(doc), sort_keys=False),),
            )
            self._conn.commit()

    # -- records -----------------------------------------------------------

    def _row_to_record(self, row) -> ExperimentRecord:
        return ExperimentRecord(
            id=row[0],
            status=row[1],
            source=row[2],
            iteration=row[3],
            design=json.loads(row[4]),
            objectives=tuple(json.loads(row[5])) if row[5] is not None else None,
            requested_at=row[6],
            started_at=row[7],
            finished_at=row[8],
            worker=row[9],
            note=row[10],
        )

    _RECORD_COLS = (
        "id, status, source, iteration, design, objectives, "
        "requested_at, started_at, finished_at, worker, note"
    )

    def insert_pending(
        self,
        designs: Sequence[Design],
        source: str,
        iteration: int,
        actor: str = "system",
    ) -> list[int]:
        """Insert designs as pending records; all-or-nothing validation."""
        if source not in SOURCES:
            raise ValidationError(f"unknown source {source!r}")
        problem = self.problem
        for design in designs:  # validate everything before touching the db
            try:
                encode(problem, design)
            except Exception as exc:
                raise ValidationError(f"invalid design {design!r}: {exc}") from exc
        ids: list[int] = []
        with self._lock:
            ts = utc_now_ms()
            for design in designs:
                cursor = self._conn.execute(
                    "INSERT INTO records (status, source, iteration, design, "
                    "requested_at, note) VALUES ('pending', ?, ?, ?, ?, '')",
                    (source, iteration, json.dumps(design, sort_keys=True), ts),
                )
                record_id = int(cursor.lastrowid)
                ids.append(record_id)
                self._append_log(
                    ts,
                    record_id,
                    "create",
                    actor,
                    {
                        "design": design,
                        "source": source,
                        "iteration": iteration,
                        "requested_at": ts,
                    },
                )
            self._conn.commit()
        return ids

    def transition(
        self,
        record_id: int,
        new_status: str,
        objectives: Sequence[float] | None = None,
        worker: str | None = None,
        note: str = "",
        actor: str = "system",
    ) -> ExperimentRecord:
        """Apply one legal lifecycle transition atomically."""
        if new_status not in STATUSES:
            raise ValidationError(f"unknown status {new_status!r}")
        with self._lock:
            record = self.get_record(record_id)
            if (record.status, new_status) not in LEGAL_TRANSITIONS:
                raise IllegalTransition(
                    f"record {record_id}: {record.status} -> {new_status} not allowed"
                )
            ts = self._monotone_ts(record)
            payload: dict[str, Any]
            if new_status == "in_evaluation":
                self._conn.execute(
                    "UPDATE records SET status=?, started_at=?, worker=? WHERE id=?",
                    (new_status, ts, worker, record_id),
                )
                payload = {"started_at": ts, "worker": worker}
            elif new_status == "evaluated":
                values = self._validated_objectives(objectives)
                self._conn.execute(
                    "UPDATE records SET status=?, objectives=?, finished_at=?, note=? "
                    "WHERE id=?",
                    (new_status, json.dumps(values), ts, note or record.note, record_id),
                )
                payload = {
                    "finished_at": ts,
                    "objectives": values,
                    "note": note or record.note,
                }
            else:  # failed
                self._conn.execute(
                    "UPDATE records SET status=?, finished_at=?, note=? WHERE id=?",
                    (new_status, ts, note or record.note, record_id),
                )
                payload = {"finished_at": ts, "note": note or record.note}
            self._append_log(ts, record_id, new_status, actor, payload)
            self._conn.commit()
            return self.get_record(record_id)

    def _validated_objectives(self, objectives) -> list[float]:
        m = self.problem.n_objectives
        if objectives is None:
            raise ValidationError("evaluated status requires an objectives vector")
        values = [float(v) for v in objectives]
        if len(values) != m:
            raise ValidationError(
                f"expected {m} objective values, got {len(values)}"
            )
        if not all(v == v and abs(v) != float("inf") for v in values):
            raise ValidationError("objective values must be finite")
        return values

    def _monotone_ts(self, record: ExperimentRecord) -> str:
        ts = utc_now_ms()
        latest = max(
            t for t in (record.requested_at, record.started_at, record.finished_at, ts)
            if t is not None
        )
        return latest

    def claim_next(self, worker: str, actor: str = "worker") -> ExperimentRecord | None:
        """Atomically move the oldest pending record to in_evaluation."""
        with self._lock:
            row = self._conn.execute(
                f"SELECT {self._RECORD_COLS} FROM records WHERE status='pending' "
                "ORDER BY id LIMIT 1"
            ).fetchone()
            if row is None:
                return None
            record = self._row_to_record(row)
            return self.transition(
                record.id, "in_evaluation", worker=worker, actor=actor
            )

    def get_record(self, record_id: int) -> ExperimentRecord:
        row = self._conn.execute(
            f"SELECT {self._RECORD_COLS} FROM records WHERE id=?", (record_id,)
        ).fetchone()
        if row is None:
            raise StoreError(f"no record with id {record_id}")
        return self._row_to_record(row)

    def records(
        self,
        status: str | None = None,
        source: str | None = None,
        iteration: int | None = None,
    ) -> list[ExperimentRecord]:
        query = f"SELECT {self._RECORD_COLS} FROM records"
        clauses, args = [], []
        if status is not None:
            clauses.append("status=?")
            args.append(status)
        if source is not None:
            clauses.append("source=?")
            args.append(source)
        if iteration is not None:
            clauses.append("iteration=?")
            args.append(iteration)
        if clauses:
            query += " WHERE " + " AND ".join(clauses)
        query += " ORDER BY id"
        with self._lock:
            rows = self._conn.execute(query, args).fetchall()
        return [self._row_to_record(r) for r in rows]

    # -- log ---------------------------------------------------------------

    def _append_log(self, ts, record_id, transition, actor, payload) -> None:
        self._conn.execute(
            "INSERT INTO log (ts, record_id, transition, actor, payload) "
            "VALUES (?, ?, ?, ?, ?)",
            (ts, record_id, transition, actor, json.dumps(payload, sort_keys=True)),
        )

    def log_entries(self) -> list[LogEntry]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT seq, ts, record_id, transition, actor, payload FROM log "
                "ORDER BY seq"
            ).fetchall()
        return [
            LogEntry(
                seq=r[0],
                ts=r[1],
                record_id=r[2],
                transition=r[3],
                actor=r[4],
                payload=json.loads(r[5]),
            )
            for r in rows
        ]

    # -- statistics ----------------------------------------------------------

    def statistics(self) -> Statistics:
        records = self.records()
        counts = {status: 0 for status in STATUSES}
        for r in records:
            counts[r.status] += 1
        evaluated = [r for r in records if r.status == "evaluated"]
        if not evaluated:
            return Statistics(
                counts=counts,
                front_ids=[],
                hypervolume_by_iteration=[],
                reference_point=None,
            )
        senses = self.problem.objective_senses()
        Y = [[s * v for s, v in zip(senses, r.objectives)] for r in evaluated]
        front = pareto.non_dominated_indices(Y)
        ref = pareto.reference_point(Y)
        trajectory = []
        iterations = sorted({r.iteration for r in evaluated})
        for k in iterations:
            upto = [y for r, y in zip(evaluated, Y) if r.iteration <= k]
            trajectory.append((k, pareto.hypervolume(upto, ref)))
        return Statistics(
            counts=counts,
            front_ids=[evaluated[i].id for i in front],
            hypervolume_by_iteration=trajectory,
            reference_point=[float(v) for v in ref],
        )

    # -- models --------------------------------------------------------------

    def save_models(self, docs: Mapping[str, Mapping[str, Any]]) -> None:
        with self._lock:
            for objective, doc in docs.items():
                self._conn.execute(
                    "INSERT INTO models (objective, doc) VALUES (?, ?) "
                    "ON CONFLICT(objective) DO UPDATE SET doc=excluded.doc",
                    (objective, yaml.safe_dump(dict(doc), sort_keys=False)),
                )
            self._conn.commit()

    def load_models(self) -> dict[str, dict[str, Any]]:
        with self._lock:
            rows = self._conn.execute("SELECT objective, doc FROM models").fetchall()
        return {name: yaml.safe_load(doc) for name, doc in rows}

    # -- export / import -----------------------------------------------------

    def _design_columns(self) -> list[str]:
        return [v.name for v in self.problem.variables]

    def _objective_columns(self) -> list[str]:
        return [o.name for o in self.problem.objectives]

    def export_archive(self, destination: str | Path) -> Path:
        """Write a self-contained zip archive of this experiment."""
        destination = Path(destination)
        problem = self.problem
        var_cols = self._design_columns()
        obj_cols = self._objective_columns()

        records_buf = io.StringIO()
        writer = csv.writer(records_buf)
        writer.writerow(
            ["id", "status", "source", "iteration"]
            + var_cols
            + obj_cols
            + ["requested_at", "started_at", "finished_at", "worker", "note"]
        )
        for r in self.records():
            design_cells = [_format_value(r.design[name]) for name in var_cols]
            if r.objectives is None:
                objective_cells = [""] * len(obj_cols)
            else:
                objective_cells = [repr(float(v)) for v in r.objectives]
            writer.writerow(
                [r.id, r.status, r.source, r.iteration]
                + design_cells
                + objective_cells
                + [
                    r.requested_at,
                    r.started_at or "",
                    r.finished_at or "",
                    r.worker or "",
                    r.note,
                ]
            )

        log_buf = io.StringIO()
        log_writer = csv.writer(log_buf)
        log_writer.writerow(["seq", "ts", "record_id", "transition", "actor", "payload"])
        for entry in self.log_entries():
            log_writer.writerow(
                [
                    entry.seq,
                    entry.ts,
                    entry.record_id,
                    entry.transition,
                    entry.actor,
                    json.dumps(entry.payload, sort_keys=True),
                ]
            )

        config_doc = {
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "run_config": self.run_config_doc,
        }
        with zipfile.ZipFile(destination, "w", zipfile.ZIP_DEFLATED) as archive:
            archive.writestr(
                "problem.conf",
                yaml.safe_dump(problem_to_dict(problem), sort_keys=False),
            )
            archive.writestr("config.conf", yaml.safe_dump(config_doc, sort_keys=False))
            archive.writestr("records.csv", records_buf.getvalue())
            archive.writestr("log.csv", log_buf.getvalue())
        return destination


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_design_value(problem: Problem, name: str, cell: str):
    kind = problem.variable(name).kind
    if kind == "continuous":
        return float(cell)
    if kind == "discrete":
        return int(cell)
    if kind == "binary":
        if cell not in ("true", "false"):
            raise StoreError(f"bad binary cell {cell!r} for {name}")
        return cell == "true"
    return cell


def import_archive(source: str | Path, db_path: str | Path) -> ExperimentStore:
    """Recreate an experiment database from an exported archive.

    Refuses schema-version mismatches and leaves nothing behind on any
    integrity failure.
    """
    source = Path(source)
    db_path = Path(db_path)
    if db_path.exists():
        raise StoreError(f"destination already exists: {db_path}")
    try:
        with zipfile.ZipFile(source) as archive:
            names = set(archive.namelist())
            required = {"problem.conf", "config.conf", "records.csv", "log.csv"}
            if not required <= names:
                raise StoreError(
                    f"archive missing members: {sorted(required - names)}"
                )
            problem_doc = yaml.safe_load(archive.read("problem.conf"))
            config_doc = yaml.safe_load(archive.read("config.conf"))
            records_text = archive.read("records.csv").decode("utf-8")
            log_text = archive.read("log.csv").decode("utf-8")
    except (zipfile.BadZipFile, KeyError, yaml.YAMLError) as exc:
        raise StoreError(f"unreadable archive {source}: {exc}") from exc

    version = config_doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"archive schema version {version!r} != supported {SCHEMA_VERSION}"
        )
    problem = problem_from_dict(problem_doc)
    store = ExperimentStore.create(
        db_path,
        problem,
        config_doc.get("run_config", {}),
        name=config_doc.get("name", db_path.stem),
    )
    try:
        var_cols = [v.name for v in problem.variables]
        obj_cols = [o.name for o in problem.objectives]
        expected_header = (
            ["id", "status", "source", "iteration"]
            + var_cols
            + obj_cols
            + ["requested_at", "started_at", "finished_at", "worker", "note"]
        )
        reader = csv.reader(io.StringIO(records_text))
        header = next(reader, None)
        if header != expected_header:
            raise StoreError(f"records.csv header mismatch: {header}")
        with store._lock:
            for row in reader:
                if len(row) != len(expected_header):
                    raise StoreError(f"records.csv row arity mismatch: {row}")
                rid, status, source_name, iteration = row[0], row[1], row[2], row[3]
                if status not in STATUSES or source_name not in SOURCES:
                    raise StoreError(f"records.csv bad status/source in row: {row}")
                design = {
                    name: _parse_design_value(problem, name, cell)
                    for name, cell in zip(var_cols, row[4 : 4 + len(var_cols)])
                }
                obj_cells = row[4 + len(var_cols) : 4 + len(var_cols) + len(obj_cols)]
                objectives = (
                    None
                    if all(c == "" for c in obj_cells)
                    else json.dumps([float(c) for c in obj_cells])
                )
                tail = row[4 + len(var_cols) + len(obj_cols) :]
                requested_at, started_at, finished_at, worker, note = tail
                store._conn.execute(
                    "INSERT INTO records (id, status, source, iteration, design, "
                    "objectives, requested_at, started_at, finished_at, worker, note) "
                    "VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)",
                    (
                        int(rid),
                        status,
                        source_name,
                        int(iteration),
                        json.dumps(design, sort_keys=True),
                        objectives,
                        requested_at,
                        started_at or None,
                        finished_at or None,
                        worker or None,
                        note,
                    ),
                )
            log_reader = csv.reader(io.StringIO(log_text))
            log_header = next(log_reader, None)
            if log_header != ["seq", "ts", "record_id", "transition", "actor", "payload"]:
                raise StoreError(f"log.csv header mismatch: {log_header}")
            for row in log_reader:
                if len(row) != 6:
                    raise StoreError(f"log.csv row arity mismatch: {row}")
                json.loads(row[5])  # payload must be valid JSON
                store._conn.execute(
                    "INSERT INTO log (seq, ts, record_id, transition, actor, payload) "
                    "VALUES (?, ?, ?, ?, ?, ?)",
                    (int(row[0]), row[1], int(row[2]), row[3], row[4], row[5]),
                )
            store._conn.commit()
    except Exception:
        store.close()
        db_path.unlink(missing_ok=True)
        raise
    return store


def replay_log(entries: Iterable[LogEntry]) -> dict[int, dict[str, Any]]:
    """Fold the transition log into record states (the replay invariant)."""
    state: dict[int, dict[str, Any]] = {}
    for entry in entries:
        if entry.transition == "create":
            state[entry.record_id] = {
                "id": entry.record_id,
                "status": "pending",
                "source": entry.payload["source"],
                "iteration": entry.payload["iteration"],
                "design": entry.payload["design"],
                "objectives": None,
                "requested_at": entry.payload["requested_at"],
                "started_at": None,
                "finished_at": None,
                "worker": None,
                "note": "",
            }
        elif entry.transition == "in_evaluation":
            rec = state[entry.record_id]
            rec["status"] = "in_evaluation"
            rec["started_at"] = entry.payload["started_at"]
            rec["worker"] = entry.payload["worker"]
        elif entry.transition == "evaluated":
            rec = state[entry.record_id]
            rec["status"] = "evaluated"
            rec["finished_at"] = entry.payload["finished_at"]
            rec["objectives"] = tuple(entry.payload["objectives"])
            rec["note"] = entry.payload.get("note", "")
        elif entry.transition == "failed":
            rec = state[entry.record_id]
            rec["status"] = "failed"
            rec["finished_at"] = entry.payload["finished_at"]
            rec["note"] = entry.payload.get("note", "")
        else:
            raise StoreError(f"unknown log transition {entry.transition!r}")
    return state


def record_to_state(record: ExperimentRecord) -> dict[str, Any]:
    """Record as the plain dict form produced by replay_log."""
    return {
        "id": record.id,
        "status": record.status,
        "source": record.source,
        "iteration": record.iteration,
        "design": record.design,
        "objectives": record.objectives,
        "requested_at": record.requested_at,
        "started_at": record.started_at,
        "finished_at": record.finished_at,
        "worker": record.worker,
        "note": record.note,
    }
