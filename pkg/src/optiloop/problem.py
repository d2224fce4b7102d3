"""Optimization problem definitions and the continuous design encoding.

A problem is a list of design variables (continuous, discrete, binary or
categorical), optional design-space constraints and two or more objectives.
Designs are dictionaries keyed by variable name; algorithms operate on a
fixed-length real encoding where every coordinate lives in [0, 1]:

    continuous  -> (x - lo) / (hi - lo)
    discrete    -> (x - lo) / (hi - lo), snapped to the integer grid on decode
    binary      -> {0, 1}, thresholded at 0.5 on decode
    categorical -> one-hot block of length k, argmax on decode (ties: lowest)

Linear constraints are expressed over this encoded vector (coefficients
dot encoded + offset <= 0). ``linear_constraint_from_original_units``
converts a constraint written in natural variable units.
"""

from __future__ import annotations

import json
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .errors import (
    ConstraintEvaluationError,
    DimensionError,
    EncodingError,
    ValidationError,
)

VARIABLE_KINDS = ("continuous", "discrete", "binary", "categorical")

Design = dict[str, Any]


@dataclass(frozen=True)
class VariableSpec:
    """One design variable."""

    name: str
    kind: str
    bounds: tuple[float, float] | None = None
    categories: tuple[str, ...] | None = None

    def encoded_width(self) -> int:
        return len(self.categories) if self.kind == "categorical" else 1


@dataclass(frozen=True)
class ConstraintSpec:
    """A design-space constraint.

    Linear form: ``coefficients . encoded(x) + offset <= 0`` where
    ``coefficients`` has one entry per encoded dimension. Blackbox form
    references an external feasibility program obeying the evaluation
    program contract.
    """

    name: str
    form: str  # "linear" | "blackbox"
    coefficients: tuple[float, ...] | None = None
    offset: float = 0.0
    program: str | None = None


@dataclass(frozen=True)
class ObjectiveSpec:
    name: str
    sense: str = "minimize"  # "minimize" | "maximize"


@dataclass(frozen=True)
class Problem:
    variables: tuple[VariableSpec, ...]
    constraints: tuple[ConstraintSpec, ...] = ()
    objectives: tuple[ObjectiveSpec, ...] = ()

    @property
    def n_objectives(self) -> int:
        return len(self.objectives)

    def encoded_dim(self) -> int:
        return sum(v.encoded_width() for v in self.variables)

    def variable(self, name: str) -> VariableSpec:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def objective_senses(self) -> np.ndarray:
        """+1 for minimize, -1 for maximize; multiplying by this vector
        converts user-sense values to the internal minimization convention
        and back (the map is an involution)."""
        return np.array(
            [1.0 if o.sense == "minimize" else -1.0 for o in self.objectives]
        )


# ---------------------------------------------------------------------------
# validation


def validate(problem: Problem) -> list[str]:
    """Check every structural invariant; return human-readable violations.

    An empty list means the problem is well formed. Violations name the
    offending field so they can be surfaced next to form inputs.
    """
    violations: list[str] = []

    if len(problem.variables) < 1:
        violations.append("variables: at least one design variable required")

    seen: set[str] = set()
    for v in problem.variables:
        prefix = f"variables.{v.name}"
        if not v.name:
            violations.append("variables: empty variable name")
        if v.name in seen:
            violations.append(f"{prefix}: duplicate name")
        seen.add(v.name)
        if v.kind not in VARIABLE_KINDS:
            violations.append(f"{prefix}: unknown kind {v.kind!r}")
            continue
        if v.kind in ("continuous", "discrete"):
            if v.bounds is None:
                violations.append(f"{prefix}: bounds required")
            else:
                lo, hi = v.bounds
                if not (np.isfinite(lo) and np.isfinite(hi)):
                    violations.append(f"{prefix}: bounds not finite")
                elif not lo < hi:
                    violations.append(f"{prefix}: bounds reversed (lo >= hi)")
                if v.kind == "discrete" and (
                    v.bounds is not None
                    and (lo != int(lo) or hi != int(hi))
                ):
                    violations.append(f"{prefix}: discrete bounds must be integers")
            if v.categories is not None:
                violations.append(f"{prefix}: categories not allowed for {v.kind}")
        elif v.kind == "binary":
            if v.bounds is not None or v.categories is not None:
                violations.append(f"{prefix}: binary takes no bounds/categories")
        elif v.kind == "categorical":
            if v.bounds is not None:
                violations.append(f"{prefix}: bounds not allowed for categorical")
            if not v.categories:
                violations.append(f"{prefix}: categories must be non-empty")
            elif len(set(v.categories)) != len(v.categories):
                violations.append(f"{prefix}: categories must be unique")

    if len(problem.objectives) < 2:
        violations.append("objectives: fewer than 2 objectives")
    obj_names = [o.name for o in problem.objectives]
    if len(set(obj_names)) != len(obj_names):
        violations.append("objectives: duplicate name")
    for o in problem.objectives:
        if o.sense not in ("minimize", "maximize"):
            violations.append(f"objectives.{o.name}: unknown sense {o.sense!r}")
        if o.name in seen:
            violations.append(f"objectives.{o.name}: name collides with a variable")
        seen.add(o.name)

    dim = problem.encoded_dim()
    for c in problem.constraints:
        prefix = f"constraints.{c.name}"
        if c.name in seen:
            violations.append(f"{prefix}: name collides with another section")
        seen.add(c.name)
        if c.form == "linear":
            if c.coefficients is None:
                violations.append(f"{prefix}: linear constraint needs coefficients")
            elif len(c.coefficients) != dim:
                violations.append(
                    f"{prefix}: coefficient length {len(c.coefficients)} != "
                    f"encoded dimension {dim}"
                )
        elif c.form == "blackbox":
            if not c.program:
                violations.append(f"{prefix}: blackbox constraint needs a program")
        else:
            violations.append(f"{prefix}: unknown form {c.form!r}")

    return violations


def require_valid(problem: Problem) -> None:
    violations = validate(problem)
    if violations:
        raise ValidationError("; ".join(violations))


# ---------------------------------------------------------------------------
# encoding


def _check_design_keys(problem: Problem, design: Design) -> None:
    var_names = {v.name for v in problem.variables}
    missing = var_names - design.keys()
    extra = design.keys() - var_names
    if missing:
        raise EncodingError(f"design missing values for: {sorted(missing)}")
    if extra:
        raise EncodingError(f"design has unknown variables: {sorted(extra)}")


def encode(problem: Problem, design: Design) -> np.ndarray:
    """Map a design to its fixed-length real vector in the unit box."""
    _check_design_keys(problem, design)
    out = np.empty(problem.encoded_dim())
    i = 0
    for v in problem.variables:
        value = design[v.name]
        if v.kind in ("continuous", "discrete"):
            lo, hi = v.bounds  # type: ignore[misc]
            try:
                x = float(value)
            except (TypeError, ValueError):
                raise EncodingError(f"{v.name}: non-numeric value {value!r}")
            if not (lo <= x <= hi):
                raise EncodingError(
                    f"{v.name}: value {value!r} outside bounds [{lo}, {hi}]"
                )
            if v.kind == "discrete" and x != int(x):
                raise EncodingError(f"{v.name}: value {value!r} not an integer")
            out[i] = (x - lo) / (hi - lo)
            i += 1
        elif v.kind == "binary":
            if not isinstance(value, (bool, np.bool_)):
                raise EncodingError(f"{v.name}: expected boolean, got {value!r}")
            out[i] = 1.0 if value else 0.0
            i += 1
        else:  # categorical
            cats = v.categories  # type: ignore[assignment]
            if value not in cats:
                raise EncodingError(
                    f"{v.name}: unknown category {value!r} (choices: {list(cats)})"
                )
            block = np.zeros(len(cats))
            block[cats.index(value)] = 1.0
            out[i : i + len(cats)] = block
            i += len(cats)
    return out


def decode(problem: Problem, vector: Sequence[float] | np.ndarray) -> Design:
    """Inverse of :func:`encode` up to rounding.

    Discrete coordinates snap to the nearest integer, binary thresholds at
    0.5, categorical blocks take the argmax (ties resolve to the lowest
    index). ``decode(encode(d)) == d`` for every valid design.
    """
    vec = np.asarray(vector, dtype=float)
    if vec.shape != (problem.encoded_dim(),):
        raise DimensionError(
            f"expected vector of length {problem.encoded_dim()}, got {vec.shape}"
        )
    design: Design = {}
    i = 0
    for v in problem.variables:
        if v.kind == "continuous":
            lo, hi = v.bounds  # type: ignore[misc]
            design[v.name] = lo + float(vec[i]) * (hi - lo)
            i += 1
        elif v.kind == "discrete":
            lo, hi = v.bounds  # type: ignore[misc]
            raw = lo + float(vec[i]) * (hi - lo)
            design[v.name] = int(np.clip(round(raw), lo, hi))
            i += 1
        elif v.kind == "binary":
            design[v.name] = bool(vec[i] >= 0.5)
            i += 1
        else:
            k = len(v.categories)  # type: ignore[arg-type]
            design[v.name] = v.categories[int(np.argmax(vec[i : i + k]))]  # type: ignore[index]
            i += k
    return design


# ---------------------------------------------------------------------------
# feasibility


def linear_violations(problem: Problem, encoded: np.ndarray) -> dict[str, float]:
    """Signed slack per linear constraint; > 0 means violated."""
    out = {}
    for c in problem.constraints:
        if c.form == "linear":
            g = float(np.dot(c.coefficients, encoded) + c.offset)
            out[c.name] = g
    return out


def total_linear_violation(problem: Problem, encoded: np.ndarray) -> float:
    """Sum of positive constraint slacks (0 when feasible)."""
    return sum(max(0.0, g) for g in linear_violations(problem, encoded).values())


def _run_blackbox_constraint(program: str, design: Design) -> bool:
    """Invoke a feasibility program under the evaluation-program contract.

    The program receives one argument: a path to a JSON document with the
    design; it must print a JSON document with a boolean ``feasible`` field.
    """
    with tempfile.NamedTemporaryFile(
        "w", suffix=".json", delete=False
    ) as handle:
        json.dump({"design": design}, handle)
        arg_path = handle.name
    try:
        proc = subprocess.run(
            [program, arg_path],
            capture_output=True,
            text=True,
            timeout=600,
        )
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ConstraintEvaluationError(f"{program}: {exc}") from exc
    finally:
        Path(arg_path).unlink(missing_ok=True)
    if proc.returncode != 0:
        raise ConstraintEvaluationError(
            f"{program}: exit code {proc.returncode}: {proc.stderr.strip()}"
        )
    try:
        payload = json.loads(proc.stdout)
        return bool(payload["feasible"])
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConstraintEvaluationError(
            f"{program}: malformed output {proc.stdout!r}"
        ) from exc


@dataclass
class FeasibilityReport:
    feasible: bool
    per_constraint: dict[str, bool] = field(default_factory=dict)


def check_feasible(
    problem: Problem, design: Design, run_blackbox: bool = True
) -> FeasibilityReport:
    """Evaluate every constraint for a valid design.

    Blackbox constraint failures raise :class:`ConstraintEvaluationError`
    rather than silently reporting feasible. With ``run_blackbox=False``
    those constraints are skipped (callers flag the design "unverified").
    """
    encoded = encode(problem, design)
    report = FeasibilityReport(feasible=True)
    for name, g in linear_violations(problem, encoded).items():
        ok = g <= 0.0
        report.per_constraint[name] = ok
        report.feasible = report.feasible and ok
    for c in problem.constraints:
        if c.form == "blackbox" and run_blackbox:
            ok = _run_blackbox_constraint(c.program, design)  # type: ignore[arg-type]
            report.per_constraint[c.name] = ok
            report.feasible = report.feasible and ok
    return report


def linear_constraint_from_original_units(
    problem: Problem,
    name: str,
    coefficients: Mapping[str, float],
    offset: float,
) -> ConstraintSpec:
    """Build a linear constraint from coefficients in natural variable units.

    ``sum_i a_i * x_i + b <= 0`` over original values becomes an equivalent
    inequality over the [0,1]-encoded vector. Only numeric (continuous,
    discrete) and binary variables may appear; categorical variables have
    no linear structure.
    """
    dim = problem.encoded_dim()
    encoded = np.zeros(dim)
    shift = float(offset)
    index = 0
    by_name = {}
    for v in problem.variables:
        by_name[v.name] = (v, index)
        index += v.encoded_width()
    for var_name, a in coefficients.items():
        if var_name not in by_name:
            raise ValidationError(f"constraint {name}: unknown variable {var_name!r}")
        v, pos = by_name[var_name]
        if v.kind == "categorical":
            raise ValidationError(
                f"constraint {name}: categorical variable {var_name!r} not allowed "
                "in linear constraints"
            )
        if v.kind == "binary":
            encoded[pos] = a  # encoded value equals original {0,1}
        else:
            lo, hi = v.bounds  # type: ignore[misc]
            encoded[pos] = a * (hi - lo)
            shift += a * lo
    return ConstraintSpec(
        name=name, form="linear", coefficients=tuple(encoded), offset=shift
    )


# ---------------------------------------------------------------------------
# problem document (YAML)


def _variable_from_doc(doc: Mapping[str, Any]) -> VariableSpec:
    kind = doc.get("kind", "continuous")
    bounds = doc.get("bounds")
    cats = doc.get("categories")
    return VariableSpec(
        name=str(doc.get("name", "")),
        kind=kind,
        bounds=tuple(bounds) if bounds is not None else None,
        categories=tuple(str(c) for c in cats) if cats is not None else None,
    )


def problem_from_dict(doc: Mapping[str, Any]) -> Problem:
    """Build a Problem from the parsed problem document.

    Linear constraints in the document give per-variable coefficients in
    original units plus an offset; they are converted to encoded-space
    vectors here. Raises ValidationError on structural problems.
    """
    if not isinstance(doc, Mapping):
        raise ValidationError("problem document must be a mapping")
    variables = tuple(_variable_from_doc(v) for v in doc.get("variables", []))
    objectives = tuple(
        ObjectiveSpec(name=str(o["name"]), sense=o.get("sense", "minimize"))
        for o in doc.get("objectives", [])
    )
    base = Problem(variables=variables, objectives=objectives)
    constraints: list[ConstraintSpec] = []
    for c in doc.get("constraints", []) or []:
        form = c.get("kind", c.get("form", "linear"))
        cname = str(c.get("name", f"c{len(constraints)}"))
        if form == "linear":
            units = c.get("units", "original")
            coeffs = c.get("coefficients", {})
            if isinstance(coeffs, Mapping):
                if units == "encoded":
                    spec = _encoded_mapping_constraint(
                        base, cname, coeffs, float(c.get("offset", 0.0))
                    )
                else:
                    spec = linear_constraint_from_original_units(
                        base, cname, coeffs, float(c.get("offset", 0.0))
                    )
            else:
                spec = ConstraintSpec(
                    name=cname,
                    form="linear",
                    coefficients=tuple(float(a) for a in coeffs),
                    offset=float(c.get("offset", 0.0)),
                )
        elif form == "blackbox":
            spec = ConstraintSpec(
                name=cname, form="blackbox", program=str(c.get("program", ""))
            )
        else:
            spec = ConstraintSpec(name=cname, form=str(form))
        constraints.append(spec)
    return Problem(
        variables=variables, constraints=tuple(constraints), objectives=objectives
    )


def _encoded_mapping_constraint(
    problem: Problem, name: str, coefficients: Mapping[str, float], offset: float
) -> ConstraintSpec:
    """Per-variable coefficients applied directly to encoded coordinates."""
    vec = np.zeros(problem.encoded_dim())
    index = 0
    positions = {}
    for v in problem.variables:
        positions[v.name] = (v, index)
        index += v.encoded_width()
    for var_name, a in coefficients.items():
        if var_name not in positions:
            raise ValidationError(f"constraint {name}: unknown variable {var_name!r}")
        v, pos = positions[var_name]
        if v.kind == "categorical":
            raise ValidationError(
                f"constraint {name}: categorical variable {var_name!r} not allowed"
            )
        vec[pos] = float(a)
    return ConstraintSpec(
        name=name, form="linear", coefficients=tuple(vec), offset=offset
    )


def problem_to_dict(problem: Problem) -> dict[str, Any]:
    """Serializable document form; inverse of problem_from_dict for
    problems whose linear constraints are kept in encoded units."""
    doc: dict[str, Any] = {"variables": [], "objectives": []}
    for v in problem.variables:
        entry: dict[str, Any] = {"name": v.name, "kind": v.kind}
        if v.bounds is not None:
            entry["bounds"] = list(v.bounds)
        if v.categories is not None:
            entry["categories"] = list(v.categories)
        doc["variables"].append(entry)
    if problem.constraints:
        doc["constraints"] = []
        for c in problem.constraints:
            if c.form == "linear":
                doc["constraints"].append(
                    {
                        "name": c.name,
                        "kind": "linear",
                        "units": "encoded",
                        "coefficients": list(c.coefficients or ()),
                        "offset": c.offset,
                    }
                )
            else:
                doc["constraints"].append(
                    {"name": c.name, "kind": "blackbox", "program": c.program}
                )
    for o in problem.objectives:
        doc["objectives"].append({"name": o.name, "sense": o.sense})
    return doc


def load_problem(path: str | Path) -> Problem:
    with open(path, "r", encoding="utf-8") as handle:
        doc = yaml.safe_load(handle)
    return problem_from_dict(doc)


def dump_problem(problem: Problem) -> str:
    return yaml.safe_dump(problem_to_dict(problem), sort_keys=False)


def load_problem_str(text: str) -> Problem:
    return problem_from_dict(yaml.safe_load(text))


if sys.version_info < (3, 10):  # pragma: no cover
    raise RuntimeError("optiloop requires Python 3.10+")
