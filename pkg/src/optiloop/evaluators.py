"""Built-in synthetic test problems and their evaluation programs.

Each named evaluator is available two ways: in-process (``evaluate``) and
as an external program obeying the evaluation-program contract::

    python -m optiloop.evaluators zdt1 /path/to/input.json

where the input document is ``{"design": {...}, "record_id": ...}`` and
the program prints ``{"objectives": [...]}`` to stdout.
"""

from __future__ import annotations

import json
import sys

import numpy as np

from .problem import Design, ObjectiveSpec, Problem, VariableSpec

BUILTIN_NAMES = ("zdt1", "zdt2", "dtlz2")


def _design_vector(design: Design, d: int) -> np.ndarray:
    return np.array([float(design[f"x{i + 1}"]) for i in range(d)])


def zdt1(x: np.ndarray) -> list[float]:
    f1 = float(x[0])
    g = 1.0 + 9.0 * float(x[1:].sum()) / (x.size - 1)
    f2 = g * (1.0 - np.sqrt(f1 / g))
    return [f1, float(f2)]


def zdt2(x: np.ndarray) -> list[float]:
    f1 = float(x[0])
    g = 1.0 + 9.0 * float(x[1:].sum()) / (x.size - 1)
    f2 = g * (1.0 - (f1 / g) ** 2)
    return [f1, float(f2)]


def dtlz2(x: np.ndarray) -> list[float]:
    # three objectives; the trailing variables control distance from the sphere
    g = float(((x[2:] - 0.5) ** 2).sum())
    a1 = x[0] * np.pi / 2.0
    a2 = x[1] * np.pi / 2.0
    return [
        float((1.0 + g) * np.cos(a1) * np.cos(a2)),
        float((1.0 + g) * np.cos(a1) * np.sin(a2)),
        float((1.0 + g) * np.sin(a1)),
    ]


_FUNCTIONS = {"zdt1": zdt1, "zdt2": zdt2, "dtlz2": dtlz2}
_OBJECTIVE_COUNT = {"zdt1": 2, "zdt2": 2, "dtlz2": 3}


def builtin_problem(name: str, dim: int = 6) -> Problem:
    if name not in BUILTIN_NAMES:
        raise KeyError(f"unknown builtin problem {name!r} (have {BUILTIN_NAMES})")
    if name == "dtlz2" and dim < 3:
        raise ValueError("dtlz2 needs at least 3 variables")
    if name.startswith("zdt") and dim < 2:
        raise ValueError("zdt problems need at least 2 variables")
    variables = tuple(
        VariableSpec(f"x{i + 1}", "continuous", bounds=(0.0, 1.0)) for i in range(dim)
    )
    objectives = tuple(
        ObjectiveSpec(f"f{j + 1}", "minimize") for j in range(_OBJECTIVE_COUNT[name])
    )
    return Problem(variables=variables, objectives=objectives)


def evaluate(name: str, design: Design) -> list[float]:
    fn = _FUNCTIONS[name]
    dim = len(design)
    return fn(_design_vector(design, dim))


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2 or argv[0] not in BUILTIN_NAMES:
        print(
            f"usage: python -m optiloop.evaluators {{{'|'.join(BUILTIN_NAMES)}}} INPUT_JSON",
            file=sys.stderr,
        )
        return 2
    with open(argv[1], "r", encoding="utf-8") as handle:
        payload = json.load(handle)
    objectives = evaluate(argv[0], payload["design"])
    print(json.dumps({"objectives": objectives}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
