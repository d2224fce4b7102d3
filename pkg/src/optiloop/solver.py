"""Inner multi-objective solver: elitist NSGA-II over the acquisition landscape.

Operates entirely in the [0,1] encoded box. Candidate designs with relaxed
categorical/discrete coordinates are snapped only when decoded by callers.
Constraint handling uses the feasibility-first (constraint-domination)
rule: feasible individuals always beat infeasible ones; infeasible ones
are ordered by total violation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import pareto
from .errors import SolverFailure, ValidationError
from .problem import Problem, total_linear_violation

AcquisitionFn = Callable[[np.ndarray], np.ndarray]


@dataclass
class SolverConfig:
    population_size: int = 100
    generations: int = 100
    crossover_prob: float = 0.9
    crossover_eta: float = 15.0
    mutation_prob: float | None = None  # defaults to 1/dim
    mutation_eta: float = 20.0
    seed: int = 0

    def validate(self) -> None:
        if self.population_size < 2 or self.population_size % 2:
            raise ValidationError("population_size must be even and >= 2")
        if self.generations < 1:
            raise ValidationError("generations must be positive")
        for name in ("crossover_prob", "mutation_prob"):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name} must be in [0, 1]")
        if self.crossover_eta <= 0 or self.mutation_eta <= 0:
            raise ValidationError("distribution indices must be positive")


@dataclass
class Individual:
    encoded: np.ndarray
    acq_values: np.ndarray
    rank: int = 0
    crowding: float = 0.0
    feasible: bool = True
    violation: float = 0.0


@dataclass
class SolverResult:
    front: list[Individual]
    population: list[Individual]
    diagnostics: dict = field(default_factory=dict)


def _evaluate(
    X: np.ndarray, acq_fn: AcquisitionFn, problem: Problem | None
) -> list[Individual]:
    values = np.atleast_2d(np.asarray(acq_fn(X), dtype=float))
    if values.shape[0] != X.shape[0]:
        raise ValidationError("acquisition function must return one row per design")
    individuals = []
    for i in range(X.shape[0]):
        finite = bool(np.isfinite(values[i]).all())
        violation = (
            total_linear_violation(problem, X[i]) if problem is not None else 0.0
        )
        individuals.append(
            Individual(
                encoded=X[i].copy(),
                acq_values=values[i].copy(),
                feasible=finite and violation == 0.0,
                violation=violation if finite else np.inf,
            )
        )
    return individuals


def rank_population(population: list[Individual]) -> list[list[Individual]]:
    """Assign (rank, crowding) under constraint-domination; return fronts.

    Feasible individuals occupy the leading fronts via non-dominated
    sorting; infeasible ones follow, one front per violation level.
    """
    feasible = [ind for ind in population if ind.feasible]
    infeasible = [ind for ind in population if not ind.feasible]
    fronts: list[list[Individual]] = []
    if feasible:
        values = np.array([ind.acq_values for ind in feasible])
        partition = pareto.non_dominated_sort(values)
        for k, front_idx in enumerate(partition.fronts):
            front = [feasible[i] for i in front_idx]
            crowd = pareto.crowding_distance(values[list(front_idx)])
            for ind, c in zip(front, crowd):
                ind.rank = k
                ind.crowding = float(c)
            fronts.append(front)
    if infeasible:
        infeasible.sort(key=lambda ind: ind.violation)
        base = len(fronts)
        for offset, ind in enumerate(infeasible):
            ind.rank = base + offset
            ind.crowding = 0.0
            fronts.append([ind])
    return fronts


def feasibility_filter(
    population: Sequence[Individual], problem: Problem | None = None
) -> list[Individual]:
    """Order a population by the constraint-domination preference.

    Re-derives violations when a problem is given, then sorts feasible
    first (by rank, then descending crowding), infeasible after (by
    ascending total violation).
    """
    pop = list(population)
    if problem is not None:
        for ind in pop:
            ind.violation = total_linear_violation(problem, ind.encoded)
            ind.feasible = ind.violation == 0.0 and bool(
                np.isfinite(ind.acq_values).all()
            )
    rank_population(pop)
    return sorted(pop, key=lambda i: (not i.feasible, i.rank, -i.crowding, i.violation))


def _tournament_pick(a: Individual, b: Individual) -> Individual:
    if a.feasible != b.feasible:
        return a if a.feasible else b
    if not a.feasible:  # both infeasible: smaller total violation wins
        return a if a.violation <= b.violation else b
    if a.rank != b.rank:
        return a if a.rank < b.rank else b
    return a if a.crowding >= b.crowding else b


def _sbx_pair(p1, p2, eta, rng):
    u = rng.random(p1.shape)
    beta = np.where(
        u <= 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)),
        (1.0 / (2.0 * (1.0 - u))) ** (1.0 / (eta + 1.0)),
    )
    c1 = 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
    c2 = 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2)
    return c1, c2


def _polynomial_mutation(x, prob, eta, rng):
    u = rng.random(x.shape)
    apply = rng.random(x.shape) < prob
    delta = np.where(
        u < 0.5,
        (2.0 * u) ** (1.0 / (eta + 1.0)) - 1.0,
        1.0 - (2.0 * (1.0 - u)) ** (1.0 / (eta + 1.0)),
    )
    return np.where(apply, x + delta, x)


def _make_offspring(parents: list[Individual], config: SolverConfig, rng):
    n = len(parents)
    dim = parents[0].encoded.shape[0]
    mut_prob = config.mutation_prob if config.mutation_prob is not None else 1.0 / dim
    # binary tournaments over two shuffles give n parents for n offspring
    picks = []
    for _ in range(2):
        order = rng.permutation(n)
        for i in range(0, n - 1, 2):
            picks.append(_tournament_pick(parents[order[i]], parents[order[i + 1]]))
    children = np.empty((n, dim))
    for i in range(0, n, 2):
        p1 = picks[i].encoded
        p2 = picks[i + 1].encoded
        if rng.random() < config.crossover_prob:
            c1, c2 = _sbx_pair(p1, p2, config.crossover_eta, rng)
        else:
            c1, c2 = p1.copy(), p2.copy()
        children[i] = c1
        children[i + 1] = c2
    children = _polynomial_mutation(children, mut_prob, config.mutation_eta, rng)
    return np.clip(children, 0.0, 1.0)


def _environmental_selection(
    combined: list[Individual], size: int
) -> list[Individual]:
    fronts = rank_population(combined)
    survivors: list[Individual] = []
    for front in fronts:
        if len(survivors) + len(front) <= size:
            survivors.extend(front)
        else:
            need = size - len(survivors)
            order = sorted(
                range(len(front)), key=lambda i: -front[i].crowding
            )
            survivors.extend(front[i] for i in order[:need])
            break
    return survivors


def solve(
    acq_fn: AcquisitionFn,
    problem: Problem | None,
    config: SolverConfig,
    warm_start: Sequence[np.ndarray] | None = None,
) -> SolverResult:
    """Run NSGA-II and return the final population's first front.

    ``acq_fn`` maps an (n, d) batch of encoded designs to (n, m) scores
    under minimization; it must be pure. Deterministic given config.seed.
    """
    config.validate()
    dim = problem.encoded_dim() if problem is not None else None
    rng = np.random.default_rng(config.seed)

    seeds = []
    if warm_start:
        seeds = [np.clip(np.asarray(w, dtype=float), 0.0, 1.0) for w in warm_start]
        dim = seeds[0].shape[0] if dim is None else dim
    if dim is None:
        raise ValidationError("either a problem or warm-start individuals required")
    fill = config.population_size - len(seeds)
    X = np.vstack(
        [np.array(seeds).reshape(len(seeds), dim), rng.uniform(size=(max(fill, 0), dim))]
    )[: config.population_size]

    nonfinite = 0
    population = _evaluate(X, acq_fn, problem)
    nonfinite += sum(not np.isfinite(ind.acq_values).all() for ind in population)
    rank_population(population)

    for _ in range(config.generations):
        children = _make_offspring(population, config, rng)
        offspring = _evaluate(children, acq_fn, problem)
        nonfinite += sum(not np.isfinite(ind.acq_values).all() for ind in offspring)
        population = _environmental_selection(population + offspring, config.population_size)

    feasible = [ind for ind in population if ind.feasible]
    if not feasible:
        raise SolverFailure(
            "no feasible individual in the final population "
            f"({nonfinite} non-finite acquisition evaluations)"
        )
    rank_population(population)
    front = [ind for ind in population if ind.feasible and ind.rank == 0]
    return SolverResult(
        front=front,
        population=population,
        diagnostics={"nonfinite_evaluations": nonfinite},
    )
