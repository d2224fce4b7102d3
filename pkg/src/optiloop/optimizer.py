"""Pipeline composition: surrogate fit, acquisition, inner solve, selection.

``suggest`` produces the next batch of experiment designs from the set of
evaluated records. Algorithm presets wire the four stages:

    parego       GP on the augmented-Tchebycheff scalarization, expected
                 improvement, single-objective inner solve, incumbent-based
                 pick (one fresh simplex weight vector per iteration)
    tsemo_style  per-objective GPs, Thompson sampling on a fixed candidate
                 grid, multi-objective inner solve, greedy hypervolume-
                 improvement selection
    usemo_style  per-objective GPs, confidence-bound acquisition,
                 multi-objective inner solve, max-uncertainty selection
    custom       any combination via RunConfig overrides

All internal arithmetic minimizes; maximize objectives are negated once on
ingestion and un-negated once in user-facing output.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.stats import qmc

from . import acquisition as acq
from . import pareto, solver, surrogate
from .errors import ConditioningError, InfeasibleSpaceError, ValidationError
from .problem import Design, Problem, check_feasible, decode, encode
from .surrogate import FittedGP, Posterior

PRESETS = ("parego", "tsemo_style", "usemo_style", "custom")
EVAL_MODES = ("sequential", "sync_batch", "async_batch")
SELECTION_KINDS = ("hypervolume_improvement", "uncertainty", "random")
DUPLICATE_TOL = 1e-9
REF_MARGIN = 0.1


@dataclass(frozen=True)
class SelectionSpec:
    kind: str = "hypervolume_improvement"
    seed: int = 0  # random kind only

    def __post_init__(self):
        if self.kind not in SELECTION_KINDS:
            raise ValidationError(f"unknown selection kind {self.kind!r}")


@dataclass
class RunConfig:
    preset: str = "parego"
    batch_size: int = 1
    eval_mode: str = "sequential"
    budget: int = 40
    n_init: int = 10
    seed: int = 0
    # component overrides (custom preset, or tweaks on a named preset)
    acquisition: acq.AcquisitionSpec | None = None
    selection: SelectionSpec | None = None
    solver: solver.SolverConfig = field(default_factory=solver.SolverConfig)
    surrogate_noise: float | str = "fit"
    surrogate_restarts: int = surrogate.DEFAULT_RESTARTS
    ucb_beta: float = acq.DEFAULT_UCB_BETA
    rho: float = acq.DEFAULT_RHO
    ts_grid_size: int = acq.TS_GRID_SIZE
    failed_consume_budget: bool = True

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}")
        if self.eval_mode not in EVAL_MODES:
            raise ValidationError(f"unknown eval_mode {self.eval_mode!r}")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if self.eval_mode == "sequential" and self.batch_size != 1:
            raise ValidationError("sequential mode requires batch_size = 1")
        if self.n_init < 2:
            raise ValidationError("n_init must be >= 2")
        if self.budget < 0:
            raise ValidationError("budget must be non-negative")
        self.solver.validate()


def run_config_to_dict(config: RunConfig) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "preset": config.preset,
        "batch_size": config.batch_size,
        "eval_mode": config.eval_mode,
        "budget": config.budget,
        "n_init": config.n_init,
        "seed": config.seed,
        "surrogate_noise": config.surrogate_noise,
        "surrogate_restarts": config.surrogate_restarts,
        "ucb_beta": config.ucb_beta,
        "rho": config.rho,
        "ts_grid_size": config.ts_grid_size,
        "failed_consume_budget": config.failed_consume_budget,
        "solver": {
            "population_size": config.solver.population_size,
            "generations": config.solver.generations,
            "crossover_prob": config.solver.crossover_prob,
            "crossover_eta": config.solver.crossover_eta,
            "mutation_prob": config.solver.mutation_prob,
            "mutation_eta": config.solver.mutation_eta,
            "seed": config.solver.seed,
        },
    }
    if config.acquisition is not None:
        doc["acquisition"] = {
            "kind": config.acquisition.kind,
            "ucb_beta": config.acquisition.ucb_beta,
            "ts_seed": config.acquisition.ts_seed,
        }
    if config.selection is not None:
        doc["selection"] = {"kind": config.selection.kind, "seed": config.selection.seed}
    return doc


def run_config_from_dict(doc: Mapping[str, Any]) -> RunConfig:
    solver_doc = doc.get("solver", {}) or {}
    config = RunConfig(
        preset=doc.get("preset", "parego"),
        batch_size=int(doc.get("batch_size", 1)),
        eval_mode=doc.get("eval_mode", "sequential"),
        budget=int(doc.get("budget", 40)),
        n_init=int(doc.get("n_init", 10)),
        seed=int(doc.get("seed", 0)),
        surrogate_noise=doc.get("surrogate_noise", "fit"),
        surrogate_restarts=int(doc.get("surrogate_restarts", surrogate.DEFAULT_RESTARTS)),
        ucb_beta=float(doc.get("ucb_beta", acq.DEFAULT_UCB_BETA)),
        rho=float(doc.get("rho", acq.DEFAULT_RHO)),
        ts_grid_size=int(doc.get("ts_grid_size", acq.TS_GRID_SIZE)),
        failed_consume_budget=bool(doc.get("failed_consume_budget", True)),
        solver=solver.SolverConfig(
            population_size=int(solver_doc.get("population_size", 100)),
            generations=int(solver_doc.get("generations", 100)),
            crossover_prob=float(solver_doc.get("crossover_prob", 0.9)),
            crossover_eta=float(solver_doc.get("crossover_eta", 15.0)),
            mutation_prob=solver_doc.get("mutation_prob"),
            mutation_eta=float(solver_doc.get("mutation_eta", 20.0)),
            seed=int(solver_doc.get("seed", 0)),
        ),
    )
    if "acquisition" in doc and doc["acquisition"]:
        a = doc["acquisition"]
        config.acquisition = acq.AcquisitionSpec(
            kind=a["kind"],
            ucb_beta=a.get("ucb_beta"),
            ts_seed=a.get("ts_seed"),
        )
    if "selection" in doc and doc["selection"]:
        s = doc["selection"]
        config.selection = SelectionSpec(kind=s["kind"], seed=int(s.get("seed", 0)))
    return config


def preset_components(config: RunConfig) -> dict[str, str]:
    """Stage wiring for a config, used by tests and status displays."""
    config.validate()
    if config.preset == "parego":
        return {
            "surrogate": "gp",
            "acquisition": "tchebycheff_scalarized_ei",
            "solver": "nsga2_single_objective",
            "selection": "incumbent",
        }
    if config.preset == "tsemo_style":
        return {
            "surrogate": "gp",
            "acquisition": "thompson_sampling",
            "solver": "nsga2",
            "selection": "hypervolume_improvement",
        }
    if config.preset == "usemo_style":
        return {
            "surrogate": "gp",
            "acquisition": "upper_confidence_bound",
            "solver": "nsga2",
            "selection": "uncertainty",
        }
    return {
        "surrogate": "gp",
        "acquisition": (config.acquisition or acq.AcquisitionSpec("posterior_mean")).kind,
        "solver": "nsga2",
        "selection": (config.selection or SelectionSpec()).kind,
    }


# ---------------------------------------------------------------------------
# initial designs


def initial_designs(problem: Problem, n_init: int, seed: int) -> list[Design]:
    """Latin hypercube sample in encoded space, decoded to designs.

    Rows violating constraints are resampled; gives up after drawing 100x
    the requested count.
    """
    if n_init < 2:
        raise ValidationError("n_init must be >= 2")
    dim = problem.encoded_dim()
    designs: list[Design] = []
    drawn = 0
    round_index = 0
    while len(designs) < n_init and drawn < 100 * n_init:
        sampler = qmc.LatinHypercube(d=dim, seed=np.random.default_rng((seed, round_index)))
        for row in sampler.random(n=n_init):
            drawn += 1
            design = decode(problem, row)
            if check_feasible(problem, design, run_blackbox=False).feasible:
                designs.append(design)
            if len(designs) == n_init:
                break
        round_index += 1
    if len(designs) < n_init:
        raise InfeasibleSpaceError(
            f"could not find {n_init} feasible designs after {drawn} draws"
        )
    return designs


# ---------------------------------------------------------------------------
# observations


@dataclass
class Observations:
    """Evaluated data in matrix form (internal minimization convention)."""

    X: np.ndarray  # (n, d) canonical encodings
    Y: np.ndarray  # (n, m) minimized objective values
    Y_user: np.ndarray  # (n, m) user senses/units


def gather_observations(problem: Problem, records: Sequence) -> Observations:
    evaluated = [r for r in records if getattr(r, "status", None) == "evaluated"]
    if not evaluated:
        empty = np.empty((0, problem.encoded_dim()))
        return Observations(
            X=empty, Y=np.empty((0, problem.n_objectives)), Y_user=np.empty((0, problem.n_objectives))
        )
    X = np.array([encode(problem, r.design) for r in evaluated])
    Y_user = np.array([r.objectives for r in evaluated], dtype=float)
    Y = Y_user * problem.objective_senses()[None, :]
    return Observations(X=X, Y=Y, Y_user=Y_user)


def _iteration_seed(config_seed: int, iteration: int, stream: int) -> int:
    return int(
        np.random.SeedSequence([config_seed, iteration, stream]).generate_state(1)[0]
    )


def fit_models(
    problem: Problem,
    obs: Observations,
    config: RunConfig,
    iteration: int,
) -> list[FittedGP]:
    """One GP per objective on the minimized observations."""
    return [
        surrogate.fit(
            obs.X,
            obs.Y[:, j],
            seed=_iteration_seed(config.seed, iteration, 100 + j),
            noise=config.surrogate_noise,
            restarts=config.surrogate_restarts,
        )
        for j in range(problem.n_objectives)
    ]


# ---------------------------------------------------------------------------
# selection


@dataclass
class SelectionResult:
    indices: list[int]
    scores: list[float]
    shortfall: bool = False


def select(
    front: Sequence[solver.Individual],
    models: Sequence[FittedGP],
    spec: SelectionSpec,
    count: int,
    evaluated_front: np.ndarray,
    ref: np.ndarray | None = None,
) -> SelectionResult:
    """Pick ``count`` candidates from a solver front.

    hypervolume_improvement: greedy sequential argmax of the predicted
    hypervolume gain over evaluated_front (posterior means stand in for
    the unevaluated candidates). uncertainty: top summed posterior
    variance. random: seeded draw without replacement. Asking for more
    than the front holds returns everything with ``shortfall`` set.
    """
    if not front:
        raise ValidationError("selection needs a non-empty candidate front")
    n = len(front)
    take = min(count, n)
    shortfall = take < count
    X = np.array([ind.encoded for ind in front])

    if spec.kind == "random":
        rng = np.random.default_rng(spec.seed)
        indices = [int(i) for i in rng.choice(n, size=take, replace=False)]
        return SelectionResult(indices, [1.0 / n] * take, shortfall)

    means = np.column_stack([surrogate.predict_batch(m, X)[0] for m in models])
    variances = np.column_stack([surrogate.predict_batch(m, X)[1] for m in models])

    if spec.kind == "uncertainty":
        score = variances.sum(axis=1)
        order = np.argsort(-score, kind="stable")[:take]
        return SelectionResult(
            [int(i) for i in order], [float(score[i]) for i in order], shortfall
        )

    # greedy hypervolume improvement
    if ref is None:
        pool = np.vstack([evaluated_front, means]) if evaluated_front.size else means
        ref = pareto.reference_point(pool)
    base_points = [row for row in np.minimum(evaluated_front, ref)] if evaluated_front.size else []
    candidate_means = np.minimum(means, ref)  # beyond-ref candidates add nothing
    chosen: list[int] = []
    gains: list[float] = []
    base_hv = pareto.hypervolume(np.array(base_points), ref) if base_points else 0.0
    for _ in range(take):
        best_gain = -1.0
        best_idx = -1
        for i in range(n):
            if i in chosen:
                continue
            trial = base_points + [candidate_means[i]]
            gain = pareto.hypervolume(np.array(trial), ref) - base_hv
            if gain > best_gain + 1e-15:
                best_gain = gain
                best_idx = i
        chosen.append(best_idx)
        gains.append(max(best_gain, 0.0))
        base_points.append(candidate_means[best_idx])
        base_hv += max(best_gain, 0.0)
    return SelectionResult(chosen, gains, shortfall)


# ---------------------------------------------------------------------------
# suggestion


@dataclass
class SuggestionBatch:
    designs: list[Design]
    predicted: list[list[Posterior]]  # per design, per objective (user sense)
    rationale: list[float]
    shortfall: bool = False
    unverified_constraints: bool = False
    fallback: str | None = None


def _canonical_encodings(problem: Problem, front: Sequence[solver.Individual]):
    """Snap relaxed encodings through decode/encode; drop infeasible designs."""
    keep: list[int] = []
    encodings: list[np.ndarray] = []
    designs: list[Design] = []
    for i, ind in enumerate(front):
        design = decode(problem, ind.encoded)
        if not check_feasible(problem, design, run_blackbox=False).feasible:
            continue
        keep.append(i)
        designs.append(design)
        encodings.append(encode(problem, design))
    return keep, designs, encodings


def _dedupe(
    encodings: list[np.ndarray], against: np.ndarray, tol: float = DUPLICATE_TOL
) -> list[int]:
    """Indices whose encodings are farther than tol from every row of
    ``against`` and from earlier kept encodings."""
    kept: list[int] = []
    kept_rows: list[np.ndarray] = []
    for i, row in enumerate(encodings):
        pool = list(against) + kept_rows
        if any(np.linalg.norm(row - other) <= tol for other in pool):
            continue
        kept.append(i)
        kept_rows.append(row)
    return kept


def _posteriors_user_sense(
    problem: Problem, models: Sequence[FittedGP], x: np.ndarray
) -> list[Posterior]:
    senses = problem.objective_senses()
    out = []
    for j, model in enumerate(models):
        post = surrogate.predict(model, x)
        out.append(Posterior(mean=senses[j] * post.mean, variance=post.variance))
    return out


def _max_variance_fallback(
    problem: Problem,
    models: Sequence[FittedGP],
    obs: Observations,
    count: int,
    seed: int,
) -> list[np.ndarray]:
    """Space-filling candidates ranked by total posterior variance; used
    when every solver candidate duplicates an evaluated design."""
    dim = problem.encoded_dim()
    sampler = qmc.LatinHypercube(d=dim, seed=np.random.default_rng(seed))
    grid = sampler.random(n=max(512, 16 * count))
    keep = []
    for row in grid:
        design = decode(problem, row)
        if not check_feasible(problem, design, run_blackbox=False).feasible:
            continue
        keep.append(encode(problem, design))
    if not keep:
        raise InfeasibleSpaceError("no feasible fallback candidates found")
    X = np.array(keep)
    variance = np.zeros(X.shape[0])
    for model in models:
        variance += surrogate.predict_batch(model, X)[1]
    dedup = _dedupe([row for row in X], obs.X)
    order = sorted(dedup, key=lambda i: -variance[i])
    return [X[i] for i in order[:count]]


def suggest(
    problem: Problem,
    records: Sequence,
    config: RunConfig,
    count: int,
    iteration: int | None = None,
) -> SuggestionBatch:
    """Produce the next ``count`` designs to evaluate.

    Deterministic in (records, config, count, iteration); the iteration
    index defaults to one past the largest iteration seen in the records.
    With fewer than two evaluated records this falls back to a Latin
    hypercube sample.
    """
    config.validate()
    if count < 1:
        raise ValidationError("count must be >= 1")
    obs = gather_observations(problem, records)
    if iteration is None:
        iteration = (
            max((getattr(r, "iteration", 0) for r in records), default=0) + 1
            if records
            else 0
        )
    if obs.X.shape[0] < 2:
        designs = initial_designs(
            problem, max(count, 2), seed=_iteration_seed(config.seed, iteration, 0)
        )[:count]
        return SuggestionBatch(
            designs=designs,
            predicted=[[] for _ in designs],
            rationale=[0.0] * len(designs),
            fallback="initial_designs",
            unverified_constraints=any(
                c.form == "blackbox" for c in problem.constraints
            ),
        )

    try:
        models = fit_models(problem, obs, config, iteration)
    except ConditioningError as exc:
        raise ConditioningError(
            f"{exc}; consider selection kind 'random' or wider surrogate noise "
            "for this iteration"
        ) from exc
    m = problem.n_objectives
    solver_config = replace(
        config.solver, seed=_iteration_seed(config.seed, iteration, 1)
    )

    spec: SelectionSpec
    if config.preset == "parego":
        weights = acq.simplex_weights(
            m, seed=_iteration_seed(config.seed, iteration, 2), rho=config.rho
        )
        Yn = acq.normalize_objectives(obs.Y)
        scalar_targets = np.array([acq.tchebycheff(y, weights) for y in Yn])
        scalar_model = surrogate.fit(
            obs.X,
            scalar_targets,
            seed=_iteration_seed(config.seed, iteration, 3),
            noise=config.surrogate_noise,
            restarts=config.surrogate_restarts,
        )
        incumbent = float(scalar_targets.min())

        def acq_fn(X):
            mean, var = surrogate.predict_batch(scalar_model, X)
            sigma = np.sqrt(var)
            improvement = incumbent - mean
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.where(sigma > 0, improvement / sigma, 0.0)
            from scipy.stats import norm

            ei = np.where(
                sigma > 0,
                sigma * (z * norm.cdf(z) + norm.pdf(z)),
                np.maximum(improvement, 0.0),
            )
            return -ei[:, None]

        spec = SelectionSpec(kind="uncertainty")  # placeholder, parego picks by EI
    elif config.preset == "tsemo_style":
        sample = acq.draw_thompson_sample(
            models,
            dim=problem.encoded_dim(),
            seed=_iteration_seed(config.seed, iteration, 2),
            grid_size=config.ts_grid_size,
        )
        context = acq.AcquisitionContext(thompson=sample)
        aspec = acq.AcquisitionSpec(
            kind="thompson_sampling",
            ts_seed=_iteration_seed(config.seed, iteration, 2),
        )

        def acq_fn(X):
            return acq.evaluate_acquisition(aspec, models, X, context)

        spec = config.selection or SelectionSpec(kind="hypervolume_improvement")
    elif config.preset == "usemo_style":
        aspec = config.acquisition or acq.AcquisitionSpec(
            kind="upper_confidence_bound", ucb_beta=config.ucb_beta
        )
        context = acq.AcquisitionContext()

        def acq_fn(X):
            return acq.evaluate_acquisition(aspec, models, X, context)

        spec = config.selection or SelectionSpec(kind="uncertainty")
    else:  # custom
        aspec = config.acquisition or acq.AcquisitionSpec(kind="posterior_mean")
        incumbent_best = obs.Y.min(axis=0)
        context = acq.AcquisitionContext(incumbent_best=incumbent_best)
        if aspec.kind == "thompson_sampling":
            context.thompson = acq.draw_thompson_sample(
                models,
                dim=problem.encoded_dim(),
                seed=aspec.ts_seed or 0,
                grid_size=config.ts_grid_size,
            )

        def acq_fn(X):
            return acq.evaluate_acquisition(aspec, models, X, context)

        spec = config.selection or SelectionSpec()

    warm = [row for row in obs.X]
    result = solver.solve(acq_fn, problem, solver_config, warm_start=warm)

    keep, designs, encodings = _canonical_encodings(problem, result.front)
    fresh = _dedupe(encodings, obs.X)
    fallback = None
    if not fresh:
        fallback = "max_variance"
        chosen_encodings = _max_variance_fallback(
            problem, models, obs, count, seed=_iteration_seed(config.seed, iteration, 4)
        )
        chosen_designs = [decode(problem, x) for x in chosen_encodings]
        rationale = [0.0] * len(chosen_designs)
        shortfall = len(chosen_designs) < count
    else:
        front = [result.front[keep[i]] for i in fresh]
        candidate_designs = [designs[i] for i in fresh]
        candidate_encodings = [encodings[i] for i in fresh]
        if config.preset == "parego":
            order = sorted(
                range(len(front)), key=lambda i: float(front[i].acq_values[0])
            )
            take = min(count, len(order))
            picked = order[:take]
            rationale = [-float(front[i].acq_values[0]) for i in picked]
            shortfall = take < count
        else:
            evaluated_front = obs.Y[pareto.non_dominated_indices(obs.Y)]
            ref = pareto.reference_point(obs.Y)
            sel = select(front, models, spec, count, evaluated_front, ref=ref)
            picked = sel.indices
            rationale = sel.scores
            shortfall = sel.shortfall
        chosen_designs = [candidate_designs[i] for i in picked]
        chosen_encodings = [candidate_encodings[i] for i in picked]

    predicted = [
        _posteriors_user_sense(problem, models, x) for x in chosen_encodings
    ]
    return SuggestionBatch(
        designs=chosen_designs,
        predicted=predicted,
        rationale=rationale,
        shortfall=shortfall,
        unverified_constraints=any(c.form == "blackbox" for c in problem.constraints),
        fallback=fallback,
    )


def predict_design(
    models: Sequence[FittedGP], problem: Problem, design: Design
) -> list[Posterior]:
    """Posterior per objective for an arbitrary design, user senses/units."""
    if not models:
        raise ValidationError("no fitted models available yet")
    x = encode(problem, design)
    return _posteriors_user_sense(problem, models, x)
