from dataclasses import dataclass, field

import numpy as np
import pytest

from optiloop import acquisition as acq
from optiloop import evaluators, optimizer, pareto, surrogate
from optiloop.errors import InfeasibleSpaceError, ValidationError
from optiloop.optimizer import (
    RunConfig,
    SelectionSpec,
    initial_designs,
    predict_design,
    preset_components,
    select,
    suggest,
)
from optiloop.problem import (
    ConstraintSpec,
    ObjectiveSpec,
    Problem,
    VariableSpec,
    encode,
)
from optiloop.solver import Individual, SolverConfig

from oracles import hv_inclusion_exclusion


@dataclass
class Rec:
    design: dict
    objectives: list | None
    status: str = "evaluated"
    iteration: int = 0


def one_d_problem():
    return Problem(
        variables=(VariableSpec("x", "continuous", bounds=(0.0, 1.0)),),
        objectives=(ObjectiveSpec("f1"), ObjectiveSpec("f2")),
    )


def fast_config(preset="parego", **kwargs):
    return RunConfig(
        preset=preset,
        solver=SolverConfig(population_size=20, generations=10, seed=0),
        surrogate_restarts=2,
        ts_grid_size=128,
        **kwargs,
    )


def zdt1_records(n=10, seed=0, dim=6):
    problem = evaluators.builtin_problem("zdt1", dim=dim)
    designs = initial_designs(problem, n, seed=seed)
    records = [
        Rec(design=d, objectives=evaluators.evaluate("zdt1", d), iteration=0)
        for d in designs
    ]
    return problem, records


class TestInitialDesigns:
    def test_quartile_stratification(self):
        designs = initial_designs(one_d_problem(), 4, seed=0)
        xs = sorted(d["x"] for d in designs)
        for i, x in enumerate(xs):
            assert i / 4 <= x < (i + 1) / 4

    def test_seed_determinism(self):
        assert initial_designs(one_d_problem(), 5, seed=3) == initial_designs(
            one_d_problem(), 5, seed=3
        )

    def test_constraint_respected(self):
        p = Problem(
            variables=(VariableSpec("x", "continuous", bounds=(0.0, 1.0)),),
            constraints=(
                ConstraintSpec("half", "linear", coefficients=(1.0,), offset=-0.5),
            ),
            objectives=(ObjectiveSpec("f1"), ObjectiveSpec("f2")),
        )
        designs = initial_designs(p, 8, seed=1)
        assert len(designs) == 8
        assert all(d["x"] <= 0.5 for d in designs)

    def test_infeasible_space_errors(self):
        p = Problem(
            variables=(VariableSpec("x", "continuous", bounds=(0.0, 1.0)),),
            constraints=(
                ConstraintSpec("never", "linear", coefficients=(0.0,), offset=1.0),
            ),
            objectives=(ObjectiveSpec("f1"), ObjectiveSpec("f2")),
        )
        with pytest.raises(InfeasibleSpaceError):
            initial_designs(p, 4, seed=0)

    def test_minimum_count(self):
        with pytest.raises(ValidationError):
            initial_designs(one_d_problem(), 1, seed=0)


class TestPresetWiring:
    def test_wiring_table(self):
        expected = {
            "parego": {
                "surrogate": "gp",
                "acquisition": "tchebycheff_scalarized_ei",
                "solver": "nsga2_single_objective",
                "selection": "incumbent",
            },
            "tsemo_style": {
                "surrogate": "gp",
                "acquisition": "thompson_sampling",
                "solver": "nsga2",
                "selection": "hypervolume_improvement",
            },
            "usemo_style": {
                "surrogate": "gp",
                "acquisition": "upper_confidence_bound",
                "solver": "nsga2",
                "selection": "uncertainty",
            },
        }
        for preset, wiring in expected.items():
            assert preset_components(fast_config(preset)) == wiring

    def test_config_validation(self):
        with pytest.raises(ValidationError):
            RunConfig(preset="nope").validate()
        with pytest.raises(ValidationError):
            RunConfig(eval_mode="sequential", batch_size=3).validate()
        with pytest.raises(ValidationError):
            RunConfig(n_init=1).validate()

    def test_config_dict_round_trip(self):
        config = fast_config("tsemo_style", batch_size=4, eval_mode="async_batch")
        config.selection = SelectionSpec(kind="random", seed=7)
        doc = optimizer.run_config_to_dict(config)
        again = optimizer.run_config_from_dict(doc)
        assert optimizer.run_config_to_dict(again) == doc


def pinned_models(points):
    """Noise-free GPs whose predictions at the given encodings hit the
    given objective values (one model per objective)."""
    points = np.asarray(points, dtype=float)
    X = points[:, :1]
    models = []
    for j in range(1, points.shape[1]):
        models.append(surrogate.fit(X, points[:, j], seed=0, noise=0.0, restarts=2))
    return models


class TestSelect:
    def test_hvi_prefers_larger_box(self):
        # encoded 0.0 predicts (0,0); encoded 1.0 predicts (0.5,0.5)
        models = pinned_models([[0.0, 0.0, 0.0], [1.0, 0.5, 0.5]])
        front = [
            Individual(encoded=np.array([0.0]), acq_values=np.zeros(2)),
            Individual(encoded=np.array([1.0]), acq_values=np.zeros(2)),
        ]
        result = select(
            front,
            models,
            SelectionSpec(kind="hypervolume_improvement"),
            count=1,
            evaluated_front=np.empty((0, 2)),
            ref=np.array([1.0, 1.0]),
        )
        assert result.indices == [0]
        assert result.scores[0] == pytest.approx(1.0, abs=1e-3)

    def test_uncertainty_picks_widest(self):
        X = np.array([[0.0], [0.5], [1.0]])
        models = [
            surrogate.fit(X, np.array([0.0, 1.0, 0.0]), seed=0, noise=0.0, restarts=2)
            for _ in range(2)
        ]
        near = Individual(encoded=np.array([0.01]), acq_values=np.zeros(2))
        far = Individual(encoded=np.array([0.25]), acq_values=np.zeros(2))
        result = select(
            [near, far],
            models,
            SelectionSpec(kind="uncertainty"),
            count=1,
            evaluated_front=np.empty((0, 2)),
        )
        assert result.indices == [1]

    def test_random_seeded(self):
        models = pinned_models([[0.0, 0.0, 0.0], [1.0, 0.5, 0.5]])
        front = [
            Individual(encoded=np.array([x]), acq_values=np.zeros(2))
            for x in (0.0, 0.5, 1.0)
        ]
        a = select(front, models, SelectionSpec(kind="random", seed=5), 2, np.empty((0, 2)))
        b = select(front, models, SelectionSpec(kind="random", seed=5), 2, np.empty((0, 2)))
        assert a.indices == b.indices

    def test_shortfall_flag(self):
        models = pinned_models([[0.0, 0.0, 0.0], [1.0, 0.5, 0.5]])
        front = [Individual(encoded=np.array([0.0]), acq_values=np.zeros(2))]
        result = select(
            front, models, SelectionSpec(kind="random", seed=1), 3, np.empty((0, 2))
        )
        assert result.shortfall and len(result.indices) == 1

    def test_greedy_hvi_matches_exhaustive_oracle(self):
        # 10 candidates on the tradeoff line, predictions pinned by training
        xs = np.linspace(0, 1, 10)
        points = np.column_stack([xs, xs, 1.0 - xs])
        models = pinned_models(points)
        front = [
            Individual(encoded=np.array([x]), acq_values=np.zeros(2)) for x in xs
        ]
        evaluated = np.array([[0.8, 0.8]])
        ref = np.array([1.5, 1.5])
        result = select(
            front,
            models,
            SelectionSpec(kind="hypervolume_improvement"),
            count=3,
            evaluated_front=evaluated,
            ref=ref,
        )
        means = np.column_stack(
            [surrogate.predict_batch(m, xs[:, None])[0] for m in models]
        )
        chosen: list[int] = []
        base = [evaluated[0]]
        for _ in range(3):
            best_gain, best_idx = -1.0, -1
            base_hv = hv_inclusion_exclusion(base, ref)
            for i in range(10):
                if i in chosen:
                    continue
                gain = hv_inclusion_exclusion(base + [means[i]], ref) - base_hv
                if gain > best_gain + 1e-15:
                    best_gain, best_idx = gain, i
            chosen.append(best_idx)
            base.append(means[best_idx])
        assert result.indices == chosen

    def test_greedy_hvi_monotone_in_batch_size(self):
        xs = np.linspace(0, 1, 8)
        points = np.column_stack([xs, xs, 1.0 - xs])
        models = pinned_models(points)
        front = [
            Individual(encoded=np.array([x]), acq_values=np.zeros(2)) for x in xs
        ]
        evaluated = np.array([[0.9, 0.9]])
        ref = np.array([1.5, 1.5])
        means = np.column_stack(
            [surrogate.predict_batch(m, xs[:, None])[0] for m in models]
        )
        hv_prev = 0.0
        for count in (1, 2, 3, 4):
            result = select(
                front,
                models,
                SelectionSpec(kind="hypervolume_improvement"),
                count=count,
                evaluated_front=evaluated,
                ref=ref,
            )
            batch = np.vstack([evaluated, means[result.indices]])
            hv = pareto.hypervolume(np.minimum(batch, ref), ref)
            assert hv >= hv_prev - 1e-12
            hv_prev = hv


class TestSuggest:
    @pytest.mark.parametrize("preset", ["parego", "tsemo_style", "usemo_style"])
    def test_contract_on_zdt1(self, preset):
        problem, records = zdt1_records()
        batch = suggest(problem, records, fast_config(preset), count=1)
        assert len(batch.designs) == 1
        design = batch.designs[0]
        x = encode(problem, design)
        evaluated = np.array([encode(problem, r.design) for r in records])
        assert np.linalg.norm(evaluated - x, axis=1).min() > 1e-9
        for post in batch.predicted[0]:
            assert np.isfinite(post.mean) and np.isfinite(post.variance)

    def test_determinism(self):
        problem, records = zdt1_records()
        config = fast_config("tsemo_style")
        a = suggest(problem, records, config, count=2, iteration=1)
        b = suggest(problem, records, config, count=2, iteration=1)
        assert a.designs == b.designs
        assert a.rationale == b.rationale

    def test_falls_back_to_initial_designs(self):
        problem, records = zdt1_records(n=2)
        batch = suggest(problem, records[:1], fast_config(), count=3)
        assert batch.fallback == "initial_designs"
        assert len(batch.designs) == 3

    def test_never_duplicates_evaluated(self):
        problem, records = zdt1_records(n=8, dim=3)
        evaluated = np.array([encode(problem, r.design) for r in records])
        for seed in range(3):
            batch = suggest(problem, records, fast_config(seed=seed), count=2)
            for design in batch.designs:
                x = encode(problem, design)
                assert np.linalg.norm(evaluated - x, axis=1).min() > 1e-9

    def test_count_validation(self):
        problem, records = zdt1_records(n=4, dim=2)
        with pytest.raises(ValidationError):
            suggest(problem, records, fast_config(), count=0)


class TestPredictDesign:
    def test_interpolates_observed_values(self):
        problem, records = zdt1_records(n=8, dim=2)
        obs = optimizer.gather_observations(problem, records)
        config = fast_config(surrogate_noise=0.0)
        models = optimizer.fit_models(problem, obs, config, iteration=1)
        posts = predict_design(models, problem, records[0].design)
        for post, observed in zip(posts, records[0].objectives):
            assert post.mean == pytest.approx(observed, abs=1e-3)

    def test_maximize_sense_round_trip(self):
        problem = Problem(
            variables=(VariableSpec("x", "continuous", bounds=(0.0, 1.0)),),
            objectives=(
                ObjectiveSpec("cost", "minimize"),
                ObjectiveSpec("gain", "maximize"),
            ),
        )
        rng = np.random.default_rng(0)
        records = []
        for _ in range(8):
            x = float(rng.uniform())
            records.append(Rec(design={"x": x}, objectives=[x, 2.0 * x]))
        obs = optimizer.gather_observations(problem, records)
        models = optimizer.fit_models(
            problem, obs, fast_config(surrogate_noise=0.0), iteration=0
        )
        posts = predict_design(models, problem, records[3].design)
        assert posts[1].mean == pytest.approx(records[3].objectives[1], abs=1e-3)
        assert posts[1].mean > 0  # un-negated, user sense

    def test_requires_models(self):
        problem, records = zdt1_records(n=4, dim=2)
        with pytest.raises(ValidationError):
            predict_design([], problem, records[0].design)

    def test_invalid_design_rejected(self):
        problem, records = zdt1_records(n=4, dim=2)
        obs = optimizer.gather_observations(problem, records)
        models = optimizer.fit_models(problem, obs, fast_config(), iteration=0)
        with pytest.raises(Exception):
            predict_design(models, problem, {"x1": 5.0, "x2": 0.1})
