import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optiloop import pareto
from optiloop.errors import DimensionError, ValidationError

from oracles import brute_crowding, brute_dominates, brute_fronts, hv_inclusion_exclusion


def random_points(rng, n, m, lo=0.0, hi=1.0):
    return rng.uniform(lo, hi, size=(n, m))


class TestDominates:
    def test_strict_improvement(self):
        assert pareto.dominates((1, 2), (2, 3))

    def test_incomparable(self):
        assert not pareto.dominates((1, 3), (2, 2))

    def test_equality_is_not_dominance(self):
        assert not pareto.dominates((1, 2), (1, 2))

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            pareto.dominates((1, 2), (1, 2, 3))

    @given(
        st.lists(st.floats(-10, 10), min_size=2, max_size=4),
        st.lists(st.floats(-10, 10), min_size=2, max_size=4),
        st.lists(st.floats(-10, 10), min_size=2, max_size=4),
    )
    def test_strict_partial_order(self, a, b, c):
        size = min(len(a), len(b), len(c))
        a, b, c = a[:size], b[:size], c[:size]
        # irreflexive
        assert not pareto.dominates(a, a)
        # asymmetric
        if pareto.dominates(a, b):
            assert not pareto.dominates(b, a)
        # transitive
        if pareto.dominates(a, b) and pareto.dominates(b, c):
            assert pareto.dominates(a, c)


class TestNonDominatedSort:
    def test_mixed_front_example(self, kernel_backend):
        fp = pareto.non_dominated_sort([(1, 1), (2, 2), (0, 3), (3, 0)])
        assert fp.fronts == ((0, 2, 3), (1,))

    def test_identical_points_single_front(self, kernel_backend):
        fp = pareto.non_dominated_sort([(1.0, 1.0)] * 4)
        assert fp.fronts == ((0, 1, 2, 3),)

    def test_chain_gives_singleton_fronts(self, kernel_backend):
        fp = pareto.non_dominated_sort([(1, 1), (2, 2), (3, 3)])
        assert fp.fronts == ((0,), (1,), (2,))

    def test_empty_input_rejected(self):
        with pytest.raises(ValidationError):
            pareto.non_dominated_sort(np.empty((0, 2)))

    def test_matches_brute_force_oracle(self, kernel_backend):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n = int(rng.integers(1, 50))
            m = int(rng.integers(2, 5))
            pts = random_points(rng, n, m)
            got = pareto.non_dominated_sort(pts)
            expected = brute_fronts(pts.tolist())
            assert [list(f) for f in got.fronts] == expected

    def test_front_partition_invariants(self, kernel_backend):
        rng = np.random.default_rng(11)
        pts = random_points(rng, 30, 3)
        fp = pareto.non_dominated_sort(pts)
        all_indices = sorted(i for front in fp.fronts for i in front)
        assert all_indices == list(range(30))
        for k in range(1, len(fp.fronts)):
            for i in fp.fronts[k]:
                assert any(
                    brute_dominates(pts[j], pts[i]) for j in fp.fronts[k - 1]
                )
                assert not any(
                    brute_dominates(pts[j], pts[i]) for j in fp.fronts[k]
                )


class TestCrowdingDistance:
    def test_two_points_both_infinite(self, kernel_backend):
        assert np.all(np.isinf(pareto.crowding_distance([(0, 1), (1, 0)])))

    def test_collinear_middle_value(self, kernel_backend):
        # oracle: (2-0)/2 per objective = 1.0, summed over both objectives
        dist = pareto.crowding_distance([(0, 2), (1, 1), (2, 0)])
        expected = brute_crowding([(0, 2), (1, 1), (2, 0)])
        assert math.isinf(dist[0]) and math.isinf(dist[2])
        assert dist[1] == pytest.approx(expected[1]) == pytest.approx(2.0)

    def test_degenerate_objective_contributes_zero(self, kernel_backend):
        dist = pareto.crowding_distance([(0, 5), (1, 5), (2, 5)])
        assert math.isinf(dist[0]) and math.isinf(dist[2])
        assert dist[1] == pytest.approx(1.0)  # only the first objective counts

    def test_matches_oracle_on_random_fronts(self, kernel_backend):
        rng = np.random.default_rng(3)
        for _ in range(40):
            n = int(rng.integers(1, 20))
            m = int(rng.integers(2, 4))
            pts = np.unique(random_points(rng, n, m), axis=0)
            got = pareto.crowding_distance(pts)
            expected = brute_crowding(pts.tolist())
            for g, e in zip(got, expected):
                if math.isinf(e):
                    assert math.isinf(g)
                else:
                    assert g == pytest.approx(e)

    def test_permutation_equivariance(self, kernel_backend):
        rng = np.random.default_rng(5)
        pts = np.unique(random_points(rng, 12, 2), axis=0)
        base = pareto.crowding_distance(pts)
        perm = rng.permutation(len(pts))
        permuted = pareto.crowding_distance(pts[perm])
        assert np.allclose(permuted, base[perm])

    def test_all_non_negative(self, kernel_backend):
        rng = np.random.default_rng(9)
        pts = random_points(rng, 15, 3)
        assert (pareto.crowding_distance(pts) >= 0).all()


class TestHypervolume:
    def test_unit_box(self, kernel_backend):
        assert pareto.hypervolume([(0, 0)], (1, 1)) == pytest.approx(1.0)

    def test_two_point_overlap(self, kernel_backend):
        # inclusion-exclusion: 2 + 2 - 1
        assert pareto.hypervolume([(1, 2), (2, 1)], (3, 3)) == pytest.approx(3.0)

    def test_duplicate_point_no_change(self, kernel_backend):
        a = pareto.hypervolume([(1, 2), (2, 1)], (3, 3))
        b = pareto.hypervolume([(1, 2), (2, 1), (1, 2)], (3, 3))
        assert a == pytest.approx(b)

    def test_dominated_point_contributes_nothing(self, kernel_backend):
        a = pareto.hypervolume([(1, 1)], (3, 3))
        b = pareto.hypervolume([(1, 1), (2, 2)], (3, 3))
        assert a == pytest.approx(b)

    def test_point_worse_than_ref_rejected(self):
        with pytest.raises(ValidationError):
            pareto.hypervolume([(1, 4)], (3, 3))

    @pytest.mark.parametrize("m", [2, 3])
    def test_exact_matches_inclusion_exclusion(self, kernel_backend, m):
        rng = np.random.default_rng(17 + m)
        ref = np.full(m, 1.0)
        for _ in range(50):
            n = int(rng.integers(1, 6))
            pts = random_points(rng, n, m, lo=0.0, hi=0.999)
            expected = hv_inclusion_exclusion(pts.tolist(), ref.tolist())
            assert pareto.hypervolume(pts, ref) == pytest.approx(
                expected, abs=1e-9
            )

    def test_exact_2d_within_monte_carlo_error(self, kernel_backend):
        rng = np.random.default_rng(23)
        pts = random_points(rng, 20, 2, hi=0.9)
        ref = np.array([1.0, 1.0])
        exact = pareto.hypervolume(pts, ref)
        mc, se = pareto.hypervolume_monte_carlo(pts, ref, n_samples=200_000, seed=1)
        assert abs(exact - mc) <= 3 * se

    def test_monotone_in_added_points(self, kernel_backend):
        rng = np.random.default_rng(29)
        ref = np.array([1.0, 1.0, 1.0])
        pts = random_points(rng, 8, 3, hi=0.95)
        base = pareto.hypervolume(pts, ref)
        extra = np.vstack([pts, rng.uniform(0, 0.95, size=3)])
        assert pareto.hypervolume(extra, ref) >= base - 1e-12

    def test_monte_carlo_seed_determinism(self):
        pts = [(0.1, 0.2, 0.3, 0.4), (0.4, 0.3, 0.2, 0.1)]
        ref = (1.0, 1.0, 1.0, 1.0)
        a = pareto.hypervolume_with_error(pts, ref, seed=5)
        b = pareto.hypervolume_with_error(pts, ref, seed=5)
        assert a == b
        est, se = a
        exact = hv_inclusion_exclusion(pts, ref)
        assert abs(est - exact) <= 3 * se


@settings(max_examples=40, deadline=None)
@given(
    st.integers(1, 12),
    st.integers(2, 3),
    st.integers(0, 2**31 - 1),
)
def test_front_zero_is_brute_force_set(n, m, seed):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, size=(n, m))
    fp = pareto.non_dominated_sort(pts)
    assert list(fp.fronts[0]) == brute_fronts(pts.tolist())[0]
