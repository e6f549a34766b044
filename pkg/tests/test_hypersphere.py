"""Hypersphere geometry, radius fitting optimality, and evaluation counts."""

import math

import numpy as np
import pytest

from nesphere.dictionary import load_dictionary, resolve
from nesphere.embeddings import EmbeddingSpace
from nesphere.errors import UsageError
from nesphere.hypersphere import (
    Hypersphere,
    Universe,
    build_universe,
    contains,
    euclidean_distance,
    evaluate,
    fit_center,
    fit_radius,
    fit_sphere,
    load_sphere,
    ne_likelihood,
    prf_from_counts,
    save_sphere,
    sweep_candidates,
)

import synthdata


def oracle_best_f1(center, universe):
    """Independent exhaustive sweep: every candidate threshold, recounted
    from scratch with boolean comparisons."""
    distances = np.array(
        [math.dist(list(v), list(center)) for _, v in universe.items]
    )
    labels = np.array([name in universe.positives for name, _ in universe.items])
    true_count = int(labels.sum())
    candidates = [0.0]
    distinct = sorted(set(distances.tolist()))
    for lo, hi in zip(distinct, distinct[1:]):
        candidates.append((lo + hi) / 2.0)
    candidates.append(float(np.nextafter(max(distinct), np.inf)))
    best_f1 = -1.0
    best_radius = None
    for radius in candidates:
        inside = distances < radius
        predicted = int(inside.sum())
        hits = int((inside & labels).sum())
        precision = hits / predicted if predicted > 0 else 0.0
        recall = hits / true_count if true_count > 0 else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        if f1 > best_f1:
            best_f1 = f1
            best_radius = radius
    return best_radius, best_f1


class TestDistance:
    def test_identical_vectors(self):
        v = np.array([0.3, -0.7])
        assert euclidean_distance(v, v) == 0.0

    def test_unit_square_diagonal(self):
        assert euclidean_distance(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == (
            pytest.approx(math.sqrt(2), abs=1e-12)
        )

    def test_3_4_5_triangle(self):
        assert euclidean_distance(
            np.array([1.0, 2.0, 3.0]), np.array([4.0, 6.0, 3.0])
        ) == pytest.approx(5.0, abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(UsageError):
            euclidean_distance(np.zeros(2), np.zeros(3))

    def test_matches_componentwise_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            w = rng.standard_normal(16)
            c = rng.standard_normal(16)
            oracle = math.sqrt(sum((float(a) - float(b)) ** 2 for a, b in zip(w, c)))
            assert abs(euclidean_distance(w, c) - oracle) < 1e-12

    def test_symmetry_and_triangle_inequality(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            a, b, c = rng.standard_normal((3, 8))
            ab = euclidean_distance(a, b)
            ba = euclidean_distance(b, a)
            assert abs(ab - ba) < 1e-12
            assert ab <= euclidean_distance(a, c) + euclidean_distance(c, b) + 1e-9


class TestFitCenter:
    def test_single_vector(self):
        v = np.array([2.0, -1.0])
        np.testing.assert_array_equal(fit_center([v]), v)

    def test_mean_of_two(self):
        got = fit_center([np.array([0.0, 0.0]), np.array([2.0, 2.0])])
        np.testing.assert_array_equal(got, [1.0, 1.0])

    def test_gaussian_sample_mean_bound(self):
        rng = np.random.default_rng(4)
        true_mean = np.array([1.0, -2.0, 0.5])
        sample = [true_mean + rng.standard_normal(3) for _ in range(1000)]
        center = fit_center(sample)
        brute = sum(sample) / len(sample)
        np.testing.assert_allclose(center, brute, atol=1e-12)
        assert np.all(np.abs(center - true_mean) < 5.0 / math.sqrt(1000))

    def test_median_option(self):
        vectors = [np.array([0.0]), np.array([1.0]), np.array([100.0])]
        np.testing.assert_array_equal(fit_center(vectors, method="median"), [1.0])

    def test_empty_rejected(self):
        with pytest.raises(UsageError):
            fit_center([])


class TestFitRadius:
    def _universe_from_distances(self, pos, neg):
        # 1-D points at the given distances from the origin.
        items = [(f"p{i}", np.array([d])) for i, d in enumerate(pos)]
        items += [(f"n{i}", np.array([d])) for i, d in enumerate(neg)]
        return Universe(items=items, positives={f"p{i}" for i in range(len(pos))})

    def test_separable_returns_midpoint(self):
        universe = self._universe_from_distances([0.1, 0.2, 0.3], [0.9, 1.0])
        radius, report = fit_radius(np.array([0.0]), universe)
        assert radius == pytest.approx(0.6)
        assert report.f1 == 1.0

    def test_overlapping_best_covers_all(self):
        universe = self._universe_from_distances([0.5], [0.1, 0.2])
        radius, report = fit_radius(np.array([0.0]), universe)
        assert report.f1 == pytest.approx(0.5)
        assert radius > 0.5  # must include the positive at distance 0.5

    def test_oracle_equality_on_random_universes(self):
        for seed in range(20):
            universe = synthdata.random_universe(seed, n=200, dim=6)
            center = fit_center(
                [v for name, v in universe.items if name in universe.positives]
            )
            radius, report = fit_radius(center, universe)
            _, oracle_f1 = oracle_best_f1(center, universe)
            assert report.f1 == oracle_f1

    def test_smallest_radius_among_ties(self):
        # Two separated clusters of positives: several thresholds reach F1 1.
        universe = self._universe_from_distances([0.1, 0.9], [2.0, 3.0])
        radius, report = fit_radius(np.array([0.0]), universe)
        assert report.f1 == 1.0
        # Smallest midpoint with F1=1 is (0.9+2.0)/2; 0.5 would miss one positive.
        assert radius == pytest.approx((0.9 + 2.0) / 2)

    def test_recall_is_monotone_over_sweep(self):
        universe = synthdata.random_universe(33, n=100, dim=4)
        center = fit_center(
            [v for name, v in universe.items if name in universe.positives]
        )
        distances = np.array(
            [euclidean_distance(v, center) for _, v in universe.items]
        )
        labels = universe.positive_mask()
        previous = -1.0
        for radius in sweep_candidates(distances):
            inside = distances < radius
            hits = int((inside & labels).sum())
            recall = hits / labels.sum()
            assert recall >= previous
            previous = recall

    def test_no_positives_rejected(self):
        universe = Universe(items=[("n0", np.zeros(2))], positives=set())
        with pytest.raises(UsageError):
            fit_radius(np.zeros(2), universe)


class TestContains:
    def test_center_inside(self):
        s = Hypersphere("Per", np.zeros(2), 0.5)
        assert contains(s, np.zeros(2))

    def test_boundary_excluded(self):
        s = Hypersphere("Per", np.zeros(2), 1.0)
        assert not contains(s, np.array([1.0, 0.0]))

    def test_zero_radius_contains_nothing(self):
        s = Hypersphere("Per", np.zeros(2), 0.0)
        assert not contains(s, np.zeros(2))

    def test_matches_likelihood_threshold(self):
        rng = np.random.default_rng(9)
        s = Hypersphere("Loc", rng.standard_normal(4), 1.3)
        for _ in range(100):
            w = rng.standard_normal(4)
            assert contains(s, w) == (ne_likelihood(s, w) < s.radius)


class TestLikelihood:
    def test_center_has_zero(self):
        s = Hypersphere("Per", np.ones(3), 1.0)
        assert ne_likelihood(s, np.ones(3)) == 0.0

    def test_closer_ranks_first(self):
        s = Hypersphere("Per", np.zeros(2), 1.0)
        near = ne_likelihood(s, np.array([0.1, 0.0]))
        far = ne_likelihood(s, np.array([0.5, 0.0]))
        assert near < far

    def test_ranking_matches_distance_oracle(self):
        rng = np.random.default_rng(12)
        s = Hypersphere("Org", rng.standard_normal(6), 1.0)
        words = [rng.standard_normal(6) for _ in range(50)]
        by_likelihood = sorted(range(50), key=lambda i: ne_likelihood(s, words[i]))
        by_oracle = sorted(
            range(50), key=lambda i: math.dist(list(words[i]), list(s.center))
        )
        assert by_likelihood == by_oracle


class TestEvaluate:
    def test_perfect_separation(self):
        universe, center = synthdata.separable_universe(2)
        radius, _ = fit_radius(center, universe)
        report = evaluate(Hypersphere("Per", center, radius), universe)
        assert report.f1 == 1.0
        assert report.predicted_count == report.true_count

    def test_formula_application(self):
        report = prf_from_counts(4, 5, 2)
        assert report.precision == pytest.approx(0.4)
        assert report.recall == pytest.approx(0.5)
        assert report.f1 == pytest.approx(2 * 0.4 * 0.5 / 0.9)

    def test_zero_radius_scores_zero(self):
        universe = synthdata.random_universe(5, n=50, dim=3)
        center = np.zeros(3)
        report = evaluate(Hypersphere("Per", center, 0.0), universe)
        assert report.predicted_count == 0
        assert report.precision == 0.0
        assert report.recall == 0.0
        assert report.f1 == 0.0

    def test_hits_bounded_by_counts(self):
        for seed in range(10):
            universe = synthdata.random_universe(seed, n=80, dim=4)
            sphere = Hypersphere("Per", np.zeros(4), 1.0 + 0.2 * seed)
            report = evaluate(sphere, universe)
            assert report.hit_count <= min(report.true_count, report.predicted_count)


class TestPipeline:
    def test_fit_sphere_on_separable_dictionary(self, write_text):
        rng = np.random.default_rng(21)
        center = np.full(4, 2.0)
        entries = {}
        lines = []
        for i in range(10):
            direction = rng.standard_normal(4)
            direction /= np.linalg.norm(direction)
            entries[f"ent{i}"] = center + 0.3 * float(rng.uniform(0.1, 1)) * direction
            lines.append(f"Per\tent{i}")
        for i in range(30):
            direction = rng.standard_normal(4)
            direction /= np.linalg.norm(direction)
            entries[f"bg{i}"] = center + (2.0 + float(rng.uniform(0, 3))) * direction
        space = EmbeddingSpace(dim=4, entries=entries)
        dictionary = load_dictionary(write_text("\n".join(lines) + "\n"))
        resolved = resolve(dictionary, space)
        sphere, report = fit_sphere(space, resolved, "Per")
        assert report.f1 == 1.0
        assert sphere.ne_type == "Per"

    def test_build_universe_adds_multiword_items(self):
        space = EmbeddingSpace(
            dim=2,
            entries={"a": np.array([1.0, 0.0]), "b": np.array([0.0, 1.0])},
        )
        from nesphere.dictionary import ResolvedEntities

        resolved = ResolvedEntities(
            by_type={
                "Per": [("a b", np.array([0.5, 0.5])), ("a", np.array([1.0, 0.0]))],
                "Loc": [],
                "Org": [],
            },
            oov_count={"Per": 0, "Loc": 0, "Org": 0},
        )
        universe = build_universe(space, resolved, ["Per"])
        names = [name for name, _ in universe.items]
        assert names == ["a", "b", "a b"]
        assert universe.positives == {"a", "a b"}

    def test_serialization_round_trip(self, tmp_path):
        sphere = Hypersphere("Org", np.array([0.1, -0.2, 0.30000000000000004]), 1.23456789)
        path = tmp_path / "s.json"
        save_sphere(sphere, str(path))
        reloaded = load_sphere(str(path))
        assert reloaded.ne_type == sphere.ne_type
        assert reloaded.radius == sphere.radius
        assert reloaded.center.tobytes() == sphere.center.tobytes()
