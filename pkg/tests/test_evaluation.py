import math

import numpy as np
import pytest

from fusionrec.corpus import split
from fusionrec.errors import DataError
from fusionrec.evaluation import (
    MetricsReport,
    evaluate_rankings,
    ndcg_at_k,
    rank_items,
    recall_at_k,
)
from fusionrec.estimator import PopularityRecommender
from synth import planted_training_data, uniform_interactions


def oracle_recall(ranked, relevant, k):
    hits = len([i for i in ranked[:k] if i in relevant])
    return hits / len(relevant)


def oracle_ndcg(ranked, relevant, k):
    dcg = 0.0
    for position, item in enumerate(ranked[:k], start=1):
        if item in relevant:
            dcg += 1.0 / math.log2(position + 1)
    ideal = sum(1.0 / math.log2(p + 1) for p in range(1, min(k, len(relevant)) + 1))
    return dcg / ideal


class TestRankItems:
    def test_plain_sort(self):
        top = rank_items(np.array([0.1, 0.9, 0.5]), (), 2)
        assert top.tolist() == [1, 2]

    def test_mask_excludes(self):
        top = rank_items(np.array([0.1, 0.9, 0.5]), (1,), 2)
        assert top.tolist() == [2, 0]

    def test_equal_scores_tie_break_low_index(self):
        top = rank_items(np.ones(6), (), 3)
        assert top.tolist() == [0, 1, 2]

    def test_k_beyond_unmasked_warns_and_truncates(self):
        with pytest.warns(UserWarning, match="unmasked"):
            top = rank_items(np.array([0.5, 0.2, 0.9]), (2,), 5)
        assert top.tolist() == [0, 1]


class TestRecall:
    def test_full_hit(self):
        assert recall_at_k(np.array([0, 1]), {1}, 2) == 1.0

    def test_partial(self):
        assert recall_at_k(np.array([1, 0]), {1, 2, 3}, 2) == pytest.approx(1 / 3)

    def test_zero(self):
        assert recall_at_k(np.array([4, 5]), {1}, 2) == 0.0


class TestNdcg:
    def test_rank_one(self):
        assert ndcg_at_k(np.array([3, 9]), {3}, 2) == pytest.approx(1.0)

    def test_rank_two(self):
        expected = 1.0 / math.log2(3)
        assert ndcg_at_k(np.array([9, 3]), {3}, 2) == pytest.approx(expected, abs=1e-4)

    def test_two_relevant_ideal(self):
        assert ndcg_at_k(np.array([3, 9]), {3, 9}, 2) == pytest.approx(1.0)


class TestMetricOracleEquivalence:
    def test_random_instances_match_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            n = int(rng.integers(5, 200))
            scores = rng.normal(size=n)
            relevant = set(int(i) for i in rng.choice(n, size=rng.integers(1, 5), replace=False))
            k = int(rng.integers(1, min(20, n) + 1))
            top = rank_items(scores, (), k)
            ranked = top.tolist()
            assert recall_at_k(top, relevant, k) == oracle_recall(ranked, relevant, k)
            assert ndcg_at_k(top, relevant, k) == pytest.approx(
                oracle_ndcg(ranked, relevant, k), abs=1e-12
            )


class TestEvaluateRankings:
    def test_perfect_oracle_scorer(self):
        data = planted_training_data(n_users=20, n_items=30, n_blocks=5,
                                     per_user=6, seed=1)
        bundle = data.bundle
        test_items, _ = bundle.test.neighbor_lists()

        def perfect(u):
            scores = np.zeros(bundle.n_items)
            scores[test_items[u]] = 1.0
            return scores

        report = evaluate_rankings(perfect, bundle, ks=(10,), part="test")
        for u in range(bundle.n_users):
            rel = len(test_items[u])
            if rel:
                assert report.recall[10] == pytest.approx(1.0)

    def test_users_without_test_items_excluded(self):
        data = planted_training_data(n_users=12, n_items=18, n_blocks=6,
                                     per_user=3, seed=2)
        # per_user=3 < 5, so the donate rule does not apply and test may be empty
        bundle = data.bundle
        test_items, _ = bundle.test.neighbor_lists()
        n_with_test = sum(1 for items in test_items if len(items))
        report = evaluate_rankings(
            lambda u: np.ones(bundle.n_items), bundle, ks=(5,), part="test"
        )
        assert report.n_users == n_with_test

    def test_mask_soundness(self):
        data = planted_training_data(n_users=20, n_items=30, n_blocks=5,
                                     per_user=6, seed=3)
        bundle = data.bundle
        train_items, _ = bundle.train.neighbor_lists()
        rng = np.random.default_rng(0)
        for u in range(bundle.n_users):
            top = rank_items(rng.normal(size=bundle.n_items), train_items[u], 10)
            assert not set(top.tolist()) & set(train_items[u].tolist())

    def test_recall_monotone_in_k(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            scores = rng.normal(size=40)
            relevant = set(int(i) for i in rng.choice(40, size=4, replace=False))
            values = []
            for k in (1, 5, 10, 20, 40):
                top = rank_items(scores, (), k)
                values.append(recall_at_k(top, relevant, k))
            assert all(a <= b + 1e-12 for a, b in zip(values, values[1:]))

    def test_popularity_matches_analytic_expectation_on_uniform_data(self):
        interactions = uniform_interactions(n_users=100, n_items=200, per_user=10, seed=7)
        bundle = split(interactions, seed=7)
        counts = bundle.train.item_degrees().astype(float)
        train_items, _ = bundle.train.neighbor_lists()
        report = evaluate_rankings(
            lambda u: counts, bundle, ks=(10,), part="test"
        )
        # expectation per user: K / (n_items - |train_u|); 1 test item each
        ps = np.array([10.0 / (200 - len(train_items[u])) for u in range(100)])
        expected = ps.mean()
        sigma = math.sqrt(float((ps * (1 - ps)).sum())) / 100
        assert abs(report.recall[10] - expected) <= 3 * sigma
        assert abs(expected - 10 / 200) < 0.005  # analytic value sits near K/|items|


class TestPopularityEstimator:
    def test_fit_predict_shapes_and_report(self):
        data = planted_training_data(n_users=20, n_items=30, n_blocks=5,
                                     per_user=6, seed=4)
        est = PopularityRecommender().fit(data)
        scores = est.predict([0, 3])
        assert scores.shape == (2, 30)
        assert np.array_equal(scores[0], scores[1])  # same ranking for everyone
        report = est.evaluate("test", ks=(10, 20))
        assert 0.0 <= report.recall[10] <= 1.0
        assert report.split_fingerprint == data.bundle.fingerprint()

    def test_unfitted_raises(self):
        est = PopularityRecommender()
        with pytest.raises(DataError, match="not fitted"):
            est.predict([0])

    def test_get_params_round_trip(self):
        est = PopularityRecommender()
        assert est.get_params() == {}


class TestReportSerialization:
    def test_round_trip(self):
        report = MetricsReport(recall={10: 0.5, 20: 0.75}, ndcg={10: 0.3, 20: 0.4},
                               n_users=42, config_fingerprint="abc",
                               split_fingerprint="def")
        again = MetricsReport.from_dict(report.to_dict())
        assert again == report

    def test_text_table_contains_all_columns(self):
        report = MetricsReport(recall={10: 0.5, 20: 0.75}, ndcg={10: 0.3, 20: 0.4},
                               n_users=42)
        table = report.to_text_table()
        assert "@10" in table and "@20" in table
        assert "0.5000" in table and "0.4000" in table
