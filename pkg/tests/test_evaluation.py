import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from holex.datasets import TripleStore, generate_latent_graph
from holex.evaluation import (
    average_precision,
    evaluate_ap,
    evaluate_ranking,
    mrr_and_hits,
    rank_all,
    rank_from_scores,
    rank_triple,
)
from holex.models import ComplExModel, HolEModel, init_model


def toy():
    # K=1 HolE: score = r * e_s * e_o with r=1, e = [1, 2, 3]
    model = HolEModel(np.array([[1.0], [2.0], [3.0]]), np.array([[1.0]]), 1)
    store = TripleStore(["a", "b", "c"], ["r"], np.array([[0, 0, 2, 1]]), np.zeros((0, 4), int),
                        np.array([[0, 0, 1, 1]]))
    return model, store


def hand_rank(scores, true, exclude=()):
    """Enumerate competitors one by one."""
    higher = ties = 0
    for i, v in enumerate(scores):
        if i == true or i in exclude:
            continue
        higher += v > scores[true]
        ties += v == scores[true]
    return 1 + higher + -(-ties // 2)


class TestRankTriple:
    def test_best_candidate(self):
        model, store = toy()
        store.test = np.array([[0, 0, 2, 1]])
        assert rank_triple(model, (0, 0, 2), store, "raw", "object") == 1

    def test_filtered_below_raw(self):
        model, store = toy()
        # object candidates score 1, 2, 3; true o=1 scores 2; o=2 is a known train triple
        assert hand_rank([1, 2, 3], 1) == 2
        assert hand_rank([1, 2, 3], 1, exclude={2}) == 1
        assert rank_triple(model, (0, 0, 1), store, "raw", "object") == 2
        assert rank_triple(model, (0, 0, 1), store, "filtered", "object") == 1

    def test_all_tied(self):
        for n in (2, 3, 4, 7):
            model = ComplExModel(np.zeros((n, 2)), np.zeros((1, 2)), 1)
            store = TripleStore([str(i) for i in range(n)], ["r"], np.array([[0, 0, 1, 1]]))
            r = rank_triple(model, (0, 0, 1), store, "raw", "object")
            assert r == -(-(n + 1) // 2)

    def test_unknown_triple(self):
        model, store = toy()
        with pytest.raises(ValueError):
            rank_triple(model, (0, 2, 2), store)

    def test_bad_mode(self):
        model, store = toy()
        with pytest.raises(ValueError):
            rank_triple(model, (0, 0, 1), store, "strict")

    @given(st.lists(st.integers(-3, 3), min_size=2, max_size=12), st.data())
    @settings(max_examples=100, deadline=None)
    def test_rank_rule_matches_enumeration(self, scores, data):
        true = data.draw(st.integers(0, len(scores) - 1))
        excl = data.draw(st.sets(st.integers(0, len(scores) - 1)))
        assert rank_from_scores(scores, true, sorted(excl)) == hand_rank(scores, true, excl)

    def test_monotone_invariance(self, rng):
        scores = rng.normal(size=50)
        scores[7] = scores[3]
        for f in (np.exp, lambda x: 3 * x + 1, lambda x: x ** 3, np.arctan):
            for t in (3, 7, 20):
                assert rank_from_scores(f(scores), t, [1, 2]) == rank_from_scores(scores, t, [1, 2])


class TestBulkRanking:
    @pytest.mark.parametrize("kind", ["hole", "complex"])
    def test_matches_single_triple_path(self, kind):
        store = generate_latent_graph(40, 3, 300, seed=1)
        model = init_model(kind, store.n_entities, store.n_relations, 6, 2)
        triples = store.positives("test")[:15]
        bulk = rank_all(model, triples, store)
        for i, t in enumerate(triples):
            for side in ("subject", "object"):
                for mode in ("raw", "filtered"):
                    assert bulk[f"{side}_{mode}"][i] == rank_triple(model, t, store, mode, side)

    def test_filtered_at_least_raw(self):
        store = generate_latent_graph(60, 4, 800, seed=3)
        model = init_model("complex", store.n_entities, store.n_relations, 4, 0)
        rep = evaluate_ranking(model, store, "test")
        assert rep.mrr_filtered >= rep.mrr_raw
        assert rep.hits[1] <= rep.hits[3] <= rep.hits[10]
        assert np.all(rep.ranks["object_filtered"] <= rep.ranks["object_raw"])
        assert 0 < rep.mrr_raw <= 1


class TestMRR:
    def test_examples(self):
        out = mrr_and_hits([1, 2, 4])
        assert abs(out["mrr"] - 7 / 12) <= 1e-12
        assert abs(out["hits"][1] - 1 / 3) <= 1e-12
        assert abs(out["hits"][3] - 2 / 3) <= 1e-12
        out = mrr_and_hits([1, 1, 1])
        assert out["mrr"] == 1 and all(v == 1 for v in out["hits"].values())
        out = mrr_and_hits([10, 10])
        assert out["hits"][10] == 1 and out["hits"][3] == 0

    def test_singleton(self):
        for r in (1, 2, 7, 1000):
            assert mrr_and_hits([r])["mrr"] == 1 / r

    def test_empty(self):
        with pytest.raises(ValueError):
            mrr_and_hits([])


class TestAveragePrecision:
    def test_examples(self):
        assert abs(average_precision([0.9, 0.8, 0.7], [1, -1, 1]) - (1 + 2 / 3) / 2) <= 1e-12
        assert average_precision([3, 2, -1, -2], [1, 1, -1, -1]) == 1.0
        assert average_precision([0.1, 0.5, 0.2], [1, 1, 1]) == 1.0

    def test_no_positive(self):
        with pytest.raises(ValueError):
            average_precision([1, 2], [-1, -1])

    def test_ties_keep_input_order(self):
        assert average_precision([1, 1], [1, -1]) == 1.0
        assert average_precision([1, 1], [-1, 1]) == 0.5

    def test_matches_brute_force(self, rng):
        for _ in range(20):
            n = rng.integers(2, 30)
            scores = rng.normal(size=n)
            labels = rng.choice([-1, 1], size=n)
            labels[0] = 1
            ranked = sorted(range(n), key=lambda i: -scores[i])
            precisions = []
            hits = 0
            for pos, i in enumerate(ranked, 1):
                if labels[i] == 1:
                    hits += 1
                    precisions.append(hits / pos)
            assert average_precision(scores, labels) == pytest.approx(np.mean(precisions), abs=1e-12)

    @given(st.lists(st.tuples(st.integers(-50, 50), st.sampled_from([-1, 1])), min_size=1, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_range_and_monotone_invariance(self, pairs):
        scores = np.array([p[0] for p in pairs], dtype=float)
        labels = np.array([p[1] for p in pairs])
        if not np.any(labels == 1):
            labels[0] = 1
        ap = average_precision(scores, labels)
        assert 0 <= ap <= 1
        assert average_precision(2 * scores + 7, labels) == ap
        assert average_precision(np.tanh(scores / 100), labels) == pytest.approx(ap)

    def test_evaluate_ap_report(self):
        from holex.datasets import SyntheticSpec, generate_synthetic

        store = generate_synthetic(SyntheticSpec(n=8, seed=0))
        model = init_model("complex", 8, 2, 3, 0)
        rep = evaluate_ap(model, store, "test")
        assert set(rep.per_relation) <= {"symmetric", "antisymmetric"}
        assert 0 <= rep.overall <= 1 and rep.rank == 3
