import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import dense_textrank
from skgkgc.summarize import (
    SentenceGraph,
    sentence_similarity,
    split_sentences,
    summarize,
    textrank_scores,
    top_sentences,
)

CLUSTER_TEXT = (
    "The river water flows past the old mill. "
    "Cats sleep all afternoon. "
    "Cold river water flows under the stone bridge. "
    "Taxes are due in April. "
    "The river water flows into the grey sea. "
    "Violins need fresh strings."
)


def random_graph(rng, m, density=0.6):
    w = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            if rng.random() < density:
                w[i, j] = w[j, i] = rng.uniform(0.05, 2.0)
    return SentenceGraph([[] for _ in range(m)], w, 0.85)


class TestSplit:
    def test_single(self):
        assert split_sentences("a small cut") == ["a small cut"]

    def test_three(self):
        assert split_sentences("A mark. A cut; a nick!") == ["A mark", "A cut", "a nick"]

    def test_empty(self):
        assert split_sentences("") == []

    def test_decimal_point_not_a_boundary(self):
        assert split_sentences("pi is 3.14 roughly. yes") == ["pi is 3.14 roughly", "yes"]


class TestSimilarity:
    def test_identical_four_tokens(self):
        a = ["w", "x", "y", "z"]
        assert sentence_similarity(a, list(a)) == pytest.approx(4 / (2 * math.log(4)), abs=1e-12)
        assert sentence_similarity(a, list(a)) == pytest.approx(1.4427, abs=1e-4)

    def test_disjoint(self):
        assert sentence_similarity(["a", "b"], ["c", "d"]) == 0

    def test_partial_overlap(self):
        assert sentence_similarity(["a", "b", "c"], ["b", "c", "d"]) == pytest.approx(0.9102, abs=1e-4)

    def test_short_sentence_fallback(self):
        assert sentence_similarity(["a"], ["a", "b", "c"]) == pytest.approx(1 / 2)
        assert sentence_similarity(["a"], ["a"]) == 1.0


class TestTextRank:
    def test_single_node(self):
        g = SentenceGraph([["a"]], np.zeros((1, 1)), 0.85)
        s = textrank_scores(g)
        assert s[0] == pytest.approx(0.15, abs=1e-15)
        s1 = textrank_scores(g, max_iter=1)
        assert s1[0] == pytest.approx(0.15, abs=1e-15)

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            textrank_scores(SentenceGraph([], np.zeros((0, 0))))

    def test_two_identical_sentences_equal(self):
        g = SentenceGraph.from_sentences(["the cat sat", "the cat sat"])
        s = textrank_scores(g)
        assert s[0] == s[1]

    def test_isolated_node_keeps_floor(self):
        w = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0.0]])
        s = textrank_scores(SentenceGraph([[]] * 3, w, 0.85))
        assert s[2] == pytest.approx(0.15)

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            g = random_graph(rng, int(rng.integers(1, 11)))
            ours = textrank_scores(g, tol=1e-12, max_iter=1000)
            ref = dense_textrank(g.weights.tolist(), 0.85, 1e-12, 1000)
            np.testing.assert_allclose(ours, ref, rtol=0, atol=1e-8)

    def test_scores_bounded_below(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            g = random_graph(rng, 8)
            tol = 1e-6
            assert np.all(textrank_scores(g, tol=tol) >= 0.15 - tol)

    def test_bit_identical_repeat(self):
        g = SentenceGraph.from_sentences(split_sentences(CLUSTER_TEXT))
        assert textrank_scores(g).tobytes() == textrank_scores(g).tobytes()

    @settings(max_examples=30, deadline=None)
    @given(st.integers(2, 9), st.randoms(use_true_random=False))
    def test_permutation_equivariant(self, m, rnd):
        rng = np.random.default_rng(rnd.randrange(2**32))
        g = random_graph(rng, m)
        perm = rng.permutation(m)
        gp = SentenceGraph(g.sentences, g.weights[np.ix_(perm, perm)], 0.85)
        s = textrank_scores(g, tol=1e-13, max_iter=2000)
        sp = textrank_scores(gp, tol=1e-13, max_iter=2000)
        np.testing.assert_allclose(sp, s[perm], atol=1e-9)


class TestSummarize:
    def test_fewer_sentences_than_n(self):
        assert summarize("First one. Second one", top_n=3) == "First one. Second one"

    def test_cluster_selected(self):
        sents = split_sentences(CLUSTER_TEXT)
        out = summarize(CLUSTER_TEXT)
        assert split_sentences(out) == [sents[0], sents[2], sents[4]]
        # the oracle agrees on the top three
        g = SentenceGraph.from_sentences(sents)
        ref = dense_textrank(g.weights.tolist(), 0.85, 1e-6, 100)
        assert top_sentences(ref, 3) == [0, 2, 4]

    def test_ties_prefer_earlier(self):
        assert top_sentences([1.0, 2.0, 1.0, 1.0], 2) == [0, 1]

    def test_output_in_document_order(self):
        text = "zeta word. alpha beta gamma. alpha beta delta. alpha beta. omega"
        out = split_sentences(summarize(text, top_n=2))
        src = split_sentences(text)
        assert [src.index(s) for s in out] == sorted(src.index(s) for s in out)

    def test_bad_top_n(self):
        with pytest.raises(ValueError):
            summarize("a. b", top_n=0)
