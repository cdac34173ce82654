from collections import Counter

import numpy as np
import pytest

from warmdiff.bigram import BigramModel, load_corpus


def test_fit_counts_match_independent_counter():
    seqs = [[0, 1, 0, 1, 0, 1, 0, 1], [2, 0, 1]]
    model = BigramModel.fit(seqs, 3)
    pairs = Counter()
    occurrences = Counter()
    for s in seqs:
        occurrences.update(s)
        pairs.update(zip(s, s[1:]))
    for a in range(3):
        for b in range(3):
            assert model.counts[a, b] == pairs[(a, b)]
        assert model.token_counts[a] == occurrences[a]


def test_smoothed_next_probs_match_hand_formula():
    model = BigramModel.fit([[0, 1, 0, 1, 0, 1, 0, 1]], 2)
    # transitions: 0->1 four times, 1->0 three times
    assert np.allclose(model.next_probs(0), [(0 + 1) / (4 + 2), (4 + 1) / (4 + 2)])
    assert np.allclose(model.prev_probs(0), [(0 + 1) / (3 + 2), (3 + 1) / (3 + 2)])
    assert np.allclose(model.unigram(), [(4 + 1) / (8 + 2), (4 + 1) / (8 + 2)])


def test_unfitted_model_rejected():
    with pytest.raises(ValueError):
        BigramModel.fit([], 3)
    with pytest.raises(ValueError):
        BigramModel(3, np.zeros((3, 3)), np.zeros(3))


def test_out_of_range_corpus_token_rejected():
    with pytest.raises(ValueError):
        BigramModel.fit([[0, 5]], 3)


def test_distributions_are_normalized():
    model = BigramModel.fit([[0, 2, 1, 1, 0]], 3)
    for a in range(3):
        assert abs(model.next_probs(a).sum() - 1.0) < 1e-12
        assert abs(model.prev_probs(a).sum() - 1.0) < 1e-12
    assert abs(model.unigram().sum() - 1.0) < 1e-12


def test_load_corpus_roundtrip(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("0 1 2\n\n3 4\n", encoding="utf-8")
    assert load_corpus(str(path)) == [[0, 1, 2], [3, 4]]


def test_load_corpus_rejects_garbage(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("0 one 2\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_corpus(str(path))


def test_load_corpus_rejects_empty(tmp_path):
    path = tmp_path / "corpus.txt"
    path.write_text("\n\n", encoding="utf-8")
    with pytest.raises(ValueError):
        load_corpus(str(path))
