import math
import random

import pytest

from tvrec.errors import DataError
from tvrec.textenc import (
    Vocabulary,
    dot,
    encode,
    fit,
    l2_norm,
    mean_embedding,
    tokenize,
)

CORPUS = [("a", "news tokyo"), ("b", "news sports")]


def test_tokenize_lowercases_and_splits():
    assert tokenize("Tokyo News 2019") == ["tokyo", "news", "2019"]


def test_tokenize_empty():
    assert tokenize("") == []


def test_tokenize_deterministic():
    text = "Late Night MOVIE marathon 42"
    assert tokenize(text) == tokenize(text)


def test_tokenize_cjk_characters_are_unigrams():
    assert tokenize("東京news") == ["東", "京", "news"]


def test_tokenize_keeps_accented_word_runs():
    assert tokenize("Café Olé") == ["café", "olé"]


def test_idf_token_in_every_document():
    vocab = fit(CORPUS)
    assert vocab.idf["news"] == pytest.approx(1.0)
    assert min(vocab.idf.values()) == vocab.idf["news"]


def test_idf_token_in_half_the_documents():
    vocab = fit(CORPUS)
    assert vocab.idf["tokyo"] == pytest.approx(math.log(3 / 2) + 1, abs=1e-12)


def test_encode_weights_and_normalization():
    vocab = fit(CORPUS)
    emb = encode(vocab, "news tokyo")
    weights = {tok: emb[vocab.index[tok]] for tok in ("news", "tokyo")}
    assert weights["news"] == pytest.approx(0.580, abs=1e-3)
    assert weights["tokyo"] == pytest.approx(0.815, abs=1e-3)
    raw = encode(vocab, "news tokyo", l2_normalize=False)
    assert raw[vocab.index["news"]] == pytest.approx(1.0)
    assert raw[vocab.index["tokyo"]] == pytest.approx(1.4055, abs=1e-4)


def test_encode_empty_text_is_zero_vector():
    assert encode(fit(CORPUS), "") == {}


def test_encode_out_of_vocabulary_ignored():
    vocab = fit(CORPUS)
    assert encode(vocab, "quantum flux") == {}


def test_encode_deterministic():
    vocab = fit(CORPUS)
    assert encode(vocab, "news sports tokyo") == encode(vocab, "news sports tokyo")


def test_fit_empty_corpus_rejected():
    with pytest.raises(DataError):
        fit([])
    with pytest.raises(DataError):
        fit([("a", ""), ("b", "  ")])


def test_min_df_drops_rare_tokens():
    vocab = fit(CORPUS, min_df=2)
    assert set(vocab.index) == {"news"}


def test_max_vocab_keeps_most_frequent():
    vocab = fit(CORPUS, max_vocab=1)
    assert set(vocab.index) == {"news"}


def test_vocabulary_indices_are_a_bijection():
    vocab = fit([("a", "x y z"), ("b", "y z w"), ("c", "z w v")])
    assert sorted(vocab.index.values()) == list(range(vocab.size))


def test_nonzero_embeddings_have_unit_norm():
    rng = random.Random(2)
    words = [f"w{i}" for i in range(40)]
    corpus = [
        (f"d{i}", " ".join(rng.choices(words, k=rng.randint(1, 12)))) for i in range(60)
    ]
    vocab = fit(corpus)
    for _, text in corpus:
        emb = encode(vocab, text)
        if emb:
            assert abs(l2_norm(emb) - 1.0) <= 1e-9


def test_adding_a_document_recomputes_idf_per_formula():
    rng = random.Random(4)
    words = [f"w{i}" for i in range(10)]
    docs = [" ".join(rng.choices(words, k=5)) for _ in range(8)]
    for cut in range(1, len(docs)):
        base = [(str(i), d) for i, d in enumerate(docs[:cut])]
        grown = base + [("new", docs[cut])]
        v0, v1 = fit(base), fit(grown)
        n, df1 = cut + 1, {}
        for _, text in grown:
            for tok in set(tokenize(text)):
                df1[tok] = df1.get(tok, 0) + 1
        for tok in v0.index:
            assert v1.idf[tok] == pytest.approx(math.log((1 + n) / (1 + df1[tok])) + 1)


def test_vocabulary_json_round_trip():
    vocab = fit(CORPUS)
    clone = Vocabulary.from_dict(vocab.to_dict())
    assert clone.index == vocab.index
    assert clone.idf == vocab.idf
    assert encode(clone, "news tokyo") == encode(vocab, "news tokyo")


def test_dot_and_mean_helpers():
    a = {0: 1.0, 2: 2.0}
    b = {0: 0.5, 1: 3.0}
    assert dot(a, b) == pytest.approx(0.5)
    assert dot(b, a) == pytest.approx(0.5)
    mean = mean_embedding([a, b])
    assert mean == {0: 0.75, 2: 1.0, 1: 1.5}
    with pytest.raises(ValueError):
        mean_embedding([])
