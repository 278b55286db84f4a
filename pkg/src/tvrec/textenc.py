"""Tokenization and tf-idf encoding of program text into sparse embeddings.

Embeddings are sparse vectors represented as ``{dimension_index: weight}``
dicts. The idf scheme is the smoothed form ``ln((1+N)/(1+df)) + 1`` with raw
term counts for tf and L2 normalization of non-zero vectors, which bounds
dot-product scores and avoids division by zero for unseen tokens.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import DataError

Embedding = dict[int, float]
Tokenizer = Callable[[str], list[str]]

# Hiragana, katakana, and the main CJK ideograph blocks: treated as unigrams;
# everything else tokenizes as lowercased alphanumeric runs.
_CJK = "぀-ヿ㐀-䶿一-鿿"
_TOKEN_RE = re.compile(f"[{_CJK}]|[^\\W_{_CJK}]+")


def tokenize(text: str) -> list[str]:
    """Default tokenizer: lowercased alphanumeric runs, CJK chars as unigrams."""
    return _TOKEN_RE.findall(text.lower())


TOKENIZERS: dict[str, Tokenizer] = {"default": tokenize}


@dataclass(frozen=True)
class Vocabulary:
    """Fitted token inventory: token -> (dimension index, idf weight)."""

    index: Mapping[str, int]
    idf: Mapping[str, float]
    tokenizer: str = "default"

    @property
    def size(self) -> int:
        return len(self.index)

    def to_dict(self) -> dict:
        tokens = sorted(self.index, key=self.index.__getitem__)
        return {
            "tokenizer": self.tokenizer,
            "tokens": [[t, self.index[t], self.idf[t]] for t in tokens],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        index = {t: i for t, i, _ in data["tokens"]}
        idf = {t: w for t, _, w in data["tokens"]}
        return cls(index=index, idf=idf, tokenizer=data.get("tokenizer", "default"))


def fit(
    corpus: Iterable[tuple[str, str]],
    *,
    min_df: int = 1,
    max_vocab: int | None = None,
    tokenizer: Tokenizer = tokenize,
) -> Vocabulary:
    """Fit idf weights over a corpus of ``(program_id, text)`` pairs.

    ``min_df`` drops rare tokens; ``max_vocab`` caps the vocabulary at the
    most frequent tokens (ties resolved alphabetically). Raises
    :class:`DataError` when the corpus is empty or yields no tokens at all.
    """
    df: Counter[str] = Counter()
    n_docs = 0
    for _, text in corpus:
        n_docs += 1
        df.update(set(tokenizer(text)))
    if n_docs == 0:
        raise DataError("cannot fit a vocabulary on an empty corpus")
    if not df:
        raise DataError("corpus contains no tokens; all documents are empty")

    kept = [t for t, c in df.items() if c >= min_df]
    if max_vocab is not None and len(kept) > max_vocab:
        kept.sort(key=lambda t: (-df[t], t))
        kept = kept[:max_vocab]
    kept.sort()
    index = {t: i for i, t in enumerate(kept)}
    idf = {t: math.log((1 + n_docs) / (1 + df[t])) + 1.0 for t in kept}
    name = next((n for n, f in TOKENIZERS.items() if f is tokenizer), "custom")
    return Vocabulary(index=index, idf=idf, tokenizer=name)


def encode(
    vocab: Vocabulary,
    text: str,
    *,
    l2_normalize: bool = True,
    tokenizer: Tokenizer = tokenize,
) -> Embedding:
    """Encode text as a sparse tf-idf vector; out-of-vocabulary tokens are
    ignored and a text with no known tokens encodes to the zero vector."""
    tf = Counter(tokenizer(text))
    vec: Embedding = {}
    index = vocab.index
    idf = vocab.idf
    for token, count in tf.items():
        i = index.get(token)
        if i is not None:
            vec[i] = count * idf[token]
    if vec and l2_normalize:
        inv = 1.0 / math.sqrt(sum(w * w for w in vec.values()))
        vec = {i: w * inv for i, w in vec.items()}
    return vec


def dot(a: Embedding, b: Embedding) -> float:
    """Sparse dot product."""
    if len(a) > len(b):
        a, b = b, a
    get = b.get
    return sum(w * get(i, 0.0) for i, w in a.items())


def l2_norm(vec: Embedding) -> float:
    return math.sqrt(sum(w * w for w in vec.values()))


def mean_embedding(vectors: Iterable[Embedding]) -> Embedding:
    """Arithmetic mean of sparse vectors (no re-normalization)."""
    acc: dict[int, float] = {}
    count = 0
    for vec in vectors:
        count += 1
        for i, w in vec.items():
            acc[i] = acc.get(i, 0.0) + w
    if count == 0:
        raise ValueError("mean of zero embeddings is undefined")
    inv = 1.0 / count
    return {i: w * inv for i, w in acc.items()}
