"""Okapi BM25 over chunks, with an inverted index built once per corpus."""

from __future__ import annotations

import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable

from .textseg import Chunk

_TOKEN = re.compile(r"[^\W_]+")

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75


def tokenize(text: str, stopwords: Iterable[str] = (), stem: bool = False) -> list[str]:
    """Lowercase and split on anything that is not a letter or digit."""
    toks = _TOKEN.findall(text.lower())
    if stopwords:
        stop = set(stopwords)
        toks = [t for t in toks if t not in stop]
    if stem:
        toks = [_light_stem(t) for t in toks]
    return toks


def _light_stem(tok: str) -> str:
    for suf in ("ing", "ed", "es", "s"):
        if len(tok) > len(suf) + 2 and tok.endswith(suf):
            return tok[: -len(suf)]
    return tok


def idf(n_docs: int, df: int) -> float:
    # +1 inside the log keeps idf positive for terms present in over half the corpus
    return math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))


@dataclass(frozen=True)
class ScoredChunk:
    chunk: Chunk
    score: float


@dataclass
class Bm25Index:
    chunks: list[Chunk]
    doc_freq: dict[str, int]
    doc_len: list[int]
    avg_len: float
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B
    stopwords: frozenset[str] = frozenset()
    stem: bool = False
    postings: dict[str, list[tuple[int, int]]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.chunks)

    def tokens(self, text: str) -> list[str]:
        return tokenize(text, self.stopwords, self.stem)

    def scores(self, query: str) -> list[float]:
        """Score of every chunk, in corpus order."""
        n = len(self.chunks)
        out = [0.0] * n
        if not n:
            return out
        for term in self.tokens(query):
            plist = self.postings.get(term)
            if not plist:
                continue
            w = idf(n, self.doc_freq[term])
            for pos, tf in plist:
                norm = self.k1 * (1.0 - self.b + self.b * self.doc_len[pos] / self.avg_len)
                out[pos] += w * tf * (self.k1 + 1.0) / (tf + norm)
        return out


def build_index(
    chunks: list[Chunk],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
    stopwords: Iterable[str] = (),
    stem: bool = False,
) -> Bm25Index:
    if k1 < 0:
        raise ValueError("k1 must be >= 0")
    if not 0.0 <= b <= 1.0:
        raise ValueError("b must lie in [0, 1]")
    stop = frozenset(stopwords)
    doc_freq: dict[str, int] = defaultdict(int)
    postings: dict[str, list[tuple[int, int]]] = defaultdict(list)
    doc_len = []
    for pos, chunk in enumerate(chunks):
        toks = tokenize(chunk.text, stop, stem)
        doc_len.append(len(toks))
        for term, tf in Counter(toks).items():
            doc_freq[term] += 1
            postings[term].append((pos, tf))
    avg_len = sum(doc_len) / len(doc_len) if doc_len else 0.0
    if chunks and avg_len == 0.0:
        # every chunk is token-free; any positive value avoids 0/0 and no term can match
        avg_len = 1.0
    return Bm25Index(
        chunks=list(chunks),
        doc_freq=dict(doc_freq),
        doc_len=doc_len,
        avg_len=avg_len,
        k1=k1,
        b=b,
        stopwords=stop,
        stem=stem,
        postings=dict(postings),
    )


def top_k(index: Bm25Index, query: str, k: int) -> list[ScoredChunk]:
    """Best ``k`` chunks by score; ties go to the lower chunk index, then id."""
    if k < 0:
        raise ValueError("k must be >= 0")
    scores = index.scores(query)
    order = sorted(
        range(len(index.chunks)),
        key=lambda p: (-scores[p], index.chunks[p].index, index.chunks[p].id),
    )
    return [ScoredChunk(index.chunks[p], scores[p]) for p in order[:k]]
