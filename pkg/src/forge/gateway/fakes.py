"""Deterministic offline stand-ins for every external dependency.

Each fake is a pure function of its construction arguments (seed, tables)
and its call inputs, so golden outputs are stable across runs and platforms.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..bm25 import build_index, tokenize, top_k
from ..textseg import Chunk, collapse_whitespace, extract_main_text, split_sentences
from .types import (
    ClientError,
    EngineResult,
    ErrorKind,
    JudgeVerdict,
    Mention,
    SnippetVerdict,
    SNIPPET_MAX_WORDS,
    truncate_words,
)

SNAPSHOT_WORDS = 20
STOPWORDS = frozenset(
    "a an and are as at be by for from has he her his in is it its of on or she that the their "
    "this to was were which who with".split()
)


def _digest(*parts: Any) -> bytes:
    return hashlib.blake2b(json.dumps(parts, ensure_ascii=False).encode(), digest_size=16).digest()


def content_terms(text: str) -> list[str]:
    return [t for t in tokenize(text) if t not in STOPWORDS]


def term_overlap(query: str, doc: str) -> float:
    """Fraction of distinct query content terms that occur in ``doc``."""
    q = set(content_terms(query))
    if not q:
        return 0.0
    return len(q & set(content_terms(doc))) / len(q)


@dataclass
class FixtureCorpus:
    """A closed-world web: pages by url, an entity dictionary and engine tables."""

    pages: dict[str, str]
    titles: dict[str, str]
    entities: list[dict] = field(default_factory=list)
    queries: dict[str, list[str]] = field(default_factory=dict)
    empty_queries: list[str] = field(default_factory=list)

    @classmethod
    def load(cls, path: str | Path | None = None) -> "FixtureCorpus":
        if path is None:
            base = resources.files("forge") / "corpus"
            index = json.loads((base / "index.json").read_text(encoding="utf-8"))
            read = lambda rel: (base / rel).read_text(encoding="utf-8")  # noqa: E731
        else:
            base_p = Path(path)
            index = json.loads((base_p / "index.json").read_text(encoding="utf-8"))
            read = lambda rel: (base_p / rel).read_text(encoding="utf-8")  # noqa: E731
        pages = {p["url"]: read(p["file"]) for p in index["pages"]}
        titles = {p["url"]: p["title"] for p in index["pages"]}
        return cls(
            pages=pages,
            titles=titles,
            entities=index.get("entities", []),
            queries=index.get("queries", {}),
            empty_queries=index.get("empty_queries", []),
        )

    def text(self, url: str) -> str:
        return extract_main_text(self.pages[url])["text"]

    def url_for(self, name: str) -> str | None:
        for e in self.entities:
            if e["name"] == name:
                return e["url"]
        return None


def _query_key(query: str) -> str:
    return collapse_whitespace(query).lower()


def best_snapshot(query: str, text: str, max_words: int = SNAPSHOT_WORDS) -> str:
    sents = split_sentences(text)
    if not sents:
        return ""
    chunks = [Chunk(id=str(i), text=s, token_count=len(s.split()), source_url="", index=i) for i, s in enumerate(sents)]
    best = top_k(build_index(chunks), query, 1)[0].chunk.text
    return truncate_words(best, max_words)


class FakeEngine:
    """Search engine over a fixture corpus.

    Queries listed in the corpus table return those urls in order; queries
    listed as empty return nothing; anything else is ranked by BM25 over whole
    pages. Snapshots are the best-matching page sentence cut to 20 words.
    """

    def __init__(self, corpus: FixtureCorpus, name: str = "fixture", max_results: int = 10,
                 empty_queries: Iterable[str] = ()):
        self.corpus = corpus
        self.name = name
        self.max_results = max_results
        self._table = {_query_key(q): urls for q, urls in corpus.queries.items()}
        self._empty = {_query_key(q) for q in (*corpus.empty_queries, *empty_queries)}
        self._texts = {url: corpus.text(url) for url in sorted(corpus.pages)}
        docs = [
            Chunk(id=url, text=f"{corpus.titles[url]} {txt}", token_count=0, source_url=url, index=i)
            for i, (url, txt) in enumerate(self._texts.items())
        ]
        self._index = build_index(docs)

    def search(self, query: str, region_lang: str = "us-en") -> list[EngineResult]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        key = _query_key(query)
        if key in self._empty:
            return []
        if key in self._table:
            urls = self._table[key][: self.max_results]
        else:
            urls = [s.chunk.id for s in top_k(self._index, query, self.max_results) if s.score > 0]
        return [
            EngineResult(snapshot=best_snapshot(query, self._texts[u]), title=self.corpus.titles[u], url=u)
            for u in urls
        ]


class ScriptedEngine:
    """Engine replaying a fixed answer (results list or ClientError) per query."""

    def __init__(self, name: str, responses: Mapping[str, Any] | None = None, default: Any = ()):
        self.name = name
        self.responses = dict(responses or {})
        self.default = default
        self.calls = 0
        self._lock = threading.Lock()

    def search(self, query: str, region_lang: str = "us-en") -> list[EngineResult]:
        with self._lock:
            self.calls += 1
        out = self.responses.get(query, self.default)
        if isinstance(out, BaseException):
            raise out
        return list(out)


class FakeCrawler:
    """Closed-world crawler: fixture pages, with a configurable blocked set."""

    def __init__(self, pages: Mapping[str, str], blocked: Iterable[str] = ()):
        self.pages = dict(pages)
        self.blocked = frozenset(blocked)

    def crawl(self, url: str) -> str:
        if url in self.blocked:
            raise ClientError(ErrorKind.UNAVAILABLE, f"blocked: {url}")
        try:
            return self.pages[url]
        except KeyError:
            raise ClientError(ErrorKind.UNAVAILABLE, f"unknown url: {url}") from None


def choose_blocked(urls: Iterable[str], fraction: float, seed: int = 0) -> set[str]:
    """Deterministically pick ``round(fraction * n)`` urls to block."""
    pool = sorted(set(urls))
    n = round(fraction * len(pool))
    return set(random.Random(seed).sample(pool, n))


class HashingEmbedder:
    """Signed feature hashing of content terms into ``dim`` buckets, L2-normalized."""

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < 2:
            raise ValueError("dim must be >= 2")
        self.dim = dim
        self.seed = seed

    def _slot(self, term: str) -> tuple[int, float]:
        h = _digest(self.seed, term)
        return int.from_bytes(h[:8], "little") % self.dim, (1.0 if h[8] & 1 else -1.0)

    def embed_one(self, text: str) -> list[float]:
        vec = [0.0] * self.dim
        terms = content_terms(text) or ["\x00empty"]
        for term, tf in sorted(Counter(terms).items()):
            slot, sign = self._slot(term)
            vec[slot] += sign * tf
        norm = math.sqrt(sum(v * v for v in vec))
        if norm == 0.0:
            # colliding terms cancelled out exactly; fall back to the first term's slot
            slot, sign = self._slot(terms[0])
            vec = [0.0] * self.dim
            vec[slot] = sign
            norm = 1.0
        return [v / norm for v in vec]

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        return [self.embed_one(t) for t in texts]


def cosine(a: Sequence[float], b: Sequence[float]) -> float:
    return sum(x * y for x, y in zip(a, b))


class OverlapReranker:
    """Score = fraction of the query's distinct content terms present in the doc."""

    def rerank(self, query: str, docs: Sequence[str]) -> list[float]:
        return [term_overlap(query, d) for d in docs]


class ExtractiveSnippetWriter:
    """Extractive summary: best-overlapping sentences, kept in document order."""

    def __init__(self, max_words: int = SNIPPET_MAX_WORDS):
        self.max_words = min(max_words, SNIPPET_MAX_WORDS)

    def write_snippet(self, query: str, context: str) -> SnippetVerdict:
        sents = list(dict.fromkeys(split_sentences(context)))
        if not sents:
            return SnippetVerdict("", 0.0)
        q = set(content_terms(query))
        scored = [(len(q & set(content_terms(s))), i) for i, s in enumerate(sents)]
        if not any(score for score, _ in scored):
            picked = list(range(len(sents)))  # no overlap: lead summary
        else:
            picked = [i for score, i in sorted(scored, key=lambda t: (-t[0], t[1])) if score > 0]
        chosen: list[int] = []
        used = 0
        for i in picked:
            n = len(sents[i].split())
            if used + n > self.max_words:
                if not chosen:
                    chosen.append(i)
                    used = self.max_words
                continue
            chosen.append(i)
            used += n
        snippet = truncate_words(" ".join(sents[i] for i in sorted(chosen)), self.max_words)
        return SnippetVerdict.bounded(snippet, term_overlap(query, snippet), self.max_words)


_THINK = re.compile(r"<think>.*?</think>", re.S)
_TOOL_BLOCK = re.compile(r"<tool_call>.*?(</tool_call>|$)", re.S)
_ANSWER_TAG = re.compile(r"<answer>(.*?)</answer>", re.S | re.I)
_FINAL_LINE = re.compile(r"(?:final answer|exact answer|answer)\s*[:：]\s*(.+)", re.I)
_ARTICLES = re.compile(r"\b(a|an|the)\b")


def extract_final_answer(response: str) -> str:
    """Pull the final answer out of a response; ``"None"`` if there is none."""
    body = _TOOL_BLOCK.sub(" ", _THINK.sub(" ", response or ""))
    if "<think>" in body:
        body = body.split("<think>")[0]
    m = _ANSWER_TAG.search(body)
    if m and m.group(1).strip():
        return collapse_whitespace(m.group(1))
    lines = [ln.strip() for ln in body.splitlines() if ln.strip()]
    for ln in reversed(lines):
        m = _FINAL_LINE.search(ln)
        if m and m.group(1).strip():
            return m.group(1).strip()
    return lines[-1] if lines else "None"


def normalize_answer(text: str) -> str:
    text = re.sub(r"[^\w\s]", " ", text.lower())
    return " ".join(_ARTICLES.sub(" ", text).split())


def split_alternatives(ground_truth: str) -> list[str]:
    return [a.strip() for a in re.split(r"\s+OR\s+", ground_truth) if a.strip()]


def answer_matches(extracted: str, ground_truth: str) -> bool:
    """True if any OR-alternative of the truth appears (word-aligned) in the answer."""
    if extracted == "None":
        return False
    hay = f" {normalize_answer(extracted)} "
    for alt in split_alternatives(ground_truth):
        needle = normalize_answer(alt)
        if needle and f" {needle} " in hay:
            return True
    return False


class RuleJudge:
    """Judge fake: correct iff a ground-truth alternative appears in the final answer."""

    def judge(self, question: str, response: str, ground_truth: str) -> JudgeVerdict:
        extracted = extract_final_answer(response)
        ok = answer_matches(extracted, ground_truth)
        reasoning = (
            f"The extracted answer {'matches' if ok else 'does not match'} the correct answer."
            if extracted != "None" else "The response gives no final answer."
        )
        return JudgeVerdict(extracted, reasoning, "correct" if ok else "incorrect", 100)


class DictionaryNer:
    """Longest-match scan for names from a fixed dictionary, in text order."""

    def __init__(self, entries: Iterable[Mapping[str, str] | Mention | str]):
        self.entries: dict[str, Mention] = {}
        for e in entries:
            if isinstance(e, str):
                m = Mention(e)
            elif isinstance(e, Mention):
                m = e
            else:
                m = Mention(e["name"], e.get("category", ""), e.get("url", ""))
            self.entries[m.name] = m
        names = sorted(self.entries, key=lambda n: (-len(n), n))
        self._pattern = (
            re.compile(r"(?<!\w)(" + "|".join(re.escape(n) for n in names) + r")(?!\w)") if names else None
        )

    def mentions(self, text: str) -> list[Mention]:
        if self._pattern is None:
            return []
        return [self.entries[m.group(1)] for m in self._pattern.finditer(text)]

    def ner(self, text: str) -> list[str]:
        return [m.name for m in self.mentions(text)]


# Words templates may add; excluded when comparing content before/after rephrasing.
TEMPLATE_WORDS = frozenset("it is noted that reportedly according to records one source states".split())
_TEMPLATES = (
    "{f}",
    "It is noted that {l}",
    "Reportedly, {l}",
    "According to records, {l}",
    "One source states that {l}",
)
_LOWERABLE = frozenset("a an the in on at his her its their this after before during".split())


class TemplateRephraser:
    """Rephrase by wrapping the fact in one of a few seeded templates."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def rephrase(self, fact: str) -> str:
        fact = fact.strip()
        if not fact:
            return fact
        pick = _digest(self.seed, fact)[0] % len(_TEMPLATES)
        first = fact.split(" ", 1)[0]
        lowered = fact[0].lower() + fact[1:] if first.lower() in _LOWERABLE else fact
        return _TEMPLATES[pick].format(f=fact, l=lowered)


def rephrase_content(text: str) -> Counter:
    return Counter(t for t in tokenize(text) if t not in TEMPLATE_WORDS)


class ScriptedSolver:
    """Solver replaying per-question success patterns (1 = solved on that attempt)."""

    def __init__(self, answers: Mapping[str, str], patterns: Mapping[str, Sequence[int]] | None = None,
                 default_pattern: Sequence[int] = (1,), wrong_answer: str = "unknown"):
        self.answers = dict(answers)
        self.patterns = {q: list(p) for q, p in (patterns or {}).items()}
        self.default_pattern = list(default_pattern)
        self.wrong_answer = wrong_answer

    def solve(self, question: str, attempt: int = 0) -> str:
        pattern = self.patterns.get(question, self.default_pattern)
        ok = bool(pattern[attempt % len(pattern)]) if pattern else False
        return self.answers.get(question, self.wrong_answer) if ok else self.wrong_answer


class TemplateQuestionGenerator:
    def generate_question(self, constraints: Sequence[str], answer: str, attribute: str = "") -> str:
        what = attribute.lower() if attribute else "answer"
        clues = "; ".join(c.rstrip(". ") for c in constraints)
        return f"Consider the entity described by these clues: {clues}. What is its {what}?"


class CountingProxy:
    """Wraps a client and counts calls per method name (thread-safe)."""

    def __init__(self, inner: Any):
        self._inner = inner
        self.calls: Counter = Counter()
        self._lock = threading.Lock()

    def __getattr__(self, name: str) -> Any:
        attr = getattr(self._inner, name)
        if not callable(attr):
            return attr

        def wrapped(*args, **kwargs):
            with self._lock:
                self.calls[name] += 1
            return attr(*args, **kwargs)

        return wrapped

    @property
    def total(self) -> int:
        return sum(self.calls.values())
