from __future__ import annotations

import enum
import json
import logging
from dataclasses import asdict, dataclass
from typing import Protocol, Sequence
from urllib.parse import urlparse

log = logging.getLogger(__name__)

SNIPPET_MAX_WORDS = 60


class ErrorKind(str, enum.Enum):
    TIMEOUT = "timeout"
    RATE_LIMITED = "rate_limited"
    UNAVAILABLE = "unavailable"
    MALFORMED_RESPONSE = "malformed_response"


class ClientError(Exception):
    """Failure of an external dependency. ``kind`` drives retry/fallback."""

    def __init__(self, kind: ErrorKind | str, detail: str = ""):
        self.kind = ErrorKind(kind)
        self.detail = detail
        super().__init__(f"{self.kind.value}: {detail}" if detail else self.kind.value)

    @property
    def retryable(self) -> bool:
        return self.kind is ErrorKind.TIMEOUT


def is_url(url: str) -> bool:
    parsed = urlparse(url)
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


@dataclass(frozen=True)
class EngineResult:
    snapshot: str
    title: str
    url: str

    def __post_init__(self):
        if not is_url(self.url):
            raise ValueError(f"not a URL: {self.url!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EngineResult":
        return cls(snapshot=d.get("snapshot", ""), title=d.get("title", ""), url=d["url"])


def truncate_words(text: str, max_words: int) -> str:
    words = text.split()
    if len(words) <= max_words:
        return text.strip()
    return " ".join(words[:max_words])


@dataclass(frozen=True)
class SnippetVerdict:
    snippet: str
    relevance: float

    def __post_init__(self):
        if len(self.snippet.split()) > SNIPPET_MAX_WORDS:
            raise ValueError(f"snippet exceeds {SNIPPET_MAX_WORDS} words")
        if not 0.0 <= self.relevance <= 1.0:
            raise ValueError(f"relevance {self.relevance} outside [0, 1]")

    @classmethod
    def bounded(cls, snippet: str, relevance: float, max_words: int = SNIPPET_MAX_WORDS) -> "SnippetVerdict":
        """Coerce raw model output into a valid verdict (truncate, clamp)."""
        max_words = min(max_words, SNIPPET_MAX_WORDS)
        if len(snippet.split()) > max_words:
            log.warning("snippet over %d words truncated", max_words)
            snippet = truncate_words(snippet, max_words)
        return cls(snippet=snippet.strip(), relevance=min(1.0, max(0.0, float(relevance))))


JUDGE_KEYS = ("extracted_final_answer", "reasoning", "correctness", "confidence")


@dataclass(frozen=True)
class JudgeVerdict:
    extracted_final_answer: str
    reasoning: str
    correctness: str
    confidence: int

    def __post_init__(self):
        if self.correctness not in ("correct", "incorrect"):
            raise ValueError(f"correctness must be 'correct' or 'incorrect', got {self.correctness!r}")
        if not isinstance(self.confidence, int) or not 0 <= self.confidence <= 100:
            raise ValueError(f"confidence must be an integer in [0, 100], got {self.confidence!r}")

    @property
    def is_correct(self) -> bool:
        return self.correctness == "correct"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def parse(cls, text: str) -> "JudgeVerdict":
        """Strict parse of a judge reply: one JSON object with exactly the four keys."""
        try:
            obj = json.loads(text.strip())
        except (json.JSONDecodeError, AttributeError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"judge reply is not JSON: {exc}") from None
        if not isinstance(obj, dict) or set(obj) != set(JUDGE_KEYS):
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"judge reply keys {sorted(obj) if isinstance(obj, dict) else type(obj).__name__}")
        try:
            return cls(
                extracted_final_answer=str(obj["extracted_final_answer"]),
                reasoning=str(obj["reasoning"]),
                correctness=str(obj["correctness"]).strip().lower(),
                confidence=int(obj["confidence"]),
            )
        except (TypeError, ValueError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, str(exc)) from None


@dataclass(frozen=True)
class Mention:
    name: str
    category: str = ""
    url: str = ""


class SearchEngine(Protocol):
    name: str

    def search(self, query: str, region_lang: str) -> list[EngineResult]: ...


class Crawler(Protocol):
    def crawl(self, url: str) -> str: ...


class Embedder(Protocol):
    dim: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]: ...


class Reranker(Protocol):
    def rerank(self, query: str, docs: Sequence[str]) -> list[float]: ...


class SnippetWriter(Protocol):
    def write_snippet(self, query: str, context: str) -> SnippetVerdict: ...


class Judge(Protocol):
    def judge(self, question: str, response: str, ground_truth: str) -> JudgeVerdict: ...


class EntityRecognizer(Protocol):
    def ner(self, text: str) -> list[str]: ...

    def mentions(self, text: str) -> list[Mention]: ...


class Rephraser(Protocol):
    def rephrase(self, fact: str) -> str: ...


class Solver(Protocol):
    def solve(self, question: str, attempt: int = 0) -> str: ...


class QuestionGenerator(Protocol):
    def generate_question(self, constraints: Sequence[str], answer: str, attribute: str = "") -> str: ...
