"""HTTP+JSON adapters for the real services.

Request and response bodies here are adapter-private. Endpoints come from
FORGE_ENGINE_URL, FORGE_EMBED_URL, FORGE_RERANK_URL, FORGE_LLM_URL and
FORGE_JUDGE_URL; FORGE_API_KEY (optional) is sent as a bearer token.
"""

from __future__ import annotations

import ast
import json
import logging
import math
import os
from typing import Any, Sequence

import httpx

from .types import ClientError, EngineResult, ErrorKind, JudgeVerdict, SnippetVerdict, SNIPPET_MAX_WORDS

log = logging.getLogger(__name__)

DEFAULT_TIMEOUT = 20.0

SNIPPET_PROMPT = """You receive part of the content of a web page and a search query.
Write a snippet of at most 60 words built only from the content.
If the content answers or relates to the query, focus the snippet on that information.
If it does not, write a short summary of the content and do not mention the query at all.
Leave out boilerplate such as menus, ads, cookie banners and login notices.
Rate the relevance of the snippet to the query between 0 and 1; use 0 when the content has nothing about the query.
Reply with JSON only: {{"snippet": "...", "relevance": <number>}}

<content>
{text}
</content>
<query>
{query}
</query>"""

JUDGE_PROMPT = """Grade a response against a reference answer, using only the reference.

question: {question}
response: {response}
correct_answer: {ground_truth}

Steps:
1. Pull the single final answer out of the response; if it has none, use "None".
2. Briefly compare that answer with correct_answer only, without solving the question yourself.
3. correctness is "correct" when the two are equivalent (allowing small numeric tolerance and wording differences), otherwise "incorrect". correct_answer may list alternatives joined by "OR"; matching any one is enough.
4. confidence is the response's own confidence from 0 to 100, or 100 if it states none.

Reply with a JSON object holding exactly the keys extracted_final_answer, reasoning, correctness, confidence and nothing else."""

REPHRASE_PROMPT = """Rewrite the following statement with different wording but exactly the same meaning.
Do not add or remove facts, names or numbers. Reply with the rewritten statement only.

{fact}"""

QUESTION_PROMPT = """Write one question whose answer is "{answer}" ({attribute}).
The question must describe the entity only through these clues and must not reveal the answer:
{clues}
Reply with the question only."""


class _JsonService:
    def __init__(self, url: str, api_key: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                 retries_on_timeout: int = 1, transport: httpx.BaseTransport | None = None):
        self.url = url
        headers = {"Authorization": f"Bearer {api_key}"} if api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)
        self.retries_on_timeout = retries_on_timeout

    def _post(self, payload: dict, url: str | None = None) -> Any:
        attempts = 1 + self.retries_on_timeout
        for attempt in range(attempts):
            try:
                resp = self._client.post(url or self.url, json=payload)
            except httpx.TimeoutException as exc:
                if attempt + 1 < attempts:
                    log.info("timeout calling %s, retrying", self.url)
                    continue
                raise ClientError(ErrorKind.TIMEOUT, str(exc)) from None
            except httpx.HTTPError as exc:
                raise ClientError(ErrorKind.UNAVAILABLE, str(exc)) from None
            return _decode(resp)
        raise AssertionError("unreachable")

    def close(self) -> None:
        self._client.close()


def _decode(resp: httpx.Response) -> Any:
    if resp.status_code == 429:
        raise ClientError(ErrorKind.RATE_LIMITED, resp.text[:200])
    if resp.status_code >= 400:
        raise ClientError(ErrorKind.UNAVAILABLE, f"HTTP {resp.status_code}")
    try:
        return resp.json()
    except (json.JSONDecodeError, ValueError):
        raise ClientError(ErrorKind.MALFORMED_RESPONSE, resp.text[:200]) from None


def _env(name: str) -> str:
    val = os.environ.get(name)
    if not val:
        raise RuntimeError(f"{name} is not set")
    return val


class HttpEngine(_JsonService):
    """POST {"query", "region_lang"} -> {"results": [{"snapshot", "title", "url"}]}."""

    def __init__(self, url: str, name: str = "engine", **kw):
        super().__init__(url, **kw)
        self.name = name

    @classmethod
    def from_env(cls, name: str = "engine", **kw) -> "HttpEngine":
        return cls(_env("FORGE_ENGINE_URL"), name=name, api_key=os.environ.get("FORGE_API_KEY"), **kw)

    def search(self, query: str, region_lang: str = "us-en") -> list[EngineResult]:
        if not query.strip():
            raise ValueError("query must be non-empty")
        body = self._post({"query": query, "region_lang": region_lang})
        try:
            rows = body["results"]
            out = []
            for r in rows:
                try:
                    out.append(EngineResult.from_dict(r))
                except ValueError:
                    log.warning("engine %s returned a result without a valid url", self.name)
            return out
        except (KeyError, TypeError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"engine body: {exc}") from None


class HttpCrawler:
    """Plain GET of the page; any failure maps to ``unavailable`` (no retry)."""

    def __init__(self, timeout: float = DEFAULT_TIMEOUT, transport: httpx.BaseTransport | None = None):
        self._client = httpx.Client(timeout=timeout, follow_redirects=True, transport=transport,
                                    headers={"User-Agent": "forge-crawler/0.1"})

    def crawl(self, url: str) -> str:
        try:
            resp = self._client.get(url)
        except httpx.TimeoutException as exc:
            raise ClientError(ErrorKind.TIMEOUT, str(exc)) from None
        except httpx.HTTPError as exc:
            raise ClientError(ErrorKind.UNAVAILABLE, str(exc)) from None
        if resp.status_code >= 400:
            raise ClientError(ErrorKind.UNAVAILABLE, f"HTTP {resp.status_code} for {url}")
        return resp.text


class HttpEmbedder(_JsonService):
    """POST {"texts"} -> {"embeddings": [[...], ...]}; vectors are re-normalized here."""

    def __init__(self, url: str, dim: int, **kw):
        super().__init__(url, **kw)
        self.dim = dim

    @classmethod
    def from_env(cls, dim: int = 1024, **kw) -> "HttpEmbedder":
        return cls(_env("FORGE_EMBED_URL"), dim=dim, api_key=os.environ.get("FORGE_API_KEY"), **kw)

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        if not texts:
            return []
        body = self._post({"texts": list(texts)})
        try:
            vecs = [[float(x) for x in v] for v in body["embeddings"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"embed body: {exc}") from None
        if len(vecs) != len(texts) or any(len(v) != self.dim for v in vecs):
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, "embedding count or width mismatch")
        out = []
        for v in vecs:
            n = math.sqrt(sum(x * x for x in v))
            if n == 0.0:
                raise ClientError(ErrorKind.MALFORMED_RESPONSE, "zero embedding")
            out.append([x / n for x in v])
        return out


class HttpReranker(_JsonService):
    """POST {"query", "documents"} -> {"scores": [...]}; scores clamped to [0, 1]."""

    @classmethod
    def from_env(cls, **kw) -> "HttpReranker":
        return cls(_env("FORGE_RERANK_URL"), api_key=os.environ.get("FORGE_API_KEY"), **kw)

    def rerank(self, query: str, docs: Sequence[str]) -> list[float]:
        if not docs:
            return []
        body = self._post({"query": query, "documents": list(docs)})
        try:
            scores = [float(s) for s in body["scores"]]
        except (KeyError, TypeError, ValueError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"rerank body: {exc}") from None
        if len(scores) != len(docs):
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, "score count mismatch")
        return [min(1.0, max(0.0, s)) for s in scores]


class ChatModel(_JsonService):
    """OpenAI-style chat completion endpoint returning ``choices[0].message.content``."""

    def __init__(self, url: str, model: str = "default", **kw):
        super().__init__(url, **kw)
        self.model = model

    def complete(self, prompt: str) -> str:
        return self.chat([{"role": "user", "content": prompt}])

    def chat(self, messages: Sequence[dict], temperature: float = 0.0) -> str:
        body = self._post({"model": self.model, "temperature": temperature, "messages": list(messages)})
        try:
            return str(body["choices"][0]["message"]["content"])
        except (KeyError, IndexError, TypeError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"chat body: {exc}") from None


def _parse_loose_json(text: str) -> Any:
    text = text.strip()
    if text.startswith("```"):
        text = text.strip("`")
        text = text.split("\n", 1)[1] if "\n" in text else text
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end <= start:
        raise ValueError("no object")
    blob = text[start : end + 1]
    try:
        return json.loads(blob)
    except json.JSONDecodeError:
        # models sometimes reply with python-style single quotes
        return ast.literal_eval(blob)


class LlmSnippetWriter:
    def __init__(self, chat: ChatModel, max_words: int = SNIPPET_MAX_WORDS):
        self.chat = chat
        self.max_words = max_words

    @classmethod
    def from_env(cls, **kw) -> "LlmSnippetWriter":
        return cls(ChatModel(_env("FORGE_LLM_URL"), api_key=os.environ.get("FORGE_API_KEY"), **kw))

    def write_snippet(self, query: str, context: str) -> SnippetVerdict:
        if not context.strip():
            return SnippetVerdict("", 0.0)
        raw = self.chat.complete(SNIPPET_PROMPT.format(text=context, query=query))
        try:
            obj = _parse_loose_json(raw)
            return SnippetVerdict.bounded(str(obj["snippet"]), float(obj["relevance"]), self.max_words)
        except (ValueError, SyntaxError, KeyError, TypeError) as exc:
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, f"snippet reply: {exc}") from None


class LlmJudge:
    def __init__(self, chat: ChatModel):
        self.chat = chat

    @classmethod
    def from_env(cls, **kw) -> "LlmJudge":
        return cls(ChatModel(_env("FORGE_JUDGE_URL"), api_key=os.environ.get("FORGE_API_KEY"), **kw))

    def judge(self, question: str, response: str, ground_truth: str) -> JudgeVerdict:
        raw = self.chat.complete(JUDGE_PROMPT.format(question=question, response=response, ground_truth=ground_truth))
        return JudgeVerdict.parse(raw)


class LlmRephraser:
    def __init__(self, chat: ChatModel):
        self.chat = chat

    def rephrase(self, fact: str) -> str:
        if not fact.strip():
            return fact
        return self.chat.complete(REPHRASE_PROMPT.format(fact=fact)).strip()


class LlmQuestionGenerator:
    def __init__(self, chat: ChatModel):
        self.chat = chat

    def generate_question(self, constraints: Sequence[str], answer: str, attribute: str = "") -> str:
        clues = "\n".join(f"- {c}" for c in constraints)
        return self.chat.complete(QUESTION_PROMPT.format(answer=answer, attribute=attribute or "answer", clues=clues)).strip()
