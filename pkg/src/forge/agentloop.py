"""ReAct episode runner: tool-call parsing, context budgeting, trajectories."""

from __future__ import annotations

import json
import logging
import os
import random
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

from .gateway.fakes import extract_final_answer
from .textseg import DEFAULT_COUNTER, TokenCounter

log = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant", "tool")
TOOL_SCHEMAS = {"search": "query", "browse": "url"}
FINISHES = ("answered", "forced_answer", "error")
FORCING_TEXT = "You have reached the context limit. Output your final answer now."

SYSTEM_PROMPT = """You answer questions by researching the web. Think inside <think></think> before acting.
Tools (call one per <tool_call></tool_call> block, body is JSON):
- {"name": "search", "arguments": {"query": "<keywords>"}} returns ranked urls with snippets.
- {"name": "browse", "arguments": {"url": "<url>"}} returns the page's relevant text.
When you are confident, reply without any tool call and end with your final answer."""

_BLOCK = re.compile(r"<tool_call>(.*?)</tool_call>", re.S)
_OPEN = "<tool_call>"


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ToolCall:
    name: str
    arguments: dict

    def __post_init__(self):
        key = TOOL_SCHEMAS.get(self.name)
        if key is None:
            raise ValueError(f"unknown tool {self.name!r}")
        if set(self.arguments) != {key} or not isinstance(self.arguments[key], str) or not self.arguments[key].strip():
            raise ValueError(f"{self.name} takes exactly one non-empty string argument {key!r}")

    def to_wire(self) -> str:
        return json.dumps({"name": self.name, "arguments": self.arguments}, ensure_ascii=False)


class ToolCallParseError(ValueError):
    """A ``<tool_call>`` block that is not a valid call; ``span`` is its (start, end) in the text."""

    def __init__(self, reason: str, span: tuple[int, int], block: str):
        super().__init__(f"malformed tool call at {span[0]}-{span[1]}: {reason}")
        self.reason = reason
        self.span = span
        self.block = block


def scan_tool_calls(text: str) -> list[ToolCall | ToolCallParseError]:
    """Every tool-call block in order, each parsed or described as an error."""
    out: list[ToolCall | ToolCallParseError] = []
    pos = 0
    for m in _BLOCK.finditer(text):
        out.extend(_unterminated(text, pos, m.start()))
        pos = m.end()
        body = m.group(1).strip()
        try:
            obj = json.loads(body)
        except json.JSONDecodeError as exc:
            out.append(ToolCallParseError(f"invalid JSON ({exc.msg})", m.span(), m.group(0)))
            continue
        if not isinstance(obj, dict) or set(obj) != {"name", "arguments"} or not isinstance(obj["arguments"], dict):
            out.append(ToolCallParseError("body must be an object with keys name and arguments", m.span(), m.group(0)))
            continue
        try:
            out.append(ToolCall(str(obj["name"]), dict(obj["arguments"])))
        except ValueError as exc:
            out.append(ToolCallParseError(str(exc), m.span(), m.group(0)))
    out.extend(_unterminated(text, pos, len(text)))
    return out


def _unterminated(text: str, start: int, end: int) -> list[ToolCallParseError]:
    i = text.find(_OPEN, start, end)
    if i == -1:
        return []
    return [ToolCallParseError("unterminated block", (i, end), text[i:end])]


def parse_tool_calls(text: str) -> list[ToolCall]:
    """Well-formed calls in order; raises the first ``ToolCallParseError`` if any block is malformed."""
    items = scan_tool_calls(text)
    for item in items:
        if isinstance(item, ToolCallParseError):
            raise item
    return items  # type: ignore[return-value]


def strip_tool_calls(text: str) -> str:
    text = _BLOCK.sub("", text)
    i = text.find(_OPEN)
    return (text[:i] if i != -1 else text).strip()


@dataclass(frozen=True)
class AgentConfig:
    max_context_tokens: int = 16384
    results_n: int = 5
    forcing_text: str = FORCING_TEXT
    system_prompt: str = SYSTEM_PROMPT
    max_turns: int = 100
    counter: TokenCounter = field(default=DEFAULT_COUNTER, compare=False, repr=False)

    def __post_init__(self):
        if self.max_context_tokens < 1024:
            raise ValueError("max_context_tokens must be >= 1024")
        if self.results_n < 1 or self.max_turns < 1:
            raise ValueError("results_n and max_turns must be >= 1")


@dataclass
class Trajectory:
    question: str
    messages: list[Message]
    tool_call_count: int
    token_count: int
    finish: str
    final_answer: str

    def __post_init__(self):
        if self.finish not in FINISHES:
            raise ValueError(f"finish must be one of {FINISHES}")

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "messages": [m.to_dict() for m in self.messages],
            "tool_call_count": self.tool_call_count,
            "token_count": self.token_count,
            "finish": self.finish,
            "final_answer": self.final_answer,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Trajectory":
        return cls(
            question=d["question"],
            messages=[Message(m["role"], m["content"]) for m in d["messages"]],
            tool_call_count=int(d["tool_call_count"]),
            token_count=int(d["token_count"]),
            finish=d["finish"],
            final_answer=d["final_answer"],
        )


def read_trajectories(path: str | Path) -> list[Trajectory]:
    with open(path, encoding="utf-8") as fh:
        return [Trajectory.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_trajectories(path: str | Path, trajectories: Iterable[Trajectory]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in trajectories:
            fh.write(t.to_json() + "\n")


def count_tool_calls(t: Trajectory | Sequence[Message]) -> int:
    """Well-formed search and browse calls across all assistant messages."""
    messages = t.messages if isinstance(t, Trajectory) else t
    return sum(
        1
        for m in messages if m.role == "assistant"
        for item in scan_tool_calls(m.content) if isinstance(item, ToolCall)
    )


def check_transcript(messages: Sequence[Message]) -> None:
    """Raise if a tool message is misplaced or a tool-call turn lacks its tool messages."""
    i = 0
    while i < len(messages):
        m = messages[i]
        if m.role == "tool":
            raise ValueError(f"tool message at {i} does not follow an assistant tool call")
        if m.role == "assistant":
            n = len(scan_tool_calls(m.content))
            follow = messages[i + 1 : i + 1 + n]
            if len(follow) != n or any(f.role != "tool" for f in follow):
                raise ValueError(f"assistant message at {i} is not followed by {n} tool message(s)")
            i += n
        i += 1


# -- policies and tools --------------------------------------------------------


class Policy(Protocol):
    def respond(self, messages: Sequence[Message], rng: random.Random) -> str: ...


class ToolClient(Protocol):
    def search(self, query: str) -> list[dict]: ...

    def browse(self, url: str) -> dict: ...


class ScriptedPolicy:
    """Replays fixed assistant turns; turn i is returned for the i-th assistant message.

    After a forcing instruction it returns ``forced_answer`` when one is given.
    Once the script runs out the last turn repeats.
    """

    def __init__(self, turns: Sequence[str], forced_answer: str | None = None, forcing_text: str = FORCING_TEXT):
        if not turns:
            raise ValueError("a scripted policy needs at least one turn")
        self.turns = list(turns)
        self.forced_answer = forced_answer
        self.forcing_text = forcing_text

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedPolicy":
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data["turns"], data.get("forced_answer"))

    def respond(self, messages: Sequence[Message], rng: random.Random) -> str:
        if self.forced_answer is not None and messages and messages[-1].content == self.forcing_text:
            return self.forced_answer
        i = sum(1 for m in messages if m.role == "assistant")
        return self.turns[min(i, len(self.turns) - 1)]


class ChatPolicy:
    """A policy served by an OpenAI-style chat endpoint (``FORGE_LLM_URL``)."""

    def __init__(self, chat, temperature: float = 0.6):
        self.chat = chat
        self.temperature = temperature

    @classmethod
    def from_env(cls, **kw) -> "ChatPolicy":
        from .gateway.http import ChatModel, _env

        return cls(ChatModel(_env("FORGE_LLM_URL"), model=os.environ.get("FORGE_LLM_MODEL", "default"),
                             api_key=os.environ.get("FORGE_API_KEY")), **kw)

    def respond(self, messages: Sequence[Message], rng: random.Random) -> str:
        return self.chat.chat([m.to_dict() for m in messages], temperature=self.temperature)


class LocalToolClient:
    """Calls a ToolServer in-process."""

    def __init__(self, server, region_lang: str | None = None):
        self.server = server
        self.region_lang = region_lang

    def search(self, query: str) -> list[dict]:
        return self.server.search_wire(query, self.region_lang)

    def browse(self, url: str) -> dict:
        return self.server.browse_wire(url)


class ToolTransportError(RuntimeError):
    pass


class HttpToolClient:
    """Calls a running tool server over HTTP."""

    def __init__(self, base_url: str, region_lang: str | None = None, timeout: float = 60.0, transport=None):
        import httpx

        self._httpx = httpx
        self.base_url = base_url.rstrip("/")
        self.region_lang = region_lang
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def _post(self, path: str, payload: dict) -> Any:
        try:
            resp = self._client.post(self.base_url + path, json=payload)
        except self._httpx.HTTPError as exc:
            raise ToolTransportError(f"{path}: {exc}") from None
        if resp.status_code >= 400:
            raise ToolTransportError(f"{path}: HTTP {resp.status_code} {resp.text[:200]}")
        return resp.json()

    def search(self, query: str) -> list[dict]:
        payload = {"query": query}
        if self.region_lang:
            payload["region_lang"] = self.region_lang
        return self._post("/search", payload)

    def browse(self, url: str) -> dict:
        return self._post("/browse", {"url": url})


# -- the loop ------------------------------------------------------------------


def tool_response(payload: Any) -> str:
    body = payload if isinstance(payload, str) else json.dumps(payload, ensure_ascii=False)
    return f"<tool_response>\n{body}\n</tool_response>"


def execute_call(item: ToolCall | ToolCallParseError, tools: ToolClient, results_n: int) -> str:
    """Tool message text for one parsed block. Failures become error payloads."""
    if isinstance(item, ToolCallParseError):
        return tool_response({"error": "malformed_tool_call", "detail": item.reason})
    try:
        if item.name == "search":
            return tool_response(tools.search(item.arguments["query"])[:results_n])
        return tool_response(tools.browse(item.arguments["url"]))
    except Exception as exc:  # any transport or server failure goes back to the policy
        log.info("tool %s failed: %s", item.name, exc)
        return tool_response({"error": type(exc).__name__, "detail": str(exc)})


def _tokens(messages: Sequence[Message], counter: TokenCounter) -> int:
    return sum(counter.count(m.content) for m in messages)


def run_episode(question: str, policy: Policy, tools: ToolClient, cfg: AgentConfig | None = None,
                rng: random.Random | None = None) -> Trajectory:
    """Alternate policy turns and tool executions until the policy answers.

    The budget is checked at turn boundaries: a round (assistant turn plus its
    tool messages) that would push the context past ``max_context_tokens`` is
    discarded, the forcing instruction is appended once, and the next policy
    output is the final answer.
    """
    cfg = cfg or AgentConfig()
    rng = rng or random.Random(0)
    counter = cfg.counter
    messages: list[Message] = []
    if cfg.system_prompt:
        messages.append(Message("system", cfg.system_prompt))
    messages.append(Message("user", question))

    def finish(kind: str, answer_text: str) -> Trajectory:
        final = extract_final_answer(answer_text) if answer_text else "None"
        return Trajectory(question, messages, count_tool_calls(messages), _tokens(messages, counter), kind, final)

    def forced() -> Trajectory:
        messages.append(Message("user", cfg.forcing_text))
        try:
            reply = strip_tool_calls(policy.respond(messages, rng))
        except Exception as exc:
            log.warning("policy failed on forced turn: %s", exc)
            return finish("error", "")
        messages.append(Message("assistant", reply))
        return finish("forced_answer", reply)

    for _turn in range(cfg.max_turns):
        if _tokens(messages, counter) >= cfg.max_context_tokens:
            return forced()
        try:
            reply = policy.respond(messages, rng)
        except Exception as exc:
            log.warning("policy failed: %s", exc)
            return finish("error", "")
        items = scan_tool_calls(reply)
        if not items:
            messages.append(Message("assistant", reply))
            return finish("answered", reply)
        round_ = [Message("assistant", reply)]
        round_ += [Message("tool", execute_call(item, tools, cfg.results_n)) for item in items]
        if _tokens(messages, counter) + _tokens(round_, counter) > cfg.max_context_tokens:
            return forced()
        messages.extend(round_)
    log.warning("episode hit max_turns=%d without an answer", cfg.max_turns)
    return finish("error", "")


# -- bundled case-study episode ------------------------------------------------


def load_fixture_episode(name: str = "episode_dailey.json") -> dict:
    """The bundled scripted episode: question, ground truth and assistant turns."""
    return json.loads(resources.files("forge").joinpath("corpus", name).read_text(encoding="utf-8"))


def load_policy(spec: str) -> Policy:
    """``scripted:<path>``, ``scripted:fixture`` or ``http`` (chat endpoint from env)."""
    kind, _, arg = spec.partition(":")
    if kind == "scripted":
        if arg in ("", "fixture"):
            ep = load_fixture_episode()
            return ScriptedPolicy(ep["turns"], ep.get("forced_answer"))
        return ScriptedPolicy.from_file(arg)
    if kind == "http":
        return ChatPolicy.from_env()
    raise ValueError(f"unknown policy spec {spec!r}")
