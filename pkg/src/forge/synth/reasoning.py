"""Filling empty reasoning slots ahead of tool calls, for SFT-style transcripts."""

from __future__ import annotations

import hashlib
import json
import re
from typing import Mapping, Protocol, Sequence

MAX_SENTENCES = 5

_EMPTY_THINK = re.compile(r"<think>\s*</think>")
_CALL = re.compile(r"<tool_call>\s*(.*?)\s*</tool_call>", re.S)


class NoReasoningSlot(ValueError):
    pass


class ReasoningGenerator(Protocol):
    def reason(self, context: str, tool_name: str, arguments: Mapping) -> str: ...


_OPENERS = (
    "The clues so far are not enough to settle the answer.",
    "Some of the constraints are still unverified.",
    "I still need stronger evidence before answering.",
)
_ACTIONS = {
    "search": (
        "I will use search with the query \"{arg}\" to find candidates.",
        "A search for \"{arg}\" should surface pages that match these clues.",
    ),
    "browse": (
        "I will browse {arg} to read the full page.",
        "Opening {arg} with browse should confirm the details.",
    ),
}
_CLOSERS = (
    "Then I can check the result against the remaining clues.",
    "After that I will decide whether more lookups are needed.",
)


class TemplateReasoner:
    """Deterministic fake: three short sentences naming the upcoming tool."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def _pick(self, options: Sequence[str], *key) -> str:
        h = hashlib.blake2b(json.dumps([self.seed, *key]).encode(), digest_size=4).digest()
        return options[int.from_bytes(h, "big") % len(options)]

    def reason(self, context: str, tool_name: str, arguments: Mapping) -> str:
        arg = arguments.get("query") or arguments.get("url") or ""
        actions = _ACTIONS.get(tool_name, (f"I will call {tool_name} next.",))
        return " ".join([
            self._pick(_OPENERS, context, "open"),
            self._pick(actions, context, tool_name, arg).format(arg=arg),
            self._pick(_CLOSERS, context, "close"),
        ])


def count_sentences(text: str) -> int:
    return len([s for s in re.split(r"(?<=[.!?])\s+", text.strip()) if s])


def find_slot(history: Sequence[Mapping[str, str]]) -> tuple[int, str, dict]:
    """Index, tool name and arguments of the last assistant turn with an empty think block and a tool call."""
    for i in range(len(history) - 1, -1, -1):
        msg = history[i]
        if msg.get("role") != "assistant" or not _EMPTY_THINK.search(msg.get("content", "")):
            continue
        m = _CALL.search(msg["content"])
        if not m:
            continue
        try:
            call = json.loads(m.group(1))
            return i, str(call["name"]), dict(call.get("arguments") or {})
        except (ValueError, KeyError, TypeError):
            continue
    raise NoReasoningSlot("no assistant turn with an empty reasoning block before a tool call")


def generate_reasoning_stub(history: Sequence[Mapping[str, str]], generator: ReasoningGenerator | None = None,
                            seed: int = 0) -> str:
    """Reasoning text (at most five sentences) for the last empty slot."""
    gen = generator or TemplateReasoner(seed)
    i, name, args = find_slot(history)
    context = "\n".join(m.get("content", "") for m in history[:i])
    text = gen.reason(context, name, args).strip()
    sentences = [s for s in re.split(r"(?<=[.!?])\s+", text) if s]
    return " ".join(sentences[:MAX_SENTENCES])


def fill_reasoning_slot(history: Sequence[Mapping[str, str]], generator: ReasoningGenerator | None = None,
                        seed: int = 0) -> list[dict]:
    """Copy of ``history`` with the last empty slot filled."""
    stub = generate_reasoning_stub(history, generator, seed)
    i, _, _ = find_slot(history)
    out = [dict(m) for m in history]
    out[i]["content"] = _EMPTY_THINK.sub(lambda _m: f"<think>\n{stub}\n</think>", out[i]["content"], count=1)
    return out
