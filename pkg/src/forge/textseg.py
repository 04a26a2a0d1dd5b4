"""Token counting, token-bounded chunking and HTML main-text extraction."""

from __future__ import annotations

import re
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Callable, Protocol

_WS_RUN = re.compile(r"\s+")
_LINE_BREAKS = re.compile(r"[\r\n\v\f\u2028\u2029\x1c-\x1e\x85]+")
_PIECE = re.compile(r"\S+\s*")
_SENTENCE_END = re.compile(r"([.!?][\"')\]]*\s*|\n)$")


class TokenCounter(Protocol):
    name: str

    def count(self, text: str) -> int: ...


class WordCounter:
    """Counts whitespace-delimited words. The default token unit everywhere."""

    name = "words"

    def count(self, text: str) -> int:
        return len(text.split())


class CallableCounter:
    """Adapts any ``str -> int`` function (e.g. a model tokenizer) to TokenCounter."""

    def __init__(self, fn: Callable[[str], int], name: str = "custom"):
        self._fn = fn
        self.name = name

    def count(self, text: str) -> int:
        return int(self._fn(text)) if text else 0


DEFAULT_COUNTER = WordCounter()


@dataclass(frozen=True)
class Chunk:
    id: str
    text: str
    token_count: int
    source_url: str
    index: int
    is_seed: bool = False


def count_tokens(text: str, counter: TokenCounter | None = None) -> int:
    return (counter or DEFAULT_COUNTER).count(text)


def collapse_whitespace(text: str) -> str:
    """Every whitespace run becomes one space; ends stripped."""
    return _WS_RUN.sub(" ", text).strip()


def normalize(text: str) -> str:
    """Collapse whitespace runs, keeping line structure.

    A run containing a line break becomes one ``\n``; any other run becomes one
    space. Ends are stripped.
    """
    lines = (collapse_whitespace(ln) for ln in _LINE_BREAKS.split(text))
    return "\n".join(ln for ln in lines if ln)


def join_chunks(chunks: list[Chunk]) -> str:
    return "".join(c.text for c in sorted(chunks, key=lambda c: c.index))


def _largest_fit(pieces: list[str], start: int, max_tokens: int, counter: TokenCounter) -> int:
    """Largest ``end`` such that ``pieces[start:end]`` fits the budget (0 if none does)."""

    def fits(end: int) -> bool:
        return counter.count("".join(pieces[start:end])) <= max_tokens

    n = len(pieces)
    if not fits(start + 1):
        return 0
    lo, step = start + 1, 1
    # exponential probe, then bisect; relies on prefix-count monotonicity
    while lo + step <= n and fits(lo + step):
        lo += step
        step *= 2
    hi = min(n, lo + step)
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if fits(mid):
            lo = mid
        else:
            hi = mid - 1
    return lo


def _hard_cut(piece: str, max_tokens: int, counter: TokenCounter) -> list[str]:
    out = []
    rest = piece
    while rest:
        lo, hi = 1, len(rest)
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if counter.count(rest[:mid]) <= max_tokens:
                lo = mid
            else:
                hi = mid - 1
        out.append(rest[:lo])
        rest = rest[lo:]
    return out


def split_into_chunks(
    text: str,
    max_tokens: int,
    source_url: str = "",
    counter: TokenCounter | None = None,
) -> list[Chunk]:
    """Split normalized ``text`` into chunks of at most ``max_tokens`` tokens.

    Chunks partition the normalized string exactly, so concatenating their
    texts in index order gives ``normalize(text)`` back; separating whitespace
    stays at the end of the earlier chunk. A cut is moved back to the last
    sentence end inside the window when that keeps at least half the budget.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    counter = counter or DEFAULT_COUNTER
    norm = normalize(text)
    if not norm:
        return []

    pieces: list[str] = []
    for piece in _PIECE.findall(norm):
        if counter.count(piece) > max_tokens:
            pieces.extend(_hard_cut(piece, max_tokens, counter))
        else:
            pieces.append(piece)

    spans: list[str] = []
    i = 0
    while i < len(pieces):
        end = max(_largest_fit(pieces, i, max_tokens, counter), i + 1)
        if end < len(pieces):
            floor = max_tokens / 2
            for p in range(end - 1, i, -1):
                if _SENTENCE_END.search(pieces[p]):
                    if counter.count("".join(pieces[i : p + 1])) >= floor:
                        end = p + 1
                    break
        spans.append("".join(pieces[i:end]))
        i = end

    return [
        Chunk(
            id=f"{source_url}#{idx}",
            text=span,
            token_count=counter.count(span),
            source_url=source_url,
            index=idx,
        )
        for idx, span in enumerate(spans)
    ]


_DROP_TAGS = {"script", "style", "noscript", "nav", "header", "footer", "aside", "form", "template", "svg", "iframe"}
_BLOCK_TAGS = {
    "p", "div", "br", "li", "ul", "ol", "tr", "table", "section", "article", "main",
    "h1", "h2", "h3", "h4", "h5", "h6", "blockquote", "pre", "dd", "dt", "dl", "hr",
    "caption", "figcaption", "body",
}
_VOID_TAGS = {"br", "hr", "img", "meta", "link", "input", "area", "base", "col", "embed", "source", "wbr"}


class _MainTextParser(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.title_parts: list[str] = []
        self.parts: list[str] = []
        self._drop_depth = 0
        self._in_title = False
        self._seen_title = False

    def handle_starttag(self, tag, attrs):
        if tag in _DROP_TAGS and tag not in _VOID_TAGS:
            self._drop_depth += 1
        elif tag == "title":
            self._in_title = not self._seen_title
        elif tag in ("td", "th"):
            self.parts.append(" | ")
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_startendtag(self, tag, attrs):
        if tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_endtag(self, tag):
        if tag in _DROP_TAGS and self._drop_depth:
            self._drop_depth -= 1
        elif tag == "title":
            if self._in_title:
                self._seen_title = True
            self._in_title = False
        elif tag in _BLOCK_TAGS:
            self.parts.append("\n")

    def handle_data(self, data):
        if self._drop_depth:
            return
        if self._in_title:
            self.title_parts.append(data)
        else:
            self.parts.append(data)


def extract_main_text(html: str | bytes) -> dict[str, str]:
    """Strip markup and boilerplate; returns ``{"title": ..., "text": ...}``.

    Lines are kept (block elements become line breaks), spaces inside a line
    are collapsed and blank lines dropped.
    """
    if isinstance(html, bytes):
        html = html.decode("utf-8", errors="replace")
    parser = _MainTextParser()
    try:
        parser.feed(html)
        parser.close()
        title = collapse_whitespace("".join(parser.title_parts))
        raw = "".join(parser.parts)
    except Exception:  # HTMLParser rarely raises; fall back to a crude strip
        title = ""
        raw = re.sub(r"<[^>]*>", " ", html)
    lines = (re.sub(r"[ \t\r\f\v]+", " ", ln).strip() for ln in raw.split("\n"))
    lines = (re.sub(r"^\|\s*", "| ", ln) for ln in lines)
    text = "\n".join(ln for ln in lines if ln and ln != "|")
    return {"title": title, "text": text}


def split_sentences(text: str) -> list[str]:
    """Sentence split on terminal punctuation and line breaks."""
    out = []
    for line in text.split("\n"):
        for sent in re.split(r"(?<=[.!?])\s+(?=[A-Z0-9\"'(])", line.strip()):
            sent = sent.strip()
            if sent:
                out.append(sent)
    return out
