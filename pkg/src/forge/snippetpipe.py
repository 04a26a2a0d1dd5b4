"""Per-URL retrieval: candidate chunks -> dual-query BM25 -> embedding -> rerank -> snippet."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .bm25 import build_index, top_k
from .gateway.fakes import cosine
from .gateway.types import Embedder, EngineResult, Reranker, SnippetWriter, SNIPPET_MAX_WORDS
from .textseg import Chunk, count_tokens, extract_main_text, normalize, split_into_chunks

log = logging.getLogger(__name__)


class DegenerateInput(ValueError):
    """Raised when there is nothing at all to retrieve from."""


@dataclass(frozen=True)
class SearchPipelineConfig:
    results_n: int = 5
    chunk_tokens: int = 128
    k_q: int = 40
    k_s: int = 3
    embed_top: int = 8
    rerank_top: int = 3
    snippet_max_words: int = SNIPPET_MAX_WORDS

    def __post_init__(self):
        if not self.rerank_top <= self.embed_top <= self.k_q + self.k_s + 1:
            raise ValueError("need rerank_top <= embed_top <= k_q + k_s + 1")
        if self.snippet_max_words > SNIPPET_MAX_WORDS:
            raise ValueError(f"snippet_max_words cannot exceed {SNIPPET_MAX_WORDS}")


@dataclass(frozen=True)
class BrowsePipelineConfig:
    chunk_tokens: int = 2048
    k_q: int = 40
    embed_top: int = 8
    rerank_top: int = 1

    def __post_init__(self):
        if self.rerank_top != 1:
            raise ValueError("browse returns exactly one chunk (rerank_top = 1)")


@dataclass(frozen=True)
class SnippetResult:
    snippet: str
    relevance: float
    title: str
    url: str
    # candidates, lexical, embedding, rerank; diagnostics only, never serialized
    stage_sizes: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def to_wire(self) -> dict:
        return {"url": self.url, "title": self.title, "snippets": self.snippet}


@dataclass(frozen=True)
class BrowseResult:
    url: str
    document: str
    stage_sizes: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def to_wire(self) -> dict:
        return {"url": self.url, "semanticDocument": self.document}


@dataclass
class PipelineClients:
    embedder: Embedder
    reranker: Reranker
    snippet_writer: SnippetWriter | None = None


def candidate_chunks(page_text: str, snapshot: str, chunk_tokens: int, source_url: str = "") -> list[Chunk]:
    """Page chunks followed by the snapshot as a flagged seed chunk."""
    page = split_into_chunks(page_text, chunk_tokens, source_url=source_url) if page_text else []
    snap = normalize(snapshot)
    if not page and not snap:
        raise DegenerateInput("both page text and snapshot are empty")
    if snap:
        page.append(Chunk(
            id=f"{source_url}#seed", text=snap, token_count=count_tokens(snap),
            source_url=source_url, index=len(page), is_seed=True,
        ))
    return page


def lexical_stage(query: str, snapshot: str, candidates: list[Chunk], k_q: int, k_s: int) -> list[Chunk]:
    """BM25 top-k_q for the query, then top-k_s for the snapshot, deduplicated.

    The first occurrence of a chunk wins; the seed chunk is appended if neither
    list kept it. An empty snapshot contributes no second list.
    """
    if not candidates:
        return []
    index = build_index(candidates)
    ranked = [s.chunk for s in top_k(index, query, k_q)]
    if snapshot.strip():
        ranked += [s.chunk for s in top_k(index, snapshot, k_s)]
    seen: set[str] = set()
    out = []
    for c in ranked:
        if c.id not in seen:
            seen.add(c.id)
            out.append(c)
    for c in candidates:
        if c.is_seed and c.id not in seen:
            out.append(c)
            seen.add(c.id)
    return out


def _embedding_stage(query: str, chunks: list[Chunk], embed_top: int, embedder: Embedder) -> list[Chunk]:
    vecs = embedder.embed([query] + [c.text for c in chunks])
    qv, cvs = vecs[0], vecs[1:]
    sims = [cosine(qv, v) for v in cvs]
    order = sorted(range(len(chunks)), key=lambda i: (-sims[i], chunks[i].index, chunks[i].id))
    return [chunks[i] for i in order[:embed_top]]


def _rerank_stage(query: str, chunks: list[Chunk], rerank_top: int, reranker: Reranker) -> list[Chunk]:
    scores = reranker.rerank(query, [c.text for c in chunks])
    order = sorted(range(len(chunks)), key=lambda i: (-scores[i], chunks[i].index, chunks[i].id))
    return [chunks[i] for i in order[:rerank_top]]


def semantic_stage(query: str, chunks: list[Chunk], embed_top: int, rerank_top: int,
                   embedder: Embedder, reranker: Reranker) -> list[Chunk]:
    """Cosine top-``embed_top`` then reranker-ordered top-``rerank_top``."""
    if not chunks:
        raise DegenerateInput("semantic stage needs at least one chunk")
    survivors = _embedding_stage(query, chunks, embed_top, embedder)
    return _rerank_stage(query, survivors, rerank_top, reranker)


def search_result_pipeline(query: str, engine_result: EngineResult, page: str | None,
                           cfg: SearchPipelineConfig, clients: PipelineClients) -> SnippetResult:
    """Turn one engine hit (plus its crawled HTML, if any) into a snippet result.

    ``page`` is raw HTML; None means the crawl failed and only the snapshot is used.
    """
    text = extract_main_text(page)["text"] if page else ""
    cands = candidate_chunks(text, engine_result.snapshot, cfg.chunk_tokens, engine_result.url)
    lexical = lexical_stage(query, engine_result.snapshot, cands, cfg.k_q, cfg.k_s)
    embedded = _embedding_stage(query, lexical, cfg.embed_top, clients.embedder)
    reranked = _rerank_stage(query, embedded, cfg.rerank_top, clients.reranker)
    context = "\n".join(c.text.strip() for c in reranked)
    if clients.snippet_writer is None:
        raise ValueError("search pipeline needs a snippet writer")
    verdict = clients.snippet_writer.write_snippet(query, context)
    snippet = verdict.snippet
    if len(snippet.split()) > cfg.snippet_max_words:
        log.warning("snippet for %s over %d words, truncated", engine_result.url, cfg.snippet_max_words)
        snippet = " ".join(snippet.split()[: cfg.snippet_max_words])
    return SnippetResult(
        snippet=snippet,
        relevance=verdict.relevance,
        title=engine_result.title,
        url=engine_result.url,
        stage_sizes=(len(cands), len(lexical), len(embedded), len(reranked)),
    )


def browse_pipeline(url: str, page: str, title: str, cfg: BrowsePipelineConfig,
                    clients: PipelineClients) -> BrowseResult:
    """Long chunks ranked with the page title as query; returns the single best chunk.

    ``page`` is raw HTML. An empty ``title`` falls back to the extracted one.
    """
    extracted = extract_main_text(page) if page else {"title": "", "text": ""}
    chunks = split_into_chunks(extracted["text"], cfg.chunk_tokens, source_url=url)
    if not chunks:
        raise DegenerateInput(f"page {url} has no text")
    query = title or extracted["title"] or url
    lexical = [s.chunk for s in top_k(build_index(chunks), query, cfg.k_q)]
    embedded = _embedding_stage(query, lexical, cfg.embed_top, clients.embedder)
    best = _rerank_stage(query, embedded, cfg.rerank_top, clients.reranker)
    return BrowseResult(
        url=url,
        document=best[0].text.strip(),
        stage_sizes=(len(chunks), len(lexical), len(embedded), len(best)),
    )
