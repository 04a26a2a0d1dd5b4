"""The search/browse tool service."""

from __future__ import annotations

import os
from typing import Iterable

from ..cachestore import Cache
from ..gateway.fakes import (
    ExtractiveSnippetWriter,
    FakeCrawler,
    FakeEngine,
    FixtureCorpus,
    HashingEmbedder,
    OverlapReranker,
)
from ..snippetpipe import PipelineClients
from .config import ToolServerConfig
from .dispatch import DispatchDecision, FastLaneDispatcher
from .service import (
    BrowseRequest,
    SearchRequest,
    ToolError,
    ToolServer,
    engine_with_fallback,
)


def fixture_clients(seed: int = 0) -> PipelineClients:
    return PipelineClients(
        embedder=HashingEmbedder(dim=64, seed=seed),
        reranker=OverlapReranker(),
        snippet_writer=ExtractiveSnippetWriter(),
    )


def build_fixture_server(corpus: FixtureCorpus | None = None, blocked: Iterable[str] = (),
                         config: ToolServerConfig | None = None, cache: Cache | None = None,
                         seed: int = 0) -> ToolServer:
    """A fully offline server over the bundled fixture web."""
    corpus = corpus or FixtureCorpus.load()
    config = config or ToolServerConfig()
    engines = [FakeEngine(corpus, name=config.engine_priority[0])]
    return ToolServer(engines, FakeCrawler(corpus.pages, blocked), fixture_clients(seed), cache=cache, config=config)


def build_http_server(config: ToolServerConfig, cache: Cache | None = None) -> ToolServer:
    """A server wired to real services through the FORGE_* environment variables.

    FORGE_ENGINE_URL may contain ``{engine}``, filled with each name in
    ``engine_priority``.
    """
    from ..gateway.http import HttpCrawler, HttpEmbedder, HttpEngine, HttpReranker, LlmSnippetWriter

    template = os.environ["FORGE_ENGINE_URL"]
    key = os.environ.get("FORGE_API_KEY")
    engines = [HttpEngine(template.format(engine=name), name=name, api_key=key) for name in config.engine_priority]
    clients = PipelineClients(
        embedder=HttpEmbedder.from_env(),
        reranker=HttpReranker.from_env(),
        snippet_writer=LlmSnippetWriter.from_env(),
    )
    return ToolServer(engines, HttpCrawler(), clients, cache=cache, config=config)


__all__ = [
    "BrowseRequest", "DispatchDecision", "FastLaneDispatcher", "SearchRequest", "ToolError",
    "ToolServer", "ToolServerConfig", "build_fixture_server", "build_http_server",
    "engine_with_fallback", "fixture_clients",
]
