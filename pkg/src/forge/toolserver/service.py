from __future__ import annotations

import logging
import threading
from collections import Counter
from concurrent.futures import ThreadPoolExecutor, wait
from dataclasses import dataclass
from typing import Protocol, Sequence

from ..cachestore import Cache, MemoryCache, Namespace, engine_key, make_key
from ..gateway.types import ClientError, Crawler, EngineResult, ErrorKind, SearchEngine, is_url
from ..snippetpipe import (
    BrowseResult,
    DegenerateInput,
    PipelineClients,
    SnippetResult,
    browse_pipeline,
    search_result_pipeline,
)
from .config import ToolServerConfig
from .dispatch import FAST, DispatchDecision, FastLaneDispatcher

log = logging.getLogger(__name__)


class ToolError(Exception):
    """Request-level failure carrying the HTTP status to report."""

    def __init__(self, status: int, kind: str, detail: str = ""):
        super().__init__(f"{status} {kind}: {detail}")
        self.status = status
        self.kind = kind
        self.detail = detail

    def to_wire(self) -> dict:
        return {"error": self.kind, "detail": self.detail}


@dataclass(frozen=True)
class SearchRequest:
    query: str
    region_lang: str | None = None


@dataclass(frozen=True)
class BrowseRequest:
    url: str


class FastLaneClient(Protocol):
    """A paid search service that returns finished snippets directly."""

    def search_snippets(self, query: str, region_lang: str) -> list[SnippetResult]: ...


def _engine_lookup(query: str, region: str, engines: Sequence[SearchEngine]) -> tuple[list[EngineResult], int]:
    """First non-empty result list in priority order, plus the number of engines that raised."""
    failures = 0
    for engine in engines:
        try:
            results = engine.search(query, region)
        except ClientError as exc:
            failures += 1
            log.warning("engine %s failed (%s); treating as empty", getattr(engine, "name", "?"), exc)
            continue
        if results:
            return list(results), failures
        log.info("engine %s returned nothing for %r, falling back", getattr(engine, "name", "?"), query)
    return [], failures


def engine_with_fallback(query: str, region: str, engines: Sequence[SearchEngine]) -> list[EngineResult]:
    if not engines:
        raise ValueError("need at least one engine")
    return _engine_lookup(query, region, engines)[0]


class ToolServer:
    """search/browse over engines, crawler and model clients, with caching.

    All intermediate results go through ``cache``: engine hits per
    (query, region), crawled pages and browse documents per url, snippets per
    (query, url, snapshot). Per-URL pipelines of one search run concurrently.
    """

    def __init__(self, engines: Sequence[SearchEngine], crawler: Crawler, clients: PipelineClients,
                 cache: Cache | None = None, config: ToolServerConfig | None = None,
                 fast_lane: FastLaneClient | None = None, dispatcher: FastLaneDispatcher | None = None):
        if not engines:
            raise ValueError("need at least one engine")
        self.engines = list(engines)
        self.crawler = crawler
        self.clients = clients
        self.cache = cache if cache is not None else MemoryCache()
        self.config = config or ToolServerConfig()
        self.fast_lane = fast_lane
        self.dispatcher = dispatcher or FastLaneDispatcher(
            self.config.fast_lane_capacity, self.config.fast_lane_target_share
        )
        self._pool = ThreadPoolExecutor(max_workers=self.config.workers, thread_name_prefix="forge-pipe")
        self._counts: Counter = Counter()
        self._lock = threading.Lock()

    def _count(self, key: str, n: int = 1) -> None:
        with self._lock:
            self._counts[key] += n

    def close(self) -> None:
        self._pool.shutdown(wait=False)

    def dispatch(self, req: SearchRequest | BrowseRequest | None = None) -> DispatchDecision:
        decision = self.dispatcher.dispatch()
        self._count(f"lane.{decision.lane}")
        return decision

    # -- search --------------------------------------------------------------

    def handle_search(self, req: SearchRequest) -> list[SnippetResult]:
        query = req.query.strip() if req.query else ""
        if not query:
            raise ToolError(400, "bad_request", "query must be non-empty")
        region = req.region_lang or self.config.region_lang
        self._count("search.requests")

        ekey = engine_key(query, region)
        entry = self.cache.get(ekey)
        if entry is None:
            entry = self._fresh_engine_entry(query, region)
            if entry is None:
                raise ToolError(503, "unavailable", "every search engine failed")
            self.cache.put(ekey, entry)

        if entry["source"] == FAST:
            return [SnippetResult(**r) for r in entry["results"]][: self.config.results_n]

        hits = [EngineResult.from_dict(r) for r in entry["results"]][: self.config.results_n]
        futures = [self._pool.submit(self._snippet_for, query, hit) for hit in hits]
        done, _ = wait(futures, timeout=self.config.request_timeout)
        out = []
        for hit, fut in zip(hits, futures):
            if fut not in done:
                self._count("search.timeouts")
                log.warning("pipeline for %s exceeded the request budget; dropped", hit.url)
                continue
            out.append(fut.result())
        return out

    def _fresh_engine_entry(self, query: str, region: str) -> dict | None:
        decision = self.dispatch()
        if decision.lane == FAST and self.fast_lane is not None:
            try:
                results = self.fast_lane.search_snippets(query, region)
                return {"source": FAST, "results": [
                    {"snippet": r.snippet, "relevance": r.relevance, "title": r.title, "url": r.url} for r in results
                ]}
            except ClientError as exc:
                log.warning("fast lane failed (%s); using the standard lane", exc)
                self._count("lane.fast_failed")
        results, failures = _engine_lookup(query, region, self.engines)
        self._count("engine.failures", failures)
        if not results and failures == len(self.engines):
            return None
        return {"source": "engine", "results": [r.to_dict() for r in results]}

    def _page(self, url: str) -> str | None:
        """Raw HTML via the page cache; None when the page cannot be fetched."""
        pkey = make_key(Namespace.PAGE, url)
        entry = self.cache.get(pkey)
        if entry is None:
            try:
                entry = {"html": self.crawler.crawl(url)}
            except ClientError as exc:
                self._count("crawl.failures")
                if exc.kind is not ErrorKind.UNAVAILABLE:
                    return None  # transient; do not remember
                entry = {"error": exc.kind.value}
            self.cache.put(pkey, entry)
        return entry.get("html")

    def _snippet_for(self, query: str, hit: EngineResult) -> SnippetResult:
        skey = make_key(Namespace.SNIPPET, query, hit.url, hit.snapshot)
        cached = self.cache.get(skey)
        if cached is not None:
            return SnippetResult(**cached)
        page = self._page(hit.url)
        try:
            res = search_result_pipeline(query, hit, page, self.config.pipeline, self.clients)
        except (ClientError, DegenerateInput) as exc:
            # model services down or nothing to read: hand back the engine snapshot, uncached
            self._count("search.degraded")
            log.warning("pipeline for %s degraded to snapshot: %s", hit.url, exc)
            words = hit.snapshot.split()[: self.config.pipeline.snippet_max_words]
            return SnippetResult(" ".join(words), 0.0, hit.title, hit.url)
        self.cache.put(skey, {"snippet": res.snippet, "relevance": res.relevance, "title": res.title, "url": res.url})
        return res

    # -- browse --------------------------------------------------------------

    def handle_browse(self, req: BrowseRequest) -> BrowseResult:
        url = (req.url or "").strip()
        if not is_url(url):
            raise ToolError(400, "bad_request", f"not a URL: {url!r}")
        self._count("browse.requests")
        bkey = make_key(Namespace.BROWSE, url)
        cached = self.cache.get(bkey)
        if cached is not None:
            return BrowseResult(url=cached["url"], document=cached["document"])
        page = self._page(url)
        if page is None:
            raise ToolError(404, "unavailable", f"could not fetch {url}")
        try:
            res = browse_pipeline(url, page, "", self.config.browse, self.clients)
        except DegenerateInput as exc:
            raise ToolError(404, "unavailable", str(exc)) from None
        except ClientError as exc:
            raise ToolError(503, exc.kind.value, exc.detail) from None
        self.cache.put(bkey, {"url": res.url, "document": res.document})
        return res

    # -- wire helpers -----------------------------------------------------------

    def search_wire(self, query: str, region_lang: str | None = None) -> list[dict]:
        return [r.to_wire() for r in self.handle_search(SearchRequest(query, region_lang))]

    def browse_wire(self, url: str) -> dict:
        return self.handle_browse(BrowseRequest(url)).to_wire()

    def stats(self) -> dict:
        with self._lock:
            counts = dict(sorted(self._counts.items()))
        return {
            "cache": self.cache.stats.to_dict(),
            "lanes": {"fast": counts.get("lane.fast", 0), "standard": counts.get("lane.standard", 0)},
            "counters": counts,
        }
