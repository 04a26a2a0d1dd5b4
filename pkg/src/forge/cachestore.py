"""Key-value cache for intermediate tool results (engine hits, pages, snippets, browse docs)."""

from __future__ import annotations

import enum
import hashlib
import json
import os
import threading
import time
from collections import Counter, OrderedDict
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

from .textseg import collapse_whitespace


class Namespace(str, enum.Enum):
    ENGINE = "engine"
    PAGE = "page"
    SNIPPET = "snippet"
    BROWSE = "browse"


@dataclass(frozen=True)
class CacheKey:
    namespace: Namespace
    digest: str

    def __str__(self) -> str:
        return f"forge:{self.namespace.value}:{self.digest}"


def _norm_part(part: Any) -> Any:
    if isinstance(part, str):
        return collapse_whitespace(part)
    if isinstance(part, (list, tuple)):
        return [_norm_part(p) for p in part]
    return part


def make_key(namespace: Namespace | str, *parts: Any) -> CacheKey:
    """Digest of the normalized request tuple.

    Strings are trimmed and internal whitespace collapsed; case is preserved.
    """
    ns = Namespace(namespace)
    blob = json.dumps([ns.value, *(_norm_part(p) for p in parts)], ensure_ascii=False, separators=(",", ":"))
    return CacheKey(ns, hashlib.sha256(blob.encode("utf-8")).hexdigest())


def engine_key(query: str, region_lang: str) -> CacheKey:
    return make_key(Namespace.ENGINE, query, region_lang)


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    by_namespace: Counter = field(default_factory=Counter)

    @property
    def lookups(self) -> int:
        return self.hits + self.misses

    def hit_rate(self, namespace: Namespace | str | None = None) -> float:
        if namespace is None:
            h, m = self.hits, self.misses
        else:
            ns = Namespace(namespace).value
            h, m = self.by_namespace[f"{ns}.hit"], self.by_namespace[f"{ns}.miss"]
        return h / (h + m) if h + m else 0.0

    def to_dict(self) -> dict:
        return {"hits": self.hits, "misses": self.misses, "by_namespace": dict(sorted(self.by_namespace.items()))}


class Cache(Protocol):
    stats: CacheStats

    def get(self, key: CacheKey) -> Any | None: ...

    def put(self, key: CacheKey, value: Any) -> None: ...


class _StatsMixin:
    def _record(self, key: CacheKey, hit: bool) -> None:
        tag = "hit" if hit else "miss"
        with self._stats_lock:
            if hit:
                self.stats.hits += 1
            else:
                self.stats.misses += 1
            self.stats.by_namespace[f"{key.namespace.value}.{tag}"] += 1


class MemoryCache(_StatsMixin):
    """In-process store. Values are kept as JSON text, so every get returns a fresh copy.

    ``max_entries`` turns on LRU eviction; ``ttl`` (seconds) expires entries.
    Both are off by default.
    """

    def __init__(self, max_entries: int | None = None, ttl: float | None = None,
                 clock: Callable[[], float] = time.monotonic):
        self.max_entries = max_entries
        self.ttl = ttl
        self._clock = clock
        self._data: OrderedDict[CacheKey, tuple[str, float | None]] = OrderedDict()
        self._lock = threading.Lock()
        self._stats_lock = threading.Lock()
        self.stats = CacheStats()

    def get(self, key: CacheKey) -> Any | None:
        with self._lock:
            entry = self._data.get(key)
            if entry is not None and entry[1] is not None and entry[1] <= self._clock():
                del self._data[key]
                entry = None
            if entry is not None and self.max_entries:
                self._data.move_to_end(key)
        self._record(key, entry is not None)
        return None if entry is None else json.loads(entry[0])

    def put(self, key: CacheKey, value: Any) -> None:
        if value is None:
            raise ValueError("None is not cacheable (it means 'miss')")
        blob = json.dumps(value, ensure_ascii=False)
        expiry = self._clock() + self.ttl if self.ttl else None
        with self._lock:
            self._data[key] = (blob, expiry)
            self._data.move_to_end(key)
            if self.max_entries:
                while len(self._data) > self.max_entries:
                    self._data.popitem(last=False)

    def __len__(self) -> int:
        return len(self._data)


class RedisCache(_StatsMixin):
    """Cache backed by an external Redis-compatible server (FORGE_CACHE_URL).

    Any object with ``get(str) -> bytes|None`` and ``set(str, bytes, ex=...)``
    can be passed as ``client``, which is how the tests drive it.
    """

    def __init__(self, client: Any = None, url: str | None = None, ttl: int | None = None):
        if client is None:
            try:
                import redis  # type: ignore[import-not-found]
            except ImportError as exc:  # pragma: no cover - depends on optional extra
                raise RuntimeError("RedisCache needs the 'redis' package (pip install artifact[redis])") from exc
            client = redis.Redis.from_url(url or os.environ["FORGE_CACHE_URL"])
        self._client = client
        self.ttl = ttl
        self._stats_lock = threading.Lock()
        self.stats = CacheStats()

    def get(self, key: CacheKey) -> Any | None:
        raw = self._client.get(str(key))
        self._record(key, raw is not None)
        if raw is None:
            return None
        return json.loads(raw.decode("utf-8") if isinstance(raw, bytes) else raw)

    def put(self, key: CacheKey, value: Any) -> None:
        blob = json.dumps(value, ensure_ascii=False).encode("utf-8")
        self._client.set(str(key), blob, ex=self.ttl)


def cache_from_env() -> MemoryCache | RedisCache:
    url = os.environ.get("FORGE_CACHE_URL")
    return RedisCache(url=url) if url else MemoryCache()


def get_or_compute(cache: Cache, key: CacheKey, compute: Callable[[], Any]) -> tuple[Any, bool]:
    """Returns ``(value, was_hit)``; stores the computed value on a miss."""
    value = cache.get(key)
    if value is not None:
        return value, True
    value = compute()
    cache.put(key, value)
    return value, False
