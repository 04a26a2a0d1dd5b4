"""ToolServerConfig and its INI-style config file.

Example file (every key optional)::

    [server]
    region_lang = us-en
    engine_priority = google, brave, bing
    fast_lane_capacity = 0        # requests/second; 0 disables the fast lane
    fast_lane_target_share = 0.15
    results_n = 5
    request_timeout = 30          # seconds per /search request
    workers = 8                   # concurrent per-URL pipelines

    [search]
    chunk_tokens = 128
    k_q = 40
    k_s = 3
    embed_top = 8
    rerank_top = 3
    snippet_max_words = 60

    [browse]
    chunk_tokens = 2048
    k_q = 40
    embed_top = 8
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from ..snippetpipe import BrowsePipelineConfig, SearchPipelineConfig


@dataclass(frozen=True)
class ToolServerConfig:
    region_lang: str = "us-en"
    engine_priority: tuple[str, ...] = ("google", "brave", "bing")
    fast_lane_capacity: float = 0.0
    fast_lane_target_share: float = 0.15
    results_n: int = 5
    request_timeout: float = 30.0
    workers: int = 8
    pipeline: SearchPipelineConfig = field(default_factory=SearchPipelineConfig)
    browse: BrowsePipelineConfig = field(default_factory=BrowsePipelineConfig)

    def __post_init__(self):
        if not self.engine_priority:
            raise ValueError("engine_priority must be non-empty")
        if not 0.0 <= self.fast_lane_target_share <= 1.0:
            raise ValueError("fast_lane_target_share must lie in [0, 1]")
        if self.results_n < 1:
            raise ValueError("results_n must be >= 1")
        if self.fast_lane_capacity < 0:
            raise ValueError("fast_lane_capacity must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "ToolServerConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        return cls.from_parser(parser)

    @classmethod
    def from_string(cls, text: str) -> "ToolServerConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        parser.read_string(text)
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser) -> "ToolServerConfig":
        known = {s for s in parser.sections()}
        unknown = known - {"server", "search", "browse"}
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        cfg = cls()
        if parser.has_section("server"):
            cfg = replace(cfg, **_typed(cls, parser["server"], skip={"pipeline", "browse"}))
        if parser.has_section("search"):
            cfg = replace(cfg, pipeline=SearchPipelineConfig(**_typed(SearchPipelineConfig, parser["search"])))
        if parser.has_section("browse"):
            cfg = replace(cfg, browse=BrowsePipelineConfig(**_typed(BrowsePipelineConfig, parser["browse"])))
        return cfg


def _typed(dc: type, section: configparser.SectionProxy, skip: set[str] = frozenset()) -> dict:
    kinds = {f.name: f.type for f in fields(dc) if f.name not in skip}
    out = {}
    for key, raw in section.items():
        if key not in kinds:
            raise ValueError(f"unknown config key {section.name}.{key}")
        kind = str(kinds[key])
        if "tuple" in kind:
            out[key] = tuple(p.strip() for p in raw.split(",") if p.strip())
        elif kind == "int":
            out[key] = int(raw)
        elif kind == "float":
            out[key] = float(raw)
        else:
            out[key] = raw.strip()
    return out
