"""Entity nodes and trees: fact extraction from pages, NER-driven child expansion."""

from __future__ import annotations

import logging
import random
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Protocol, Sequence

from ..gateway.types import ClientError, Crawler, EntityRecognizer, Mention
from ..textseg import extract_main_text, split_sentences

log = logging.getLogger(__name__)


class BarrenRoot(ValueError):
    """The seed entity's page yielded no facts."""


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int = 3
    branching: int = 3
    facts_per_node: int = 5
    rng_seed: int = 0

    def __post_init__(self):
        for name in ("max_depth", "branching", "facts_per_node"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass(eq=False)
class EntityNode:
    name: str
    url: str
    facts: list[str] = field(default_factory=list)
    fuzzed_facts: list[str] = field(default_factory=list)
    constraints: list[str] = field(default_factory=list)
    children: list["EntityNode"] = field(default_factory=list)
    parent: "EntityNode | None" = field(default=None, repr=False)
    category: str = ""
    barren: bool = False
    usable: bool = True

    def add_child(self, child: "EntityNode") -> "EntityNode":
        child.parent = self
        self.children.append(child)
        return child

    def iter_nodes(self) -> Iterator["EntityNode"]:
        """Breadth-first over this node's subtree, itself first."""
        queue = deque([self])
        while queue:
            node = queue.popleft()
            yield node
            queue.extend(node.children)

    def ancestors(self) -> list["EntityNode"]:
        out, u = [], self.parent
        while u is not None:
            out.append(u)
            u = u.parent
        return out

    @property
    def depth(self) -> int:
        return len(self.ancestors()) + 1

    def to_dict(self) -> dict:
        return {
            "name": self.name, "url": self.url, "category": self.category,
            "facts": self.facts, "fuzzed_facts": self.fuzzed_facts, "constraints": self.constraints,
            "usable": self.usable, "children": [c.to_dict() for c in self.children],
        }


@dataclass(eq=False)
class EntityTree:
    root: EntityNode

    def nodes(self) -> list[EntityNode]:
        return list(self.root.iter_nodes())

    def __len__(self) -> int:
        return sum(1 for _ in self.root.iter_nodes())

    @property
    def height(self) -> int:
        return max(n.depth for n in self.root.iter_nodes())

    def to_dict(self) -> dict:
        return self.root.to_dict()


class FactExtractor(Protocol):
    def extract(self, name: str, text: str, limit: int) -> list[str]: ...


def name_variants(name: str) -> list[str]:
    """Full name, the part before a comma, and a person's surname."""
    out = [name]
    head = name.split(",")[0].strip()
    if head and head != name:
        out.append(head)
    words = name.split()
    if "," not in name and len(words) >= 2 and words[-1][:1].isupper():
        out.append(words[-1])
    return out


class SentenceFactExtractor:
    """Facts are page sentences (in page order) naming the entity or another known entity.

    Table rows, headings and fragments under ``min_words`` words are skipped.
    Every fact is a verbatim substring of the page text.
    """

    def __init__(self, ner: EntityRecognizer | None = None, min_words: int = 4):
        self.ner = ner
        self.min_words = min_words

    def extract(self, name: str, text: str, limit: int) -> list[str]:
        variants = [re.compile(r"(?<!\w)" + re.escape(v) + r"(?!\w)") for v in name_variants(name)]
        facts: list[str] = []
        for sent in split_sentences(text):
            if len(facts) >= limit:
                break
            if sent.startswith("|") or len(sent.split()) < self.min_words or sent in facts:
                continue
            named = any(p.search(sent) for p in variants)
            if named or (self.ner is not None and self.ner.mentions(sent)):
                facts.append(sent)
        return facts


def build_node(name: str, url: str, crawler: Crawler, cfg: TreeConfig,
               fact_extractor: FactExtractor | None = None, category: str = "") -> EntityNode:
    """Fetch the entity's page and extract up to ``facts_per_node`` facts.

    A crawl failure or a page with no usable facts gives a barren node.
    """
    extractor = fact_extractor or SentenceFactExtractor()
    node = EntityNode(name=name, url=url, category=category)
    try:
        html = crawler.crawl(url)
    except ClientError as exc:
        log.info("no page for %s (%s); node is barren", name, exc)
        node.barren = True
        return node
    node.facts = extractor.extract(name, extract_main_text(html)["text"], cfg.facts_per_node)
    node.barren = not node.facts
    return node


def expand_children(node: EntityNode, ner: EntityRecognizer, cfg: TreeConfig,
                    rng: random.Random) -> list[EntityNode]:
    """Sample up to ``branching`` distinct entities mentioned in the node's facts.

    Candidates are deduplicated by name and exclude the node, its ancestors and
    anything without a url. Returned nodes are unbuilt (no facts) and unattached.
    """
    if not node.facts:
        return []
    taken = {node.name, *(a.name for a in node.ancestors())}
    taken_urls = {node.url, *(a.url for a in node.ancestors())}
    pool: dict[str, Mention] = {}
    for fact in node.facts:
        for m in ner.mentions(fact):
            if m.name not in taken and m.url and m.url not in taken_urls and m.name not in pool:
                pool[m.name] = m
    names = sorted(pool)
    picked = rng.sample(names, min(cfg.branching, len(names)))
    return [EntityNode(name=n, url=pool[n].url, category=pool[n].category) for n in picked]


def tree_rng(cfg: TreeConfig, seed_name: str) -> random.Random:
    return random.Random(f"{cfg.rng_seed}:{seed_name}")


def build_tree(name: str, url: str, cfg: TreeConfig, crawler: Crawler, ner: EntityRecognizer,
               fact_extractor: FactExtractor | None = None, category: str = "") -> EntityTree:
    """Breadth-first expansion to ``max_depth`` levels (the root is level 1).

    Barren children are dropped; a barren root raises ``BarrenRoot``.
    """
    extractor = fact_extractor or SentenceFactExtractor(ner)
    rng = tree_rng(cfg, name)
    root = build_node(name, url, crawler, cfg, extractor, category)
    if root.barren:
        raise BarrenRoot(f"seed {name!r} has no facts")
    frontier = [root]
    for _level in range(1, cfg.max_depth):
        nxt = []
        for node in frontier:
            for stub in expand_children(node, ner, cfg, rng):
                child = build_node(stub.name, stub.url, crawler, cfg, extractor, stub.category)
                if child.barren:
                    continue
                nxt.append(node.add_child(child))
        frontier = nxt
    return EntityTree(root)


def ensure_names(nodes: Sequence[EntityNode]) -> dict[str, EntityNode]:
    return {n.name: n for n in nodes}
