"""End-to-end synthesis: seeds to filtered QA items."""

from __future__ import annotations

import configparser
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..gateway.types import Crawler, EntityRecognizer, QuestionGenerator, Rephraser, Solver
from .constraints import ShallowAgent, SpaceEstimator, select_constraints
from .fuzz import fuzzify, self_mentions
from .qa import MissingAttribute, QaItem, difficulty_filter, find_attribute, generate_question
from .subtree import extract_subtree
from .tree import BarrenRoot, EntityTree, TreeConfig, build_tree

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    tree: TreeConfig = field(default_factory=TreeConfig)
    attribute: str = "Debut team"
    subtree_budget: int = 4
    samples_per_tree: int = 2
    constraint_budget: int = 10
    max_constraints: int = 3
    filter_rounds: int = 4
    seed: int = 0
    workers: int = 4

    def __post_init__(self):
        for name in ("subtree_budget", "samples_per_tree", "filter_rounds", "workers", "max_constraints"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.constraint_budget < 0:
            raise ValueError("constraint_budget must be >= 0")

    @classmethod
    def from_file(cls, path: str | Path) -> "SynthConfig":
        parser = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser: configparser.ConfigParser) -> "SynthConfig":
        """Reads ``[tree]`` (TreeConfig fields) and ``[synth]`` (the rest)."""
        tree = TreeConfig()
        if parser.has_section("tree"):
            tree = replace(tree, **{k: int(v) for k, v in parser.items("tree")})
        cfg = cls(tree=tree)
        if parser.has_section("synth"):
            kinds = {f.name: f.type for f in fields(cls)}
            updates = {}
            for k, v in parser.items("synth"):
                if k not in kinds or k == "tree":
                    raise ValueError(f"unknown synth option {k!r}")
                updates[k] = v if kinds[k] == "str" else int(v)
            cfg = replace(cfg, **updates)
        return cfg


@dataclass
class SynthClients:
    crawler: Crawler
    ner: EntityRecognizer
    rephraser: Rephraser
    generator: QuestionGenerator
    solver: Solver
    gt_space: SpaceEstimator
    shallow_agent: ShallowAgent


def prepare_tree(tree: EntityTree, cfg: SynthConfig, clients: SynthClients, attribute: str | None = None) -> None:
    """Fuzzify every node's facts and select its constraints, in place.

    The root's ``attribute`` fact (the answer) is never offered as a constraint.
    """
    for node in tree.nodes():
        node.fuzzed_facts = fuzzify(node.facts, clients.ner, clients.rephraser, seed=cfg.seed,
                                    extra_mentions=self_mentions(node.name, node.category))
        exclude = ()
        if node is tree.root and attribute:
            exclude = (find_attribute(node, attribute)[0],)
        select_constraints(node, clients.gt_space, clients.shallow_agent, cfg.constraint_budget,
                           cfg.max_constraints, exclude)


def items_for_seed(seed: Mapping[str, str], cfg: SynthConfig, clients: SynthClients) -> list[QaItem]:
    name, url = seed["name"], seed["url"]
    attribute = seed.get("attribute") or cfg.attribute
    try:
        tree = build_tree(name, url, cfg.tree, clients.crawler, clients.ner, category=seed.get("category", ""))
        find_attribute(tree.root, attribute)
    except (BarrenRoot, MissingAttribute) as exc:
        log.info("skipping seed %s: %s", name, exc)
        return []
    prepare_tree(tree, cfg, clients, attribute)
    if not tree.root.usable:
        log.info("skipping seed %s: no constraint set defeats the shallow agent", name)
        return []
    rng = random.Random(f"{cfg.seed}:{name}:subtree")
    items: dict[str, QaItem] = {}
    for _ in range(cfg.samples_per_tree):
        item = generate_question(extract_subtree(tree, cfg.subtree_budget, rng), attribute, clients.generator)
        items.setdefault(item.question, item)
    return list(items.values())


def generate_items(seeds: Iterable[Mapping[str, str]], cfg: SynthConfig, clients: SynthClients) -> list[QaItem]:
    """Unfiltered items for every seed. Seeds run in parallel; output follows seed order."""
    seeds = list(seeds)
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        per_seed: Sequence[list[QaItem]] = list(pool.map(lambda s: items_for_seed(s, cfg, clients), seeds))
    return [item for group in per_seed for item in group]


def synthesize(seeds: Iterable[Mapping[str, str]], cfg: SynthConfig, clients: SynthClients) -> list[QaItem]:
    """Build, fuzzify, sample and question each seed, then drop items the solver never answers."""
    return difficulty_filter(generate_items(seeds, cfg, clients), clients.solver, cfg.filter_rounds)


def answer_key_solver(items: Sequence[QaItem], pattern: Sequence[int] = (1,)):
    """A scripted solver that knows every item's answer and succeeds per ``pattern``."""
    from ..gateway.fakes import ScriptedSolver

    return ScriptedSolver({it.question: it.answer for it in items}, default_pattern=pattern)


def fixture_synth_clients(corpus=None, seed: int = 0, solver: Solver | None = None) -> SynthClients:
    """Offline clients over the bundled fixture web.

    The default solver knows nothing and therefore filters everything; pass one
    built from the generated items (see ``answer_key_solver``) to keep them.
    """
    from ..gateway.fakes import (
        DictionaryNer, FakeCrawler, FixtureCorpus, ScriptedSolver, TemplateQuestionGenerator, TemplateRephraser,
    )
    from ..textseg import extract_main_text
    from .constraints import LexicalShallowAgent, OverlapSpaceEstimator

    corpus = corpus or FixtureCorpus.load()
    texts = {}
    for e in corpus.entities:
        if e.get("url") in corpus.pages:
            texts[e["name"]] = extract_main_text(corpus.pages[e["url"]])["text"]
    return SynthClients(
        crawler=FakeCrawler(corpus.pages),
        ner=DictionaryNer(corpus.entities),
        rephraser=TemplateRephraser(seed),
        generator=TemplateQuestionGenerator(),
        solver=solver or ScriptedSolver({}),
        gt_space=OverlapSpaceEstimator(texts),
        shallow_agent=LexicalShallowAgent(texts),
    )
