"""Greedy constraint selection against a shallow-search oracle."""

from __future__ import annotations

from typing import Callable, Collection, Mapping, Sequence

from ..bm25 import build_index, top_k
from ..gateway.fakes import TEMPLATE_WORDS, content_terms, term_overlap
from ..textseg import Chunk
from .tree import EntityNode

SpaceEstimator = Callable[[Sequence[str]], int]
ShallowAgent = Callable[[Sequence[str]], Collection[str]]


def select_constraints(node: EntityNode, gt_space: SpaceEstimator, shallow_agent: ShallowAgent,
                       budget: int, max_constraints: int | None = None, exclude: Collection[int] = ()) -> list[str]:
    """Pick fuzzed facts that shrink the answer space while defeating the shallow agent.

    Greedy forward selection: at each step candidate facts are tried in order
    of the estimated space size after adding them; the first one whose
    constraint set the shallow agent cannot resolve to ``node.name`` is kept.
    Selection ends when no candidate shrinks the space further, none defeats
    the agent, ``max_constraints`` is reached or ``budget`` agent calls are
    spent. Fact indices in ``exclude`` are never chosen. An empty result marks
    the node unusable.
    """
    facts = list(node.fuzzed_facts)
    chosen: list[str] = []
    remaining = [i for i in range(len(facts)) if i not in set(exclude)]
    calls = 0
    current = None
    while remaining and (max_constraints is None or len(chosen) < max_constraints):
        sizes = {i: gt_space(chosen + [facts[i]]) for i in remaining}
        pick = None
        for i in sorted(remaining, key=lambda j: (sizes[j], j)):
            if current is not None and sizes[i] >= current:
                break
            if calls >= budget:
                break
            calls += 1
            if node.name not in shallow_agent(chosen + [facts[i]]):
                pick = i
                break
        if pick is None:
            break
        chosen.append(facts[pick])
        remaining.remove(pick)
        current = sizes[pick]
    node.constraints = chosen
    node.usable = bool(chosen)
    return chosen


class OverlapSpaceEstimator:
    """|q(K)|: entities whose text covers at least ``threshold`` of every constraint's terms."""

    def __init__(self, texts: Mapping[str, str], threshold: float = 0.5):
        self.texts = dict(texts)
        self.threshold = threshold

    def __call__(self, constraints: Sequence[str]) -> int:
        return sum(
            all(term_overlap(c, text) >= self.threshold for c in constraints)
            for text in self.texts.values()
        )


class LexicalShallowAgent:
    """One short keyword search built from the clues.

    The query keeps the first ``query_terms`` content terms of the joined
    clues. The agent names the top hit only when it beats the runner-up by
    ``margin`` times, that is when a quick look at the results would settle it.
    """

    def __init__(self, texts: Mapping[str, str], margin: float = 1.5, query_terms: int = 6):
        self.margin = margin
        self.query_terms = query_terms
        chunks = [Chunk(id=n, text=t, token_count=len(t.split()), source_url="", index=i)
                  for i, (n, t) in enumerate(texts.items())]
        self.index = build_index(chunks)

    def __call__(self, constraints: Sequence[str]) -> set[str]:
        terms = [t for t in content_terms(" ".join(constraints)) if t not in TEMPLATE_WORDS]
        hits = top_k(self.index, " ".join(terms[: self.query_terms]), 2)
        if not hits or hits[0].score <= 0:
            return set()
        if len(hits) > 1 and hits[0].score < self.margin * hits[1].score:
            return set()
        return {hits[0].chunk.id}
