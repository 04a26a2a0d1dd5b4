"""Question generation over a subtree and the solver-based difficulty filter."""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field
from typing import Sequence

from ..gateway.fakes import answer_matches, term_overlap
from ..gateway.types import QuestionGenerator, Solver
from .tree import EntityNode, EntityTree


class MissingAttribute(ValueError):
    pass


@dataclass
class QaItem:
    question: str
    answer: str
    root_attribute: str
    entities: list[dict] = field(default_factory=list)
    subtree_size: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "QaItem":
        return cls(d["question"], d["answer"], d["root_attribute"],
                   [dict(e) for e in d.get("entities", [])], int(d.get("subtree_size", 0)))


def find_attribute(node: EntityNode, attribute: str) -> tuple[int, str]:
    """Index and value of the fact ``"<attribute>: <value>"`` among the node's facts."""
    pattern = re.compile(r"^\s*" + re.escape(attribute) + r"\s*:\s*(.+?)\s*\.?\s*$", re.I)
    for i, fact in enumerate(node.facts):
        m = pattern.match(fact)
        if m:
            return i, m.group(1)
    raise MissingAttribute(f"{node.name!r} has no {attribute!r} fact")


def question_constraints(tree: EntityTree, attribute: str) -> tuple[list[str], str]:
    root = tree.root
    idx, answer = find_attribute(root, attribute)
    banned = root.fuzzed_facts[idx] if idx < len(root.fuzzed_facts) else None
    out = []
    for node in tree.nodes():
        for c in node.constraints:
            if node is root and c == banned:
                continue
            if answer.lower() in c.lower() or term_overlap(answer, c) >= 0.5:
                continue
            out.append(c)
    return out, answer


def generate_question(subtree: EntityTree, attribute: str, generator: QuestionGenerator) -> QaItem:
    """Ask for the root's ``attribute`` using every node's constraints as clues.

    The attribute fact itself, and any clue sharing half or more of the
    answer's content terms, are left out.
    """
    constraints, answer = question_constraints(subtree, attribute)
    question = generator.generate_question(constraints, answer, attribute)
    nodes = subtree.nodes()
    return QaItem(
        question=question,
        answer=answer,
        root_attribute=answer,
        entities=[{"name": n.name, "url": n.url} for n in nodes],
        subtree_size=len(nodes),
    )


def difficulty_filter(items: Sequence[QaItem], solver: Solver, rounds: int) -> list[QaItem]:
    """Keep items the solver gets right at least once in ``rounds`` attempts."""
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    return [
        item for item in items
        if any(answer_matches(solver.solve(item.question, attempt), item.answer) for attempt in range(rounds))
    ]
