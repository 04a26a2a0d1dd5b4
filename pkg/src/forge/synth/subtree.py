"""Budgeted random subtree extraction by whole root paths."""

from __future__ import annotations

import random

from .tree import EntityNode, EntityTree


def root_path(node: EntityNode) -> list[EntityNode]:
    path = [node]
    while path[-1].parent is not None:
        path.append(path[-1].parent)
    return path


def induced_subtree(tree: EntityTree, selected: set[int]) -> EntityTree:
    """Copy of ``tree`` restricted to nodes whose ``id()`` is in ``selected``.

    ``selected`` must be parent-closed and contain the root.
    """

    def copy(node: EntityNode) -> EntityNode:
        out = EntityNode(
            name=node.name, url=node.url, facts=list(node.facts), fuzzed_facts=list(node.fuzzed_facts),
            constraints=list(node.constraints), category=node.category, barren=node.barren, usable=node.usable,
        )
        for child in node.children:
            if id(child) in selected:
                out.add_child(copy(child))
        return out

    return EntityTree(copy(tree.root))


def extract_subtree(tree: EntityTree, k: int, rng: random.Random) -> EntityTree:
    """Sample a connected, root-containing subtree of at most ``k`` nodes.

    Repeatedly draw a uniform node; if the uncovered part of its path to the
    root is non-empty and fits the remaining budget, take the whole path.
    Ends when the budget is spent. The root's own path costs 1, so with
    ``k >= 1`` every run ends (almost surely).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    nodes = tree.nodes()
    k = min(k, len(nodes))
    selected: set[int] = set()
    while k > 0:
        path = root_path(rng.choice(nodes))
        cost = sum(1 for u in path if id(u) not in selected)
        if 0 < cost <= k:
            selected.update(id(u) for u in path)
            k -= cost
    return induced_subtree(tree, selected)
