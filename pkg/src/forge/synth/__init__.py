"""Multi-hop question synthesis from entity trees."""

from .constraints import LexicalShallowAgent, OverlapSpaceEstimator, select_constraints
from .fuzz import fuzz_entity, fuzz_static, fuzzify
from .pipeline import (
    SynthClients, SynthConfig, answer_key_solver, fixture_synth_clients, generate_items, items_for_seed, prepare_tree,
    synthesize,
)
from .qa import MissingAttribute, QaItem, difficulty_filter, generate_question
from .reasoning import NoReasoningSlot, TemplateReasoner, fill_reasoning_slot, generate_reasoning_stub
from .stats import ToolCallStats, toolcall_stats
from .subtree import extract_subtree
from .tree import BarrenRoot, EntityNode, EntityTree, TreeConfig, build_node, build_tree, expand_children

__all__ = [
    "BarrenRoot", "EntityNode", "EntityTree", "LexicalShallowAgent", "MissingAttribute", "NoReasoningSlot",
    "OverlapSpaceEstimator", "QaItem", "SynthClients", "SynthConfig", "TemplateReasoner", "ToolCallStats",
    "TreeConfig", "answer_key_solver", "build_node", "build_tree", "difficulty_filter", "expand_children", "extract_subtree",
    "fill_reasoning_slot", "fixture_synth_clients", "fuzz_entity", "fuzz_static", "fuzzify",
    "generate_items", "generate_question", "generate_reasoning_stub", "items_for_seed", "prepare_tree", "select_constraints",
    "synthesize", "toolcall_stats",
]
