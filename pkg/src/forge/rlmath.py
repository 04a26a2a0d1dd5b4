"""Rewards, recall bonuses, group-relative advantages and the clipped policy term."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, TypeVar

from .agentloop import Trajectory
from .gateway.types import ClientError, ErrorKind, Judge, Reranker
from .textseg import split_into_chunks

log = logging.getLogger(__name__)

RECALL_METHODS = ("name_em", "url_em", "judge_score")
ZERO_STD = 1e-12

T = TypeVar("T")


@dataclass(frozen=True)
class RewardConfig:
    lam: float = 0.0
    recall_method: str = "name_em"

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")
        if self.recall_method not in RECALL_METHODS:
            raise ValueError(f"recall_method must be one of {RECALL_METHODS}")


@dataclass(frozen=True)
class ClipConfig:
    epsilon: float = 0.2
    beta: float = 0.0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")


@dataclass
class GroupRollout:
    question: str
    trajectories: list[Trajectory]
    rewards: list[float] = field(default_factory=list)
    advantages: list[float] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.trajectories)
        if self.rewards and len(self.rewards) != n:
            raise ValueError("one reward per trajectory")
        if self.advantages and len(self.advantages) != n:
            raise ValueError("one advantage per trajectory")


@dataclass(frozen=True)
class CorrectnessOutcome:
    reward: int
    judge_failed: bool = False
    detail: str = ""


def correctness_reward(question: str, response: str, ground_truth: str, judge: Judge) -> CorrectnessOutcome:
    """1 iff the judge says correct. A malformed or failed judge reply scores 0 and is flagged."""
    try:
        verdict = judge.judge(question, response, ground_truth)
    except ClientError as exc:
        if exc.kind is not ErrorKind.MALFORMED_RESPONSE:
            log.warning("judge unavailable: %s", exc)
        return CorrectnessOutcome(0, True, f"{exc.kind.value}: {exc.detail}")
    return CorrectnessOutcome(int(verdict.is_correct))


def _tool_texts(t: Trajectory) -> list[str]:
    return [m.content for m in t.messages if m.role == "tool"]


def _tool_documents(t: Trajectory) -> list[str]:
    """Snippets and page documents pulled out of tool messages."""
    docs = []
    for text in _tool_texts(t):
        body = text.removeprefix("<tool_response>").removesuffix("</tool_response>").strip()
        try:
            payload = json.loads(body)
        except json.JSONDecodeError:
            docs.append(body)
            continue
        for item in payload if isinstance(payload, list) else [payload]:
            if isinstance(item, dict):
                for key in ("snippets", "semanticDocument"):
                    if isinstance(item.get(key), str):
                        docs.append(item[key])
    return docs


def recall_rate(t: Trajectory, entities: Sequence[Mapping[str, str]], method: str = "name_em",
                reranker: Reranker | None = None, chunk_tokens: int = 128) -> float:
    """Fraction of provenance entities the trajectory's tool outputs surfaced.

    ``name_em`` and ``url_em`` look for the name (case-insensitive) or url in
    any tool message. ``judge_score`` takes, per entity, the best reranker
    score between its name and any retrieved snippet or document chunk, and
    averages those.
    """
    if not entities:
        raise ValueError("entities must be non-empty")
    if method == "name_em":
        hay = "\n".join(_tool_texts(t)).lower()
        return sum(e["name"].lower() in hay for e in entities) / len(entities)
    if method == "url_em":
        hay = "\n".join(_tool_texts(t))
        # urls travel JSON-encoded, where "/" may appear escaped
        hay = hay + "\n" + hay.replace("\\/", "/")
        return sum(bool(e.get("url")) and e["url"] in hay for e in entities) / len(entities)
    if method == "judge_score":
        if reranker is None:
            raise ValueError("judge_score needs a reranker")
        chunks = [c.text for doc in _tool_documents(t) for c in split_into_chunks(doc, chunk_tokens)]
        if not chunks:
            return 0.0
        best = [max(reranker.rerank(e["name"], chunks)) for e in entities]
        return sum(min(1.0, max(0.0, b)) for b in best) / len(entities)
    raise ValueError(f"unknown recall method {method!r}")


def combined_reward(r_corr: int, r_recall: float, lam: float) -> float:
    """Correct answers earn 1; failures earn ``lam * r_recall``, capped at 1."""
    if r_corr not in (0, 1):
        raise ValueError("r_corr must be 0 or 1")
    if not 0.0 <= r_recall <= 1.0 or not 0.0 <= lam <= 1.0:
        raise ValueError("r_recall and lam must lie in [0, 1]")
    if r_corr == 1:
        return 1.0
    return min(lam * r_recall, 1.0)


def group_advantages(rewards: Sequence[float]) -> list[float]:
    """(r - mean) / population std within the group; all zeros when the std vanishes."""
    if len(rewards) < 2:
        raise ValueError("a group needs at least two rewards")
    n = len(rewards)
    mean = math.fsum(rewards) / n
    std = math.sqrt(math.fsum((r - mean) ** 2 for r in rewards) / n)
    if std < ZERO_STD:
        return [0.0] * n
    return [(r - mean) / std for r in rewards]


def kl_estimate(logp_new: float, logp_ref: float) -> float:
    """Non-negative per-token KL estimate exp(d) - d - 1 with d = logp_ref - logp_new."""
    d = logp_ref - logp_new
    return math.exp(d) - d - 1.0


def grpo_token_term(logp_new: float, logp_old: float, advantage: float, cfg: ClipConfig | None = None,
                    logp_ref: float | None = None) -> float:
    """min(R·A, clip(R, 1-ε, 1+ε)·A) - β·KL for one token, with R = exp(logp_new - logp_old)."""
    cfg = cfg or ClipConfig()
    ratio = math.exp(logp_new - logp_old)
    clipped = min(max(ratio, 1.0 - cfg.epsilon), 1.0 + cfg.epsilon)
    term = min(ratio * advantage, clipped * advantage)
    if cfg.beta > 0:
        if logp_ref is None:
            raise ValueError("beta > 0 needs logp_ref")
        term -= cfg.beta * kl_estimate(logp_new, logp_ref)
    return term


def pass_rate_filter(items: Sequence[T], pass_counts: Sequence[int], k: int = 4,
                     lo: float = 0.25, hi: float = 0.75) -> list[T]:
    """Keep items whose pass rate c/k lies in [lo, hi]."""
    if len(items) != len(pass_counts):
        raise ValueError("one pass count per item")
    if k < 1:
        raise ValueError("k must be >= 1")
    kept = []
    for item, c in zip(items, pass_counts):
        if not 0 <= c <= k:
            raise ValueError(f"pass count {c} outside [0, {k}]")
        if lo <= c / k <= hi:
            kept.append(item)
    return kept


def score_group(group: GroupRollout, ground_truth: str, entities: Sequence[Mapping[str, str]], judge: Judge,
                cfg: RewardConfig, reranker: Reranker | None = None) -> GroupRollout:
    """Fill rewards and advantages for a group of rollouts of one question."""
    rewards = []
    for t in group.trajectories:
        corr = correctness_reward(group.question, t.messages[-1].content if t.messages else "", ground_truth, judge)
        recall = 0.0
        if corr.reward == 0 and cfg.lam > 0 and entities:
            recall = recall_rate(t, entities, cfg.recall_method, reranker)
        rewards.append(combined_reward(corr.reward, recall, cfg.lam))
    group.rewards = rewards
    group.advantages = group_advantages(rewards) if len(rewards) >= 2 else [0.0] * len(rewards)
    return group
