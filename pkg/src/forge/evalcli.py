"""Benchmark runs: k attempts per item, judged, summarized as Acc / Avg@k / OC rate."""

from __future__ import annotations

import hashlib
import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .agentloop import AgentConfig, Policy, ToolClient, Trajectory, run_episode
from .gateway.types import Judge
from .rlmath import correctness_reward
from .synth.stats import histogram, toolcall_stats

log = logging.getLogger(__name__)

REPORT_FORMATS = ("table", "json", "plotdata")


@dataclass(frozen=True)
class BenchmarkItem:
    id: str
    question: str
    ground_truth: str

    def __post_init__(self):
        if not self.question.strip() or not self.ground_truth.strip():
            raise ValueError(f"item {self.id!r}: question and ground_truth must be non-empty")


def read_dataset(path: str | Path) -> list[BenchmarkItem]:
    items = []
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh):
            if line.strip():
                d = json.loads(line)
                items.append(BenchmarkItem(str(d.get("id", n)), d["question"], d["ground_truth"]))
    return items


@dataclass
class EpisodeRecord:
    attempt: int
    correct: bool
    finish: str
    tool_calls: int
    final_answer: str
    judge_failed: bool = False


@dataclass
class ItemRecord:
    id: str
    episodes: list[EpisodeRecord] = field(default_factory=list)
    error: str = ""

    @property
    def pass_rate(self) -> float:
        return sum(e.correct for e in self.episodes) / len(self.episodes) if self.episodes else 0.0


@dataclass
class RunMetrics:
    accuracy: float
    avg_at_k: float
    avg_tool_calls: float
    oc_rate: float
    k: int
    items: list[ItemRecord] = field(default_factory=list)

    def __post_init__(self):
        for name in ("accuracy", "avg_at_k", "oc_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")

    @property
    def episodes(self) -> list[EpisodeRecord]:
        return [e for it in self.items for e in it.episodes]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        items = [ItemRecord(it["id"], [EpisodeRecord(**e) for e in it["episodes"]], it.get("error", ""))
                 for it in d["items"]]
        return cls(d["accuracy"], d["avg_at_k"], d["avg_tool_calls"], d["oc_rate"], d["k"], items)


def attempt_seed(run_seed: int, item_id: str, attempt: int) -> int:
    h = hashlib.blake2b(f"{run_seed}|{item_id}|{attempt}".encode(), digest_size=8).digest()
    return int.from_bytes(h, "big")


def summarize(items: Sequence[ItemRecord], k: int) -> RunMetrics:
    """Accuracy is first-attempt accuracy; Avg@k is the mean per-item pass rate."""
    scored = [it for it in items if it.episodes]
    episodes = [e for it in items for e in it.episodes]
    n_items = len(items)
    accuracy = sum(it.episodes[0].correct for it in scored) / n_items if n_items else 0.0
    avg_at_k = sum(it.pass_rate for it in scored) / n_items if n_items else 0.0
    oc = sum(e.finish == "forced_answer" for e in episodes) / len(episodes) if episodes else 0.0
    calls = sum(e.tool_calls for e in episodes) / len(episodes) if episodes else 0.0
    return RunMetrics(accuracy, avg_at_k, calls, oc, k, list(items))


def run_benchmark(items: Sequence[BenchmarkItem], policy: Policy, tools: ToolClient, judge: Judge, k: int = 4,
                  cfg: AgentConfig | None = None, run_seed: int = 0, workers: int = 4,
                  on_trajectory: Callable[[BenchmarkItem, int, Trajectory], None] | None = None) -> RunMetrics:
    """Run ``k`` independent episodes per item and judge each one.

    Attempts get their own rng from (run_seed, item id, attempt). A failing
    episode marks its item with an error and the run carries on; a failing
    judge counts the episode incorrect and flags it.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cfg = cfg or AgentConfig()

    def one(item: BenchmarkItem, attempt: int) -> EpisodeRecord:
        rng = random.Random(attempt_seed(run_seed, item.id, attempt))
        traj = run_episode(item.question, policy, tools, cfg, rng)
        if on_trajectory is not None:
            on_trajectory(item, attempt, traj)
        response = traj.messages[-1].content if traj.finish != "error" else ""
        outcome = correctness_reward(item.question, response, item.ground_truth, judge)
        return EpisodeRecord(attempt, bool(outcome.reward), traj.finish, traj.tool_call_count,
                             traj.final_answer, outcome.judge_failed)

    jobs = [(item, a) for item in items for a in range(k)]
    records = {item.id: ItemRecord(item.id) for item in items}
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        futures = [(item, a, pool.submit(one, item, a)) for item, a in jobs]
        for item, a, fut in futures:
            try:
                records[item.id].episodes.append(fut.result())
            except Exception as exc:
                log.warning("item %s attempt %d failed: %s", item.id, a, exc)
                records[item.id].error = f"{type(exc).__name__}: {exc}"
    return summarize([records[item.id] for item in items], k)


def _table(metrics: RunMetrics) -> str:
    head = ("item", f"pass@{metrics.k}", "first", "tool calls", "forced", "error")
    rows = [head]
    for it in metrics.items:
        eps = it.episodes
        rows.append((
            it.id,
            f"{it.pass_rate:.2f}",
            ("yes" if eps[0].correct else "no") if eps else "-",
            f"{sum(e.tool_calls for e in eps) / len(eps):.1f}" if eps else "-",
            str(sum(e.finish == "forced_answer" for e in eps)),
            it.error or "",
        ))
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    lines.append("")
    lines.append(f"accuracy {metrics.accuracy:.4f}  avg@{metrics.k} {metrics.avg_at_k:.4f}  "
                 f"tool calls {metrics.avg_tool_calls:.2f}  OC rate {metrics.oc_rate:.4f}")
    return "\n".join(lines) + "\n"


def plot_data(metrics: RunMetrics) -> dict:
    counts = [e.tool_calls for e in metrics.episodes]
    data = {"bucket_width": 5, "episodes": len(counts),
            "histogram": {str(b): c for b, c in histogram(counts).items()}}
    if counts:
        s = toolcall_stats(counts)
        data.update(mean=s.mean, median=s.median)
    return data


def emit_report(metrics: RunMetrics, fmt: str = "table") -> bytes:
    if fmt == "table":
        return _table(metrics).encode("utf-8")
    if fmt == "json":
        return json.dumps(metrics.to_dict(), ensure_ascii=False, indent=2).encode("utf-8")
    if fmt == "plotdata":
        return json.dumps(plot_data(metrics), ensure_ascii=False, indent=2).encode("utf-8")
    raise ValueError(f"format must be one of {REPORT_FORMATS}")
