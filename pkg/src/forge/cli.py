"""Command-line entry point: ``forge serve|synth|stats|run|reward|eval``."""

from __future__ import annotations

import json
import logging
import os
import sys
from collections import defaultdict
from pathlib import Path

import click

from .agentloop import (
    AgentConfig, HttpToolClient, LocalToolClient, Trajectory, load_policy, read_trajectories, run_episode,
    write_trajectories,
)
from .cachestore import cache_from_env


def _tools(spec: str, region: str | None):
    """``fixture`` (in-process server over bundled pages) or a tool server base URL."""
    if spec == "fixture":
        from .toolserver import build_fixture_server

        return LocalToolClient(build_fixture_server(cache=cache_from_env()), region)
    return HttpToolClient(spec, region)


def _judge(spec: str):
    if spec == "rule":
        from .gateway.fakes import RuleJudge

        return RuleJudge()
    if spec == "http":
        from .gateway.http import LlmJudge

        return LlmJudge.from_env()
    raise click.BadParameter(f"unknown judge {spec!r}")


def _write(out: str | None, data: bytes) -> None:
    if out in (None, "-"):
        sys.stdout.buffer.write(data)
    else:
        Path(out).write_bytes(data)


def _jsonl(path: str) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


@click.group()
@click.option("-v", "--verbose", count=True, help="Repeat for more log output.")
def main(verbose: int) -> None:
    """Search-agent infrastructure: tool server, data synthesis, rollouts, rewards, evaluation."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--fixture/--live", default=None,
              help="Serve the bundled fixture web, or real services from FORGE_* variables. "
                   "Defaults to live when FORGE_ENGINE_URL is set.")
def serve(config_path: str | None, port: int, host: str, fixture: bool | None) -> None:
    """Run the search/browse HTTP service."""
    import uvicorn

    from .toolserver import ToolServerConfig, build_fixture_server, build_http_server
    from .toolserver.app import create_app

    config = ToolServerConfig.from_file(config_path) if config_path else ToolServerConfig()
    if fixture is None:
        fixture = not os.environ.get("FORGE_ENGINE_URL")
    cache = cache_from_env()
    server = build_fixture_server(config=config, cache=cache) if fixture else build_http_server(config, cache)
    uvicorn.run(create_app(server), host=host, port=port, workers=1)


@main.command()
@click.option("--seeds", type=click.Path(exists=True, dir_okay=False), required=True,
              help='JSONL lines {"name", "url"} with optional "attribute" and "category".')
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--out", default="-", show_default=True)
@click.option("--solver", type=click.Choice(["answer-key", "none"]), default="answer-key", show_default=True,
              help="Difficulty-filter solver for the offline run: one that knows the answers, or none (drops all).")
def synth(seeds: str, config_path: str | None, out: str, solver: str) -> None:
    """Generate QA items from seed entities over the fixture web."""
    from .synth import SynthConfig, answer_key_solver, difficulty_filter, fixture_synth_clients, generate_items

    cfg = SynthConfig.from_file(config_path) if config_path else SynthConfig()
    clients = fixture_synth_clients(seed=cfg.seed)
    items = generate_items(_jsonl(seeds), cfg, clients)
    if solver == "answer-key":
        clients.solver = answer_key_solver(items)
    kept = difficulty_filter(items, clients.solver, cfg.filter_rounds)
    click.echo(f"{len(items)} generated, {len(kept)} kept", err=True)
    _write(out, "".join(json.dumps(it.to_dict(), ensure_ascii=False) + "\n" for it in kept).encode("utf-8"))


@main.command()
@click.option("--trajectories", type=click.Path(exists=True, dir_okay=False), required=True)
def stats(trajectories: str) -> None:
    """Tool-call count summary over a trajectory file."""
    from .synth import toolcall_stats

    counts = [t.tool_call_count for t in read_trajectories(trajectories)]
    if not counts:
        raise click.ClickException("no trajectories")
    click.echo(json.dumps(toolcall_stats(counts).to_dict(), indent=2))


@main.command()
@click.option("--question", "question_path", required=True,
              help="File holding the question, or '-' for stdin.")
@click.option("--policy", "policy_spec", default="scripted:fixture", show_default=True,
              help="scripted:<episode.json>, scripted:fixture or http.")
@click.option("--context", type=int, default=16384, show_default=True, help="Context budget in tokens.")
@click.option("--tools", "tools_spec", default="fixture", show_default=True, help="'fixture' or a tool server URL.")
@click.option("--region", default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", default="-", show_default=True, help="Trajectory JSONL output.")
def run(question_path: str, policy_spec: str, context: int, tools_spec: str, region: str | None, seed: int,
        out: str) -> None:
    """Run one agent episode and write its trajectory."""
    import random

    text = sys.stdin.read() if question_path == "-" else Path(question_path).read_text(encoding="utf-8")
    cfg = AgentConfig(max_context_tokens=context)
    traj = run_episode(text.strip(), load_policy(policy_spec), _tools(tools_spec, region), cfg, random.Random(seed))
    _write(out, (traj.to_json() + "\n").encode("utf-8"))
    click.echo(f"finish={traj.finish} tool_calls={traj.tool_call_count} answer={traj.final_answer}", err=True)


@main.command()
@click.option("--trajectories", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--qa", type=click.Path(exists=True, dir_okay=False), required=True,
              help="QA JSONL (question, answer, entities); trajectories are grouped by question.")
@click.option("--lambda", "lam", type=float, default=0.0, show_default=True)
@click.option("--method", type=click.Choice(["name_em", "url_em", "judge_score"]), default="name_em",
              show_default=True)
@click.option("--judge", "judge_spec", type=click.Choice(["rule", "http"]), default="rule", show_default=True)
@click.option("--out", default="-", show_default=True)
def reward(trajectories: str, qa: str, lam: float, method: str, judge_spec: str, out: str) -> None:
    """Score trajectory groups and emit rewards with group advantages."""
    from .rlmath import GroupRollout, RewardConfig, score_group

    cfg = RewardConfig(lam, method)
    reranker = None
    if method == "judge_score":
        if os.environ.get("FORGE_RERANK_URL"):
            from .gateway.http import HttpReranker

            reranker = HttpReranker.from_env()
        else:
            from .gateway.fakes import OverlapReranker

            reranker = OverlapReranker()
    judge = _judge(judge_spec)
    groups: dict[str, list[Trajectory]] = defaultdict(list)
    for t in read_trajectories(trajectories):
        groups[t.question].append(t)
    lines = []
    for qid, item in enumerate(_jsonl(qa)):
        trajs = groups.get(item["question"])
        if not trajs:
            continue
        g = score_group(GroupRollout(item["question"], trajs), item["answer"], item.get("entities", []),
                        judge, cfg, reranker)
        lines.append(json.dumps({"question_id": qid, "rewards": g.rewards, "advantages": g.advantages}))
    _write(out, "".join(line + "\n" for line in lines).encode("utf-8"))


@main.command(name="eval")
@click.option("--dataset", type=click.Path(exists=True, dir_okay=False), required=True,
              help='JSONL lines {"id", "question", "ground_truth"}.')
@click.option("--avg-k", "k", type=int, default=4, show_default=True)
@click.option("--context", type=int, default=65536, show_default=True)
@click.option("--region", default="us-en", show_default=True)
@click.option("--policy", "policy_spec", default="scripted:fixture", show_default=True)
@click.option("--tools", "tools_spec", default="fixture", show_default=True)
@click.option("--judge", "judge_spec", type=click.Choice(["rule", "http"]), default="rule", show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "table", "plotdata"]), default="json", show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=int, default=4, show_default=True)
@click.option("--trajectories-out", default=None, help="Optional JSONL of every episode's trajectory.")
@click.option("--out", default="-", show_default=True)
def eval_cmd(dataset: str, k: int, context: int, region: str, policy_spec: str, tools_spec: str, judge_spec: str,
             fmt: str, seed: int, workers: int, trajectories_out: str | None, out: str) -> None:
    """Benchmark a policy: accuracy, Avg@k, tool calls and out-of-context rate."""
    import threading

    from .evalcli import emit_report, read_dataset, run_benchmark

    collected: list[tuple[str, int, Trajectory]] = []
    lock = threading.Lock()

    def keep(item, attempt, traj):
        with lock:
            collected.append((item.id, attempt, traj))

    metrics = run_benchmark(
        read_dataset(dataset), load_policy(policy_spec), _tools(tools_spec, region), _judge(judge_spec), k=k,
        cfg=AgentConfig(max_context_tokens=context), run_seed=seed, workers=workers,
        on_trajectory=keep if trajectories_out else None,
    )
    if trajectories_out:
        write_trajectories(trajectories_out, [t for _, _, t in sorted(collected, key=lambda c: (c[0], c[1]))])
    _write(out, emit_report(metrics, fmt))


if __name__ == "__main__":
    main()
