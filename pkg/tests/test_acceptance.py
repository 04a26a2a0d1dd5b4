"""Acceptance criteria: one test per criterion, each timed against its runtime budget.

Every test prints a PASS/FAIL line; the lines are repeated in the pytest
terminal summary.
"""

import functools
import json
import math
import random
import time

import pytest
from fastapi.testclient import TestClient

from forge.agentloop import (
    FORCING_TEXT, AgentConfig, LocalToolClient, ScriptedPolicy, count_tool_calls, load_fixture_episode, load_policy,
    parse_tool_calls, run_episode,
)
from forge.bm25 import build_index, top_k
from forge.cachestore import MemoryCache, Namespace
from forge.evalcli import BenchmarkItem, run_benchmark
from forge.gateway.fakes import (
    CountingProxy, DictionaryNer, FakeCrawler, FakeEngine, RuleJudge, ScriptedEngine, TemplateRephraser,
    choose_blocked,
)
from forge.gateway.types import ClientError, EngineResult, ErrorKind, Mention
from forge.rlmath import ClipConfig, combined_reward, group_advantages, grpo_token_term, pass_rate_filter
from forge.snippetpipe import (
    BrowsePipelineConfig, PipelineClients, SearchPipelineConfig, browse_pipeline, search_result_pipeline,
)
from forge.synth import EntityNode, extract_subtree, fuzz_static, fuzzify, select_constraints, toolcall_stats
from forge.textseg import Chunk
from forge.toolserver import (
    FastLaneDispatcher, SearchRequest, ToolServer, build_fixture_server, engine_with_fallback, fixture_clients,
)
from forge.toolserver.app import create_app, dumps
from oracles import VOCAB, ToyUniverse, brute_top_k, check_subtree, random_tree, synthetic_page

RESULTS = []


def criterion(number, title, seconds):
    """Time the test, require it to finish within ``seconds`` and report PASS/FAIL."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            status, note = "PASS", ""
            try:
                fn(*args, **kwargs)
                elapsed = time.perf_counter() - start
                if elapsed >= seconds:
                    status, note = "FAIL", f"runtime {elapsed:.2f}s over {seconds}s budget"
                    raise AssertionError(note)
            except BaseException as exc:
                status = "FAIL"
                note = note or f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}"
                raise
            finally:
                elapsed = time.perf_counter() - start
                line = f"{status} criterion {number:>2} {title} ({elapsed:.2f}s / {seconds}s){' - ' + note if note else ''}"
                RESULTS.append((number, line))
                print(line)

        return run

    return wrap


# 1 -----------------------------------------------------------------------------------------------


@criterion(1, "BM25 oracle equivalence", 10)
def test_c01_bm25_oracle():
    rng = random.Random(2024)
    for _ in range(1000):
        n = rng.randint(1, 50)
        texts = [" ".join(rng.choice(VOCAB) for _ in range(rng.randint(0, 15))) for _ in range(n)]
        query = " ".join(rng.choice(VOCAB + ["zzz"]) for _ in range(rng.randint(1, 5)))
        k = rng.randint(0, n + 2)
        chunks = [Chunk(f"d#{i}", t, len(t.split()), "d", i) for i, t in enumerate(texts)]
        got = [(s.chunk.index, s.score) for s in top_k(build_index(chunks), query, k)]
        want = brute_top_k(texts, query, k)
        assert [i for i, _ in got] == [i for i, _ in want]
        assert all(math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12) for (_, a), (_, b) in zip(got, want))


# 2 -----------------------------------------------------------------------------------------------


@criterion(2, "pipeline cardinality ladder", 5)
def test_c02_ladder(corpus):
    clients = fixture_clients()
    page = synthetic_page(43)
    for i, (query, snapshot) in enumerate([("river harbor station", "Part7 river valley harbor"),
                                            ("pitcher season record", "Part30 league record"),
                                            ("museum bridge", "")]):
        hit = EngineResult(snapshot or "x", "Synthetic page", f"https://x.org/s{i}")
        if not snapshot:
            continue
        res = search_result_pipeline(query, hit, page, SearchPipelineConfig(), clients)
        cand, lex, emb, rr = res.stage_sizes
        assert (cand, emb, rr) == (44, 8, 3) and lex <= 44
    browse = browse_pipeline("https://x.org/b", synthetic_page(400), "", BrowsePipelineConfig(), clients)
    n, lex, emb, rr = browse.stage_sizes
    assert n > 8 and (emb, rr) == (8, 1) and lex == min(n, 40)
    server = build_fixture_server(corpus)
    for q in list(corpus.queries) + ["baseball", "Virginia", "county history"]:
        assert len(server.search_wire(q)) <= 5


# 3 -----------------------------------------------------------------------------------------------


def _queries(corpus, n, seed=0):
    rng = random.Random(seed)
    vocab = sorted({w for t in corpus.titles.values() for w in t.replace(",", " ").split() if len(w) > 3})
    qs = list(corpus.queries)
    while len(qs) < n:
        qs.append(" ".join(rng.sample(vocab, rng.randint(1, 4))))
    return qs[:n]


@criterion(3, "crawl-failure path", 10)
def test_c03_crawl_failure(corpus, corpus_urls):
    blocked = choose_blocked(corpus_urls, 0.15, seed=7)
    assert len(blocked) == round(0.15 * len(corpus_urls)) > 0
    engine = FakeEngine(corpus)
    server = ToolServer([engine], FakeCrawler(corpus.pages, blocked), fixture_clients(), cache=MemoryCache())
    hit_blocked = 0
    for q in _queries(corpus, 200):
        hits = engine.search(q)[:5]
        res = server.handle_search(SearchRequest(q))
        assert [r.url for r in res] == [h.url for h in hits]
        hit_blocked += sum(h.url in blocked for h in hits)
    counters = server.stats()["counters"]
    assert counters.get("search.degraded", 0) == 0 and counters.get("search.timeouts", 0) == 0
    assert hit_blocked > 0


# 4 -----------------------------------------------------------------------------------------------


@criterion(4, "fallback soundness", 5)
def test_c04_fallback():
    rng = random.Random(4)
    hit = EngineResult("s", "t", "https://x.org/1")
    for _ in range(100):
        kinds = [rng.choice(["empty", "hits", "error"]) for _ in range(rng.randint(1, 4))]
        engines = []
        for i, kind in enumerate(kinds):
            default = {"empty": [], "hits": [hit] * (i + 1), "error": ClientError(ErrorKind.UNAVAILABLE)}[kind]
            engines.append(ScriptedEngine(f"e{i}", default=default))
        out = engine_with_fallback("q", "us-en", engines)
        first = next((i for i, k in enumerate(kinds) if k == "hits"), None)
        for i, e in enumerate(engines):
            consulted = first is None or i <= first
            assert e.calls == int(consulted)
        assert out == ([] if first is None else [hit] * (first + 1))


# 5 -----------------------------------------------------------------------------------------------


@criterion(5, "cache idempotence", 10)
def test_c05_cache(corpus):
    engine = CountingProxy(FakeEngine(corpus))
    crawler = CountingProxy(FakeCrawler(corpus.pages))
    base = fixture_clients()
    clients = PipelineClients(CountingProxy(base.embedder), CountingProxy(base.reranker),
                              CountingProxy(base.snippet_writer))
    upstream = [engine, crawler, clients.embedder, clients.reranker, clients.snippet_writer]
    server = ToolServer([engine], crawler, clients, cache=MemoryCache())
    http = TestClient(create_app(server))
    q = {"query": "Virginia county returned to Virginia in 1846 renamed in 1920"}
    first = http.post("/search", json=q)
    calls = sum(p.total for p in upstream)
    second = http.post("/search", json=q)
    assert first.status_code == second.status_code == 200
    assert second.content == first.content and sum(p.total for p in upstream) == calls

    # a GRPO group: 8 rollouts of one question drawing from a shared query pool
    rng = random.Random(5)
    pool = _queries(corpus, 40, seed=1)
    group_server = build_fixture_server(corpus, cache=MemoryCache())
    seen, repeats, lookups = set(), 0, 0
    for rollout in range(8):
        for step in range(rng.randint(3, 8)):
            query = rng.choice(pool[:10]) if rng.random() < 0.6 else f"{rng.choice(pool)} step{rollout}{step}"
            lookups += 1
            repeats += query in seen
            seen.add(query)
            group_server.search_wire(query)
    overlap = repeats / lookups
    assert overlap > 0.3
    assert group_server.cache.stats.hit_rate(Namespace.ENGINE) >= overlap


# 6 -----------------------------------------------------------------------------------------------


@criterion(6, "fast-lane share", 5)
def test_c06_fast_lane():
    d = FastLaneDispatcher(capacity=15.0, target_share=0.15)
    lanes = [d.dispatch(now=i / 100.0).lane for i in range(10_000)]  # 100 req/s offered
    share = lanes.count("fast") / len(lanes)
    assert abs(share - 0.15) <= 0.02
    assert len(lanes) == 10_000  # nothing dropped
    # an oversupplied fast lane is still held to the target share
    d2 = FastLaneDispatcher(capacity=1000.0, target_share=0.15)
    for i in range(10_000):
        d2.dispatch(now=i / 100.0)
    assert abs(d2.fast_share - 0.15) <= 0.02


# 7 -----------------------------------------------------------------------------------------------


@criterion(7, "subtree extraction conformance", 30)
def test_c07_subtree():
    rng = random.Random(7)
    for _ in range(10_000):
        tree = random_tree(rng, max_nodes=25)
        size = len(tree)
        k = rng.randint(1, size + 5)
        sub = extract_subtree(tree, k, rng)
        names = check_subtree(tree, sub, k)
        if k >= size:
            assert len(names) == size
        if k == 1:
            assert names == {tree.root.name}


# 8 -----------------------------------------------------------------------------------------------


@criterion(8, "fuzzification soundness", 5)
def test_c08_fuzz():
    import re

    assert fuzz_static("1992") == "early 1990s"
    assert fuzz_static("42") == "around 40"
    people = [Mention(n, "physicist") for n in ("Albert Einstein", "Marie Curie", "Niels Bohr", "Lise Meitner")]
    places = [Mention(n, "city") for n in ("Bern", "Ulm", "Zurich", "Vienna", "New York")]
    ner = DictionaryNer(people + places)
    rng = random.Random(8)
    facts = []
    for _ in range(100):
        p, q = rng.choice(people), rng.choice(places)
        year, n, m = rng.randint(1500, 2030), rng.randint(0, 5000), rng.randint(1, 9)
        facts.append(rng.choice([
            f"{p.name} moved to {q.name} in {year}.",
            f"In {year}, {p.name} gave {n} lectures in {q.name} over {m} weeks.",
            f"The {q.name} archive holds {n:,} letters written by {p.name} after {year}.",
            f"{p.name} and {rng.choice(people).name} met {m} times in {q.name}.",
        ]))
    out = fuzzify(facts, ner, TemplateRephraser(8))
    number = re.compile(r"(?<![\w.,])(?<!around )\d[\d,]*(?![\w])")
    for before, after in zip(facts, out):
        for mention in people + places:
            assert mention.name not in after
        originals = set(number.findall(before))
        assert not set(number.findall(after)) & originals
        assert number.findall(after) == []


# 9 -----------------------------------------------------------------------------------------------


@criterion(9, "constraint selection vs exhaustive search", 30)
def test_c09_constraints():
    rng = random.Random(9)
    matched = 0
    for _ in range(200):
        u = ToyUniverse(rng, n_entities=20)
        node = EntityNode("target", "https://x.org/t", facts=list(u.facts), fuzzed_facts=list(u.facts))
        chosen = select_constraints(node, u.space, u.agent, budget=10_000, max_constraints=3)
        best = u.exhaustive(max_size=3)
        if best is None:
            matched += chosen == []
            continue
        assert chosen and "target" not in u.agent(chosen)
        matched += u.space(chosen) == best
    assert matched / 200 >= 0.95


# 10 ----------------------------------------------------------------------------------------------


@criterion(10, "GRPO advantages and clipped term", 10)
def test_c10_grpo():
    s = math.sqrt(3) / 4
    adv = group_advantages([1, 0, 0, 0])
    for got, want in zip(adv, [0.75 / s, -0.25 / s, -0.25 / s, -0.25 / s]):
        assert abs(got - want) <= 1e-12
    for got, want in zip(adv, [1.7320508, -0.5773503, -0.5773503, -0.5773503]):
        assert abs(got - want) <= 1e-6
    rng = random.Random(10)
    for _ in range(10_000):
        g = [rng.random() for _ in range(rng.randint(2, 16))]
        a = group_advantages(g)
        n = len(a)
        assert abs(sum(a) / n) <= 1e-9
        assert abs(math.sqrt(sum(x * x for x in a) / n) - 1) <= 1e-9
        shift = rng.uniform(-5, 5)
        assert all(abs(x - y) <= 1e-9 for x, y in zip(a, group_advantages([r + shift for r in g])))
    assert group_advantages([0.3] * 8) == [0.0] * 8
    for _ in range(10_000):
        lnew, lold = rng.uniform(-3, 3), rng.uniform(-3, 3)
        a, eps = rng.uniform(-3, 3), rng.uniform(0.01, 0.5)
        r = math.exp(lnew - lold)
        want = min(r * a, min(max(r, 1 - eps), 1 + eps) * a)
        assert math.isclose(grpo_token_term(lnew, lold, a, ClipConfig(eps)), want, rel_tol=1e-12, abs_tol=1e-12)
    assert math.isclose(grpo_token_term(math.log(2.0), 0.0, 1.0, ClipConfig(0.2)), 1.2, rel_tol=1e-12)


# 11 ----------------------------------------------------------------------------------------------


@criterion(11, "reward contract", 5)
def test_c11_reward():
    rng = random.Random(11)
    for _ in range(10_000):
        r, rec, lam = rng.choice([0, 1]), rng.random(), rng.choice([0.0, 0.5, 0.9, rng.random() * 0.999])
        v = combined_reward(r, rec, lam)
        assert 0.0 <= v <= 1.0
        assert (v == 1.0) == (r == 1)
        assert combined_reward(r, rec, 0.0) == r
    for _ in range(1000):
        rec = rng.random()
        sweep = [combined_reward(0, rec, lam) for lam in (0.0, 0.5, 0.9)]
        assert sweep == sorted(sweep)


# 12 ----------------------------------------------------------------------------------------------


@criterion(12, "pass-rate filter", 1)
def test_c12_pass_rate():
    counts = [0, 1, 2, 3, 4]
    assert set(pass_rate_filter(counts, counts, k=4)) == {1, 2, 3}


# 13 ----------------------------------------------------------------------------------------------


@criterion(13, "end-to-end fixture replay", 10)
def test_c13_replay():
    ep = load_fixture_episode()
    traj = run_episode(ep["question"], load_policy("scripted:fixture"), LocalToolClient(build_fixture_server()),
                       AgentConfig())
    calls = [c for m in traj.messages if m.role == "assistant" for c in parse_tool_calls(m.content)]
    assert traj.tool_call_count == count_tool_calls(traj) == 6
    assert [c.name for c in calls].count("search") == 5 and [c.name for c in calls].count("browse") == 1
    browse_idx = next(i for i, m in enumerate(traj.messages) if m.role == "assistant" and '"browse"' in m.content)
    assert "Cleveland Indians" in json.loads(traj.messages[browse_idx + 1].content.split("\n", 1)[1]
                                             .rsplit("\n", 1)[0])["semanticDocument"]
    verdict = RuleJudge().judge(ep["question"], traj.messages[-1].content, "the Cleveland Indians")
    assert verdict.is_correct and traj.finish == "answered"


# 14 ----------------------------------------------------------------------------------------------


@criterion(14, "context forcing and OC accounting", 5)
def test_c14_forcing():
    tools = LocalToolClient(build_fixture_server())
    filler = " ".join(["evidence"] * 1500)
    verbose = ScriptedPolicy(
        [f"<think>{filler} {i}</think>\n<tool_call>"
         f'{{"name": "search", "arguments": {{"query": "Arlington County Virginia {i}"}}}}</tool_call>'
         for i in range(40)],
        forced_answer="Final answer: the Cleveland Indians",
    )
    traj = run_episode("Which team?", verbose, tools, AgentConfig(max_context_tokens=16384))
    assert traj.finish == "forced_answer"
    assert sum(m.content == FORCING_TEXT for m in traj.messages) == 1
    assert traj.tool_call_count >= 1

    finishes = []
    quick = ScriptedPolicy(["Final answer: the Cleveland Indians"])

    class Mixed:
        def respond(self, messages, rng):
            return (verbose if "long" in messages[1].content else quick).respond(messages, rng)

    items = [BenchmarkItem(str(i), ("long " if i % 3 == 0 else "") + f"question {i}", "the Cleveland Indians")
             for i in range(6)]
    m = run_benchmark(items, Mixed(), tools, RuleJudge(), k=2, cfg=AgentConfig(max_context_tokens=16384),
                      on_trajectory=lambda it, a, t: finishes.append(t.finish))
    assert m.oc_rate == finishes.count("forced_answer") / len(finishes) == 4 / 12
    assert [e.finish for e in m.episodes].count("forced_answer") == finishes.count("forced_answer")


# 15 ----------------------------------------------------------------------------------------------


@criterion(15, "tool-call stats kernel", 1)
def test_c15_stats():
    s = toolcall_stats([1, 3, 5])
    assert s.mean == 3 and s.median == 3
    rng = random.Random(15)
    for _ in range(200):
        counts = [rng.randint(0, 150) for _ in range(rng.randint(1, 60))]
        assert sum(toolcall_stats(counts).histogram.values()) == len(counts)
