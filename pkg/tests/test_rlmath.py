import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from forge.agentloop import Message, Trajectory, load_fixture_episode, load_policy, run_episode, LocalToolClient
from forge.gateway.fakes import OverlapReranker, RuleJudge
from forge.gateway.types import ClientError, ErrorKind
from forge.rlmath import (
    ClipConfig, GroupRollout, RewardConfig, combined_reward, correctness_reward, group_advantages, grpo_token_term,
    kl_estimate, pass_rate_filter, recall_rate, score_group,
)
from forge.textseg import split_into_chunks
from forge.toolserver import build_fixture_server

DAILEY_URL = "https://en.wikipedia.org/wiki/Bill_Dailey"


@pytest.fixture(scope="module")
def episode():
    ep = load_fixture_episode()
    traj = run_episode(ep["question"], load_policy("scripted:fixture"), LocalToolClient(build_fixture_server()))
    return ep, traj


def traj_with_tools(*tool_texts):
    msgs = [Message("user", "q")]
    for t in tool_texts:
        msgs += [Message("assistant", "<tool_call>{}</tool_call>"), Message("tool", t)]
    msgs.append(Message("assistant", "Final answer: nothing"))
    return Trajectory("q", msgs, 0, 0, "answered", "nothing")


# -- correctness ------------------------------------------------------------------------------


def test_correctness_examples(episode):
    ep, traj = episode
    j = RuleJudge()
    assert correctness_reward(ep["question"], traj.messages[-1].content, ep["ground_truth"], j).reward == 1
    assert correctness_reward("q", "", "x", j).reward == 0
    assert correctness_reward("q", "Final answer: B", "A OR B", j).reward == 1


def test_correctness_judge_failure_flagged():
    class Broken:
        def judge(self, q, r, t):
            raise ClientError(ErrorKind.MALFORMED_RESPONSE, "junk")

    out = correctness_reward("q", "r", "t", Broken())
    assert out.reward == 0 and out.judge_failed


# -- recall -----------------------------------------------------------------------------------


def test_recall_all_and_none():
    t = traj_with_tools("Bill Dailey pitched for the Cleveland Indians")
    ents = [{"name": "bill dailey", "url": ""}, {"name": "Cleveland Indians", "url": ""}]
    assert recall_rate(t, ents, "name_em") == 1.0
    assert recall_rate(t, [{"name": "Roy Face", "url": ""}], "name_em") == 0.0


def test_recall_url_em_fixture(episode):
    _, traj = episode
    tool_text = "\n".join(m.content for m in traj.messages if m.role == "tool")
    ents = [{"name": "Bill Dailey", "url": DAILEY_URL},
            {"name": "Arlington County, Virginia", "url": "https://en.wikipedia.org/wiki/Arlington_County,_Virginia"},
            {"name": "Atlantis", "url": "https://en.wikipedia.org/wiki/Atlantis"}]
    expected = sum(e["url"] in tool_text for e in ents) / 3
    assert expected == pytest.approx(2 / 3)
    assert recall_rate(traj, ents, "url_em") == pytest.approx(2 / 3)


def test_recall_url_escaped():
    t = traj_with_tools('<tool_response>\n{"url": "https:\\/\\/x.org\\/a"}\n</tool_response>')
    assert recall_rate(t, [{"name": "a", "url": "https://x.org/a"}], "url_em") == 1.0


def test_recall_reorder_invariant():
    texts = ["alpha https://x.org/1", "beta", "gamma https://x.org/3"]
    ents = [{"name": n, "url": f"https://x.org/{i}"} for i, n in enumerate(["alpha", "delta", "gamma", "beta"])]
    rng = random.Random(0)
    base = {m: recall_rate(traj_with_tools(*texts), ents, m) for m in ("name_em", "url_em")}
    for _ in range(20):
        rng.shuffle(texts)
        for m in base:
            assert recall_rate(traj_with_tools(*texts), ents, m) == base[m]


def test_recall_judge_score_oracle():
    rr = OverlapReranker()
    rng = random.Random(3)
    words = "cleveland indians pitcher arlington county virginia debut season saves".split()
    for _ in range(50):
        docs = [" ".join(rng.choice(words) for _ in range(rng.randint(1, 300))) for _ in range(rng.randint(1, 3))]
        payloads = [json.dumps([{"url": "https://x.org", "title": "t", "snippets": d}]) for d in docs[:-1]]
        payloads.append(json.dumps({"url": "https://x.org", "semanticDocument": docs[-1]}))
        t = traj_with_tools(*(f"<tool_response>\n{p}\n</tool_response>" for p in payloads))
        ents = [{"name": " ".join(rng.sample(words, 2)), "url": ""} for _ in range(3)]
        chunks = [c.text for d in docs for c in split_into_chunks(d, 128)]
        expected = sum(max(rr.rerank(e["name"], [c])[0] for c in chunks) for e in ents) / 3
        assert recall_rate(t, ents, "judge_score", rr) == pytest.approx(expected)


def test_recall_validation():
    t = traj_with_tools("x")
    with pytest.raises(ValueError):
        recall_rate(t, [], "name_em")
    with pytest.raises(ValueError):
        recall_rate(t, [{"name": "x"}], "judge_score")
    with pytest.raises(ValueError):
        recall_rate(t, [{"name": "x"}], "bogus")


# -- combined reward --------------------------------------------------------------------------------


def test_combined_examples():
    assert combined_reward(1, 0.3, 0.9) == 1.0
    assert combined_reward(0, 0.6, 0.5) == pytest.approx(0.3)
    assert combined_reward(0, 0.8, 0.0) == 0.0


@given(st.sampled_from([0, 1]), st.floats(0, 1), st.floats(0, 0.999))
def test_combined_properties(r, rec, lam):
    v = combined_reward(r, rec, lam)
    assert 0.0 <= v <= 1.0
    assert (v == 1.0) == (r == 1)
    assert combined_reward(r, rec, 0.0) == r


@given(st.floats(0, 1))
def test_combined_monotone_in_lambda(rec):
    vals = [combined_reward(0, rec, lam) for lam in (0.0, 0.5, 0.9)]
    assert vals == sorted(vals)


def test_reward_config_validation():
    with pytest.raises(ValueError):
        RewardConfig(lam=1.5)
    with pytest.raises(ValueError):
        RewardConfig(recall_method="x")
    with pytest.raises(ValueError):
        combined_reward(2, 0, 0)


# -- advantages -------------------------------------------------------------------------------------


def test_advantages_example():
    got = group_advantages([1, 0, 0, 0])
    s = math.sqrt(3) / 4
    assert got == pytest.approx([0.75 / s, -0.25 / s, -0.25 / s, -0.25 / s], abs=1e-12)
    assert got == pytest.approx([1.7320508, -0.5773503, -0.5773503, -0.5773503], abs=1e-6)


def test_advantages_zero_variance_and_singleton():
    assert group_advantages([0.5] * 8) == [0.0] * 8
    with pytest.raises(ValueError):
        group_advantages([1.0])


@given(st.lists(st.floats(-10, 10), min_size=2, max_size=16), st.floats(-100, 100))
def test_advantage_properties(rewards, shift):
    a = group_advantages(rewards)
    n = len(rewards)
    mean = sum(rewards) / n
    std = math.sqrt(sum((r - mean) ** 2 for r in rewards) / n)
    if std < 1e-6:
        return
    assert abs(sum(a) / n) < 1e-9
    assert math.sqrt(sum(x * x for x in a) / n) == pytest.approx(1.0, abs=1e-9)
    assert group_advantages([r + shift for r in rewards]) == pytest.approx(a, abs=1e-6)


# -- clipped term -----------------------------------------------------------------------------------


def test_clip_examples():
    assert grpo_token_term(math.log(2.0), 0.0, 1.0, ClipConfig(0.2)) == pytest.approx(1.2)
    assert grpo_token_term(math.log(2.0), 0.0, -1.0, ClipConfig(0.2)) == pytest.approx(-2.0)
    for eps in (0.1, 0.2, 0.5):
        assert grpo_token_term(-0.7, -0.7, 0.37, ClipConfig(eps)) == pytest.approx(0.37)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-5, 5), st.floats(0.01, 0.9))
def test_clip_matches_explicit(lnew, lold, adv, eps):
    r = math.exp(lnew - lold)
    expected = min(r * adv, min(max(r, 1 - eps), 1 + eps) * adv)
    assert grpo_token_term(lnew, lold, adv, ClipConfig(eps)) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@given(st.floats(0.01, 0.5), st.floats(0.01, 5))
def test_clip_saturates_positive(eps, adv):
    lnew = math.log(1 + eps) + 0.5
    assert grpo_token_term(lnew, 0.0, adv, ClipConfig(eps)) == pytest.approx((1 + eps) * adv)


def test_kl_term():
    assert kl_estimate(-1.0, -1.0) == 0.0
    assert kl_estimate(-1.0, -2.0) > 0
    plain = grpo_token_term(0.1, 0.0, 1.0, ClipConfig(0.2))
    assert grpo_token_term(0.1, 0.0, 1.0, ClipConfig(0.2, beta=0.5), logp_ref=-0.3) == pytest.approx(
        plain - 0.5 * kl_estimate(0.1, -0.3))
    with pytest.raises(ValueError):
        grpo_token_term(0.1, 0.0, 1.0, ClipConfig(0.2, beta=0.5))
    with pytest.raises(ValueError):
        ClipConfig(epsilon=0)


# -- pass-rate filter -----------------------------------------------------------------------------


def test_pass_rate_filter():
    counts = [0, 1, 2, 3, 4]
    assert pass_rate_filter(counts, counts, k=4) == [1, 2, 3]
    assert pass_rate_filter(["a", "b"], [0, 0]) == []
    assert pass_rate_filter(counts, counts, k=4, lo=0, hi=1) == counts
    with pytest.raises(ValueError):
        pass_rate_filter([1], [5], k=4)


# -- groups -----------------------------------------------------------------------------------------


def test_score_group(episode):
    ep, good = episode
    bad = traj_with_tools("Bill Dailey bio")
    group = GroupRollout(ep["question"], [good, bad, bad, bad])
    ents = [{"name": "Bill Dailey", "url": DAILEY_URL}, {"name": "Roy Face", "url": ""}]
    g = score_group(group, ep["ground_truth"], ents, RuleJudge(), RewardConfig(0.5, "name_em"))
    assert g.rewards == [1.0, 0.25, 0.25, 0.25]
    assert g.advantages == pytest.approx(group_advantages(g.rewards))
    plain = score_group(GroupRollout(ep["question"], [good, bad, bad, bad]), ep["ground_truth"], ents,
                        RuleJudge(), RewardConfig(0.0))
    assert plain.rewards == [1.0, 0.0, 0.0, 0.0]


def test_group_rollout_validation():
    with pytest.raises(ValueError):
        GroupRollout("q", [traj_with_tools()], rewards=[1.0, 0.0])
