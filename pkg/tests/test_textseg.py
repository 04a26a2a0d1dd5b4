from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from forge.textseg import (
    CallableCounter, Chunk, WordCounter, collapse_whitespace, count_tokens, extract_main_text, join_chunks,
    normalize, split_into_chunks, split_sentences,
)

GOLDEN = Path(__file__).parent / "golden"

# text with words, punctuation and assorted whitespace, including line breaks
texty = st.text(alphabet=st.sampled_from(list("abc XYZ.!?,\n\t\r    é1")), max_size=400)


def oracle_words(text):
    return len(text.split())


def test_count_tokens_examples():
    assert count_tokens("") == 0
    assert count_tokens("a b c") == 3
    assert count_tokens("  a\tb\n\nc  ") == 3


def test_count_is_deterministic():
    text = "one two  three\nfour"
    assert count_tokens(text) == count_tokens(text)


@given(st.text(max_size=200), st.text(max_size=200))
def test_seam_bound(a, b):
    assert count_tokens(a + b) <= count_tokens(a) + count_tokens(b) + 1


@given(st.text(max_size=300), st.integers(min_value=0, max_value=300))
def test_prefix_monotone(text, cut):
    assert count_tokens(text[:cut]) <= count_tokens(text)


def test_exact_division_gives_two_chunks():
    text = " ".join(f"w{i}" for i in range(256))
    chunks = split_into_chunks(text, 128)
    assert [c.token_count for c in chunks] == [128, 128]


def test_under_budget_is_one_chunk():
    chunks = split_into_chunks(" ".join(["word"] * 10), 128, source_url="u")
    assert len(chunks) == 1
    assert chunks[0].id == "u#0" and chunks[0].index == 0


def test_random_1000_token_text():
    import random

    rng = random.Random(7)
    words = ["".join(rng.choice("abcdefg") for _ in range(rng.randint(1, 8))) for _ in range(1000)]
    text = " ".join(w + ("." if rng.random() < 0.1 else "") for w in words)
    chunks = split_into_chunks(text, 128)
    counts = [oracle_words(c.text) for c in chunks]
    assert sum(counts) == 1000
    assert max(counts) <= 128
    assert [c.token_count for c in chunks] == counts


def test_cut_prefers_sentence_end():
    sent = "alpha beta gamma delta epsilon zeta eta theta."
    text = " ".join([sent] * 5)  # 40 words
    chunks = split_into_chunks(text, 20)
    assert all(c.text.rstrip().endswith(".") for c in chunks)
    assert [c.token_count for c in chunks] == [16, 16, 8]


def test_hard_cut_for_oversized_piece():
    counter = CallableCounter(lambda s: len(s.replace(" ", "")), name="chars")
    chunks = split_into_chunks("abcdefghij", 4, counter=counter)
    assert [c.text for c in chunks] == ["abcd", "efgh", "ij"]


def test_invalid_budget():
    with pytest.raises(ValueError):
        split_into_chunks("x", 0)


def test_normalize_keeps_lines_and_collapses_spaces():
    assert normalize("  a \t b \n\n  c  ") == "a b\nc"
    assert collapse_whitespace("  a \t b \n\n  c  ") == "a b c"


@settings(max_examples=300)
@given(texty, st.integers(min_value=1, max_value=12))
def test_lossless_join_and_budget(text, budget):
    chunks = split_into_chunks(text, budget, source_url="s")
    assert join_chunks(chunks) == normalize(text)
    assert all(c.token_count <= budget for c in chunks)
    assert [c.index for c in chunks] == list(range(len(chunks)))
    assert all(c.token_count == WordCounter().count(c.text) for c in chunks)


@given(texty)
def test_normalize_idempotent(text):
    assert normalize(normalize(text)) == normalize(text)


def test_minimal_document():
    assert extract_main_text("<html><title>T</title><body><p>hi</p></body></html>") == {"title": "T", "text": "hi"}


def test_script_and_boilerplate_removed():
    html = ("<html><head><script>var secret = 1;</script><style>p{}</style></head><body>"
            "<nav>Menu</nav><p>Body text.</p><footer>Legal</footer></body></html>")
    out = extract_main_text(html)
    assert out["text"] == "Body text."
    assert "secret" not in out["text"] and "Menu" not in out["text"]


def test_bytes_and_entities():
    out = extract_main_text("<p>caf&eacute; &amp; bar</p>".encode())
    assert out["text"] == "café & bar"


def test_golden_extraction(corpus):
    got = extract_main_text(corpus.pages["https://en.wikipedia.org/wiki/Bill_Dailey"])
    title, _, text = (GOLDEN / "bill_dailey.txt").read_text(encoding="utf-8").partition("\n---\n")
    assert got["title"] == title
    assert got["text"] == text.rstrip("\n")


def test_split_sentences():
    assert split_sentences("One two. Three four!\nFive") == ["One two.", "Three four!", "Five"]


def test_chunk_is_frozen():
    c = Chunk("a#0", "x", 1, "a", 0)
    with pytest.raises(Exception):
        c.text = "y"
