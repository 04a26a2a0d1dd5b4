"""Three-stage fact fuzzification: entity masking, static number blurring, rephrasing."""

from __future__ import annotations

import hashlib
import re
from typing import Iterable, Mapping, Sequence

from ..gateway.types import EntityRecognizer, Mention, Rephraser

DESCRIPTORS: dict[str, tuple[str, ...]] = {
    "physicist": ("a famous physicist", "a renowned scientist", "a celebrated theorist"),
    "baseball pitcher": ("a former professional pitcher", "a one-time big-league hurler", "a retired ballplayer"),
    "baseball team": ("a major-league club", "a professional baseball franchise", "a big-league team"),
    "county": ("a county in the region", "a nearby county", "a local county"),
    "city": ("a city in the region", "a well-known city", "an old city"),
    "town": ("a small town", "a rural town", "a modest town"),
}
GENERIC_DESCRIPTORS = ("a certain entity", "a notable entity", "a particular place or person")

# a number not already fuzzed ("around 40") and not part of a word or decade ("1990s")
_NUMBER = re.compile(r"(?:(?<!\w)(an?)\s+)?(?<!around )(?<![\w.,])(\d{1,3}(?:,\d{3})+|\d+)(\.\d+)?(?![\w])")


def pick_descriptor(mention: Mention, seed: int = 0,
                    table: Mapping[str, Sequence[str]] | None = None) -> str:
    choices = (table or DESCRIPTORS).get(mention.category) or GENERIC_DESCRIPTORS
    h = hashlib.blake2b(f"{seed}|{mention.name}".encode(), digest_size=4).digest()
    return choices[int.from_bytes(h, "big") % len(choices)]


def fuzz_entity(fact: str, mentions: Iterable[Mention], seed: int = 0,
                table: Mapping[str, Sequence[str]] | None = None) -> str:
    """Replace every mention with a category descriptor, longest surface form first."""
    out = fact
    unique = {m.name: m for m in mentions if m.name}
    for name in sorted(unique, key=lambda n: (-len(n), n)):
        pattern = re.compile(r"(?:(?<!\w)([Tt]he)\s+)?(?<!\w)" + re.escape(name) + r"(?!\w)")
        desc = pick_descriptor(unique[name], seed, table)
        out = pattern.sub(lambda m: _article_fit(desc, m.group(1), out, m.start()), out)
    return out


def _article_fit(desc: str, article: str | None, text: str, start: int) -> str:
    # "the X" would read "the a famous ..."; the descriptor brings its own article
    if article == "The" or (start == 0 or text[:start].rstrip().endswith((".", "!", "?"))):
        return desc[:1].upper() + desc[1:]
    return desc


def _static_sub(m: re.Match) -> str:
    article = m.group(1)
    text = _blur(m.group(2), m.group(3))
    if not article:
        return text
    if text.startswith("a few"):
        return text
    return ("an " if text[0] in "aeiou" else "a ") + text if article.islower() else (
        ("An " if text[0] in "aeiou" else "A ") + text)


def _blur(whole: str, frac: str | None) -> str:
    if frac is None and "," not in whole and len(whole) == 4 and 1000 <= int(whole) <= 2099:
        year = int(whole)
        phase = year % 10
        word = "early" if phase <= 3 else "mid" if phase <= 6 else "late"
        return f"{word} {year - phase}s"
    value = float(whole.replace(",", "") + (frac or ""))
    if value < 10:
        return "a few"
    return f"around {int((value + 5) // 10) * 10}"


def fuzz_static(fact: str) -> str:
    """Blur years to "<early|mid|late> <decade>s" and other numbers to "around <tens>".

    Numbers below ten become "a few". Already-blurred forms are left alone, so
    the function is idempotent.
    """
    return _NUMBER.sub(_static_sub, fact)


def fuzzify(facts: Sequence[str], ner: EntityRecognizer, rephraser: Rephraser, seed: int = 0,
            extra_mentions: Sequence[Mention] = ()) -> list[str]:
    """Apply entity masking, then static blurring, then rephrasing, to each fact.

    ``extra_mentions`` adds surface forms the recognizer misses, such as the
    node's own short name.
    """
    out = []
    for fact in facts:
        mentions = list(ner.mentions(fact)) + [m for m in extra_mentions if m.name in fact]
        out.append(rephraser.rephrase(fuzz_static(fuzz_entity(fact, mentions, seed))))
    return out


def self_mentions(name: str, category: str) -> list[Mention]:
    """Mentions for a node's own name and its shorter forms."""
    from .tree import name_variants

    return [Mention(v, category) for v in name_variants(name)]
