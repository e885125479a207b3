"""Deterministic text primitives shared by every stage of the pipeline.

Tokenization, rule-based sentence segmentation, syllable counting and
near-duplicate detection are all pure functions, so they can be called
from any number of workers without coordination.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

# Periods after these (case-insensitive) never end a sentence. Entries may
# contain internal dots ("e.g", "i.e"); the final dot is the one in the text.
DEFAULT_ABBREVIATIONS = frozenset(
    {"dr", "mr", "mrs", "ms", "e.g", "i.e", "etc", "vs", "fig", "no"}
)

_TOKEN_RE = re.compile(r"[a-z0-9]+(?:'[a-z0-9]+)*")
_VOWEL_GROUP_RE = re.compile(r"[aeiouy]+")
_TERMINAL = ".!?"


@dataclass(frozen=True)
class Sentence:
    """One segmented sentence; ``index`` is its ordinal within the source."""

    text: str
    index: int


def tokenize(text: str) -> list[str]:
    """Lowercased maximal alphanumeric runs; apostrophes stay word-internal.

    Every other character is a separator. Deterministic, empty-safe.
    """
    return _TOKEN_RE.findall(text.lower())


def load_abbreviations(path: str | Path) -> frozenset[str]:
    """Abbreviation list from a plain-text file, one entry per line.

    Missing file falls back to the built-in default list.
    """
    p = Path(path)
    if not p.exists():
        return DEFAULT_ABBREVIATIONS
    entries = set()
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.strip().rstrip(".")
        if line:
            entries.add(line.lower())
    return frozenset(entries) if entries else DEFAULT_ABBREVIATIONS


def _is_abbreviation(text: str, dot_pos: int, abbreviations: frozenset[str]) -> bool:
    # Word immediately before the dot, allowing internal dots ("e.g.").
    j = dot_pos
    while j > 0 and (text[j - 1].isalnum() or text[j - 1] == "."):
        j -= 1
    word = text[j:dot_pos].rstrip(".")
    if not word:
        return False
    bare = word.lstrip(".")
    if len(bare) == 1 and bare.isupper():
        # Single uppercase letter reads as an initial ("J. Smith") only at
        # the start of the text or of a sentence; mid-sentence letters like
        # "do Y." still end the sentence.
        k = j
        while k > 0 and text[k - 1].isspace():
            k -= 1
        if k == 0 or text[k - 1] in _TERMINAL:
            return True
    return bare.lower() in abbreviations


def segment_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[Sentence]:
    """Split after '.', '!' or '?' followed by whitespace and an uppercase
    letter (or end of text), except after a listed abbreviation or a single
    letter.
    """
    boundaries = []
    n = len(text)
    for i, ch in enumerate(text):
        if ch not in _TERMINAL:
            continue
        if i + 1 < n and text[i + 1] in _TERMINAL:
            continue  # defer to the last mark of a run like "?!"
        if ch == "." and _is_abbreviation(text, i, abbreviations):
            continue
        # Must be followed by whitespace then an uppercase letter, or only
        # whitespace to the end of the text.
        j = i + 1
        if j < n and not text[j].isspace():
            continue
        while j < n and text[j].isspace():
            j += 1
        if j < n and not text[j].isupper():
            continue
        boundaries.append(i + 1)

    sentences = []
    start = 0
    for b in boundaries + [n]:
        piece = text[start:b].strip()
        if piece:
            sentences.append(Sentence(text=piece, index=len(sentences)))
        start = b
    return sentences


def count_syllables(word: str) -> int:
    """Vowel-group heuristic: count maximal a/e/i/o/u/y runs, subtract one
    for a word-final silent 'e' (kept when the word ends in consonant+"le");
    never below 1 for non-empty input.
    """
    w = word.lower()
    if not w:
        return 0
    groups = len(_VOWEL_GROUP_RE.findall(w))
    if w.endswith("e") and not (
        w.endswith("le") and len(w) >= 3 and w[-3] not in "aeiouy"
    ):
        groups -= 1
    return max(1, groups)


def sentence_similarity(a: str, b: str) -> float:
    """Clipped unigram-multiset overlap divided by the longer token count.

    Symmetric, in [0, 1]; 1.0 for identical texts, 0.0 for disjoint ones.
    """
    ta, tb = tokenize(a), tokenize(b)
    if not ta and not tb:
        return 1.0
    if not ta or not tb:
        return 0.0
    ca, cb = Counter(ta), Counter(tb)
    overlap = sum(min(ca[t], cb[t]) for t in ca)
    return overlap / max(len(ta), len(tb))
