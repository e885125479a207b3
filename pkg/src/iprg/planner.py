"""Keyword plan generation.

Two halves: building text-to-keywords training pairs from QA data, and
producing a plan at run time through a remote seq2seq client with a local
RAKE-style extractive fallback.
"""

from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .textcore import segment_sentences, tokenize

log = logging.getLogger(__name__)

SEPARATOR = " [SEP] "

# Phrase fragments are cut at any character that tokenize() would not keep
# inside a word, except plain whitespace.
_FRAGMENT_SPLIT_RE = re.compile(r"[^\w\s']+")


def _load_wordlist(name: str) -> frozenset[str]:
    text = resources.files("iprg.data").joinpath(name).read_text(encoding="utf-8")
    return frozenset(
        w.strip().lower()
        for w in text.splitlines()
        if w.strip() and not w.startswith("#")
    )


DEFAULT_STOPWORDS = _load_wordlist("stopwords.txt")

MAX_PHRASE_TOKENS = 5


class PlanningError(RuntimeError):
    """Plan client failed and the extractive fallback is disabled."""

    def __init__(self, message: str, iteration: int):
        super().__init__(message)
        self.iteration = iteration


@dataclass(frozen=True)
class KeywordPlan:
    keywords: list[str]
    iteration: int

    def __post_init__(self):
        if not self.keywords:
            raise ValueError("plan must contain at least one keyword phrase")
        lowered = [k.lower() for k in self.keywords]
        if len(set(lowered)) != len(lowered):
            raise ValueError("duplicate phrases in plan")
        if any(not k.strip() for k in self.keywords):
            raise ValueError("empty phrase in plan")


@dataclass(frozen=True)
class PlanTrainingExample:
    prompt: str
    target_keywords: list[str]
    source_sentence_index: int


def load_stopwords(path: str | Path) -> frozenset[str]:
    """Stopword list from a plain-text file, one word per line; missing
    file falls back to the bundled default."""
    p = Path(path)
    if not p.exists():
        return DEFAULT_STOPWORDS
    words = frozenset(
        w.strip().lower() for w in p.read_text(encoding="utf-8").splitlines() if w.strip()
    )
    return words or DEFAULT_STOPWORDS


def _candidate_phrases(text: str, stopwords: frozenset[str]) -> list[list[str]]:
    """Maximal runs of non-stopword tokens between stopwords/punctuation,
    chunked to at most MAX_PHRASE_TOKENS tokens."""
    phrases = []
    for fragment in _FRAGMENT_SPLIT_RE.split(text):
        run: list[str] = []
        for tok in tokenize(fragment):
            if tok in stopwords:
                if run:
                    phrases.append(run)
                    run = []
            else:
                run.append(tok)
        if run:
            phrases.append(run)
    chunked = []
    for run in phrases:
        for i in range(0, len(run), MAX_PHRASE_TOKENS):
            chunked.append(run[i : i + MAX_PHRASE_TOKENS])
    return chunked


def extract_keywords(
    text: str,
    max_k: int = 5,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> list[str]:
    """RAKE-style ranked phrase extraction.

    Word score is degree/frequency over the co-occurrence graph of candidate
    phrases; a phrase scores the sum of its word scores. Ties go to the
    phrase occurring earlier in the text. All-stopword input yields [].
    """
    if max_k < 1:
        raise ValueError("max_k must be >= 1")
    candidates = _candidate_phrases(text, stopwords)
    if not candidates:
        return []

    freq: dict[str, int] = defaultdict(int)
    degree: dict[str, int] = defaultdict(int)
    for phrase in candidates:
        for word in phrase:
            freq[word] += 1
            degree[word] += len(phrase)
    word_score = {w: degree[w] / freq[w] for w in freq}

    first_pos: dict[str, int] = {}
    phrase_score: dict[str, float] = {}
    for pos, phrase in enumerate(candidates):
        key = " ".join(phrase)
        if key not in first_pos:
            first_pos[key] = pos
            phrase_score[key] = sum(word_score[w] for w in phrase)

    ranked = sorted(phrase_score, key=lambda p: (-phrase_score[p], first_pos[p]))
    return ranked[:max_k]


def build_plan_training_examples(
    pair,
    max_k: int = 5,
    stopwords: frozenset[str] = DEFAULT_STOPWORDS,
) -> list[PlanTrainingExample]:
    """One example per answer sentence: the prompt grows by one sentence
    each step, the targets are the extracted keywords of the next sentence.
    Sentences whose extraction comes back empty are dropped and logged.
    """
    sentences = segment_sentences(pair.answer)
    examples = []
    for i, sent in enumerate(sentences):
        keywords = extract_keywords(sent.text, max_k=max_k, stopwords=stopwords)
        if not keywords:
            log.warning(
                "dropping training example %s/%d: no keywords extracted", pair.id, i + 1
            )
            continue
        if i == 0:
            prompt = pair.question
        else:
            prompt = pair.question + SEPARATOR + " ".join(
                s.text for s in sentences[:i]
            )
        examples.append(
            PlanTrainingExample(
                prompt=prompt,
                target_keywords=keywords,
                source_sentence_index=i + 1,
            )
        )
    return examples


@dataclass
class PlannerConfig:
    max_keywords: int = 5
    fallback: bool = True
    stopwords: frozenset[str] = field(default=DEFAULT_STOPWORDS)
    plan_max_new_tokens: int = 64


def parse_plan_text(text: str, max_keywords: int, iteration: int) -> KeywordPlan | None:
    """Comma-separated phrase list -> plan; dedup after lowercasing, keep
    first occurrences, cap at max_keywords. None if nothing parseable."""
    seen = set()
    phrases = []
    for raw in re.split(r"[,\n]", text):
        phrase = " ".join(raw.split())
        if not phrase:
            continue
        key = phrase.lower()
        if key in seen:
            continue
        seen.add(key)
        phrases.append(phrase)
        if len(phrases) >= max_keywords:
            break
    if not phrases:
        return None
    return KeywordPlan(keywords=phrases, iteration=iteration)


def generate_plan(
    question: str,
    pretext: str,
    client,
    iteration: int = 1,
    config: PlannerConfig | None = None,
    used_phrases: set[str] | None = None,
) -> KeywordPlan:
    """Plan for the next sentence via the seq2seq client; extractive
    fallback over question+pretext (minus phrases already used in earlier
    plans) when the client is missing, fails, or returns nothing parseable.
    """
    if not question:
        raise ValueError("question must be non-empty")
    config = config or PlannerConfig()
    used = {p.lower() for p in (used_phrases or set())}

    if client is not None:
        prompt = question + SEPARATOR + pretext
        try:
            result = client.generate_text(prompt, config.plan_max_new_tokens)
        except Exception as exc:
            if not config.fallback:
                raise PlanningError(
                    f"plan client failed at iteration {iteration}: {exc}", iteration
                ) from exc
            result = None
        if result:
            plan = parse_plan_text(result, config.max_keywords, iteration)
            if plan is not None:
                return plan
        if not config.fallback:
            raise PlanningError(
                f"plan client returned nothing parseable at iteration {iteration}",
                iteration,
            )

    source = question if not pretext else question + " " + pretext
    ranked = extract_keywords(source, max_k=len(used) + config.max_keywords,
                              stopwords=config.stopwords)
    fresh = [p for p in ranked if p.lower() not in used][: config.max_keywords]
    if not fresh:
        # Nothing new to say; re-plan from the question alone so the loop
        # can still form a query.
        fresh = extract_keywords(question, max_k=config.max_keywords,
                                 stopwords=config.stopwords)
    if not fresh:
        fresh = [tokenize(question)[0]] if tokenize(question) else ["answer"]
    return KeywordPlan(keywords=fresh, iteration=iteration)
