"""Evaluation suite: ROUGE-1/2/L, NLI factual-consistency scoring through a
remote classifier, five classical readability indices, and an automatic
aspect-coverage proxy."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from importlib import resources

from .textcore import count_syllables, segment_sentences, tokenize

log = logging.getLogger(__name__)

DALE_CHALL_LIST_VERSION = "builtin-1"


def _load_familiar_words() -> frozenset[str]:
    text = resources.files("iprg.data").joinpath("dale_chall.txt").read_text(
        encoding="utf-8"
    )
    return frozenset(
        w.strip().lower()
        for w in text.splitlines()
        if w.strip() and not w.startswith("#")
    )


FAMILIAR_WORDS = _load_familiar_words()


class NliContractError(RuntimeError):
    """NLI client returned probabilities that do not sum to ~1."""


@dataclass(frozen=True)
class RougeScore:
    recall: float
    precision: float
    f1: float

    @staticmethod
    def from_counts(overlap: float, ref_total: int, cand_total: int) -> "RougeScore":
        recall = overlap / ref_total if ref_total else 0.0
        precision = overlap / cand_total if cand_total else 0.0
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        return RougeScore(recall=recall, precision=precision, f1=f1)


@dataclass(frozen=True)
class NliScore:
    entail: float
    neutral: float
    contradict: float


@dataclass(frozen=True)
class ReadabilityReport:
    fkgl: float
    gfi: float
    ari: float
    cli: float
    dcr: float


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n(candidate: str, reference: str, n: int = 1) -> RougeScore:
    """Clipped n-gram multiset overlap; all zeros when either side has no
    n-grams."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cand = _ngrams(tokenize(candidate), n)
    ref = _ngrams(tokenize(reference), n)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    if not cand_total or not ref_total:
        return RougeScore(0.0, 0.0, 0.0)
    overlap = sum(min(cand[g], ref[g]) for g in cand)
    return RougeScore.from_counts(overlap, ref_total, cand_total)


def _lcs_length(a: list[str], b: list[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0] * (len(b) + 1)
        for j, y in enumerate(b, 1):
            cur[j] = prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1])
        prev = cur
    return prev[-1]


def rouge_l(candidate: str, reference: str) -> RougeScore:
    """LCS-based ROUGE over token sequences."""
    cand = tokenize(candidate)
    ref = tokenize(reference)
    if not cand or not ref:
        return RougeScore(0.0, 0.0, 0.0)
    lcs = _lcs_length(cand, ref)
    return RougeScore.from_counts(lcs, len(ref), len(cand))


def readability(
    text: str, familiar_words: frozenset[str] = FAMILIAR_WORDS
) -> ReadabilityReport:
    """FKGL, GFI, ARI, CLI and DCR grade levels, computed from this
    package's own tokenizer, segmenter, and syllable counter."""
    words = tokenize(text)
    sentences = segment_sentences(text)
    if not words or not sentences:
        raise ValueError("readability needs at least one word and one sentence")
    w = len(words)
    s = len(sentences)
    syllables = sum(count_syllables(word) for word in words)
    complex_words = sum(1 for word in words if count_syllables(word) >= 3)
    chars = sum(1 for ch in text if ch.isalnum())
    unfamiliar = sum(1 for word in words if word not in familiar_words)

    fkgl = 0.39 * (w / s) + 11.8 * (syllables / w) - 15.59
    gfi = 0.4 * ((w / s) + 100.0 * (complex_words / w))
    ari = 4.71 * (chars / w) + 0.5 * (w / s) - 21.43
    letters_per_100 = 100.0 * chars / w
    sentences_per_100 = 100.0 * s / w
    cli = 0.0588 * letters_per_100 - 0.296 * sentences_per_100 - 15.8
    difficult_pct = 100.0 * unfamiliar / w
    dcr = 0.1579 * difficult_pct + 0.0496 * (w / s)
    if difficult_pct > 5:
        dcr += 3.6365
    return ReadabilityReport(fkgl=fkgl, gfi=gfi, ari=ari, cli=cli, dcr=dcr)


def nli_eval(client, reference: str, generated: str) -> NliScore:
    """Generated answer as hypothesis, reference as premise; probabilities
    are passed through unmodified after a sum-to-one contract check."""
    entail, neutral, contradict = client.nli(premise=reference, hypothesis=generated)
    total = entail + neutral + contradict
    if abs(total - 1.0) > 1e-3:
        raise NliContractError(f"NLI probabilities sum to {total}, expected ~1")
    return NliScore(entail=entail, neutral=neutral, contradict=contradict)


def aspect_coverage(answer: str, aspects: list[str]) -> float:
    """Fraction of aspect phrases appearing as contiguous token subsequences
    of the answer, case-folded."""
    if not aspects:
        raise ValueError("aspects must be non-empty")
    answer_tokens = tokenize(answer)
    covered = 0
    for aspect in aspects:
        phrase = tokenize(aspect)
        if phrase and _contains_subsequence(answer_tokens, phrase):
            covered += 1
    return covered / len(aspects)


def _contains_subsequence(haystack: list[str], needle: list[str]) -> bool:
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def evaluate_predictions(
    pairs,
    predictions: dict[str, str],
    nli_client=None,
    with_readability: bool = False,
    with_aspects: bool = False,
) -> dict:
    """Per-item scores plus corpus means (x100, as conventionally reported).

    NLI items whose client call fails are marked missing and excluded from
    the aggregates; the exclusion count is reported.
    """
    by_id = {p.id: p for p in pairs}
    missing = [pid for pid in predictions if pid not in by_id]
    if missing:
        raise KeyError(f"predictions reference unknown ids: {missing[:5]}")

    items = []
    nli_excluded = 0
    for pid in predictions:
        pair = by_id[pid]
        answer = predictions[pid]
        r1 = rouge_n(answer, pair.answer, 1)
        rl = rouge_l(answer, pair.answer)
        row = {
            "id": pid,
            "r1_recall": r1.recall,
            "r1_f1": r1.f1,
            "rl_recall": rl.recall,
            "rl_f1": rl.f1,
        }
        if nli_client is not None:
            try:
                score = nli_eval(nli_client, pair.answer, answer)
                row["entail"] = score.entail
                row["contradict"] = score.contradict
            except NliContractError:
                raise
            except Exception as exc:
                log.warning("NLI failed for %s: %s", pid, exc)
                nli_excluded += 1
        if with_readability and answer.strip():
            try:
                rep = readability(answer)
                row.update(
                    fkgl=rep.fkgl, gfi=rep.gfi, ari=rep.ari, cli=rep.cli, dcr=rep.dcr
                )
            except ValueError:
                pass
        if with_aspects and pair.aspects:
            row["aspect_coverage"] = aspect_coverage(answer, pair.aspects)
        items.append(row)

    metric_keys = sorted({k for row in items for k in row if k != "id"})
    summary = {}
    for key in metric_keys:
        values = [row[key] for row in items if key in row]
        if values:
            summary[key] = round(100.0 * sum(values) / len(values), 2)
    return {
        "config": {
            "rouge_variant": "lowercased, no stemming, no stopword removal",
            "dale_chall_list_version": DALE_CHALL_LIST_VERSION,
            "scale": "x100",
        },
        "count": len(items),
        "nli_excluded": nli_excluded,
        "items": items,
        "summary": summary,
    }
