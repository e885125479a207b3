"""Dataset and corpus loaders plus the web-search corpus builder.

All files are line-delimited UTF-8 JSON records. The search client behind
the corpus builder is abstract: a scripted mock and a replay client over
pre-crawled results ship here; no live search integration does.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from urllib.parse import urlparse

from .textcore import segment_sentences

log = logging.getLogger(__name__)


class DatasetFormatError(ValueError):
    pass


@dataclass(frozen=True)
class QAPair:
    id: str
    question: str
    answer: str
    aspects: tuple[str, ...] | None = None


@dataclass(frozen=True)
class SearchResult:
    text: str
    url: str


def _iter_records(path: str | Path):
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such file: {p}")
    with p.open(encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetFormatError(f"{p}:{lineno}: invalid JSON: {exc}") from exc


def load_qa_dataset(path: str | Path) -> list[QAPair]:
    """Records {id, question, answer, aspects?}; ids must be unique and
    question/answer non-empty."""
    pairs = []
    seen = set()
    for lineno, rec in _iter_records(path):
        for field in ("id", "question", "answer"):
            if not rec.get(field):
                raise DatasetFormatError(
                    f"{path}:{lineno}: missing or empty field {field!r}"
                )
        if rec["id"] in seen:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate id {rec['id']!r}")
        seen.add(rec["id"])
        aspects = rec.get("aspects")
        pairs.append(
            QAPair(
                id=rec["id"],
                question=rec["question"],
                answer=rec["answer"],
                aspects=tuple(aspects) if aspects else None,
            )
        )
    return pairs


def save_qa_dataset(pairs: list[QAPair], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for p in pairs:
            rec = {"id": p.id, "question": p.question, "answer": p.answer}
            if p.aspects:
                rec["aspects"] = list(p.aspects)
            f.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def load_corpus(path: str | Path) -> list[tuple[str, str]]:
    """Records {id, title, text}; the title is prepended to the text with
    ': ' so it participates in chunking."""
    docs = []
    seen = set()
    for lineno, rec in _iter_records(path):
        for field in ("id", "title", "text"):
            if field not in rec:
                raise DatasetFormatError(
                    f"{path}:{lineno}: missing field {field!r}"
                )
        if rec["id"] in seen:
            raise DatasetFormatError(f"{path}:{lineno}: duplicate doc id {rec['id']!r}")
        seen.add(rec["id"])
        text = f"{rec['title']}: {rec['text']}" if rec["title"] else rec["text"]
        docs.append((rec["id"], text))
    return docs


class MockSearchClient:
    """Fixed results for every query, or per-query via a mapping."""

    def __init__(self, results, per_query: dict[str, list[SearchResult]] | None = None):
        self._results = results
        self._per_query = per_query or {}
        self.queries: list[str] = []

    def search(self, query: str) -> list[SearchResult]:
        self.queries.append(query)
        return self._per_query.get(query, self._results)


class ReplaySearchClient:
    """Replays pre-crawled results from a file of {query, results:[{text,url}]}."""

    def __init__(self, path: str | Path):
        self._by_query = {}
        for _, rec in _iter_records(path):
            self._by_query[rec["query"]] = [
                SearchResult(text=r["text"], url=r["url"]) for r in rec["results"]
            ]

    def search(self, query: str) -> list[SearchResult]:
        if query not in self._by_query:
            raise KeyError(f"no replayed results for query: {query!r}")
        return self._by_query[query]


def _excluded(url: str, exclude_domains: list[str]) -> bool:
    host = urlparse(url).netloc.lower()
    return any(host == d or host.endswith("." + d) for d in
               (dom.lower() for dom in exclude_domains))


def build_web_corpus(
    search,
    pairs: list[QAPair],
    top_n: int = 10,
    exclude_domains: list[str] | None = None,
) -> list[tuple[str, str]]:
    """One query per reference-answer sentence; keeps the top_n results not
    from excluded domains, dedupes exact sentences corpus-wide, and emits
    one document per kept sentence with provenance ids. Failed queries are
    skipped and counted in the log."""
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    exclude_domains = exclude_domains or []
    docs = []
    seen_texts = set()
    failures = 0
    for pair in pairs:
        for sent in segment_sentences(pair.answer):
            try:
                results = search.search(sent.text)
            except Exception as exc:
                log.warning("search failed for %s/%d: %s", pair.id, sent.index, exc)
                failures += 1
                continue
            kept = [r for r in results if not _excluded(r.url, exclude_domains)]
            for rank, result in enumerate(kept[:top_n], 1):
                if result.text in seen_texts:
                    continue
                seen_texts.add(result.text)
                docs.append((f"{pair.id}:{sent.index}:{rank}", result.text))
    if failures:
        log.warning("build_web_corpus skipped %d failed queries", failures)
    return docs


def save_corpus(docs: list[tuple[str, str]], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as f:
        for doc_id, text in docs:
            f.write(
                json.dumps({"id": doc_id, "title": "", "text": text},
                           sort_keys=True, ensure_ascii=False) + "\n"
            )
