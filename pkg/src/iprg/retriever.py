"""Corpus chunking, embedding, and exact top-k cosine retrieval.

The index is immutable once built and safe to share across readers. Search
is an exact full scan; corpora at the scales this engine targets make an
approximate index unnecessary and exactness keeps the ranking testable
against a brute-force oracle.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .textcore import tokenize

log = logging.getLogger(__name__)

INDEX_FORMAT_VERSION = 1
MIN_REMAINDER_TOKENS = 10


class IndexEmptyError(RuntimeError):
    pass


class EmbedderMismatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class Passage:
    id: str
    doc_id: str
    text: str
    position: int


@dataclass(frozen=True)
class RetrievedContext:
    passage: Passage
    score: float
    rank: int


def chunk_corpus(
    documents: list[tuple[str, str]],
    passage_len: int = 100,
    stride: int = 100,
) -> list[Passage]:
    """Sliding windows of whitespace tokens. A final short remainder is kept
    only if it has at least MIN_REMAINDER_TOKENS tokens or is the sole chunk
    of its document."""
    if passage_len < 1:
        raise ValueError("passage_len must be >= 1")
    if not 1 <= stride <= passage_len:
        raise ValueError("stride must be in [1, passage_len]")
    passages = []
    for doc_id, text in documents:
        words = text.split()
        if not words:
            log.warning("empty document %s produced no passages", doc_id)
            continue
        position = 0
        start = 0
        while start < len(words):
            window = words[start : start + passage_len]
            if len(window) < passage_len and position > 0:
                if len(window) < MIN_REMAINDER_TOKENS:
                    break
            passages.append(
                Passage(
                    id=f"{doc_id}:{position}",
                    doc_id=doc_id,
                    text=" ".join(window),
                    position=position,
                )
            )
            if start + passage_len >= len(words):
                break
            start += stride
            position += 1
    return passages


def _hash_bucket(token: str, dim: int) -> int:
    digest = hashlib.md5(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % dim


class LexicalEmbedder:
    """Hashed bag-of-words with tf-idf weighting, L2-normalized.

    idf is computed per hash bucket from the indexed corpus and reused for
    queries, so query embedding needs no second corpus pass. Stopword-only
    text embeds to the zero vector.
    """

    kind = "lexical"

    def __init__(self, dim: int = 1024, idf: np.ndarray | None = None):
        if dim < 64:
            raise ValueError("dim must be >= 64")
        self.dim = dim
        self.idf = idf if idf is not None else np.ones(dim, dtype=np.float64)

    @property
    def tag(self) -> str:
        return f"lexical-v1:d{self.dim}"

    def fit(self, texts: list[str]) -> "LexicalEmbedder":
        df = np.zeros(self.dim, dtype=np.float64)
        for text in texts:
            buckets = {_hash_bucket(t, self.dim) for t in tokenize(text)}
            for b in buckets:
                df[b] += 1
        n = len(texts)
        self.idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
        return self

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            row = np.zeros(self.dim, dtype=np.float64)
            for tok in tokenize(text):
                row[_hash_bucket(tok, self.dim)] += 1.0
            row *= self.idf
            norm = np.linalg.norm(row)
            if norm > 0:
                row /= norm
            out[i] = row.astype(np.float32)
        return out


class RemoteEmbedder:
    """Dense embedding via the sidecar /embed endpoint."""

    kind = "remote"

    def __init__(self, client):
        self._client = client
        info = client.health()
        self.dim = int(info["dim"])
        model = (info.get("models") or {}).get("embedder", "unknown")
        self.tag = f"remote:{model}:d{self.dim}"

    def embed(self, texts: list[str]) -> np.ndarray:
        vectors = self._client.embed(texts)
        arr = np.asarray(vectors, dtype=np.float32)
        if arr.ndim != 2 or arr.shape != (len(texts), self.dim):
            raise ValueError(f"bad embedding shape {arr.shape}")
        return arr


@dataclass
class PassageIndex:
    passages: list[Passage]
    vectors: np.ndarray  # float32, shape (n, d)
    embedder_tag: str
    norms: np.ndarray  # float64, shape (n,)
    passage_len: int = 100
    stride: int = 100

    @classmethod
    def build(
        cls,
        passages: list[Passage],
        embedder,
        passage_len: int = 100,
        stride: int = 100,
    ) -> "PassageIndex":
        ids = [p.id for p in passages]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate passage ids")
        vectors = embedder.embed([p.text for p in passages])
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        return cls(
            passages=passages,
            vectors=vectors,
            embedder_tag=embedder.tag,
            norms=norms,
            passage_len=passage_len,
            stride=stride,
        )

    def save(self, directory: str | Path, embedder=None) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        manifest = {
            "format_version": INDEX_FORMAT_VERSION,
            "embedder_tag": self.embedder_tag,
            "dim": int(self.vectors.shape[1]),
            "count": len(self.passages),
            "passage_len": self.passage_len,
            "stride": self.stride,
        }
        (d / "manifest.json").write_text(
            json.dumps(manifest, sort_keys=True) + "\n", encoding="utf-8"
        )
        with (d / "passages.jsonl").open("w", encoding="utf-8") as f:
            for p in self.passages:
                f.write(
                    json.dumps(
                        {"id": p.id, "doc_id": p.doc_id, "text": p.text,
                         "position": p.position},
                        sort_keys=True,
                        ensure_ascii=False,
                    )
                    + "\n"
                )
        (d / "vectors.f32").write_bytes(
            np.ascontiguousarray(self.vectors, dtype="<f4").tobytes()
        )
        if isinstance(embedder, LexicalEmbedder):
            (d / "idf.f64").write_bytes(
                np.ascontiguousarray(embedder.idf, dtype="<f8").tobytes()
            )

    @classmethod
    def load(cls, directory: str | Path) -> tuple["PassageIndex", "LexicalEmbedder | None"]:
        """Returns the index and, for lexical indexes, a query embedder
        rebuilt from the stored idf table."""
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        dim = manifest["dim"]
        passages = []
        with (d / "passages.jsonl").open(encoding="utf-8") as f:
            for line in f:
                rec = json.loads(line)
                passages.append(
                    Passage(id=rec["id"], doc_id=rec["doc_id"], text=rec["text"],
                            position=rec["position"])
                )
        vectors = np.frombuffer((d / "vectors.f32").read_bytes(), dtype="<f4")
        vectors = vectors.reshape(len(passages), dim).copy()
        norms = np.linalg.norm(vectors.astype(np.float64), axis=1)
        index = cls(
            passages=passages,
            vectors=vectors,
            embedder_tag=manifest["embedder_tag"],
            norms=norms,
            passage_len=manifest["passage_len"],
            stride=manifest["stride"],
        )
        embedder = None
        idf_path = d / "idf.f64"
        if idf_path.exists():
            idf = np.frombuffer(idf_path.read_bytes(), dtype="<f8").copy()
            embedder = LexicalEmbedder(dim=dim, idf=idf)
        return index, embedder


def build_query(question: str, pretext: str, plan=None) -> str:
    """Question, pretext, and keyword plan joined with [SEP] markers; the
    keyword segment is omitted entirely when there is no plan (IRG mode)."""
    if not question:
        raise ValueError("question must be non-empty")
    if plan is None:
        return f"{question} [SEP] {pretext}"
    return f"{question} [SEP] {pretext} [SEP] keywords: {', '.join(plan.keywords)}"


def search(index: PassageIndex, query: str, k: int, embed) -> list[RetrievedContext]:
    """Exact cosine over all passages; top-k by score with ties broken by
    smaller passage id; k beyond the corpus size returns everything."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not index.passages:
        raise IndexEmptyError("index empty")
    if embed.tag != index.embedder_tag:
        raise EmbedderMismatchError(
            f"query embedder {embed.tag!r} does not match index {index.embedder_tag!r}"
        )
    qv = embed.embed([query])[0].astype(np.float64)
    qnorm = np.linalg.norm(qv)
    denom = index.norms * qnorm
    dots = index.vectors.astype(np.float64) @ qv
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(denom > 0, dots / np.where(denom > 0, denom, 1.0), 0.0)
    order = sorted(
        range(len(index.passages)),
        key=lambda i: (-scores[i], index.passages[i].id),
    )
    top = order[: min(k, len(order))]
    return [
        RetrievedContext(passage=index.passages[i], score=float(scores[i]), rank=r + 1)
        for r, i in enumerate(top)
    ]
