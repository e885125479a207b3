"""Clients for remote generation, NLI scoring, and embedding, plus the
scripted mock used throughout the test suite, prompt composition, and
first-new-sentence extraction."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

import requests

from .textcore import Sentence, segment_sentences, sentence_similarity


class TransportError(RuntimeError):
    pass


class ContractError(RuntimeError):
    """Remote response violated the protocol contract."""


class PromptBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class GenerationRequest:
    prompt: str
    max_new_tokens: int
    stop_on: str | None = None

    def __post_init__(self):
        if not self.prompt:
            raise ValueError("prompt must be non-empty")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")


@dataclass(frozen=True)
class GenerationResult:
    text: str
    finished: bool


class HttpClient:
    """Talks the sidecar protocol: POST /generate, /nli, /embed, GET /health."""

    def __init__(self, base_url: str, timeout: float = 60.0, session=None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session or requests.Session()

    def _post(self, path: str, body: dict) -> dict:
        try:
            resp = self._session.post(
                self.base_url + path, json=body, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"POST {path} failed: {exc}") from exc
        if resp.status_code >= 500:
            raise TransportError(f"POST {path} -> {resp.status_code}: {resp.text}")
        if resp.status_code >= 400:
            raise ContractError(f"POST {path} -> {resp.status_code}: {resp.text}")
        return resp.json()

    def generate(self, request: GenerationRequest) -> GenerationResult:
        data = self._post(
            "/generate",
            {"prompt": request.prompt, "max_new_tokens": request.max_new_tokens},
        )
        if "text" not in data or "finished" not in data:
            raise ContractError(f"/generate response missing fields: {data}")
        return GenerationResult(text=data["text"], finished=bool(data["finished"]))

    def generate_text(self, prompt: str, max_new_tokens: int) -> str:
        return self.generate(GenerationRequest(prompt, max_new_tokens)).text

    def nli(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        data = self._post("/nli", {"premise": premise, "hypothesis": hypothesis})
        try:
            return (float(data["entail"]), float(data["neutral"]),
                    float(data["contradict"]))
        except KeyError as exc:
            raise ContractError(f"/nli response missing {exc}") from exc

    def embed(self, texts: list[str]) -> list[list[float]]:
        data = self._post("/embed", {"texts": texts})
        if "vectors" not in data or "dim" not in data:
            raise ContractError(f"/embed response missing fields: {data}")
        return data["vectors"]

    def health(self) -> dict:
        try:
            resp = self._session.get(self.base_url + "/health", timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise TransportError(f"GET /health failed: {exc}") from exc
        return resp.json()


class MockGenerationClient:
    """Replays a fixed script and records every prompt it receives.

    An exhausted script yields empty text, which the controller treats as
    the empty-generation stop signal.
    """

    def __init__(self, script: list[str]):
        self._script = list(script)
        self._pos = 0
        self._lock = threading.Lock()
        self.prompts: list[str] = []

    @property
    def call_count(self) -> int:
        return len(self.prompts)

    def generate(self, request: GenerationRequest) -> GenerationResult:
        with self._lock:
            self.prompts.append(request.prompt)
            if self._pos < len(self._script):
                text = self._script[self._pos]
                self._pos += 1
            else:
                text = ""
        return GenerationResult(text=text, finished=True)

    def generate_text(self, prompt: str, max_new_tokens: int) -> str:
        return self.generate(GenerationRequest(prompt, max_new_tokens)).text


class MockNliClient:
    """Returns fixed (entail, neutral, contradict) triples, cycling the
    last one when the script runs out."""

    def __init__(self, scores: list[tuple[float, float, float]]):
        if not scores:
            raise ValueError("need at least one score triple")
        self._scores = list(scores)
        self._pos = 0
        self._lock = threading.Lock()
        self.pairs: list[tuple[str, str]] = []

    def nli(self, premise: str, hypothesis: str) -> tuple[float, float, float]:
        with self._lock:
            self.pairs.append((premise, hypothesis))
            triple = self._scores[min(self._pos, len(self._scores) - 1)]
            self._pos += 1
        return triple


def compose_generation_prompt(
    question: str,
    plan,
    contexts,
    pretext: str,
    max_prompt_tokens: int = 1024,
) -> str:
    """Template: question / answer-so-far / keywords / context segments.

    Contexts are joined by " [CTX] " and truncated from the tail so the
    whitespace-token total stays within budget; question, pretext, and
    keywords are never truncated. IRG mode (plan=None) omits the keyword
    segment. Separator tokens are charged to the fixed part of the budget,
    not to individual passages.
    """
    parts = [f"question: {question}", f"answer so far: {pretext}"]
    if plan is not None:
        parts.append(f"keywords: {', '.join(plan.keywords)}")
    base = " [SEP] ".join(parts) + " [SEP] context: "
    budget = max_prompt_tokens - len(base.split())
    if budget < 0:
        raise PromptBudgetError("prompt budget exhausted")
    kept = []
    for ctx in contexts:
        words = ctx.passage.text.split()
        if budget <= 0:
            break
        if len(words) > budget:
            words = words[:budget]
        kept.append(" ".join(words))
        budget -= len(words)
    return base + " [CTX] ".join(kept)


def generate_paragraph(
    client,
    request: GenerationRequest,
    retries: int = 3,
    backoff: float = 0.25,
) -> GenerationResult:
    """Client text verbatim; transient transport failures are retried with
    exponential backoff. Empty text is returned as-is for the controller to
    interpret."""
    last_exc = None
    for attempt in range(retries):
        try:
            return client.generate(request)
        except TransportError as exc:
            last_exc = exc
            if attempt + 1 < retries:
                time.sleep(backoff * (2**attempt))
    raise TransportError(f"generation failed after {retries} attempts: {last_exc}")


def first_new_sentence(
    paragraph: str, pretext: str, threshold: float = 0.8
) -> Sentence | None:
    """Earliest sentence of the paragraph whose similarity to every pretext
    sentence stays below the threshold; None when everything is a
    near-duplicate or the paragraph is empty."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must be in (0, 1]")
    pre_sentences = segment_sentences(pretext)
    for sent in segment_sentences(paragraph):
        if all(
            sentence_similarity(sent.text, p.text) < threshold for p in pre_sentences
        ):
            return sent
    return None
