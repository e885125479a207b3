"""The iterative plan-retrieve-generate loop.

Each iteration plans keywords (skipped in IRG mode), retrieves top-k
passages, generates a paragraph, and appends at most the first new sentence
to the answer. A single run is strictly sequential; parallelism happens
across questions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from enum import Enum

from .clients import (
    GenerationRequest,
    compose_generation_prompt,
    first_new_sentence,
    generate_paragraph,
)
from .planner import PlannerConfig, generate_plan
from .retriever import PassageIndex, build_query, search
from .textcore import Sentence, tokenize


class StopReason(str, Enum):
    EMPTY_GENERATION = "empty_generation"
    DUPLICATE_ONLY = "duplicate_only"
    MAX_ITERATIONS = "max_iterations"
    TOKEN_BUDGET = "token_budget"


@dataclass
class RunConfig:
    k: int = 5
    max_iterations: int = 10
    max_answer_tokens: int = 256
    dup_threshold: float = 0.8
    mode: str = "iprg"  # "iprg" or "irg"
    max_keywords: int = 5
    max_new_tokens: int = 128
    max_prompt_tokens: int = 1024
    plan_fallback: bool = True

    def __post_init__(self):
        for name in ("k", "max_iterations", "max_answer_tokens", "max_keywords",
                     "max_new_tokens", "max_prompt_tokens"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 < self.dup_threshold <= 1:
            raise ValueError("dup_threshold must be in (0, 1]")
        if self.mode not in ("iprg", "irg"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class AnswerState:
    question: str
    sentences: list[Sentence] = field(default_factory=list)
    iteration: int = 0
    terminated_reason: StopReason | None = None

    @property
    def pretext(self) -> str:
        return " ".join(s.text for s in self.sentences)


@dataclass
class IterationTrace:
    iteration: int
    keywords: list[str]
    query: str
    retrieved: list[tuple[str, float]]
    paragraph: str
    appended: str | None

    def to_record(self) -> dict:
        rec = asdict(self)
        rec["retrieved"] = [[pid, score] for pid, score in self.retrieved]
        return rec


@dataclass
class RunResult:
    answer: str
    trace: list[IterationTrace]
    reason: StopReason
    state: AnswerState
    error: str | None = None


@dataclass
class Clients:
    generator: object
    embedder: object
    planner: object | None = None
    nli: object | None = None


class RunAborted(RuntimeError):
    """A client or index error aborted the run; carries the partial trace."""

    def __init__(self, message: str, trace: list[IterationTrace]):
        super().__init__(message)
        self.trace = trace


def should_terminate(
    state: AnswerState,
    last_appended: Sentence | None,
    config: RunConfig,
    empty_generation: bool = False,
) -> StopReason | None:
    """Priority order: empty generation, no new sentence, iteration cap,
    answer token budget."""
    if empty_generation:
        return StopReason.EMPTY_GENERATION
    if last_appended is None:
        return StopReason.DUPLICATE_ONLY
    if state.iteration >= config.max_iterations:
        return StopReason.MAX_ITERATIONS
    if len(tokenize(state.pretext)) >= config.max_answer_tokens:
        return StopReason.TOKEN_BUDGET
    return None


def run(
    question: str,
    index: PassageIndex,
    clients: Clients,
    config: RunConfig | None = None,
) -> RunResult:
    """Answer one question; returns the joined sentences plus one trace
    record per started iteration."""
    config = config or RunConfig()
    if not index.passages:
        raise RunAborted("index empty", [])
    state = AnswerState(question=question)
    traces: list[IterationTrace] = []
    used_phrases: set[str] = set()
    planner_config = PlannerConfig(
        max_keywords=config.max_keywords, fallback=config.plan_fallback
    )

    try:
        while True:
            iteration = state.iteration + 1
            pretext = state.pretext
            plan = None
            if config.mode == "iprg":
                plan = generate_plan(
                    question,
                    pretext,
                    clients.planner,
                    iteration=iteration,
                    config=planner_config,
                    used_phrases=used_phrases,
                )
                used_phrases.update(p.lower() for p in plan.keywords)
            query = build_query(question, pretext, plan)
            contexts = search(index, query, config.k, clients.embedder)
            prompt = compose_generation_prompt(
                question, plan, contexts, pretext, config.max_prompt_tokens
            )
            result = generate_paragraph(
                clients.generator,
                GenerationRequest(prompt=prompt, max_new_tokens=config.max_new_tokens),
            )
            paragraph = result.text
            appended = None
            if paragraph.strip():
                appended = first_new_sentence(paragraph, pretext, config.dup_threshold)
            if appended is not None:
                state.sentences.append(
                    Sentence(text=appended.text, index=len(state.sentences))
                )
            state.iteration = iteration
            traces.append(
                IterationTrace(
                    iteration=iteration,
                    keywords=list(plan.keywords) if plan else [],
                    query=query,
                    retrieved=[(c.passage.id, c.score) for c in contexts],
                    paragraph=paragraph,
                    appended=appended.text if appended else None,
                )
            )
            reason = should_terminate(
                state, appended, config, empty_generation=not paragraph.strip()
            )
            if reason is not None:
                state.terminated_reason = reason
                break
    except (RunAborted, ValueError):
        raise
    except Exception as exc:
        raise RunAborted(f"run aborted at iteration {state.iteration + 1}: {exc}",
                         traces) from exc

    return RunResult(
        answer=state.pretext,
        trace=traces,
        reason=state.terminated_reason,
        state=state,
    )


def run_irg(
    question: str,
    index: PassageIndex,
    clients: Clients,
    config: RunConfig | None = None,
) -> RunResult:
    """The ablation without the keyword planner: no plan-client calls, no
    keyword segment anywhere, empty keyword columns in the trace."""
    config = config or RunConfig()
    cfg = RunConfig(**{**asdict(config), "mode": "irg"})
    return run(question, index, clients, cfg)


def write_trace(
    fp,
    question_id: str,
    config: RunConfig,
    embedder_tag: str,
    traces: list[IterationTrace],
    timestamp: str | None = None,
) -> None:
    """Line-delimited trace: one header record, then one record per
    iteration. Pass timestamp=None for deterministic golden files."""
    header = {
        "question_id": question_id,
        "mode": config.mode,
        "config": asdict(config),
        "embedder_tag": embedder_tag,
    }
    if timestamp is not None:
        header["timestamp"] = timestamp
    fp.write(json.dumps(header, sort_keys=True, ensure_ascii=False) + "\n")
    for t in traces:
        fp.write(json.dumps(t.to_record(), sort_keys=True, ensure_ascii=False) + "\n")
