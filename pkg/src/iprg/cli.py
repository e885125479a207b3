"""Command-line pipeline: index building, plan-training-data generation,
answering, and evaluation. Each stage reads and writes files so stages
compose in shell pipelines.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import ingest, metrics
from .clients import HttpClient, MockGenerationClient
from .controller import Clients, RunConfig, run, write_trace
from .planner import build_plan_training_examples
from .retriever import LexicalEmbedder, PassageIndex, RemoteEmbedder, chunk_corpus

ENV_SIDECAR_URL = "IPRG_SIDECAR_URL"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _sidecar_url(explicit: str | None) -> str | None:
    return explicit or os.environ.get(ENV_SIDECAR_URL)


def _make_embedder(args, index_dir: Path | None = None, fit_texts=None):
    if args.embedder == "lexical":
        if index_dir is not None:
            _, embedder = PassageIndex.load(index_dir)
            if embedder is None:
                raise RuntimeError(f"index {index_dir} has no stored lexical idf")
            return embedder
        embedder = LexicalEmbedder(dim=args.dim)
        if fit_texts is not None:
            embedder.fit(fit_texts)
        return embedder
    url = _sidecar_url(args.embedder_url)
    if not url:
        raise RuntimeError(
            f"--embedder remote needs --embedder-url or ${ENV_SIDECAR_URL}"
        )
    return RemoteEmbedder(HttpClient(url))


def cmd_index(args) -> int:
    docs = ingest.load_corpus(args.corpus)
    passages = chunk_corpus(docs, passage_len=args.passage_len, stride=args.stride)
    if not passages:
        raise RuntimeError(f"corpus {args.corpus} produced no passages")
    embedder = _make_embedder(args, fit_texts=[p.text for p in passages])
    index = PassageIndex.build(
        passages, embedder, passage_len=args.passage_len, stride=args.stride
    )
    index.save(args.index, embedder=embedder)
    print(f"indexed {len(passages)} passages -> {args.index}")
    return 0


def cmd_plan_data(args) -> int:
    pairs = ingest.load_qa_dataset(args.dataset)
    n = 0
    with Path(args.out).open("w", encoding="utf-8") as f:
        for pair in pairs:
            for ex in build_plan_training_examples(pair, max_k=args.max_keywords):
                f.write(
                    json.dumps(
                        {
                            "id": f"{pair.id}:{ex.source_sentence_index}",
                            "prompt": ex.prompt,
                            "keywords": ex.target_keywords,
                        },
                        sort_keys=True,
                        ensure_ascii=False,
                    )
                    + "\n"
                )
                n += 1
    print(f"wrote {n} plan training examples -> {args.out}")
    return 0


def _load_scripts(path: str | None) -> dict[str, list[str]]:
    if not path:
        return {}
    scripts = {}
    with Path(path).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            scripts[rec["id"]] = rec["script"]
    return scripts


def cmd_answer(args) -> int:
    pairs = ingest.load_qa_dataset(args.dataset)
    index, stored_embedder = PassageIndex.load(args.index)
    if args.embedder == "lexical":
        if stored_embedder is None:
            raise RuntimeError(f"index {args.index} has no stored lexical idf")
        embedder = stored_embedder
    else:
        embedder = _make_embedder(args)
    if embedder.tag != index.embedder_tag:
        raise RuntimeError(
            f"embedder {embedder.tag!r} does not match index {index.embedder_tag!r}"
        )

    generator_url = _sidecar_url(args.generator_url)
    generator_scripts = _load_scripts(args.generator_script)
    plan_scripts = _load_scripts(args.plan_script)
    if not generator_url and not generator_scripts:
        raise RuntimeError("need --generator-url, --generator-script, or "
                           f"${ENV_SIDECAR_URL}")

    config = RunConfig(
        k=args.k,
        max_iterations=args.max_iterations,
        max_answer_tokens=args.max_answer_tokens,
        dup_threshold=args.dup_threshold,
        mode=args.mode,
        max_keywords=args.max_keywords,
        max_new_tokens=args.max_new_tokens,
        max_prompt_tokens=args.max_prompt_tokens,
        plan_fallback=not args.no_plan_fallback,
    )

    def answer_one(pair):
        if pair.id in generator_scripts:
            generator = MockGenerationClient(generator_scripts[pair.id])
        else:
            generator = HttpClient(generator_url)
        planner = None
        if config.mode == "iprg":
            if pair.id in plan_scripts:
                planner = MockGenerationClient(plan_scripts[pair.id])
            elif args.plan_url or (generator_url and args.remote_planner):
                planner = HttpClient(args.plan_url or generator_url)
        clients = Clients(generator=generator, embedder=embedder, planner=planner)
        return run(pair.question, index, clients, config)

    jobs = args.jobs or os.cpu_count() or 1
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(answer_one, pairs))

    timestamp = None if args.deterministic else datetime.now(timezone.utc).isoformat()
    with Path(args.out).open("w", encoding="utf-8") as f:
        for pair, result in zip(pairs, results):
            f.write(
                json.dumps({"answer": result.answer, "id": pair.id},
                           sort_keys=True, ensure_ascii=False) + "\n"
            )
    if args.out_trace:
        with Path(args.out_trace).open("w", encoding="utf-8") as f:
            for pair, result in zip(pairs, results):
                write_trace(f, pair.id, config, index.embedder_tag, result.trace,
                            timestamp=timestamp)
    print(f"answered {len(pairs)} questions -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    pairs = ingest.load_qa_dataset(args.dataset)
    predictions = {}
    with Path(args.predictions).open(encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            predictions[rec["id"]] = rec["answer"]

    nli_client = None
    if args.nli:
        url = _sidecar_url(args.nli_url)
        if not url:
            raise RuntimeError(f"--nli needs --nli-url or ${ENV_SIDECAR_URL}")
        nli_client = HttpClient(url)

    report = metrics.evaluate_predictions(
        pairs,
        predictions,
        nli_client=nli_client,
        with_readability=args.readability,
        with_aspects=args.aspects,
    )
    if args.out:
        with Path(args.out).open("w", encoding="utf-8") as f:
            f.write(json.dumps({"type": "config", **report["config"]},
                               sort_keys=True) + "\n")
            for item in report["items"]:
                f.write(json.dumps({"type": "item", **item},
                                   sort_keys=True, ensure_ascii=False) + "\n")
            f.write(
                json.dumps(
                    {"type": "summary", "count": report["count"],
                     "nli_excluded": report["nli_excluded"], **report["summary"]},
                    sort_keys=True,
                ) + "\n"
            )
    print(json.dumps(report["summary"], sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="iprg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("index", help="build a passage index from a corpus file")
    p.add_argument("--corpus", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--embedder", choices=["lexical", "remote"], default="lexical")
    p.add_argument("--embedder-url")
    p.add_argument("--dim", type=int, default=1024)
    p.add_argument("--passage-len", type=int, default=100)
    p.add_argument("--stride", type=int, default=100)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("plan-data", help="build keyword-plan training examples")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-keywords", type=int, default=5)
    p.set_defaults(func=cmd_plan_data)

    p = sub.add_parser("answer", help="answer questions with the iterative loop")
    p.add_argument("--dataset", required=True)
    p.add_argument("--index", required=True)
    p.add_argument("--mode", choices=["iprg", "irg"], default="iprg")
    p.add_argument("--embedder", choices=["lexical", "remote"], default="lexical")
    p.add_argument("--embedder-url")
    p.add_argument("--generator-url")
    p.add_argument("--generator-script",
                   help="JSONL {id, script:[paragraph,...]} mock generator")
    p.add_argument("--plan-url")
    p.add_argument("--plan-script",
                   help="JSONL {id, script:[comma-joined keywords,...]} mock planner")
    p.add_argument("--remote-planner", action="store_true",
                   help="use the generator endpoint for planning too")
    p.add_argument("--no-plan-fallback", action="store_true")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--max-iterations", type=int, default=10)
    p.add_argument("--max-answer-tokens", type=int, default=256)
    p.add_argument("--dup-threshold", type=float, default=0.8)
    p.add_argument("--max-keywords", type=int, default=5)
    p.add_argument("--max-new-tokens", type=int, default=128)
    p.add_argument("--max-prompt-tokens", type=int, default=1024)
    p.add_argument("--out", required=True, help="predictions file {id, answer}")
    p.add_argument("--out-trace")
    p.add_argument("--jobs", type=int)
    p.add_argument("--deterministic", action="store_true",
                   help="suppress timestamps for golden-file comparison")
    p.set_defaults(func=cmd_answer)

    p = sub.add_parser("eval", help="score predictions against references")
    p.add_argument("--predictions", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out")
    p.add_argument("--nli", action="store_true")
    p.add_argument("--nli-url")
    p.add_argument("--readability", action="store_true")
    p.add_argument("--aspects", action="store_true")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
