"""Command-line launcher for the sidecar service."""

import argparse

import uvicorn

from .app import create_app
from .config import EndpointConfig


def build_parser():
    parser = argparse.ArgumentParser(prog="iprg-sidecar", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--generator-model", default="builtin")
    parser.add_argument("--plan-model", default="builtin")
    parser.add_argument("--embedder-model", default="builtin")
    parser.add_argument("--nli-model", default="builtin")
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--max-batch-size", type=int, default=32)
    parser.add_argument("--dim", type=int, default=256,
                        help="vector size for the built-in embedder")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = EndpointConfig(
        generator_model=args.generator_model,
        plan_model=args.plan_model,
        embedder_model=args.embedder_model,
        nli_model=args.nli_model,
        device=args.device,
        max_batch_size=args.max_batch_size,
        dim=args.dim,
    )
    uvicorn.run(create_app(config), host=args.host, port=args.port,
                log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
