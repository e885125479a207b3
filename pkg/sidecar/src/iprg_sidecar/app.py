"""FastAPI application wiring the model pool to the wire protocol.

POST /generate {prompt, max_new_tokens} -> {text, finished}
POST /embed    {texts:[...]}            -> {vectors:[[...]], dim}
POST /nli      {premise, hypothesis}    -> {entail, neutral, contradict}
GET  /health                            -> {status, dim, models}

Malformed bodies get a 4xx; model failures get a 5xx with {error}.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .config import EndpointConfig
from .models import ModelPool


class GenerateBody(BaseModel):
    prompt: str = Field(min_length=1)
    max_new_tokens: int = Field(ge=1)


class EmbedBody(BaseModel):
    texts: list[str]


class NliBody(BaseModel):
    premise: str
    hypothesis: str


def create_app(config: EndpointConfig | None = None) -> FastAPI:
    config = config or EndpointConfig()
    pool = ModelPool(config)
    app = FastAPI(title="iprg-sidecar")

    @app.exception_handler(Exception)
    async def model_failure(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.post("/generate")
    def generate(body: GenerateBody):
        text, finished = pool.generate(body.prompt, body.max_new_tokens)
        return {"text": text, "finished": finished}

    @app.post("/embed")
    def embed(body: EmbedBody):
        vectors = pool.embed(body.texts)
        return {"vectors": vectors.tolist(), "dim": pool.dim}

    @app.post("/nli")
    def nli(body: NliBody):
        return pool.nli(body.premise, body.hypothesis)

    @app.get("/health")
    def health():
        return {"status": "ok", "dim": pool.dim, "models": config.models()}

    return app
