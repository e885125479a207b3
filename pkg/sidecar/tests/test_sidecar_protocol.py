"""Protocol conformance against the in-process app, plus unit coverage for
the built-in models."""

import warnings

import numpy as np
import pytest
from fastapi.testclient import TestClient

from contract_corpus import run_all
from iprg_sidecar.app import create_app
from iprg_sidecar.config import EndpointConfig
from iprg_sidecar.models import BuiltinEmbedder, BuiltinGenerator, BuiltinNli


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(), raise_server_exceptions=False)


def _post_via(client):
    def post(path, body):
        resp = client.post(path, json=body)
        return resp.status_code, resp.json()
    return post


class TestContractCorpus:
    def test_full_corpus(self, client):
        run_all(_post_via(client), warnings.warn, expected_dim=256)


class TestHealth:
    def test_shape(self, client):
        data = client.get("/health").json()
        assert data["status"] == "ok"
        assert data["dim"] == 256
        assert set(data["models"]) == {"generator", "plan", "embedder", "nli"}

    def test_dim_matches_embed(self, client):
        dim = client.get("/health").json()["dim"]
        resp = client.post("/embed", json={"texts": ["x"]})
        assert resp.json()["dim"] == dim


class TestErrors:
    def test_model_failure_is_5xx_with_error(self):
        from iprg_sidecar import models as m

        class Boom(BuiltinGenerator):
            def generate(self, prompt, max_new_tokens):
                raise RuntimeError("model exploded")

        original = m.BuiltinGenerator
        m.BuiltinGenerator = Boom
        try:
            broken = TestClient(create_app(), raise_server_exceptions=False)
            resp = broken.post("/generate",
                               json={"prompt": "x", "max_new_tokens": 4})
        finally:
            m.BuiltinGenerator = original
        assert resp.status_code == 500
        assert "error" in resp.json()

    def test_bad_json_body(self, client):
        resp = client.post("/generate", content=b"not json",
                           headers={"content-type": "application/json"})
        assert resp.status_code // 100 == 4


class TestBuiltinGenerator:
    def test_echoes_context_segment(self):
        gen = BuiltinGenerator()
        prompt = ("question: q [SEP] answer so far:  [SEP] keywords: k "
                  "[SEP] context: Alpha beta. [CTX] Gamma delta.")
        text, finished = gen.generate(prompt, 64)
        assert text == "Alpha beta. Gamma delta."
        assert finished

    def test_truncation_clears_finished(self):
        gen = BuiltinGenerator()
        text, finished = gen.generate("one two three four", 2)
        assert text == "one two"
        assert not finished


class TestBuiltinEmbedder:
    def test_norms_and_shape(self):
        emb = BuiltinEmbedder(dim=64)
        vecs = emb.embed(["hello world", "", "hello world hello"])
        assert vecs.shape == (3, 64)
        for row in vecs:
            assert np.linalg.norm(row) == pytest.approx(1.0, abs=1e-6)

    def test_batching_equals_single_calls(self):
        config = EndpointConfig(max_batch_size=2)
        from iprg_sidecar.models import ModelPool

        pool = ModelPool(config)
        texts = [f"text number {i}" for i in range(5)]
        batched = pool.embed(texts)
        singles = np.concatenate([pool.embed([t]) for t in texts])
        assert np.array_equal(batched, singles)


class TestBuiltinNli:
    def test_identity_is_entail_argmax(self):
        nli = BuiltinNli()
        scores = nli.score("The run was long.", "The run was long.")
        assert max(scores, key=scores.get) == "entail"
        assert scores["entail"] == pytest.approx(0.95)

    def test_disjoint_is_contradict_leaning(self):
        nli = BuiltinNli()
        scores = nli.score("alpha beta gamma", "delta epsilon zeta")
        assert scores["contradict"] > scores["entail"]
        assert sum(scores.values()) == pytest.approx(1.0, abs=1e-12)
