"""Acceptance suite for the serving component: protocol conformance against
a live server process and an end-to-end engine run over it."""

import json
import socket
import subprocess
import sys
import time
import warnings
from pathlib import Path

import pytest
import requests

from contract_corpus import run_all

ENGINE_FIXTURES = Path(__file__).resolve().parents[2] / "tests" / "fixtures"


def report(name, ok=True):
    print(f"\nACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}")


def _free_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def sidecar_url():
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "iprg_sidecar", "--port", str(port)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        deadline = time.monotonic() + 30
        while True:
            try:
                if requests.get(url + "/health", timeout=1).ok:
                    break
            except requests.RequestException:
                pass
            if time.monotonic() > deadline:
                raise RuntimeError("sidecar did not come up within 30s")
            time.sleep(0.2)
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


def test_protocol_conformance_live(sidecar_url):
    session = requests.Session()

    def post(path, body):
        resp = session.post(sidecar_url + path, json=body, timeout=10)
        return resp.status_code, resp.json()

    expected_dim = session.get(sidecar_url + "/health", timeout=10).json()["dim"]
    run_all(post, warnings.warn, expected_dim=expected_dim)
    report("sidecar-protocol-conformance")


def test_engine_against_sidecar(sidecar_url, tmp_path):
    env_cmd = [sys.executable, "-m", "iprg.cli"]
    index_dir = tmp_path / "idx"
    r = subprocess.run(
        env_cmd + ["index",
                   "--corpus", str(ENGINE_FIXTURES / "smoke_corpus.jsonl"),
                   "--index", str(index_dir),
                   "--embedder", "remote", "--embedder-url", sidecar_url],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    preds = tmp_path / "preds.jsonl"
    trace = tmp_path / "trace.jsonl"
    r = subprocess.run(
        env_cmd + ["answer",
                   "--dataset", str(ENGINE_FIXTURES / "smoke_dataset.jsonl"),
                   "--index", str(index_dir),
                   "--embedder", "remote", "--embedder-url", sidecar_url,
                   "--generator-url", sidecar_url,
                   "--out", str(preds), "--out-trace", str(trace)],
        capture_output=True, text=True,
    )
    assert r.returncode == 0, r.stderr
    answers = {rec["id"]: rec["answer"]
               for rec in map(json.loads, preds.read_text().splitlines())}
    assert set(answers) == {"q1", "q2", "q3"}
    for qid, answer in answers.items():
        assert answer.strip(), f"{qid} produced no appended sentence"
    report("engine-against-sidecar")
