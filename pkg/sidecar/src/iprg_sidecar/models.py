"""Model implementations behind the three endpoints.

The built-in models are deterministic and dependency-free so the service
works offline; Hugging Face checkpoints are loaded lazily when a role names
one. Every model is stateless between requests and guards its underlying
runtime with a lock, which doubles as the per-model request queue.
"""

from __future__ import annotations

import hashlib
import re
import threading

import numpy as np

from .config import BUILTIN, EndpointConfig

_CONTEXT_MARKER = " [SEP] context: "
_CTX_JOIN = " [CTX] "
_WORD_RE = re.compile(r"[a-z0-9]+")


def _words(text: str) -> list[str]:
    return _WORD_RE.findall(text.lower())


class BuiltinGenerator:
    """Greedy deterministic generator: echoes the context segment of the
    prompt, capped at max_new_tokens whitespace tokens.

    This is a stand-in with the same interface contract as a seq2seq
    checkpoint: same prompt always yields the same text, and finished is
    false exactly when the output was length-truncated.
    """

    def generate(self, prompt: str, max_new_tokens: int) -> tuple[str, bool]:
        if _CONTEXT_MARKER in prompt:
            source = prompt.rsplit(_CONTEXT_MARKER, 1)[1]
        else:
            source = prompt
        source = source.replace(_CTX_JOIN, " ")
        tokens = source.split()
        finished = len(tokens) <= max_new_tokens
        return " ".join(tokens[:max_new_tokens]), finished


class BuiltinEmbedder:
    """Hashed bag-of-words encoder, L2-normalized, fixed dim."""

    def __init__(self, dim: int = 256):
        self.dim = dim

    def _bucket(self, word: str) -> int:
        digest = hashlib.md5(word.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % self.dim

    def embed(self, texts: list[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float32)
        for i, text in enumerate(texts):
            words = _words(text)
            if not words:
                out[i, 0] = 1.0  # fixed fallback bucket keeps the norm 1
                continue
            for w in words:
                out[i, self._bucket(w)] += 1.0
            out[i] /= np.linalg.norm(out[i])
        return out


class BuiltinNli:
    """Token-overlap NLI heuristic.

    With o the clipped fraction of hypothesis tokens found in the premise,
    entail = 0.05 + 0.90*o and contradict = 0.45*(1-o); neutral takes the
    remainder, so the three always sum to exactly 1 and a verbatim identity
    pair scores entail = 0.95, the argmax.
    """

    def score(self, premise: str, hypothesis: str) -> dict:
        hyp = _words(hypothesis)
        if not hyp:
            return {"entail": 0.05, "neutral": 0.50, "contradict": 0.45}
        pool = {}
        for w in _words(premise):
            pool[w] = pool.get(w, 0) + 1
        hit = 0
        for w in hyp:
            if pool.get(w, 0) > 0:
                pool[w] -= 1
                hit += 1
        o = hit / len(hyp)
        entail = 0.05 + 0.90 * o
        contradict = 0.45 * (1.0 - o)
        return {
            "entail": entail,
            "neutral": 1.0 - entail - contradict,
            "contradict": contradict,
        }


class HfGenerator:
    """Seq2seq checkpoint wrapper, greedy decoding."""

    def __init__(self, model_id: str, device: str):
        from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForSeq2SeqLM.from_pretrained(model_id).to(device)
        self._model.eval()
        self._device = device

    def generate(self, prompt: str, max_new_tokens: int) -> tuple[str, bool]:
        import torch

        inputs = self._tokenizer(prompt, return_tensors="pt",
                                 truncation=True).to(self._device)
        with torch.no_grad():
            ids = self._model.generate(
                **inputs, max_new_tokens=max_new_tokens, do_sample=False,
                num_beams=1,
            )
        new_tokens = ids.shape[-1] - 1  # minus the decoder start token
        text = self._tokenizer.decode(ids[0], skip_special_tokens=True)
        return text, new_tokens < max_new_tokens


class HfEmbedder:
    """Mean-pooled encoder states, L2-normalized."""

    def __init__(self, model_id: str, device: str):
        from transformers import AutoModel, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModel.from_pretrained(model_id).to(device)
        self._model.eval()
        self._device = device
        self.dim = int(self._model.config.hidden_size)

    def embed(self, texts: list[str]) -> np.ndarray:
        import torch

        inputs = self._tokenizer(texts, return_tensors="pt", padding=True,
                                 truncation=True).to(self._device)
        with torch.no_grad():
            states = self._model(**inputs).last_hidden_state
        mask = inputs["attention_mask"].unsqueeze(-1)
        pooled = (states * mask).sum(1) / mask.sum(1).clamp(min=1)
        vectors = torch.nn.functional.normalize(pooled, dim=-1)
        return vectors.cpu().numpy().astype(np.float32)


class HfNli:
    """Sequence-classification checkpoint with softmax over three labels."""

    def __init__(self, model_id: str, device: str):
        from transformers import AutoModelForSequenceClassification, AutoTokenizer

        self._tokenizer = AutoTokenizer.from_pretrained(model_id)
        self._model = AutoModelForSequenceClassification.from_pretrained(
            model_id
        ).to(device)
        self._model.eval()
        self._device = device
        labels = {v.lower(): k for k, v in self._model.config.id2label.items()}
        self._order = {
            "entail": labels.get("entailment", 0),
            "neutral": labels.get("neutral", 1),
            "contradict": labels.get("contradiction", 2),
        }

    def score(self, premise: str, hypothesis: str) -> dict:
        import torch

        inputs = self._tokenizer(premise, hypothesis, return_tensors="pt",
                                 truncation=True).to(self._device)
        with torch.no_grad():
            logits = self._model(**inputs).logits[0]
        probs = torch.softmax(logits, dim=-1).cpu().tolist()
        return {name: probs[idx] for name, idx in self._order.items()}


class ModelPool:
    """Loads the configured model per role and serializes access to it."""

    def __init__(self, config: EndpointConfig):
        self.config = config
        if config.generator_model == BUILTIN:
            self._generator = BuiltinGenerator()
        else:
            self._generator = HfGenerator(config.generator_model, config.device)
        if config.embedder_model == BUILTIN:
            self._embedder = BuiltinEmbedder(dim=config.dim)
        else:
            self._embedder = HfEmbedder(config.embedder_model, config.device)
        if config.nli_model == BUILTIN:
            self._nli = BuiltinNli()
        else:
            self._nli = HfNli(config.nli_model, config.device)
        self.dim = self._embedder.dim
        self._locks = {name: threading.Lock()
                       for name in ("generator", "embedder", "nli")}

    def generate(self, prompt: str, max_new_tokens: int) -> tuple[str, bool]:
        with self._locks["generator"]:
            return self._generator.generate(prompt, max_new_tokens)

    def embed(self, texts: list[str]) -> np.ndarray:
        batches = []
        step = self.config.max_batch_size
        with self._locks["embedder"]:
            for start in range(0, len(texts), step):
                batches.append(self._embedder.embed(texts[start:start + step]))
        return np.concatenate(batches) if batches else np.zeros((0, self.dim))

    def nli(self, premise: str, hypothesis: str) -> dict:
        with self._locks["nli"]:
            return self._nli.score(premise, hypothesis)
