"""Endpoint configuration: which model serves each role."""

from __future__ import annotations

from dataclasses import dataclass, field

BUILTIN = "builtin"


@dataclass
class EndpointConfig:
    """Model identifiers per role plus runtime knobs.

    "builtin" selects the deterministic in-process model for that role;
    anything else is treated as a Hugging Face checkpoint name. The plan
    role shares the /generate endpoint, so a deployment that wants a
    separate plan checkpoint runs a second sidecar instance with that
    checkpoint as its generator model.
    """

    generator_model: str = BUILTIN
    plan_model: str = BUILTIN
    embedder_model: str = BUILTIN
    nli_model: str = BUILTIN
    device: str = "cpu"
    max_batch_size: int = 32
    dim: int = 256  # built-in embedder only; checkpoints fix their own dim

    def __post_init__(self):
        for name in ("generator_model", "plan_model", "embedder_model",
                     "nli_model"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be a non-empty model id")
        if self.max_batch_size < 1:
            raise ValueError("max_batch_size must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def models(self) -> dict:
        return {
            "generator": self.generator_model,
            "plan": self.plan_model,
            "embedder": self.embedder_model,
            "nli": self.nli_model,
        }
