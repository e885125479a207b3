"""Model-serving sidecar for the iprg engine.

Serves POST /generate, /embed, /nli and GET /health. Each role runs either
a deterministic built-in model (the default, no downloads needed) or a
Hugging Face checkpoint named in the configuration.
"""

__version__ = "0.1.0"
