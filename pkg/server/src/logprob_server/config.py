"""Environment-driven configuration.

LOGPROB_MODEL        causal LM to serve (default: gpt2)
LOGPROB_EMBED_MODEL  sentence encoder (default: sentence-transformers/all-MiniLM-L6-v2)
LOGPROB_MAX_LENGTH   default context window cap (default: model maximum)
LOGPROB_TOKEN        optional shared bearer token; unset disables auth
LOGPROB_PORT         port for `python -m logprob_server` (default: 8400)
"""

from __future__ import annotations

import os
from dataclasses import dataclass

DEFAULT_MODEL = "gpt2"
DEFAULT_EMBED_MODEL = "sentence-transformers/all-MiniLM-L6-v2"


@dataclass(frozen=True)
class Settings:
    model_name: str = DEFAULT_MODEL
    embed_model_name: str = DEFAULT_EMBED_MODEL
    max_length: int | None = None
    token: str | None = None
    port: int = 8400

    @classmethod
    def from_env(cls) -> "Settings":
        raw_max = os.environ.get("LOGPROB_MAX_LENGTH")
        return cls(
            model_name=os.environ.get("LOGPROB_MODEL", DEFAULT_MODEL),
            embed_model_name=os.environ.get("LOGPROB_EMBED_MODEL", DEFAULT_EMBED_MODEL),
            max_length=int(raw_max) if raw_max else None,
            token=os.environ.get("LOGPROB_TOKEN"),
            port=int(os.environ.get("LOGPROB_PORT", "8400")),
        )
