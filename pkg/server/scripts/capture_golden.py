#!/usr/bin/env python3
"""Capture golden protocol responses from the models this server wraps.

Replays protocol/golden/*_requests.json through the engine and freezes the
responses next to them. Run once per model version bump; the server's
conformance tests and the toolkit's client replay tests both consume the
captures.
"""

from __future__ import annotations

import json
from pathlib import Path

from logprob_server.app import _sig12
from logprob_server.config import Settings
from logprob_server.engine import CausalScorer, SentenceEmbedder

GOLDEN_DIR = Path(__file__).resolve().parents[2] / "protocol" / "golden"


def main() -> None:
    settings = Settings.from_env()
    scorer = CausalScorer(settings.model_name, max_length=settings.max_length)
    requests = json.loads((GOLDEN_DIR / "logprob_requests.json").read_text())
    responses = []
    for req in requests:
        out = scorer.score(req["prompt"], req["completion"], max_length=req.get("max_length"))
        responses.append({
            "tokens": out.tokens,
            "token_logprobs": [_sig12(v) for v in out.token_logprobs],
            "truncated": out.truncated,
            "model": settings.model_name,
        })
    (GOLDEN_DIR / "logprob_responses.json").write_text(
        json.dumps(responses, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(f"captured {len(responses)} logprob responses for {settings.model_name}")

    embedder = SentenceEmbedder(settings.embed_model_name)
    embed_requests = json.loads((GOLDEN_DIR / "embed_requests.json").read_text())
    embed_responses = []
    for req in embed_requests:
        vectors = embedder.embed(req["texts"])
        embed_responses.append({
            "vectors": [[_sig12(v) for v in row] for row in vectors],
            "dim": embedder.dim,
            "model": settings.embed_model_name,
        })
    (GOLDEN_DIR / "embed_responses.json").write_text(
        json.dumps(embed_responses, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(f"captured {len(embed_responses)} embed responses for {settings.embed_model_name}")


if __name__ == "__main__":
    main()
