"""Wire types for the scorer protocol (see PROTOCOL.md at the repo root)."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ScoreRequest(BaseModel):
    prompt: str = ""
    completion: str
    max_length: int | None = Field(default=None, ge=2)


class ScoreResponse(BaseModel):
    tokens: list[str]
    token_logprobs: list[float]
    truncated: bool
    model: str


class EmbedRequest(BaseModel):
    texts: list[str]


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
    dim: int
    model: str


class HealthResponse(BaseModel):
    status: str
    models: dict[str, str]
    max_length: int
    unconditional_start: str
