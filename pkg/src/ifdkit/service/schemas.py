"""Pydantic request/response models for the toolkit service.

Everything on the wire is plain JSON: samples and score rows travel
inline, table backends are inlined by the client (the service never reads
client-side files), and a missing ``ifd_cap`` means "no cap" so that
infinity never has to survive JSON.
"""

from __future__ import annotations

from typing import Literal, Union

from pydantic import BaseModel, Field


class SampleIO(BaseModel):
    id: str
    instruction: str
    input: str | None = None
    response: str


class ScoreRowIO(BaseModel):
    id: str
    ppl_cond: float
    ppl_uncond: float
    ifd: float
    n_tokens: int
    scorer: str
    truncated: bool = False


class TemplateSpec(BaseModel):
    name: str = "vicuna-v1"
    with_input_pattern: str | None = None
    without_input_pattern: str | None = None


class UniformBackendSpec(BaseModel):
    kind: Literal["uniform"]
    vocab_size: int


class TableBackendSpec(BaseModel):
    kind: Literal["table"]
    name: str = "table"
    default: float | None = None
    entries: dict[str, dict[str, float]]


class RemoteBackendSpec(BaseModel):
    kind: Literal["remote"]
    url: str
    max_length: int | None = None
    timeout: float = 60.0


BackendSpec = Union[UniformBackendSpec, TableBackendSpec, RemoteBackendSpec]


class ScoreRequest(BaseModel):
    samples: list[SampleIO]
    template: TemplateSpec = TemplateSpec()
    backend: BackendSpec = Field(discriminator="kind")
    workers: int = 1
    max_failure_fraction: float = 0.01


class ScoreFailureIO(BaseModel):
    id: str
    error: str


class ScoreMetaIO(BaseModel):
    backend: str
    template: str
    truncation_policy: str


class ScoreResponse(BaseModel):
    rows: list[ScoreRowIO]
    failures: list[ScoreFailureIO]
    elapsed_seconds: float
    meta: ScoreMetaIO


class SelectRequest(BaseModel):
    samples: list[SampleIO]
    rows: list[ScoreRowIO]
    ratio: float
    ifd_cap: float | None = 1.0      # null disables the cap


class SelectResponse(BaseModel):
    selected_ids: list[str]
    budget: int
    n_excluded_by_cap: int
    underfilled: bool
    subset: list[SampleIO]


class CompareRequest(BaseModel):
    rows_a: list[ScoreRowIO]
    rows_b: list[ScoreRowIO]
    budgets: list[float] = [0.05, 0.10, 0.15]
    ifd_cap: float | None = 1.0


class CompareResponse(BaseModel):
    scorer_a: str
    scorer_b: str
    spearman_ppl: float | None
    spearman_ifd: float | None
    overlap: dict[str, float]
    n_common: int
    notes: dict[str, str]
    policy: str


class HashedBowEmbedderSpec(BaseModel):
    kind: Literal["hashed-bow"]
    dim: int = 1024


class RemoteEmbedderSpec(BaseModel):
    kind: Literal["remote"]
    url: str
    timeout: float = 120.0
    batch_size: int = 64


EmbedderSpec = Union[HashedBowEmbedderSpec, RemoteEmbedderSpec]


class DiversifyRequest(BaseModel):
    samples: list[SampleIO]
    rows: list[ScoreRowIO]
    pre_ratio: float = 0.20
    final_ratio: float = 0.02
    ifd_cap: float | None = 1.0
    embedder: EmbedderSpec = Field(
        default=HashedBowEmbedderSpec(kind="hashed-bow"), discriminator="kind"
    )
    return_vectors: bool = False


class DiversifyResponse(BaseModel):
    selected_ids: list[str]
    stage1_ids: list[str]
    pool_size: int
    k: int
    metadata: dict
    subset: list[SampleIO]
    vectors: list[list[float]] | None = None   # pool-order vectors when requested
    vector_ids: list[str] | None = None


class ReportRequest(BaseModel):
    samples: list[SampleIO]
    rows: list[ScoreRowIO]
    fraction: float = 0.05
    top_k_rows: int = 10


class ReportResponse(BaseModel):
    report: dict
    text: str


class WinningScoreRequest(BaseModel):
    wins: int
    ties: int
    losses: int


class WinningScoreResponse(BaseModel):
    winning_score: float


class HealthResponse(BaseModel):
    status: str
    tool_version: str
