"""Diversity-aware compression of an IFD-selected pool.

The two-stage pipeline first keeps the top ``pre_ratio`` of the dataset by
IFD (cap applied), then greedily maximizes the facility-location objective

    F(S) = sum_{i in V} max_{j in S} sim(i, j)

over that pool, where sim is cosine similarity clipped below at zero
(clipping keeps F monotone submodular, so greedy carries the usual
1 - 1/e guarantee). The ground set V is the stage-1 pool itself; this and
the tie policy are recorded in the result metadata.

Embeddings come from the built-in hashed bag-of-tokens embedder (pure,
dependency-free) or from the remote /v1/embed endpoint of a scorer server.

Cache file layout (little-endian), for cross-tool reuse:

    bytes 0..7    magic b"IFDEMB01"
    bytes 8..11   uint32 dim
    bytes 12..15  uint32 count
    then          count * dim float32 vectors, row-major
    then          uint64 length of the trailing JSON block
    then          JSON: {"ids": [...], "embedder": "..."} (UTF-8)
"""

from __future__ import annotations

import hashlib
import heapq
import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .backends import TOKEN_ENV_VAR
from .data import Dataset, InstructionSample
from .errors import BackendError, ConfigError, DataError
from .scoring import ScoredSample
from .selection import SelectionConfig, compute_budget, select_top_ifd

MAGIC = b"IFDEMB01"
DEFAULT_HASHED_DIM = 1024


@dataclass
class EmbeddingSet:
    ids: list[str]
    vectors: np.ndarray            # (count, dim) float32
    embedder: str

    def __post_init__(self) -> None:
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.ids):
            raise DataError(
                f"vectors shape {self.vectors.shape} does not match {len(self.ids)} ids"
            )
        if not np.isfinite(self.vectors).all():
            raise DataError("embedding vectors must be finite")
        norms = np.linalg.norm(self.vectors, axis=1)
        if (norms == 0).any():
            bad = [self.ids[i] for i in np.nonzero(norms == 0)[0][:5]]
            raise DataError(f"zero-norm embedding vectors for ids: {bad}")

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def index_of(self) -> dict[str, int]:
        return {sid: i for i, sid in enumerate(self.ids)}


def _sample_text(sample: InstructionSample) -> str:
    # the "complete instruction" (instruction plus any input) and the response
    parts = [sample.instruction]
    if sample.has_input:
        parts.append(sample.input or "")
    parts.append(sample.response)
    return "\n".join(parts)


def _token_bucket(token: str, dim: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def hashed_bow_embed(
    samples: list[InstructionSample], dim: int = DEFAULT_HASHED_DIM
) -> EmbeddingSet:
    """Hash whitespace-lowercased tokens into an L2-normalized count vector."""
    if not samples:
        raise ConfigError("cannot embed an empty sample list")
    if dim < 1:
        raise ConfigError(f"embedding dim must be >= 1, got {dim}")
    vectors = np.zeros((len(samples), dim), dtype=np.float32)
    for i, sample in enumerate(samples):
        tokens = _sample_text(sample).lower().split()
        if not tokens:
            raise DataError(f"sample {sample.id!r} has no tokens to embed")
        for tok in tokens:
            vectors[i, _token_bucket(tok, dim)] += 1.0
        vectors[i] /= np.linalg.norm(vectors[i])
    return EmbeddingSet(ids=[s.id for s in samples], vectors=vectors, embedder=f"hashed-bow-{dim}")


def remote_embed(
    samples: list[InstructionSample],
    endpoint: str,
    timeout: float = 120.0,
    batch_size: int = 64,
    client: httpx.Client | None = None,
) -> EmbeddingSet:
    """Embed through a scorer server's /v1/embed endpoint (PROTOCOL.md)."""
    if not samples:
        raise ConfigError("cannot embed an empty sample list")
    endpoint = endpoint.rstrip("/")
    own_client = client is None
    headers = {}
    token = os.environ.get(TOKEN_ENV_VAR)
    if token:
        headers["Authorization"] = f"Bearer {token}"
    http = client or httpx.Client(timeout=timeout, headers=headers)
    chunks: list[np.ndarray] = []
    model = "remote"
    try:
        for start in range(0, len(samples), batch_size):
            batch = samples[start : start + batch_size]
            try:
                resp = http.post(
                    f"{endpoint}/v1/embed",
                    json={"texts": [_sample_text(s) for s in batch]},
                    timeout=timeout,
                )
            except httpx.HTTPError as e:
                raise BackendError(f"embedding request failed: {e}") from e
            if resp.status_code != 200:
                raise BackendError(
                    f"embedding server returned HTTP {resp.status_code}: {resp.text[:200]}"
                )
            payload = resp.json()
            chunks.append(np.asarray(payload["vectors"], dtype=np.float32))
            model = str(payload.get("model", model))
    finally:
        if own_client:
            http.close()
    return EmbeddingSet(
        ids=[s.id for s in samples], vectors=np.vstack(chunks), embedder=model
    )


def save_embeddings(embeddings: EmbeddingSet, path: str | Path) -> None:
    path = Path(path)
    tail = json.dumps(
        {"ids": embeddings.ids, "embedder": embeddings.embedder}, ensure_ascii=False
    ).encode("utf-8")
    with path.open("wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", embeddings.dim, len(embeddings.ids)))
        f.write(np.ascontiguousarray(embeddings.vectors, dtype="<f4").tobytes())
        f.write(struct.pack("<Q", len(tail)))
        f.write(tail)


def load_embeddings(path: str | Path) -> EmbeddingSet:
    path = Path(path)
    blob = path.read_bytes()
    if blob[:8] != MAGIC:
        raise DataError(f"{path}: not an embedding cache (bad magic)")
    dim, count = struct.unpack("<II", blob[8:16])
    vec_bytes = count * dim * 4
    vectors = np.frombuffer(blob[16 : 16 + vec_bytes], dtype="<f4").reshape(count, dim)
    (tail_len,) = struct.unpack("<Q", blob[16 + vec_bytes : 24 + vec_bytes])
    tail = json.loads(blob[24 + vec_bytes : 24 + vec_bytes + tail_len].decode("utf-8"))
    if len(tail["ids"]) != count:
        raise DataError(f"{path}: id block length {len(tail['ids'])} != count {count}")
    return EmbeddingSet(
        ids=[str(i) for i in tail["ids"]],
        vectors=vectors.copy(),
        embedder=str(tail.get("embedder", "unknown")),
    )


class _ClippedCosine:
    """Row-on-demand clipped-cosine similarity over a candidate matrix.

    One routine computes every similarity row, so naive and lazy greedy see
    bit-identical floats.
    """

    def __init__(self, vectors: np.ndarray):
        v = np.asarray(vectors, dtype=np.float64)
        self.unit = v / np.linalg.norm(v, axis=1, keepdims=True)
        self.n = v.shape[0]

    def row(self, i: int) -> np.ndarray:
        sims = self.unit @ self.unit[i]
        np.maximum(sims, 0.0, out=sims)
        return sims

    def gain(self, i: int, covered: np.ndarray) -> float:
        """Marginal facility-location gain of adding point i given the
        current per-point best similarity."""
        return float(np.maximum(self.row(i) - covered, 0.0).sum())


def facility_location_greedy(
    embeddings: EmbeddingSet,
    ground_ids: set[str] | list[str],
    k: int,
    lazy: bool = True,
) -> list[str]:
    """Greedy facility-location maximization over V = ground_ids.

    Returns ids in pick order. Ties in marginal gain break toward the
    earliest original position. The lazy (priority queue) path re-evaluates
    stale gains on pop and yields exactly the naive selection.
    """
    ground = set(ground_ids)
    index = embeddings.index_of()
    missing = ground - set(index)
    if missing:
        raise DataError(f"ground ids missing from embeddings: {sorted(missing)[:5]}")
    # candidate order = original dataset order (the embedding set's order)
    cand_ids = [sid for sid in embeddings.ids if sid in ground]
    n = len(cand_ids)
    if not (1 <= k <= n):
        raise ConfigError(f"k must be in [1, {n}], got {k}")

    sim = _ClippedCosine(embeddings.vectors[[index[sid] for sid in cand_ids]])
    covered = np.zeros(n, dtype=np.float64)
    picked: list[int] = []

    if not lazy:
        remaining = list(range(n))
        for _ in range(k):
            gains = [sim.gain(i, covered) for i in remaining]
            best_pos = max(range(len(remaining)), key=lambda p: (gains[p], -remaining[p]))
            best = remaining.pop(best_pos)
            picked.append(best)
            np.maximum(covered, sim.row(best), out=covered)
    else:
        # heap of (-gain, original position, step the gain was computed at)
        heap = [(-sim.gain(i, covered), i, 0) for i in range(n)]
        heapq.heapify(heap)
        for step in range(1, k + 1):
            while True:
                neg_gain, i, stamp = heapq.heappop(heap)
                if stamp == step:
                    break
                heapq.heappush(heap, (-sim.gain(i, covered), i, step))
            picked.append(i)
            np.maximum(covered, sim.row(i), out=covered)

    return [cand_ids[i] for i in picked]


@dataclass(frozen=True)
class DiversityConfig:
    pre_ratio: float = 0.20
    final_ratio: float = 0.02
    similarity: str = "cosine-clipped"
    ifd_cap: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.final_ratio < self.pre_ratio <= 1.0):
            raise ConfigError(
                f"need 0 < final_ratio < pre_ratio <= 1, got "
                f"final={self.final_ratio} pre={self.pre_ratio}"
            )
        if self.similarity != "cosine-clipped":
            raise ConfigError(f"unknown similarity {self.similarity!r}")


@dataclass
class DiversityResult:
    selected_ids: list[str]        # facility-location pick order
    stage1_ids: list[str]
    pool_size: int
    k: int
    metadata: dict


def diversify(
    dataset: Dataset,
    scores: list[ScoredSample],
    embeddings: EmbeddingSet,
    config: DiversityConfig,
) -> DiversityResult:
    """Stage 1: top-IFD pool at pre_ratio. Stage 2: facility-location
    greedy down to floor(final_ratio * n) samples from that pool."""
    stage1 = select_top_ifd(scores, SelectionConfig(ratio=config.pre_ratio, ifd_cap=config.ifd_cap))
    k = compute_budget(config.final_ratio, len(scores))
    if k == 0:
        raise ConfigError(f"final budget floor({config.final_ratio} * {len(scores)}) is 0")
    if len(stage1.selected_ids) < k:
        raise ConfigError(
            f"stage-1 pool has {len(stage1.selected_ids)} samples but stage 2 needs {k}"
        )
    have = set(embeddings.ids)
    missing = [sid for sid in stage1.selected_ids if sid not in have]
    if missing:
        raise DataError(f"embeddings missing for pool ids: {missing[:5]}")

    selected = facility_location_greedy(embeddings, set(stage1.selected_ids), k)
    return DiversityResult(
        selected_ids=selected,
        stage1_ids=stage1.selected_ids,
        pool_size=len(stage1.selected_ids),
        k=k,
        metadata={
            "similarity": config.similarity,
            "ground_set": "stage-1 pool",
            "tie_break": "original-order",
            "embedder": embeddings.embedder,
            "pre_ratio": config.pre_ratio,
            "final_ratio": config.final_ratio,
        },
    )
