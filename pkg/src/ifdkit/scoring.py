"""Perplexity and IFD scoring over a dataset.

For a response of N tokens with per-token natural-log probabilities lp_j,

    PPL = exp(-(1/N) * sum_j lp_j)

computed once with the rendered instruction prompt (conditional) and once
with an empty prompt (unconditional). The IFD score is their ratio
PPL(response | prompt) / PPL(response): near 1 means the instruction
barely helps, well below 1 means it makes the response easy, and >= 1
flags misalignment.

All accumulation happens in log-space with math.fsum, so long responses
cannot underflow and the uniform-backend identity PPL == V holds to
around machine precision.
"""

from __future__ import annotations

import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .backends import Backend, RemoteBackend, TokenLogProbs
from .data import Dataset, PromptTemplate, render_prompt
from .errors import BackendError, ConfigError, DataError, ToolError

log = logging.getLogger(__name__)

SCORE_FILE_VERSION = 1


def perplexity(tlp: TokenLogProbs) -> float:
    """exp of the mean negative log-probability; always >= 1 for logprobs <= 0."""
    mean_neg = -math.fsum(tlp.logprobs) / tlp.n
    try:
        return math.exp(mean_neg)
    except OverflowError:
        # legal-but-extreme logprobs are a data condition, not a crash; the
        # scoring engine records the sample as failed and moves on
        raise DataError(
            f"perplexity overflows double precision (mean -logprob {mean_neg:.1f})"
        ) from None


def ifd_score(ppl_cond: float, ppl_uncond: float) -> float:
    """Conditional-over-unconditional perplexity ratio."""
    for v in (ppl_cond, ppl_uncond):
        if not math.isfinite(v) or v <= 0.0:
            raise DataError(f"perplexities must be positive and finite, got {v!r}")
    if ppl_uncond < 1e-12:
        raise DataError(f"unconditional perplexity too small to divide by: {ppl_uncond!r}")
    return ppl_cond / ppl_uncond


@dataclass(frozen=True)
class ScoredSample:
    """One sample's scores from a named backend.

    Invariants are enforced here so corrupt score files fail on read:
    both perplexities are finite and >= 1 (exp of a mean of non-negative
    values), and ifd is their ratio within 1e-9 relative.
    """

    id: str
    ppl_cond: float
    ppl_uncond: float
    ifd: float
    n_tokens: int
    scorer: str
    truncated: bool = False

    def __post_init__(self) -> None:
        for name, v in (("ppl_cond", self.ppl_cond), ("ppl_uncond", self.ppl_uncond)):
            if not math.isfinite(v) or v < 1.0 - 1e-9:
                raise DataError(f"sample {self.id!r}: {name} must be finite and >= 1, got {v!r}")
        if self.n_tokens < 1:
            raise DataError(f"sample {self.id!r}: n_tokens must be >= 1, got {self.n_tokens}")
        ratio = self.ppl_cond / self.ppl_uncond
        if abs(self.ifd - ratio) > 1e-9 * abs(ratio):
            raise DataError(
                f"sample {self.id!r}: ifd {self.ifd!r} is not ppl_cond/ppl_uncond ({ratio!r})"
            )


@dataclass(frozen=True)
class ScoreFailure:
    id: str
    error: str


@dataclass
class ScoringRun:
    """Ordered scores plus failure and timing accounting for one run."""

    rows: list[ScoredSample]
    failures: list[ScoreFailure]
    elapsed_seconds: float
    meta: dict

    @property
    def throughput(self) -> float:
        done = len(self.rows)
        return done / self.elapsed_seconds if self.elapsed_seconds > 0 else float("inf")


def _score_one(sample, template: PromptTemplate, backend: Backend) -> ScoredSample:
    prompt = render_prompt(sample, template)
    cond = backend.logprobs(prompt, sample.response)
    uncond = backend.logprobs("", sample.response)
    ppl_cond = perplexity(cond)
    ppl_uncond = perplexity(uncond)
    return ScoredSample(
        id=sample.id,
        ppl_cond=ppl_cond,
        ppl_uncond=ppl_uncond,
        ifd=ifd_score(ppl_cond, ppl_uncond),
        n_tokens=uncond.n,
        scorer=backend.name,
        truncated=cond.truncated or uncond.truncated,
    )


def score_dataset(
    dataset: Dataset,
    template: PromptTemplate,
    backend: Backend,
    workers: int = 1,
    max_failure_fraction: float = 0.01,
    progress: Callable[[int, int], None] | None = None,
) -> ScoringRun:
    """Score every sample; output order always equals dataset order.

    Up to ``workers`` backend requests run concurrently; results land in a
    per-index slot so concurrency never reorders output. Per-sample backend
    errors are recorded and the sample is dropped; the run only fails when
    the failure fraction exceeds ``max_failure_fraction``.
    """
    if dataset.n == 0:
        raise ConfigError("cannot score an empty dataset")
    if workers < 1:
        raise ConfigError(f"workers must be >= 1, got {workers}")

    if isinstance(backend, RemoteBackend):
        backend.prepare()

    start = time.perf_counter()
    slots: list[ScoredSample | ScoreFailure | None] = [None] * dataset.n

    def work(idx: int) -> None:
        sample = dataset.samples[idx]
        try:
            slots[idx] = _score_one(sample, template, backend)
        except ToolError as e:
            slots[idx] = ScoreFailure(id=sample.id, error=str(e))

    if workers == 1:
        for i in range(dataset.n):
            work(i)
            if progress:
                progress(i + 1, dataset.n)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = 0
            for _ in pool.map(work, range(dataset.n)):
                done += 1
                if progress:
                    progress(done, dataset.n)

    elapsed = time.perf_counter() - start
    rows = [s for s in slots if isinstance(s, ScoredSample)]
    failures = [s for s in slots if isinstance(s, ScoreFailure)]
    frac = len(failures) / dataset.n
    if frac > max_failure_fraction:
        detail = "; ".join(f"{f.id}: {f.error}" for f in failures[:5])
        raise BackendError(
            f"{len(failures)}/{dataset.n} samples failed "
            f"({frac:.1%} > {max_failure_fraction:.1%} allowed): {detail}"
        )
    if failures:
        log.warning("scoring: %d samples failed and were excluded", len(failures))
    log.info(
        "scored %d samples in %.2fs (%.1f samples/s)",
        len(rows), elapsed, len(rows) / elapsed if elapsed > 0 else float("inf"),
    )

    meta = {
        "backend": backend.name,
        "template": template.name,
        "truncation_policy": "left-truncate prompt, response kept intact",
    }
    return ScoringRun(rows=rows, failures=failures, elapsed_seconds=elapsed, meta=meta)


def _fmt(x: float) -> str:
    """Serialize a float with 12 significant digits."""
    return f"{x:.12g}"


def write_scores(path: str | Path, rows: list[ScoredSample], meta: dict) -> None:
    """Write the score file: one meta header line, then one row per sample.

    Floats carry 12 significant digits. The header is the line whose only
    key is "meta"; rows are identified by their "id" key.
    """
    path = Path(path)
    header = {
        "meta": {
            "format_version": SCORE_FILE_VERSION,
            "backend": meta.get("backend", ""),
            "template": meta.get("template", ""),
            "truncation_policy": meta.get("truncation_policy", ""),
        }
    }
    with path.open("w", encoding="utf-8") as f:
        f.write(json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n")
        for r in rows:
            parts = [
                f'"id": {json.dumps(r.id, ensure_ascii=False)}',
                f'"ppl_cond": {_fmt(r.ppl_cond)}',
                f'"ppl_uncond": {_fmt(r.ppl_uncond)}',
                f'"ifd": {_fmt(r.ifd)}',
                f'"n_tokens": {r.n_tokens}',
                f'"scorer": {json.dumps(r.scorer, ensure_ascii=False)}',
            ]
            if r.truncated:
                parts.append('"truncated": true')
            f.write("{" + ", ".join(parts) + "}\n")


def read_scores(path: str | Path) -> tuple[dict, list[ScoredSample]]:
    """Read a score file back into (meta, rows)."""
    path = Path(path)
    meta: dict = {}
    rows: list[ScoredSample] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read score file {path}: {e}") from e
    for lineno, line in enumerate(lines):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: line {lineno}: not valid JSON: {e}") from e
        if "meta" in obj and "id" not in obj:
            meta = obj["meta"]
            continue
        try:
            rows.append(
                ScoredSample(
                    id=str(obj["id"]),
                    ppl_cond=float(obj["ppl_cond"]),
                    ppl_uncond=float(obj["ppl_uncond"]),
                    ifd=float(obj["ifd"]),
                    n_tokens=int(obj["n_tokens"]),
                    scorer=str(obj["scorer"]),
                    truncated=bool(obj.get("truncated", False)),
                )
            )
        except (KeyError, TypeError, ValueError) as e:
            raise DataError(f"{path}: line {lineno}: bad score row: {e}") from e
    if not rows:
        raise DataError(f"{path}: no score rows found")
    return meta, rows


def rows_to_dicts(rows: list[ScoredSample]) -> list[dict]:
    out = []
    for r in rows:
        d = {
            "id": r.id,
            "ppl_cond": r.ppl_cond,
            "ppl_uncond": r.ppl_uncond,
            "ifd": r.ifd,
            "n_tokens": r.n_tokens,
            "scorer": r.scorer,
        }
        if r.truncated:
            d["truncated"] = True
        out.append(d)
    return out


def rows_from_dicts(dicts: list[dict]) -> list[ScoredSample]:
    try:
        return [
            ScoredSample(
                id=str(d["id"]),
                ppl_cond=float(d["ppl_cond"]),
                ppl_uncond=float(d["ppl_uncond"]),
                ifd=float(d["ifd"]),
                n_tokens=int(d["n_tokens"]),
                scorer=str(d["scorer"]),
                truncated=bool(d.get("truncated", False)),
            )
            for d in dicts
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError(f"bad score row: {e}") from e
