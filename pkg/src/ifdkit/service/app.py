"""FastAPI service wrapping the toolkit.

All computation happens here; clients (the bundled CLI included) only
move files and JSON. Typed toolkit errors map to HTTP statuses with a
stable error envelope so remote callers can re-raise them."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..analysis import consistency_report, winning_score
from ..backends import RemoteBackend, TableBackend, UniformBackend
from ..data import Dataset, PromptTemplate, get_template, samples_from_records
from ..diversity import DiversityConfig, diversify, hashed_bow_embed, remote_embed
from ..errors import BackendError, ConfigError, DataError, ToolError
from ..report import quality_report, render_report_text
from ..scoring import rows_from_dicts, rows_to_dicts, score_dataset
from ..selection import SelectionConfig, materialize_subset, select_top_ifd, subset_by_ids
from . import schemas as s

_STATUS = {ConfigError.wire_type: 400, DataError.wire_type: 422, BackendError.wire_type: 502}


def _dataset_from(samples: list[s.SampleIO]) -> Dataset:
    records = [sample.model_dump() for sample in samples]
    return Dataset(samples=samples_from_records(records))


def _rows_from(rows: list[s.ScoreRowIO]):
    return rows_from_dicts([r.model_dump() for r in rows])


def _samples_io(dataset: Dataset) -> list[s.SampleIO]:
    return [
        s.SampleIO(id=x.id, instruction=x.instruction, input=x.input, response=x.response)
        for x in dataset.samples
    ]


def _template_from(spec: s.TemplateSpec) -> PromptTemplate:
    if spec.with_input_pattern is not None or spec.without_input_pattern is not None:
        if not (spec.with_input_pattern and spec.without_input_pattern):
            raise ConfigError("custom templates need both patterns")
        return PromptTemplate(
            name=spec.name,
            with_input_pattern=spec.with_input_pattern,
            without_input_pattern=spec.without_input_pattern,
        )
    return get_template(spec.name)


def _backend_from(spec: s.BackendSpec):
    if spec.kind == "uniform":
        return UniformBackend(spec.vocab_size)
    if spec.kind == "table":
        return TableBackend(entries=spec.entries, name=spec.name, default=spec.default)
    return RemoteBackend(spec.url, max_length=spec.max_length, timeout=spec.timeout)


def _cap(value: float | None) -> float:
    return float("inf") if value is None else value


def create_app() -> FastAPI:
    app = FastAPI(title="ifdkit service", version=__version__)

    @app.exception_handler(ToolError)
    async def tool_error_handler(request: Request, exc: ToolError):
        return JSONResponse(
            status_code=_STATUS.get(exc.wire_type, 500),
            content={"error": {"type": exc.wire_type, "message": str(exc)}},
        )

    @app.get("/v1/health", response_model=s.HealthResponse)
    def health():
        return s.HealthResponse(status="ok", tool_version=__version__)

    @app.post("/v1/score", response_model=s.ScoreResponse)
    def score(req: s.ScoreRequest):
        dataset = _dataset_from(req.samples)
        run = score_dataset(
            dataset,
            _template_from(req.template),
            _backend_from(req.backend),
            workers=req.workers,
            max_failure_fraction=req.max_failure_fraction,
        )
        return s.ScoreResponse(
            rows=[s.ScoreRowIO(**d) for d in rows_to_dicts(run.rows)],
            failures=[s.ScoreFailureIO(id=f.id, error=f.error) for f in run.failures],
            elapsed_seconds=run.elapsed_seconds,
            meta=s.ScoreMetaIO(**run.meta),
        )

    @app.post("/v1/select", response_model=s.SelectResponse)
    def select(req: s.SelectRequest):
        dataset = _dataset_from(req.samples)
        result = select_top_ifd(
            _rows_from(req.rows), SelectionConfig(ratio=req.ratio, ifd_cap=_cap(req.ifd_cap))
        )
        subset = materialize_subset(dataset, result)
        return s.SelectResponse(
            selected_ids=result.selected_ids,
            budget=result.budget,
            n_excluded_by_cap=result.n_excluded_by_cap,
            underfilled=result.underfilled,
            subset=_samples_io(subset),
        )

    @app.post("/v1/compare", response_model=s.CompareResponse)
    def compare(req: s.CompareRequest):
        report = consistency_report(
            _rows_from(req.rows_a),
            _rows_from(req.rows_b),
            budgets=tuple(req.budgets),
            ifd_cap=_cap(req.ifd_cap),
        )
        return s.CompareResponse(**report.to_dict())

    @app.post("/v1/diversify", response_model=s.DiversifyResponse)
    def run_diversify(req: s.DiversifyRequest):
        dataset = _dataset_from(req.samples)
        rows = _rows_from(req.rows)
        config = DiversityConfig(
            pre_ratio=req.pre_ratio, final_ratio=req.final_ratio, ifd_cap=_cap(req.ifd_cap)
        )
        # embed only the stage-1 pool: stage 2 never looks outside it
        pool_ids = set(
            select_top_ifd(
                rows, SelectionConfig(ratio=req.pre_ratio, ifd_cap=_cap(req.ifd_cap))
            ).selected_ids
        )
        pool_samples = [x for x in dataset.samples if x.id in pool_ids]
        if req.embedder.kind == "hashed-bow":
            embeddings = hashed_bow_embed(pool_samples, dim=req.embedder.dim)
        else:
            embeddings = remote_embed(
                pool_samples,
                req.embedder.url,
                timeout=req.embedder.timeout,
                batch_size=req.embedder.batch_size,
            )
        result = diversify(dataset, rows, embeddings, config)
        subset = subset_by_ids(dataset, result.selected_ids)
        return s.DiversifyResponse(
            selected_ids=result.selected_ids,
            stage1_ids=result.stage1_ids,
            pool_size=result.pool_size,
            k=result.k,
            metadata=result.metadata,
            subset=_samples_io(subset),
            vectors=embeddings.vectors.tolist() if req.return_vectors else None,
            vector_ids=list(embeddings.ids) if req.return_vectors else None,
        )

    @app.post("/v1/report", response_model=s.ReportResponse)
    def report(req: s.ReportRequest):
        dataset = _dataset_from(req.samples)
        rows = _rows_from(req.rows)
        doc = quality_report(rows, dataset, fraction=req.fraction, top_k_rows=req.top_k_rows)
        return s.ReportResponse(report=doc, text=render_report_text(doc))

    @app.post("/v1/winning-score", response_model=s.WinningScoreResponse)
    def score_pairwise(req: s.WinningScoreRequest):
        return s.WinningScoreResponse(winning_score=winning_score(req.wins, req.ties, req.losses))

    return app


app = create_app()
