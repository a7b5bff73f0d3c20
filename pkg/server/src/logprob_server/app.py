"""HTTP surface of the scorer: /v1/logprobs, /v1/embed, /v1/health.

Floats are rounded to 12 significant digits before serialization so that
responses are byte-stable for a given model version. Models load lazily on
first use so the app object can be created (and health still refused)
without weights available.
"""

from __future__ import annotations

import threading

from fastapi import Depends, FastAPI, Header, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .config import Settings
from .engine import CausalScorer, CompletionTooLong, EmptyCompletion, SentenceEmbedder
from .schemas import EmbedRequest, EmbedResponse, HealthResponse, ScoreRequest, ScoreResponse


def _sig12(x: float) -> float:
    return float(f"{x:.12g}")


class ModelPool:
    """Lazy, thread-safe singletons for the two models."""

    def __init__(self, settings: Settings):
        self.settings = settings
        self._scorer: CausalScorer | None = None
        self._embedder: SentenceEmbedder | None = None
        self._lock = threading.Lock()

    def scorer(self) -> CausalScorer:
        with self._lock:
            if self._scorer is None:
                self._scorer = CausalScorer(
                    self.settings.model_name, max_length=self.settings.max_length
                )
            return self._scorer

    def embedder(self) -> SentenceEmbedder:
        with self._lock:
            if self._embedder is None:
                self._embedder = SentenceEmbedder(self.settings.embed_model_name)
            return self._embedder


def create_app(settings: Settings | None = None, pool: ModelPool | None = None) -> FastAPI:
    settings = settings or Settings.from_env()
    pool = pool or ModelPool(settings)
    app = FastAPI(title="logprob-server", version="0.1.0")

    # malformed bodies are 400s; 422 is reserved for completions that
    # cannot fit the context window
    @app.exception_handler(RequestValidationError)
    async def invalid_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    def require_token(authorization: str | None = Header(default=None)) -> None:
        if settings.token is None:
            return
        if authorization != f"Bearer {settings.token}":
            raise HTTPException(status_code=401, detail="missing or invalid bearer token")

    @app.get("/v1/health", response_model=HealthResponse)
    def health():
        scorer = pool.scorer()
        return HealthResponse(
            status="ok",
            models={
                "causal_lm": settings.model_name,
                "embedder": settings.embed_model_name,
            },
            max_length=scorer.max_length,
            unconditional_start=scorer.start_policy,
        )

    @app.post("/v1/logprobs", response_model=ScoreResponse, dependencies=[Depends(require_token)])
    def logprobs(req: ScoreRequest):
        if not req.completion:
            raise HTTPException(status_code=400, detail="completion must be non-empty")
        scorer = pool.scorer()
        try:
            out = scorer.score(req.prompt, req.completion, max_length=req.max_length)
        except EmptyCompletion as e:
            raise HTTPException(status_code=400, detail=str(e)) from e
        except CompletionTooLong as e:
            raise HTTPException(status_code=422, detail=str(e)) from e
        except Exception as e:  # model failure
            raise HTTPException(status_code=500, detail=f"model failure: {e}") from e
        return ScoreResponse(
            tokens=out.tokens,
            token_logprobs=[_sig12(v) for v in out.token_logprobs],
            truncated=out.truncated,
            model=settings.model_name,
        )

    @app.post("/v1/embed", response_model=EmbedResponse, dependencies=[Depends(require_token)])
    def embed(req: EmbedRequest):
        if not req.texts:
            raise HTTPException(status_code=400, detail="texts must be non-empty")
        embedder = pool.embedder()
        try:
            vectors = embedder.embed(req.texts)
        except Exception as e:
            raise HTTPException(status_code=500, detail=f"model failure: {e}") from e
        return EmbedResponse(
            vectors=[[_sig12(v) for v in row] for row in vectors],
            dim=embedder.dim,
            model=settings.embed_model_name,
        )

    return app
