"""Log-probability backends.

A backend turns (prompt, completion) into per-token natural-log
probabilities for the completion. Unconditional scoring is requested with
an empty prompt. Built-in backends (uniform, table) tokenize by lowercase-
preserving whitespace split and are pure; the remote backend speaks the
scorer protocol documented in PROTOCOL.md and owns no tokenizer at all:
token boundaries come back from the server.

Backend spec strings, as accepted on the CLI and the service:

    uniform:V          e.g. uniform:50257
    table:PATH         JSON table file, see TableBackend
    remote:URL         e.g. remote:http://127.0.0.1:8400
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import httpx

from .errors import BackendError, ConfigError, DataError

TOKEN_ENV_VAR = "IFDKIT_SCORER_TOKEN"


@dataclass(frozen=True)
class TokenLogProbs:
    """Per-token natural-log probabilities for one completion."""

    tokens: tuple[str, ...]
    logprobs: tuple[float, ...]
    truncated: bool = False

    def __post_init__(self) -> None:
        if len(self.tokens) == 0 or len(self.tokens) != len(self.logprobs):
            raise DataError(
                f"token/logprob lengths must match and be nonzero, got "
                f"{len(self.tokens)}/{len(self.logprobs)}"
            )
        for lp in self.logprobs:
            if not math.isfinite(lp) or lp > 0.0:
                raise DataError(f"logprob out of range (finite, <= 0): {lp!r}")

    @property
    def n(self) -> int:
        return len(self.tokens)


def _whitespace_tokens(text: str) -> list[str]:
    tokens = text.split()
    if not tokens:
        raise DataError("completion tokenizes to zero tokens")
    return tokens


class UniformBackend:
    """Assigns every token probability 1/V; the prompt never matters."""

    kind = "uniform"

    def __init__(self, vocab_size: int):
        if vocab_size < 1:
            raise ConfigError(f"uniform backend needs vocab size >= 1, got {vocab_size}")
        self.vocab_size = vocab_size
        self.name = f"uniform:{vocab_size}"
        self._logprob = -math.log(vocab_size)

    def logprobs(self, prompt: str, completion: str) -> TokenLogProbs:
        tokens = _whitespace_tokens(completion)
        return TokenLogProbs(tokens=tuple(tokens), logprobs=(self._logprob,) * len(tokens))


class TableBackend:
    """Explicit (context, token) -> logprob map, for crafted test scorers.

    The table file is JSON:

        {"name": "...", "default": -2.3,
         "entries": {"<context>": {"<token>": -0.69, ...}, ...}}

    Context starts as the prompt and grows by one whitespace token per step
    (joined with a single space; an empty context stays empty until the
    first token). Missing keys fall back to "default" when present,
    otherwise raise a data error.
    """

    kind = "table"

    def __init__(
        self,
        entries: dict[str, dict[str, float]],
        name: str = "table",
        default: float | None = None,
    ):
        self.entries = entries
        self.name = name
        self.default = default

    @classmethod
    def from_file(cls, path: str | Path) -> "TableBackend":
        path = Path(path)
        try:
            spec = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot load table backend from {path}: {e}") from e
        return cls(
            entries=spec.get("entries", {}),
            name=spec.get("name", f"table:{path.stem}"),
            default=spec.get("default"),
        )

    def _lookup(self, context: str, token: str) -> float:
        row = self.entries.get(context)
        if row is not None and token in row:
            return float(row[token])
        if self.default is not None:
            return float(self.default)
        raise DataError(f"table backend {self.name!r}: no entry for context={context!r} token={token!r}")

    def logprobs(self, prompt: str, completion: str) -> TokenLogProbs:
        tokens = _whitespace_tokens(completion)
        context = prompt
        lps: list[float] = []
        for tok in tokens:
            lps.append(self._lookup(context, tok))
            context = tok if not context else f"{context} {tok}"
        return TokenLogProbs(tokens=tuple(tokens), logprobs=tuple(lps))


class RemoteBackend:
    """Client for the scorer protocol (PROTOCOL.md): POST /v1/logprobs.

    The server owns tokenization; token_logprobs come back verbatim. A
    bearer token is sent when IFDKIT_SCORER_TOKEN is set.
    """

    kind = "remote"

    def __init__(
        self,
        endpoint: str,
        max_length: int | None = None,
        timeout: float = 60.0,
        client: httpx.Client | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.max_length = max_length
        self.timeout = timeout
        self.name = f"remote:{self.endpoint}"
        self.model: str | None = None
        headers = {}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = client or httpx.Client(timeout=timeout, headers=headers)

    def prepare(self) -> dict:
        """Fetch /v1/health once so run metadata can name the actual model."""
        try:
            resp = self._client.get(f"{self.endpoint}/v1/health", timeout=self.timeout)
            resp.raise_for_status()
            info = resp.json()
        except (httpx.HTTPError, json.JSONDecodeError) as e:
            raise BackendError(f"scorer health check failed at {self.endpoint}: {e}") from e
        model = info.get("models", {}).get("causal_lm")
        if model:
            self.model = str(model)
            self.name = f"remote:{self.model}"
        return info

    def logprobs(self, prompt: str, completion: str) -> TokenLogProbs:
        body: dict = {"prompt": prompt, "completion": completion}
        if self.max_length is not None:
            body["max_length"] = self.max_length
        try:
            resp = self._client.post(
                f"{self.endpoint}/v1/logprobs", json=body, timeout=self.timeout
            )
        except httpx.HTTPError as e:
            raise BackendError(f"scorer request failed: {e}") from e
        if resp.status_code != 200:
            raise BackendError(
                f"scorer returned HTTP {resp.status_code}: {resp.text[:200]}"
            )
        try:
            payload = resp.json()
            tokens = tuple(str(t) for t in payload["tokens"])
            lps = tuple(float(x) for x in payload["token_logprobs"])
            truncated = bool(payload.get("truncated", False))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise BackendError(f"malformed scorer response: {e}") from e
        if self.model is None and "model" in payload:
            self.model = str(payload["model"])
        return TokenLogProbs(tokens=tokens, logprobs=lps, truncated=truncated)

    def close(self) -> None:
        self._client.close()


Backend = UniformBackend | TableBackend | RemoteBackend


def parse_backend_spec(
    spec: str,
    max_length: int | None = None,
    timeout: float = 60.0,
) -> Backend:
    """Parse a kind:parameter backend spec string into a backend instance."""
    kind, sep, param = spec.partition(":")
    if not sep:
        raise ConfigError(f"backend spec {spec!r} must look like kind:parameter")
    if kind == "uniform":
        try:
            return UniformBackend(int(param))
        except ValueError:
            raise ConfigError(f"uniform backend needs an integer vocab size, got {param!r}") from None
    if kind == "table":
        return TableBackend.from_file(param)
    if kind == "remote":
        return RemoteBackend(param, max_length=max_length, timeout=timeout)
    raise ConfigError(f"unknown backend kind {kind!r} (expected uniform, table, or remote)")
