"""Thin HTTP client for the toolkit service.

The CLI (and anything else) talks to the service exclusively through this
client. Without a server URL it mounts the FastAPI app in-process over an
ASGI test transport, so single-machine usage needs no running daemon; with
a URL it targets a live service. Either way the wire format is identical.
"""

from __future__ import annotations

import asyncio
import json

import httpx

from .errors import ToolError, error_from_wire


class _InProcessHTTP:
    """Synchronous httpx facade over the service app via an ASGI transport."""

    def __init__(self) -> None:
        from .service import app

        self._loop = asyncio.new_event_loop()
        self._client = httpx.AsyncClient(
            transport=httpx.ASGITransport(app=app), base_url="http://ifdkit.local"
        )

    def post(self, path: str, json=None) -> httpx.Response:
        return self._loop.run_until_complete(self._client.post(path, json=json))

    def get(self, path: str) -> httpx.Response:
        return self._loop.run_until_complete(self._client.get(path))

    def close(self) -> None:
        self._loop.run_until_complete(self._client.aclose())
        self._loop.close()


class ServiceClient:
    def __init__(self, server_url: str | None = None, timeout: float = 600.0):
        self.server_url = server_url
        if server_url is None:
            self._http: _InProcessHTTP | httpx.Client = _InProcessHTTP()
        else:
            self._http = httpx.Client(base_url=server_url.rstrip("/"), timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ServiceClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, path: str, payload: dict) -> dict:
        resp = self._http.post(path, json=payload)
        if resp.status_code != 200:
            raise self._error_from(resp)
        return resp.json()

    @staticmethod
    def _error_from(resp: httpx.Response) -> ToolError:
        try:
            envelope = resp.json().get("error", {})
            return error_from_wire(envelope.get("type", "error"), envelope.get("message", resp.text))
        except json.JSONDecodeError:
            return ToolError(f"service returned HTTP {resp.status_code}: {resp.text[:300]}")

    def health(self) -> dict:
        resp = self._http.get("/v1/health")
        if resp.status_code != 200:
            raise self._error_from(resp)
        return resp.json()

    def score(
        self,
        samples: list[dict],
        backend: dict,
        template: dict | None = None,
        workers: int = 1,
        max_failure_fraction: float = 0.01,
    ) -> dict:
        return self._post(
            "/v1/score",
            {
                "samples": samples,
                "backend": backend,
                "template": template or {"name": "vicuna-v1"},
                "workers": workers,
                "max_failure_fraction": max_failure_fraction,
            },
        )

    def select(self, samples: list[dict], rows: list[dict], ratio: float, ifd_cap: float | None) -> dict:
        return self._post(
            "/v1/select",
            {"samples": samples, "rows": rows, "ratio": ratio, "ifd_cap": ifd_cap},
        )

    def compare(
        self,
        rows_a: list[dict],
        rows_b: list[dict],
        budgets: list[float],
        ifd_cap: float | None,
    ) -> dict:
        return self._post(
            "/v1/compare",
            {"rows_a": rows_a, "rows_b": rows_b, "budgets": budgets, "ifd_cap": ifd_cap},
        )

    def diversify(
        self,
        samples: list[dict],
        rows: list[dict],
        pre_ratio: float,
        final_ratio: float,
        ifd_cap: float | None,
        embedder: dict,
        return_vectors: bool = False,
    ) -> dict:
        return self._post(
            "/v1/diversify",
            {
                "samples": samples,
                "rows": rows,
                "pre_ratio": pre_ratio,
                "final_ratio": final_ratio,
                "ifd_cap": ifd_cap,
                "embedder": embedder,
                "return_vectors": return_vectors,
            },
        )

    def report(self, samples: list[dict], rows: list[dict], fraction: float, top_k_rows: int) -> dict:
        return self._post(
            "/v1/report",
            {"samples": samples, "rows": rows, "fraction": fraction, "top_k_rows": top_k_rows},
        )

    def winning_score(self, wins: int, ties: int, losses: int) -> float:
        out = self._post("/v1/winning-score", {"wins": wins, "ties": ties, "losses": losses})
        return out["winning_score"]
