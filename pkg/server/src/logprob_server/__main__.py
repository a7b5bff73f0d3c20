"""Run the scorer server: python -m logprob_server [--port N]."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .config import Settings


def main() -> None:
    parser = argparse.ArgumentParser(description="Token logprob and embedding server.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=None)
    args = parser.parse_args()

    settings = Settings.from_env()
    app = create_app(settings)
    uvicorn.run(app, host=args.host, port=args.port or settings.port, log_level="info")


if __name__ == "__main__":
    main()
