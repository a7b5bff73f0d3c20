import json
from pathlib import Path

import pytest
from starlette.testclient import TestClient

from logprob_server.app import create_app
from logprob_server.config import Settings

GOLDEN_DIR = Path(__file__).resolve().parents[2] / "protocol" / "golden"
FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def client():
    """Server over the default models (loads real weights once per session)."""
    with TestClient(create_app(Settings())) as c:
        yield c


@pytest.fixture(scope="session")
def golden_logprob_requests():
    return json.loads((GOLDEN_DIR / "logprob_requests.json").read_text())


@pytest.fixture(scope="session")
def golden_logprob_responses():
    return json.loads((GOLDEN_DIR / "logprob_responses.json").read_text())


@pytest.fixture(scope="session")
def golden_embed_requests():
    return json.loads((GOLDEN_DIR / "embed_requests.json").read_text())


@pytest.fixture(scope="session")
def golden_embed_responses():
    return json.loads((GOLDEN_DIR / "embed_responses.json").read_text())


@pytest.fixture(scope="session")
def instruction_slice() -> list[dict]:
    path = FIXTURES / "instruction_slice.json"
    if not path.exists():
        pytest.skip(
            "instruction slice missing; run server/scripts/fetch_instruction_slice.py"
        )
    return json.loads(path.read_text(encoding="utf-8"))
