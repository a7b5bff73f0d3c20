import json
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ifdkit.data import Dataset, InstructionSample


@pytest.fixture
def toy_samples() -> list[InstructionSample]:
    return [
        InstructionSample(id="000000", instruction="Write a story about a cat", input=None,
                          response="Once there was a cat who sailed the seas"),
        InstructionSample(id="000001", instruction="Add the numbers", input="2, 2",
                          response="The answer is 4"),
        InstructionSample(id="000002", instruction="Rewrite the sentence below", input="he go home",
                          response="He goes home"),
        InstructionSample(id="000003", instruction="Generate a list of colors", input=None,
                          response="red green blue"),
    ]


@pytest.fixture
def toy_dataset(toy_samples) -> Dataset:
    return Dataset(samples=toy_samples, source_path="toy")


@pytest.fixture
def alpaca_file(tmp_path) -> Path:
    records = [
        {"instruction": "Write a story about a cat", "input": "", "output": "Once there was a cat"},
        {"instruction": "Add the numbers", "input": "2, 2", "output": "The answer is 4"},
        {"instruction": "Rewrite the sentence below", "input": "he go home", "output": "He goes home"},
    ]
    path = tmp_path / "toy.json"
    path.write_text(json.dumps(records), encoding="utf-8")
    return path
