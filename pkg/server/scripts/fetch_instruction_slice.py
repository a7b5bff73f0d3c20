#!/usr/bin/env python3
"""Fetch a small slice of a public instruction dataset for server tests.

Downloads the cleaned 52k instruction-following release (yahma/
alpaca-cleaned on the Hugging Face hub) and writes the first N records to
tests/fixtures/instruction_slice.json in {instruction, input, output}
form. The slice is fetched on demand rather than committed; tests skip
with a pointer here when it is absent.

Honors the standard Hugging Face environment variables (HF_ENDPOINT,
HF_HOME, ...) for mirrored or air-gapped setups.
"""

from __future__ import annotations

import argparse
import json
from pathlib import Path

DATASET_REPO = "yahma/alpaca-cleaned"
DATASET_FILE = "alpaca_data_cleaned.json"
DEFAULT_OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "instruction_slice.json"


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=500)
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()

    from huggingface_hub import hf_hub_download

    path = hf_hub_download(DATASET_REPO, DATASET_FILE, repo_type="dataset")
    records = json.loads(Path(path).read_text(encoding="utf-8"))
    slice_ = [
        {"instruction": r["instruction"], "input": r.get("input", ""), "output": r["output"]}
        for r in records[: args.n]
        if r.get("output", "").strip()
    ]
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(json.dumps(slice_, ensure_ascii=False, indent=1), encoding="utf-8")
    print(f"wrote {len(slice_)} records from {DATASET_REPO} to {args.out}")


if __name__ == "__main__":
    main()
