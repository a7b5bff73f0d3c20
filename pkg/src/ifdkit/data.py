"""Dataset ingestion, prompt templating, and canonical on-disk formats.

Two input formats are accepted:

* ``alpaca-json``: a single JSON array of ``{instruction, input, output}``
  objects (the layout of the original 52k instruction-following release).
* ``jsonl``: one JSON object per line with the same fields.

In both, ``output`` or ``response`` holds the response text and ``input``
is optional. The canonical output format is JSONL with fields
``{id, instruction, input, response}``. Records without an explicit id get
a zero-padded positional index so that score files produced by different
backends stay joinable.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, DataError

_SLOT_RE = re.compile(r"\{instruction\}|\{input\}")


@dataclass(frozen=True)
class InstructionSample:
    """One (instruction, optional input, response) triple."""

    id: str
    instruction: str
    input: str | None
    response: str

    @property
    def has_input(self) -> bool:
        return bool(self.input and self.input.strip())


@dataclass
class Dataset:
    """An ordered collection of samples; list position is the tie-break key."""

    samples: list[InstructionSample]
    source_path: str = ""

    @property
    def n(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def by_id(self) -> dict[str, InstructionSample]:
        return {s.id: s for s in self.samples}


@dataclass(frozen=True)
class PromptTemplate:
    """Deterministic prompt patterns with {instruction} and {input} slots.

    ``with_input_pattern`` must contain each slot exactly once;
    ``without_input_pattern`` must contain {instruction} exactly once and
    no {input} slot.
    """

    name: str
    with_input_pattern: str
    without_input_pattern: str

    def __post_init__(self) -> None:
        wi = self.with_input_pattern
        wo = self.without_input_pattern
        if wi.count("{instruction}") != 1 or wi.count("{input}") != 1:
            raise ConfigError(
                f"template {self.name!r}: with_input_pattern must contain "
                "{instruction} and {input} exactly once"
            )
        if wo.count("{instruction}") != 1 or "{input}" in wo:
            raise ConfigError(
                f"template {self.name!r}: without_input_pattern must contain "
                "{instruction} exactly once and no {input} slot"
            )


_VICUNA_PREAMBLE = (
    "A chat between a curious user and an artificial intelligence assistant. "
    "The assistant gives helpful, detailed, and polite answers to the user's "
    "questions."
)

# Registry of built-in templates; callers may construct their own
# PromptTemplate for anything not listed here.
TEMPLATES: dict[str, PromptTemplate] = {
    "vicuna-v1": PromptTemplate(
        name="vicuna-v1",
        with_input_pattern=_VICUNA_PREAMBLE + " USER: {instruction}\n{input} ASSISTANT: ",
        without_input_pattern=_VICUNA_PREAMBLE + " USER: {instruction} ASSISTANT: ",
    ),
    "alpaca": PromptTemplate(
        name="alpaca",
        with_input_pattern=(
            "Below is an instruction that describes a task, paired with an input "
            "that provides further context. Write a response that appropriately "
            "completes the request.\n\n"
            "### Instruction:\n{instruction}\n\n### Input:\n{input}\n\n### Response:\n"
        ),
        without_input_pattern=(
            "Below is an instruction that describes a task. Write a response that "
            "appropriately completes the request.\n\n"
            "### Instruction:\n{instruction}\n\n### Response:\n"
        ),
    ),
    "bare": PromptTemplate(
        name="bare",
        with_input_pattern="{instruction}\n{input}\n",
        without_input_pattern="{instruction}\n",
    ),
}

DEFAULT_TEMPLATE = "vicuna-v1"


def get_template(name: str) -> PromptTemplate:
    try:
        return TEMPLATES[name]
    except KeyError:
        raise ConfigError(
            f"unknown template {name!r}; built-ins: {', '.join(sorted(TEMPLATES))}"
        ) from None


def render_prompt(sample: InstructionSample, template: PromptTemplate) -> str:
    """Substitute the sample into the template. Pure function.

    Substitution is slot-wise (split on slot markers, join with values), so
    brace sequences inside the sample text are never re-interpreted.
    """
    pattern = (
        template.with_input_pattern if sample.has_input else template.without_input_pattern
    )
    values = {"{instruction}": sample.instruction, "{input}": sample.input or ""}
    out: list[str] = []
    pos = 0
    for m in _SLOT_RE.finditer(pattern):
        out.append(pattern[pos : m.start()])
        out.append(values[m.group(0)])
        pos = m.end()
    out.append(pattern[pos:])
    return "".join(out)


def _record_to_sample(record: object, index: int) -> InstructionSample:
    if not isinstance(record, dict):
        raise DataError(f"record {index}: expected a JSON object, got {type(record).__name__}")
    if "instruction" not in record:
        raise DataError(f"record {index}: missing 'instruction' field")
    if "output" in record:
        response = record["output"]
    elif "response" in record:
        response = record["response"]
    else:
        raise DataError(f"record {index}: missing 'output'/'response' field")
    sample_id = record.get("id")
    if sample_id is None:
        sample_id = f"{index:06d}"
    raw_input = record.get("input")
    return InstructionSample(
        id=str(sample_id),
        instruction=str(record["instruction"]),
        input=None if raw_input is None else str(raw_input),
        response=str(response),
    )


def _validate(samples: list[InstructionSample]) -> None:
    empty = [s.id for s in samples if not s.response.strip()]
    if empty:
        shown = ", ".join(empty[:10])
        more = "" if len(empty) <= 10 else f" (+{len(empty) - 10} more)"
        raise DataError(f"samples with empty response: {shown}{more}")
    seen: set[str] = set()
    for s in samples:
        if s.id in seen:
            raise DataError(f"duplicate sample id: {s.id!r}")
        seen.add(s.id)


def samples_from_records(records: list[object]) -> list[InstructionSample]:
    """Build validated samples from already-parsed records (service path)."""
    samples = [_record_to_sample(r, i) for i, r in enumerate(records)]
    _validate(samples)
    return samples


def load_dataset(path: str | Path, format: str | None = None) -> Dataset:
    """Load a dataset file, preserving record order.

    ``format`` is ``alpaca-json`` or ``jsonl``; when None it is inferred
    from the extension (``.jsonl`` vs anything else).
    """
    path = Path(path)
    if format is None:
        format = "jsonl" if path.suffix == ".jsonl" else "alpaca-json"
    if format not in ("alpaca-json", "jsonl"):
        raise ConfigError(f"unknown dataset format {format!r}")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e}") from e

    records: list[object] = []
    if format == "alpaca-json":
        try:
            parsed = json.loads(text)
        except json.JSONDecodeError as e:
            raise DataError(f"{path}: not valid JSON: {e}") from e
        if not isinstance(parsed, list):
            raise DataError(f"{path}: expected a top-level JSON array")
        records = parsed
    else:
        for lineno, line in enumerate(text.splitlines()):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: record {lineno}: not valid JSON: {e}") from e

    samples = samples_from_records(records)
    return Dataset(samples=samples, source_path=str(path))


def save_dataset_jsonl(dataset: Dataset, path: str | Path) -> None:
    """Write the canonical JSONL form ({id, instruction, input, response})."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as f:
        for s in dataset.samples:
            row = {
                "id": s.id,
                "instruction": s.instruction,
                "input": s.input if s.input is not None else "",
                "response": s.response,
            }
            f.write(json.dumps(row, ensure_ascii=False) + "\n")


def save_dataset_alpaca(dataset: Dataset, path: str | Path) -> None:
    """Write an {instruction, input, output} JSON array for finetuning stacks."""
    path = Path(path)
    rows = [
        {
            "instruction": s.instruction,
            "input": s.input if s.input is not None else "",
            "output": s.response,
        }
        for s in dataset.samples
    ]
    with path.open("w", encoding="utf-8") as f:
        json.dump(rows, f, ensure_ascii=False, indent=2)
        f.write("\n")
