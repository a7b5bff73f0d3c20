"""Rank scored samples and materialize the selected subset.

Selection takes the top k-percent of samples by IFD, restricted to scores
strictly under the cap (default 1.0: at-or-above-1 marks samples whose
instruction does not help at all, so they are excluded rather than
eligible). The budget is floor(ratio * n) over the full score count, and
ties are broken by original dataset order for reproducibility.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .data import Dataset, InstructionSample
from .errors import ConfigError, DataError
from .scoring import ScoredSample

# Guards against decimal ratios whose binary form lands a hair under an
# integer product (e.g. 0.29 * 100 -> 28.999999999999996).
_BUDGET_EPS = 1e-9


@dataclass(frozen=True)
class SelectionConfig:
    ratio: float
    ifd_cap: float = 1.0
    tie_break: str = "original-order"

    def __post_init__(self) -> None:
        if not (0.0 < self.ratio <= 1.0):
            raise ConfigError(f"ratio must be in (0, 1], got {self.ratio}")
        if not self.ifd_cap > 0.0:
            raise ConfigError(f"ifd_cap must be > 0, got {self.ifd_cap}")
        if self.tie_break != "original-order":
            raise ConfigError(f"unknown tie_break {self.tie_break!r}")


@dataclass
class SelectionResult:
    selected_ids: list[str]        # descending IFD, ties in original order
    budget: int
    n_excluded_by_cap: int
    underfilled: bool


def compute_budget(ratio: float, n: int) -> int:
    return int(math.floor(ratio * n + _BUDGET_EPS))


def select_top_ifd(scores: list[ScoredSample], config: SelectionConfig) -> SelectionResult:
    """Pick the budget-many highest-IFD samples with ifd under the cap."""
    if not scores:
        raise ConfigError("cannot select from an empty score list")
    seen: set[str] = set()
    for s in scores:
        if s.id in seen:
            raise DataError(f"duplicate id in scores: {s.id!r}")
        seen.add(s.id)

    n = len(scores)
    budget = compute_budget(config.ratio, n)
    if budget == 0:
        raise ConfigError(f"budget floor({config.ratio} * {n}) is 0; increase the ratio")

    eligible = [(s.ifd, i, s.id) for i, s in enumerate(scores) if s.ifd < config.ifd_cap]
    n_excluded = n - len(eligible)
    eligible.sort(key=lambda t: (-t[0], t[1]))
    picked = eligible[:budget]
    return SelectionResult(
        selected_ids=[sid for _, _, sid in picked],
        budget=budget,
        n_excluded_by_cap=n_excluded,
        underfilled=len(eligible) < budget,
    )


def subset_by_ids(dataset: Dataset, ids: list[str]) -> Dataset:
    """Extract samples by id, in the given order."""
    index = dataset.by_id()
    samples: list[InstructionSample] = []
    for sid in ids:
        if sid not in index:
            raise DataError(f"selected id {sid!r} not present in dataset")
        samples.append(index[sid])
    return Dataset(samples=samples, source_path=dataset.source_path)


def materialize_subset(dataset: Dataset, result: SelectionResult) -> Dataset:
    """Extract the selected samples, ordered as selected (descending IFD)."""
    return subset_by_ids(dataset, result.selected_ids)
