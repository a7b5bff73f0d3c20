"""Consistency statistics between scorers, distribution summaries, and
pairwise winning-score arithmetic.

Spearman's rho is the Pearson correlation of average ranks (the standard
tie-corrected form). Overlap ratios re-run top-IFD selection for each
scorer over the ids common to both score files and measure how much of
the budget the two selections share.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError, DegenerateRankingError
from .scoring import ScoredSample
from .selection import SelectionConfig, compute_budget, select_top_ifd

QUANTILE_PERCENTILES = (1, 5, 25, 50, 75, 95, 99)


def average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        # positions i..j (0-based) share the average of ranks i+1..j+1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman_rho(values_a: list[float], values_b: list[float]) -> float:
    """Spearman's rank correlation coefficient with average ranks for ties.

    Exactly +/-1.0 is returned when the rank vectors agree or mirror each
    other exactly; otherwise the Pearson formula on ranks, clamped into
    [-1, 1] against float drift.
    """
    if len(values_a) != len(values_b):
        raise DataError(f"paired lists differ in length: {len(values_a)} vs {len(values_b)}")
    n = len(values_a)
    if n < 2:
        raise DataError(f"need at least 2 pairs, got {n}")
    a = np.asarray(values_a, dtype=np.float64)
    b = np.asarray(values_b, dtype=np.float64)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise DataError("values must be finite")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise DegenerateRankingError(
            "rank correlation undefined: a value list is constant (zero rank variance)"
        )

    ra = average_ranks(a)
    rb = average_ranks(b)
    if np.array_equal(ra, rb):
        return 1.0
    if np.array_equal(ra + rb, np.full(n, n + 1.0)):
        return -1.0
    da = ra - ra.mean()
    db = rb - rb.mean()
    rho = float(np.dot(da, db) / math.sqrt(np.dot(da, da) * np.dot(db, db)))
    return max(-1.0, min(1.0, rho))


def winning_score(wins: int, ties: int, losses: int) -> float:
    """(wins - losses) / total + 1, computed as one division for exactness."""
    for name, v in (("wins", wins), ("ties", ties), ("losses", losses)):
        if v < 0:
            raise ConfigError(f"{name} must be >= 0, got {v}")
    total = wins + ties + losses
    if total == 0:
        raise ConfigError("winning score needs at least one judged comparison")
    return (wins - losses + total) / total


@dataclass
class DistributionSummary:
    scorer: str
    metric: str
    quantiles: dict[int, float]    # percentile -> value, nearest-rank method
    mean: float
    count: int


def summarize_distribution(scores: list[ScoredSample], metric: str) -> DistributionSummary:
    """Nearest-rank quantiles plus mean for ppl_cond or ifd."""
    if metric not in ("ppl_cond", "ifd"):
        raise ConfigError(f"metric must be ppl_cond or ifd, got {metric!r}")
    if not scores:
        raise DataError("cannot summarize an empty score list")
    values = np.sort(np.asarray([getattr(s, metric) for s in scores], dtype=np.float64))
    n = len(values)
    quantiles = {}
    for p in QUANTILE_PERCENTILES:
        # nearest-rank: the ceil(p*n/100)-th smallest value, 1-indexed
        rank = max(1, math.ceil(p * n / 100))
        quantiles[p] = float(values[rank - 1])
    return DistributionSummary(
        scorer=scores[0].scorer,
        metric=metric,
        quantiles=quantiles,
        mean=float(values.mean()),
        count=n,
    )


def _common_rows(
    scores_a: list[ScoredSample], scores_b: list[ScoredSample]
) -> tuple[list[ScoredSample], list[ScoredSample]]:
    ids_a = {s.id for s in scores_a}
    ids_b = {s.id for s in scores_b}
    common = ids_a & ids_b
    if not common:
        raise DataError("score files share no ids")
    # keep each list's own order so tie-breaks stay dataset-ordered
    return (
        [s for s in scores_a if s.id in common],
        [s for s in scores_b if s.id in common],
    )


def overlap_ratio(
    scores_a: list[ScoredSample],
    scores_b: list[ScoredSample],
    budget_fraction: float,
    ifd_cap: float = 1.0,
) -> float:
    """Shared fraction of the selection budget over the common-id pool."""
    if not (0.0 < budget_fraction <= 1.0):
        raise ConfigError(f"budget fraction must be in (0, 1], got {budget_fraction}")
    a, b = _common_rows(scores_a, scores_b)
    budget = compute_budget(budget_fraction, len(a))
    if budget == 0:
        raise ConfigError(
            f"budget floor({budget_fraction} * {len(a)}) is 0; increase the fraction"
        )
    config = SelectionConfig(ratio=budget_fraction, ifd_cap=ifd_cap)
    sel_a = set(select_top_ifd(a, config).selected_ids)
    sel_b = set(select_top_ifd(b, config).selected_ids)
    return len(sel_a & sel_b) / budget


@dataclass
class ConsistencyReport:
    scorer_a: str
    scorer_b: str
    spearman_ppl: float | None
    spearman_ifd: float | None
    overlap: dict[float, float]    # budget fraction -> overlap ratio
    n_common: int
    notes: dict[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "scorer_a": self.scorer_a,
            "scorer_b": self.scorer_b,
            "spearman_ppl": self.spearman_ppl,
            "spearman_ifd": self.spearman_ifd,
            "overlap": {f"{k:g}": v for k, v in self.overlap.items()},
            "n_common": self.n_common,
            "notes": self.notes,
            "policy": "metrics computed over the common-id pool; "
            "overlap applies the IFD cap before selecting",
        }


def consistency_report(
    scores_a: list[ScoredSample],
    scores_b: list[ScoredSample],
    budgets: tuple[float, ...] = (0.05, 0.10, 0.15),
    ifd_cap: float = 1.0,
) -> ConsistencyReport:
    """Spearman's rho on ppl_cond and ifd plus per-budget overlap ratios.

    Degenerate (constant-score) metrics are reported as None with an
    explanatory note rather than raising, so a comparison run can still
    produce the rest of the report.
    """
    a, b = _common_rows(scores_a, scores_b)
    notes: dict[str, str] = {}

    def rho_or_note(metric: str, note_key: str) -> float | None:
        va = [getattr(s, metric) for s in a]
        vb = [getattr(s, metric) for s in b]
        try:
            return spearman_rho(va, vb)
        except DegenerateRankingError as e:
            notes[note_key] = f"degenerate: {e}"
            return None

    overlap = {float(f): overlap_ratio(a, b, f, ifd_cap=ifd_cap) for f in budgets}
    return ConsistencyReport(
        scorer_a=a[0].scorer,
        scorer_b=b[0].scorer,
        spearman_ppl=rho_or_note("ppl_cond", "spearman_ppl"),
        spearman_ifd=rho_or_note("ifd", "spearman_ifd"),
        overlap=overlap,
        n_common=len(a),
        notes=notes,
    )
