"""Dataset assessment: verb-noun tables for IFD slices and a combined
quality report.

Verb-noun extraction is a deliberate lexicon-plus-first-match heuristic
(no POS tagging): the verb is the first instruction token found in the
verb lexicon, the noun the first later token found in the noun lexicon.
The report header flags this approximation. Slices ignore the selection
cap so the top slice shows the raw upper tail of the IFD distribution.
"""

from __future__ import annotations

import csv
import math
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .analysis import DistributionSummary, summarize_distribution
from .data import Dataset
from .errors import ConfigError, DataError
from .scoring import ScoredSample

_WORD_RE = re.compile(r"[a-z']+")

EXTRACTION_METHOD = "lexicon first-match heuristic (not a dependency parse)"


@dataclass(frozen=True)
class Lexicons:
    verbs: frozenset[str]
    nouns: frozenset[str]


def _load_wordlist(path: Path) -> frozenset[str]:
    words = {
        line.strip().lower()
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    }
    if not words:
        raise DataError(f"lexicon {path} is empty")
    return frozenset(words)


def load_lexicons(verbs_path: str | Path | None = None, nouns_path: str | Path | None = None) -> Lexicons:
    """Load lexicons from plain one-word-per-line files (defaults shipped)."""
    base = resources.files("ifdkit") / "lexicons"
    verbs = _load_wordlist(Path(verbs_path) if verbs_path else Path(str(base / "verbs.txt")))
    nouns = _load_wordlist(Path(nouns_path) if nouns_path else Path(str(base / "nouns.txt")))
    return Lexicons(verbs=verbs, nouns=nouns)


def extract_verb_noun(instruction: str, lexicons: Lexicons) -> tuple[str, str] | None:
    """First lexicon verb, then first subsequent lexicon noun; None if either is absent."""
    if not lexicons.verbs or not lexicons.nouns:
        raise ConfigError("lexicons must be non-empty")
    tokens = _WORD_RE.findall(instruction.lower())
    for i, tok in enumerate(tokens):
        if tok in lexicons.verbs:
            for later in tokens[i + 1 :]:
                if later in lexicons.nouns:
                    return tok, later
            return None
    return None


@dataclass
class VerbNounTable:
    slice: str                     # "top" or "bottom"
    fraction: float
    rows: list[tuple[str, str, int]]   # (verb, noun, count), count-descending

    def to_dicts(self) -> list[dict]:
        return [{"verb": v, "noun": n, "count": c} for v, n, c in self.rows]


def _count_pairs(
    samples, lexicons: Lexicons, top_k_rows: int
) -> list[tuple[str, str, int]]:
    counts: dict[tuple[str, str], int] = {}
    for s in samples:
        pair = extract_verb_noun(s.instruction, lexicons)
        if pair is not None:
            counts[pair] = counts.get(pair, 0) + 1
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(v, n, c) for (v, n), c in ordered[:top_k_rows]]


def verb_noun_report(
    dataset: Dataset,
    scores: list[ScoredSample],
    fraction: float = 0.05,
    top_k_rows: int = 10,
    lexicons: Lexicons | None = None,
) -> tuple[VerbNounTable, VerbNounTable]:
    """Pair tables for the highest- and lowest-IFD slices of the dataset."""
    if not (0.0 < fraction <= 0.5):
        raise ConfigError(f"fraction must be in (0, 0.5], got {fraction}")
    lexicons = lexicons or load_lexicons()
    index = dataset.by_id()
    missing = [s.id for s in scores if s.id not in index]
    if missing:
        raise DataError(f"scores reference unknown ids: {missing[:5]}")

    k = max(1, math.floor(fraction * len(scores) + 1e-9))
    by_ifd = sorted(enumerate(scores), key=lambda t: (-t[1].ifd, t[0]))
    top_samples = [index[s.id] for _, s in by_ifd[:k]]
    bottom_samples = [index[s.id] for _, s in by_ifd[-k:]]

    top = VerbNounTable(slice="top", fraction=fraction, rows=_count_pairs(top_samples, lexicons, top_k_rows))
    bottom = VerbNounTable(slice="bottom", fraction=fraction, rows=_count_pairs(bottom_samples, lexicons, top_k_rows))
    return top, bottom


def quality_report(
    scores: list[ScoredSample],
    dataset: Dataset,
    fraction: float = 0.05,
    top_k_rows: int = 10,
    lexicons: Lexicons | None = None,
) -> dict:
    """Bundle distribution summaries, cap statistics, and verb-noun tables."""
    if not scores:
        raise DataError("cannot report on an empty score list")
    ppl = summarize_distribution(scores, "ppl_cond")
    ifd = summarize_distribution(scores, "ifd")
    n_at_or_above_1 = sum(1 for s in scores if s.ifd >= 1.0)
    n_below_1 = len(scores) - n_at_or_above_1
    top, bottom = verb_noun_report(dataset, scores, fraction, top_k_rows, lexicons)

    def summary_dict(d: DistributionSummary) -> dict:
        return {
            "metric": d.metric,
            "quantiles": {str(p): d.quantiles[p] for p in sorted(d.quantiles)},
            "mean": d.mean,
            "count": d.count,
        }

    return {
        "scorer": scores[0].scorer,
        "n_samples": len(scores),
        "distributions": {"ppl_cond": summary_dict(ppl), "ifd": summary_dict(ifd)},
        "ifd_cap": {
            "n_at_or_above_1": n_at_or_above_1,
            "n_below_1": n_below_1,
            "fraction_at_or_above_1": n_at_or_above_1 / len(scores),
        },
        "degenerate": n_below_1 == 0,
        "verb_noun": {
            "method": EXTRACTION_METHOD,
            "fraction": fraction,
            "top": top.to_dicts(),
            "bottom": bottom.to_dicts(),
        },
    }


def render_report_text(report: dict) -> str:
    """Human-readable rendering of a quality report."""
    lines = []
    lines.append(f"Dataset quality report — scorer: {report['scorer']}")
    lines.append(f"Samples scored: {report['n_samples']}")
    cap = report["ifd_cap"]
    lines.append(
        f"IFD >= 1 (excluded by selection cap): {cap['n_at_or_above_1']} "
        f"({cap['fraction_at_or_above_1']:.1%})"
    )
    if report["degenerate"]:
        lines.append(
            "WARNING: degenerate dataset/scorer pairing — no sample has IFD < 1, "
            "so nothing is selectable under the default cap."
        )
    for metric in ("ppl_cond", "ifd"):
        d = report["distributions"][metric]
        qs = "  ".join(f"p{p}={v:.6g}" for p, v in d["quantiles"].items())
        lines.append(f"{metric}: mean={d['mean']:.6g}  {qs}")
    vn = report["verb_noun"]
    lines.append(f"Verb-noun pairs ({vn['method']}), slice fraction {vn['fraction']:g}:")
    for which in ("top", "bottom"):
        lines.append(f"  {which} IFD slice:")
        if not vn[which]:
            lines.append("    (no pairs extracted)")
        for row in vn[which]:
            lines.append(f"    {row['verb']:<12} {row['noun']:<12} {row['count']}")
    return "\n".join(lines) + "\n"


def write_verb_noun_csv(table: VerbNounTable, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["verb", "noun", "count"])
        for v, n, c in table.rows:
            writer.writerow([v, n, c])


def write_quantile_csv(summaries: list[DistributionSummary], path: str | Path) -> None:
    """Tidy percentile data for external (violin-style) plotting."""
    with Path(path).open("w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["scorer", "metric", "percentile", "value"])
        for d in summaries:
            for p in sorted(d.quantiles):
                writer.writerow([d.scorer, d.metric, p, f"{d.quantiles[p]:.12g}"])
