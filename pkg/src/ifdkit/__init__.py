"""ifdkit: perplexity/IFD scoring, selection, and consistency analysis for
instruction-tuning datasets."""

__version__ = "0.1.0"

from .analysis import (
    ConsistencyReport,
    DistributionSummary,
    consistency_report,
    overlap_ratio,
    spearman_rho,
    summarize_distribution,
    winning_score,
)
from .backends import RemoteBackend, TableBackend, TokenLogProbs, UniformBackend, parse_backend_spec
from .data import (
    Dataset,
    InstructionSample,
    PromptTemplate,
    TEMPLATES,
    get_template,
    load_dataset,
    render_prompt,
    save_dataset_alpaca,
    save_dataset_jsonl,
)
from .diversity import (
    DiversityConfig,
    DiversityResult,
    EmbeddingSet,
    diversify,
    facility_location_greedy,
    hashed_bow_embed,
    load_embeddings,
    remote_embed,
    save_embeddings,
)
from .errors import BackendError, ConfigError, DataError, DegenerateRankingError, ToolError
from .report import extract_verb_noun, load_lexicons, quality_report, verb_noun_report
from .scoring import ScoredSample, ScoringRun, ifd_score, perplexity, read_scores, score_dataset, write_scores
from .selection import SelectionConfig, SelectionResult, materialize_subset, select_top_ifd

__all__ = [
    "BackendError",
    "ConfigError",
    "ConsistencyReport",
    "DataError",
    "Dataset",
    "DegenerateRankingError",
    "DistributionSummary",
    "DiversityConfig",
    "DiversityResult",
    "EmbeddingSet",
    "InstructionSample",
    "PromptTemplate",
    "RemoteBackend",
    "ScoredSample",
    "ScoringRun",
    "SelectionConfig",
    "SelectionResult",
    "TEMPLATES",
    "TableBackend",
    "TokenLogProbs",
    "ToolError",
    "UniformBackend",
    "consistency_report",
    "diversify",
    "extract_verb_noun",
    "facility_location_greedy",
    "get_template",
    "hashed_bow_embed",
    "ifd_score",
    "load_dataset",
    "load_embeddings",
    "load_lexicons",
    "materialize_subset",
    "overlap_ratio",
    "parse_backend_spec",
    "perplexity",
    "quality_report",
    "read_scores",
    "remote_embed",
    "render_prompt",
    "save_dataset_alpaca",
    "save_dataset_jsonl",
    "save_embeddings",
    "score_dataset",
    "select_top_ifd",
    "spearman_rho",
    "summarize_distribution",
    "verb_noun_report",
    "winning_score",
    "write_scores",
]
