"""Model wrappers: causal-LM token scoring and sentence embedding.

Scoring policy (mirrored in /v1/health metadata and PROTOCOL.md):

* The model's own tokenizer owns token boundaries. Prompt and completion
  are encoded separately and concatenated, so the returned token count
  always equals the tokenizer's count of the completion alone.
* Every sequence starts with the model's sequence-start token (bos, or
  eos when the model defines no bos). An empty prompt therefore scores
  the completion against the bare sequence start: that is the
  unconditional case.
* When context + completion exceed the window, context tokens are dropped
  from the left (sequence start included) and the response is kept whole.
  A completion needs at least one context position, so completions longer
  than max_length - 1 tokens are rejected.

Inference is greedy-free and runs in float32 eval mode, so identical
requests produce identical responses within a server process.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import torch


class CompletionTooLong(ValueError):
    """Completion does not fit the context window."""


class EmptyCompletion(ValueError):
    """Completion is empty or tokenizes to zero tokens."""


@dataclass
class ScoreOutput:
    tokens: list[str]
    token_logprobs: list[float]
    truncated: bool


class CausalScorer:
    def __init__(self, model_name: str, max_length: int | None = None):
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModelForCausalLM.from_pretrained(model_name)
        self.model.eval()
        model_max = getattr(self.model.config, "n_positions", None) or getattr(
            self.model.config, "max_position_embeddings", 1024
        )
        self.max_length = min(max_length or model_max, model_max)
        start = self.tokenizer.bos_token_id
        if start is None:
            start = self.tokenizer.eos_token_id
        if start is None:
            raise ValueError(f"{model_name}: tokenizer defines neither bos nor eos token")
        self.start_id = int(start)
        # single model instance; serialize forwards under concurrent requests
        self._lock = threading.Lock()

    @property
    def start_policy(self) -> str:
        which = "bos" if self.tokenizer.bos_token_id is not None else "eos"
        return f"sequence start = {which} token, prepended to every context (empty prompt included)"

    def score(self, prompt: str, completion: str, max_length: int | None = None) -> ScoreOutput:
        if not completion:
            raise EmptyCompletion("completion is empty")
        limit = self.max_length if max_length is None else min(max_length, self.max_length)
        # one request at a time end to end: tokenizer and model state plus
        # the torch op queue are shared, and partial overlap of extraction
        # with the next forward has produced corrupted logits under load
        with self._lock, torch.no_grad():
            comp_ids = self.tokenizer.encode(completion, add_special_tokens=False)
            if len(comp_ids) == 0:
                raise EmptyCompletion("completion tokenizes to zero tokens")
            if len(comp_ids) > limit - 1:
                raise CompletionTooLong(
                    f"completion is {len(comp_ids)} tokens; max_length {limit} "
                    "leaves no context position"
                )

            ctx_ids = [self.start_id] + self.tokenizer.encode(prompt, add_special_tokens=False)
            truncated = False
            if len(ctx_ids) + len(comp_ids) > limit:
                ctx_ids = ctx_ids[-(limit - len(comp_ids)):]
                truncated = True

            input_ids = torch.tensor([ctx_ids + comp_ids], dtype=torch.long)
            logits = self.model(input_ids).logits[0]
            logprobs = torch.log_softmax(logits.float(), dim=-1)
            base = len(ctx_ids)
            out = [
                min(0.0, float(logprobs[base + j - 1, token_id]))
                for j, token_id in enumerate(comp_ids)
            ]
            tokens = self.tokenizer.convert_ids_to_tokens(comp_ids)
        return ScoreOutput(tokens=tokens, token_logprobs=out, truncated=truncated)


class SentenceEmbedder:
    """Mean-pooled, L2-normalized encoder states (MiniLM-style recipe)."""

    def __init__(self, model_name: str, max_tokens: int = 256):
        from transformers import AutoModel, AutoTokenizer

        self.model_name = model_name
        self.tokenizer = AutoTokenizer.from_pretrained(model_name)
        self.model = AutoModel.from_pretrained(model_name)
        self.model.eval()
        self.max_tokens = max_tokens
        self.dim = int(self.model.config.hidden_size)
        self._lock = threading.Lock()

    def embed(self, texts: list[str]) -> list[list[float]]:
        with self._lock, torch.no_grad():
            enc = self.tokenizer(
                texts, padding=True, truncation=True, max_length=self.max_tokens,
                return_tensors="pt",
            )
            hidden = self.model(**enc).last_hidden_state
            mask = enc["attention_mask"].unsqueeze(-1).to(hidden.dtype)
            pooled = (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1e-9)
            unit = torch.nn.functional.normalize(pooled, p=2, dim=1)
            return [[float(v) for v in row] for row in unit]
