"""Iterative expansion loop: retrieve, filter redundant feedback, expand, update query."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

from .corpus import Corpus, truncate_text
from .expansion import ExpansionBackend, GenerationParams, PromptInputs
from .index import PostingIndex, ScoredHit, search_topk

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    rounds: int = 3
    top_k_feedback: int = 5
    prompt_doc_truncation: int = 128
    samples_per_round: int = 2
    lambda_: float = 3.0
    mode: str = "interaction"  # interaction | parallel
    accumulation_enabled: bool = True
    filter_enabled: bool = True
    retrieval_depth: int = 1000

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be non-negative")
        if self.mode not in ("interaction", "parallel"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lambda_ <= 0:
            raise ValueError("lambda must be positive")


@dataclass
class QueryState:
    q0: str
    expansions: list[str] = field(default_factory=list)
    blacklist: set[str] = field(default_factory=set)
    prev_feedback: list[str] = field(default_factory=list)
    round: int = 0


@dataclass
class RoundRecord:
    round: int
    retrieved: list[ScoredHit]
    feedback_docs: list[str]
    rendered_query: str
    expansion_segment: str
    thinking_traces: list[str]

    def to_dict(self) -> dict:
        return asdict(self)


def word_count(text: str) -> int:
    return len(text.split())


def repetition_count(q0: str, expansions: list[str], lambda_: float = 3.0) -> int:
    """How many times to repeat the original query against expansion dilution."""
    q0_words = word_count(q0)
    if q0_words < 1:
        raise ValueError("q0 must contain at least one word")
    total = sum(word_count(e) for e in expansions)
    return max(1, int(total / (q0_words * lambda_)))


def render_query(state: QueryState, lambda_: float = 3.0) -> str:
    """Repeated original query followed by every expansion segment in round order."""
    n = repetition_count(state.q0, state.expansions, lambda_)
    parts = [state.q0] * n + list(state.expansions)
    return " ".join(parts)


def filter_feedback(
    retrieved: list[ScoredHit],
    blacklist: set[str],
    prev_feedback: list[str],
    k: int,
) -> tuple[list[str], set[str]]:
    """Drop blacklisted and previous-round docs; excluded ids join the blacklist."""
    excluded = blacklist | set(prev_feedback)
    feedback: list[str] = []
    newly_blacklisted: set[str] = set()
    for hit in retrieved:
        if hit.doc_id in excluded:
            newly_blacklisted.add(hit.doc_id)
        elif len(feedback) < k:
            feedback.append(hit.doc_id)
    return feedback, blacklist | newly_blacklisted


def _feedback_passages(corpus: Corpus, doc_ids: list[str], max_tokens: int) -> tuple[str, ...]:
    return tuple(truncate_text(corpus.get(d).text, max_tokens) for d in doc_ids)


def run_round(
    state: QueryState,
    corpus: Corpus,
    index: PostingIndex,
    backend: ExpansionBackend,
    config: PipelineConfig,
    gen_params: GenerationParams | None = None,
) -> tuple[QueryState, RoundRecord]:
    """One loop iteration: retrieval, redundancy filtering, expansion, query update."""
    gen_params = gen_params or GenerationParams()
    rendered = render_query(state, config.lambda_)
    retrieved = search_topk(index, rendered, config.retrieval_depth)
    if config.filter_enabled:
        feedback, new_blacklist = filter_feedback(
            retrieved, state.blacklist, state.prev_feedback, config.top_k_feedback
        )
    else:
        feedback = [h.doc_id for h in retrieved[: config.top_k_feedback]]
        new_blacklist = set(state.blacklist)
    if not feedback:
        log.warning("round %d: no feedback documents survived filtering", state.round)
    passages = _feedback_passages(corpus, feedback, config.prompt_doc_truncation)
    # the generator always sees the original query, never the rendered one
    inputs = PromptInputs(query=state.q0, passages=passages)
    responses = backend.generate(
        inputs, replace(gen_params, num_samples=config.samples_per_round)
    )
    segment = " ".join(r.answer_text for r in responses)
    if config.accumulation_enabled:
        expansions = state.expansions + [segment]
    else:
        expansions = [segment]
    new_state = QueryState(
        q0=state.q0,
        expansions=expansions,
        blacklist=new_blacklist,
        prev_feedback=feedback,
        round=state.round + 1,
    )
    record = RoundRecord(
        round=state.round,
        retrieved=retrieved,
        feedback_docs=feedback,
        rendered_query=rendered,
        expansion_segment=segment,
        thinking_traces=[r.thinking_trace for r in responses],
    )
    return new_state, record


def run_pipeline(
    q0: str,
    corpus: Corpus,
    index: PostingIndex,
    backend: ExpansionBackend,
    config: PipelineConfig,
    gen_params: GenerationParams | None = None,
) -> tuple[list[ScoredHit], list[RoundRecord]]:
    """Full expansion run for one query; returns final ranking and per-round trace."""
    if not q0.strip():
        raise ValueError("query must be non-empty")
    gen_params = gen_params or GenerationParams()
    state = QueryState(q0=q0)
    trace: list[RoundRecord] = []
    if config.mode == "interaction":
        for _ in range(config.rounds):
            state, record = run_round(state, corpus, index, backend, config, gen_params)
            trace.append(record)
    elif config.rounds > 0:
        # parallel scaling: one retrieval, all generations in a single batch
        retrieved = search_topk(index, q0, config.retrieval_depth)
        feedback = [h.doc_id for h in retrieved[: config.top_k_feedback]]
        passages = _feedback_passages(corpus, feedback, config.prompt_doc_truncation)
        inputs = PromptInputs(query=q0, passages=passages)
        total_samples = config.rounds * config.samples_per_round
        responses = backend.generate(
            inputs, replace(gen_params, num_samples=total_samples)
        )
        segment = " ".join(r.answer_text for r in responses)
        state = QueryState(q0=q0, expansions=[segment], prev_feedback=feedback, round=1)
        trace.append(
            RoundRecord(
                round=0,
                retrieved=retrieved,
                feedback_docs=feedback,
                rendered_query=q0,
                expansion_segment=segment,
                thinking_traces=[r.thinking_trace for r in responses],
            )
        )
    final_query = render_query(state, config.lambda_)
    final_hits = search_topk(index, final_query, config.retrieval_depth)
    # the final retrieval is part of the audit trail too
    trace.append(
        RoundRecord(
            round=state.round,
            retrieved=final_hits,
            feedback_docs=[],
            rendered_query=final_query,
            expansion_segment="",
            thinking_traces=[],
        )
    )
    return final_hits, trace
