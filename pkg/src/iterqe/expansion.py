"""Expansion generation: prompt building, thinking-trace handling, backends."""

from __future__ import annotations

import logging
import random
import re
import time
from collections import Counter
from dataclasses import dataclass, field

import requests

from .analysis import STOPWORDS

log = logging.getLogger(__name__)

THINK_OPEN = "<think>"
THINK_CLOSE = "</think>"
NO_THINK_PREFILL = "<think>Okay, I think I have finished thinking.</think>"

PROMPT_HEADER = (
    'Given a question "{query}" and its possible answering passages '
    "(most of these passages are wrong) enumerated as:"
)
PROMPT_FOOTER = (
    "please write a correct answering passage. "
    "Use your own knowledge, not just the example passages!"
)


class GenerationError(RuntimeError):
    """Backend failed to produce usable expansions."""


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.7
    num_samples: int = 2
    max_output_tokens: int = 1024
    thinking_mode: str = "think"  # think | no_think_prefill | base_model

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.num_samples < 1:
            raise ValueError("num_samples must be >= 1")
        if self.thinking_mode not in ("think", "no_think_prefill", "base_model"):
            raise ValueError(f"unknown thinking_mode {self.thinking_mode!r}")


@dataclass(frozen=True)
class ExpansionResponse:
    thinking_trace: str
    answer_text: str
    raw_text: str
    degenerate: bool = False


@dataclass(frozen=True)
class PromptInputs:
    query: str
    passages: tuple[str, ...]

    def __post_init__(self):
        if not self.query:
            raise ValueError("query must be non-empty")


def build_prompt(inputs: PromptInputs) -> str:
    """Render the expansion prompt; passage substitution is literal."""
    if not inputs.passages:
        log.warning("building prompt with no feedback passages for %r", inputs.query)
    lines = [PROMPT_HEADER.format(query=inputs.query)]
    for i, passage in enumerate(inputs.passages, 1):
        sep = ";" if i < len(inputs.passages) else ""
        lines.append(f"{i}. {passage}{sep}")
    lines.append(PROMPT_FOOTER)
    return "\n".join(lines)


def strip_thinking(raw: str) -> ExpansionResponse:
    """Split a raw generation into its thinking trace and answer text."""
    text = raw
    if THINK_OPEN in text:
        start = text.index(THINK_OPEN) + len(THINK_OPEN)
        if THINK_CLOSE in text[start:]:
            end = text.index(THINK_CLOSE, start)
            thinking = text[start:end]
            answer = (text[: text.index(THINK_OPEN)] + text[end + len(THINK_CLOSE):]).strip()
            return ExpansionResponse(thinking, answer, raw)
        # opener without closer: everything after it is thinking
        return ExpansionResponse(text[start:], "", raw, degenerate=True)
    return ExpansionResponse("", text.strip(), raw)


class ExpansionBackend:
    """Interface shared by the HTTP client and the mock; tracks per-sample call counts."""

    generation_calls: int = 0

    def generate(self, inputs: PromptInputs, params: GenerationParams) -> list[ExpansionResponse]:
        raise NotImplementedError

    def describe(self) -> dict:
        raise NotImplementedError


class ChatCompletionsBackend(ExpansionBackend):
    """Chat-completions-style HTTP backend with bounded retries."""

    def __init__(self, base_url: str, model: str, api_key: str = "",
                 timeout: float = 120.0, max_attempts: int = 3,
                 session: requests.Session | None = None,
                 trace: "TraceLogger | None" = None):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = api_key
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.session = session or requests.Session()
        self.trace = trace
        self.generation_calls = 0

    def describe(self) -> dict:
        return {"backend": "chat_completions", "base_url": self.base_url, "model": self.model}

    def _post(self, body: dict) -> dict:
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        delay = 1.0
        last_error: Exception | None = None
        for attempt in range(1, self.max_attempts + 1):
            try:
                resp = self.session.post(url, json=body, headers=headers, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = exc
            else:
                if resp.status_code == 200:
                    return resp.json()
                if 400 <= resp.status_code < 500:
                    raise GenerationError(f"backend rejected request: {resp.status_code} {resp.text[:200]}")
                last_error = GenerationError(f"backend error {resp.status_code}")
            if attempt < self.max_attempts:
                time.sleep(delay)
                delay *= 2
        raise GenerationError(f"backend unreachable after {self.max_attempts} attempts: {last_error}")

    def generate(self, inputs: PromptInputs, params: GenerationParams) -> list[ExpansionResponse]:
        prompt = build_prompt(inputs)
        messages = [{"role": "user", "content": prompt}]
        prefilled = params.thinking_mode == "no_think_prefill"
        if prefilled:
            messages.append({"role": "assistant", "content": NO_THINK_PREFILL})
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": params.temperature,
            "n": params.num_samples,
            "max_tokens": params.max_output_tokens,
        }
        started = time.monotonic()
        payload = self._post(body)
        if self.trace is not None:
            self.trace.record({
                "prompt": prompt,
                "raw": [c["message"]["content"] for c in payload.get("choices", [])],
                "latency_s": round(time.monotonic() - started, 3),
            })
        responses = []
        for choice in payload.get("choices", []):
            raw = choice["message"]["content"]
            if prefilled:
                # continuation after the prefill carries no thinking of its own
                raw = raw.removeprefix(NO_THINK_PREFILL)
                responses.append(ExpansionResponse("", raw.strip(), raw))
            else:
                responses.append(strip_thinking(raw))
        if len(responses) != params.num_samples:
            raise GenerationError(
                f"backend returned {len(responses)} samples, expected {params.num_samples}"
            )
        if all(not r.answer_text for r in responses):
            raise GenerationError("all samples produced empty answers")
        self.generation_calls += params.num_samples
        return responses


class MockBackend(ExpansionBackend):
    """Deterministic offline backend for tests and reproducible runs."""

    def __init__(self, mode: str = "echo_terms", seed: int = 0,
                 fixed_text: str = "mock expansion", top_terms: int = 8):
        if mode not in ("echo_terms", "fixed_text"):
            raise ValueError(f"unknown mock mode {mode!r}")
        self.mode = mode
        self.seed = seed
        self.fixed_text = fixed_text
        self.top_terms = top_terms
        self.generation_calls = 0

    def describe(self) -> dict:
        return {"backend": "mock", "mode": self.mode, "seed": self.seed}

    def _echo_answer(self, inputs: PromptInputs) -> str:
        counts: Counter[str] = Counter()
        for passage in inputs.passages:
            for tok in re.findall(r"[a-z0-9]+", passage.lower()):
                if tok not in STOPWORDS:
                    counts[tok] += 1
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        terms = [t for t, _ in ranked[: self.top_terms]]
        if not terms:
            return inputs.query
        rng = random.Random((self.seed, inputs.query, len(inputs.passages)).__repr__())
        rng.shuffle(terms)
        return " ".join(terms)

    def generate(self, inputs: PromptInputs, params: GenerationParams) -> list[ExpansionResponse]:
        answer = self.fixed_text if self.mode == "fixed_text" else self._echo_answer(inputs)
        thinking = "" if params.thinking_mode != "think" else f"considering {len(inputs.passages)} passages"
        raw = f"{THINK_OPEN}{thinking}{THINK_CLOSE}{answer}" if thinking else answer
        self.generation_calls += params.num_samples
        return [ExpansionResponse(thinking, answer, raw) for _ in range(params.num_samples)]


def mock_generate(inputs: PromptInputs, seed: int = 0, mode: str = "echo_terms",
                  num_samples: int = 2, fixed_text: str = "mock expansion") -> list[ExpansionResponse]:
    """One-shot convenience wrapper over MockBackend."""
    backend = MockBackend(mode=mode, seed=seed, fixed_text=fixed_text)
    return backend.generate(
        inputs, GenerationParams(num_samples=num_samples, thinking_mode="base_model")
    )


@dataclass
class TraceLogger:
    """Optional JSONL audit log of request/response pairs."""

    path: str
    _fh: object = field(default=None, repr=False)

    def record(self, entry: dict) -> None:
        import json
        if self._fh is None:
            self._fh = open(self.path, "a", encoding="utf-8")
        self._fh.write(json.dumps(entry) + "\n")
        self._fh.flush()
