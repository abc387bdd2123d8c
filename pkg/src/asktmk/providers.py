"""Text-completion providers behind one contract: mock (offline) and remote.

The mock provider is a pure function of the prompt string. It understands
the sentinel blocks the pipeline emits and produces fixed, testable shapes:

* CONTEXT block with documents titled A, B ->
  "Based on: A; B." followed by the first sentence of each document body.
* EXISTING_ANSWER block E plus a CONTEXT block with document D ->
  "E; refined with: D".

Every document title in the prompt's CONTEXT block is therefore guaranteed
to appear in the mock output, which is what makes refine-chain coverage
assertable without a live model.
"""

from __future__ import annotations

import math
import os
import re
import threading
from dataclasses import dataclass

from .errors import BudgetExceeded, ProviderError, ProviderUnavailable

DEFAULT_MAX_TOKENS = 1920
DEFAULT_TEMPERATURE = 0.0
DEFAULT_PROMPT_TOKEN_LIMIT = 4096

MODE_MOCK = "mock"
MODE_REMOTE = "remote"


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")


@dataclass(frozen=True)
class ProviderConfig:
    mode: str = MODE_MOCK
    endpoint: str | None = None
    model_name: str | None = None
    auth: str | None = None  # literal token or "env:VARNAME" reference
    prompt_token_limit: int = DEFAULT_PROMPT_TOKEN_LIMIT
    max_concurrency: int = 4

    def __post_init__(self):
        if self.mode not in (MODE_MOCK, MODE_REMOTE):
            raise ValueError(f"unknown provider mode '{self.mode}'")
        if self.mode == MODE_REMOTE and not self.endpoint:
            raise ValueError("remote provider mode requires an endpoint")

    def resolve_auth(self) -> str | None:
        if self.auth and self.auth.startswith("env:"):
            return os.environ.get(self.auth[4:])
        return self.auth


def estimate_tokens(text: str) -> int:
    """Approximate token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


# --- sentinel block parsing -------------------------------------------------

_BLOCK_RES = {
    name: re.compile(rf"{name}:\s*(.*?)\s*END {name}", re.DOTALL)
    for name in ("CONTEXT", "EXISTING_ANSWER", "QUESTION")
}


def extract_block(prompt: str, name: str) -> str | None:
    match = _BLOCK_RES[name].search(prompt)
    return match.group(1) if match else None


def context_documents(prompt: str) -> list[tuple[str, str]]:
    """(title, body) pairs from the prompt's CONTEXT block, if any."""
    block = extract_block(prompt, "CONTEXT")
    if block is None:
        return []
    docs: list[tuple[str, str]] = []
    title = None
    body: list[str] = []
    for line in block.splitlines():
        if line.startswith("### "):
            if title is not None:
                docs.append((title, "\n".join(body).strip()))
            title = line[4:].strip()
            body = []
        elif title is not None:
            body.append(line)
    if title is not None:
        docs.append((title, "\n".join(body).strip()))
    return docs


def first_sentence(text: str) -> str:
    flat = " ".join(text.split())
    match = re.search(r".*?[.!?]", flat)
    return match.group(0) if match else flat


class MockProvider:
    """Deterministic offline stand-in for a completion model."""

    mode = MODE_MOCK

    def __init__(self, config: ProviderConfig | None = None):
        self.config = config or ProviderConfig(mode=MODE_MOCK)
        self.calls = 0

    def complete(self, request: CompletionRequest) -> str:
        if estimate_tokens(request.prompt) > self.config.prompt_token_limit:
            raise BudgetExceeded(
                f"prompt is ~{estimate_tokens(request.prompt)} tokens, "
                f"limit is {self.config.prompt_token_limit}")
        self.calls += 1
        docs = context_documents(request.prompt)
        existing = extract_block(request.prompt, "EXISTING_ANSWER")
        if existing is not None and docs:
            return existing + "".join(f"; refined with: {title}" for title, _ in docs)
        if docs:
            titles = "; ".join(title for title, _ in docs)
            sentences = " ".join(s for s in (first_sentence(body) for _, body in docs) if s)
            answer = f"Based on: {titles}."
            return f"{answer} {sentences}" if sentences else answer
        question = extract_block(request.prompt, "QUESTION")
        if question:
            return f"Mock answer to: {first_sentence(question)}"
        return "Mock completion."


class RemoteProvider:
    """Chat-completions-style HTTP adapter.

    POSTs {model, messages, max_tokens, temperature} to the configured
    endpoint and extracts the text of the first choice. A semaphore caps
    concurrent in-flight requests.
    """

    mode = MODE_REMOTE

    def __init__(self, config: ProviderConfig, transport=None, timeout: float = 60.0):
        self.config = config
        self.timeout = timeout
        self._transport = transport  # injection point for tests
        self._semaphore = threading.Semaphore(config.max_concurrency)

    def complete(self, request: CompletionRequest) -> str:
        import httpx

        if estimate_tokens(request.prompt) > self.config.prompt_token_limit:
            raise BudgetExceeded(
                f"prompt is ~{estimate_tokens(request.prompt)} tokens, "
                f"limit is {self.config.prompt_token_limit}")
        headers = {}
        token = self.config.resolve_auth()
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload = {
            "model": self.config.model_name or "default",
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_tokens,
            "temperature": request.temperature,
        }
        with self._semaphore:
            try:
                with httpx.Client(transport=self._transport, timeout=self.timeout) as client:
                    response = client.post(self.config.endpoint, json=payload, headers=headers)
            except httpx.HTTPError as exc:
                raise ProviderUnavailable(f"completion endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise ProviderError(response.status_code, response.text)
        try:
            choice = response.json()["choices"][0]
            text = choice["message"]["content"] if "message" in choice else choice["text"]
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(response.status_code, response.text) from exc
        if not isinstance(text, str):
            raise ProviderError(response.status_code, response.text)
        return text


def make_provider(config: ProviderConfig, transport=None):
    if config.mode == MODE_REMOTE:
        return RemoteProvider(config, transport=transport)
    return MockProvider(config)


def complete(config: ProviderConfig, request: CompletionRequest) -> str:
    """One-shot completion against a fresh provider for the given config."""
    return make_provider(config).complete(request)
