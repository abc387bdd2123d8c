"""Engine configuration with documented defaults and resolution precedence.

Defaults match the reference deployment: k=4 retrieved documents, completion
temperature 0, at most 1920 completion tokens. Resolution precedence is
CLI flags > environment variables > config file > defaults.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Mapping

from .providers import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_PROMPT_TOKEN_LIMIT,
    DEFAULT_TEMPERATURE,
    MODE_MOCK,
    ProviderConfig,
)
from .retrieval import DEFAULT_DIMENSION

ENV_PREFIX = "ASKTMK_"

#: Environment variables honored during resolution.
ENV_VARS = {
    "provider_mode": "ASKTMK_PROVIDER_MODE",
    "endpoint": "ASKTMK_ENDPOINT",
    "api_key": "ASKTMK_API_KEY",
    "k": "ASKTMK_K",
    "port": "ASKTMK_PORT",
}

EMBEDDER_HASHING = "hashing"
EMBEDDER_REMOTE = "remote"


def bundled_model_path() -> Path:
    """The packaged copy of the example agent model."""
    return Path(str(resources.files("asktmk").joinpath("data/vera.tmk.json")))


@dataclass
class EngineConfig:
    model_path: str = ""
    k: int = 4
    max_tokens: int = DEFAULT_MAX_TOKENS
    temperature: float = DEFAULT_TEMPERATURE
    provider_mode: str = MODE_MOCK
    endpoint: str | None = None
    model_name: str | None = None
    api_key: str | None = None
    prompt_token_limit: int = DEFAULT_PROMPT_TOKEN_LIMIT
    embedder: str = EMBEDDER_HASHING
    dimension: int = DEFAULT_DIMENSION
    embed_endpoint: str | None = None
    session_bound: int = 10
    host: str = "127.0.0.1"
    port: int = 8756
    static_dir: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.embedder not in (EMBEDDER_HASHING, EMBEDDER_REMOTE):
            raise ValueError(f"unknown embedder '{self.embedder}'")
        if not self.model_path:
            self.model_path = str(bundled_model_path())

    def provider_config(self) -> ProviderConfig:
        return ProviderConfig(
            mode=self.provider_mode,
            endpoint=self.endpoint,
            model_name=self.model_name,
            auth=self.api_key,
            prompt_token_limit=self.prompt_token_limit,
        )


_INT_FIELDS = {"k", "max_tokens", "prompt_token_limit", "dimension", "session_bound", "port"}
_FLOAT_FIELDS = {"temperature"}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in _INT_FIELDS:
        return int(value)
    if name in _FLOAT_FIELDS:
        return float(value)
    return value


def resolve_config(
    cli: Mapping | None = None,
    env: Mapping | None = None,
    config_file: str | Path | None = None,
) -> EngineConfig:
    """Merge settings by precedence: CLI > environment > file > defaults.

    ``cli`` entries with value None are treated as unset. The config file is
    a JSON object whose keys are EngineConfig field names.
    """
    env = os.environ if env is None else env
    known = {f.name for f in fields(EngineConfig)}
    merged: dict = {}

    if config_file:
        raw = json.loads(Path(config_file).read_text(encoding="utf-8"))
        for key, value in raw.items():
            if key not in known:
                raise ValueError(f"unknown config file key '{key}'")
            merged[key] = _coerce(key, value)

    for field_name, var in ENV_VARS.items():
        if var in env and env[var] != "":
            merged[field_name] = _coerce(field_name, env[var])

    for key, value in (cli or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ValueError(f"unknown config key '{key}'")
        merged[key] = _coerce(key, value)

    return EngineConfig(**merged)


def build_engine(config: EngineConfig):
    """Parse the configured model and assemble a ready Engine.

    Raises InvalidModel (with the full report) when the model does not
    validate, which is what lets front doors fail fast at startup.
    """
    from .pipeline import Engine
    from .retrieval import HashingEmbedder, RemoteEmbedder
    from .tmk import parse_model

    model = parse_model(Path(config.model_path).read_bytes())
    if config.embedder == EMBEDDER_REMOTE:
        if not config.embed_endpoint:
            raise ValueError("remote embedder requires embed_endpoint")
        embedder = RemoteEmbedder(config.embed_endpoint, config.dimension,
                                  model_name=config.model_name or "",
                                  api_key=config.api_key)
    else:
        embedder = HashingEmbedder(config.dimension)
    return Engine(
        model,
        provider_config=config.provider_config(),
        embedder=embedder,
        k=config.k,
        max_tokens=config.max_tokens,
        temperature=config.temperature,
        session_bound=config.session_bound,
    )
