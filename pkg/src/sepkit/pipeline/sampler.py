"""Draw K generations per instance from a chat-completions endpoint.

Requests go to ``POST {base_url}/chat/completions`` with ``model``,
``messages``, ``temperature`` and ``n``. Servers without multi-sample
support are driven with one call per sample. Transient failures (network
errors, 429, 5xx) are retried with exponential backoff; anything still
failing becomes an error row and the run carries on.
"""

from __future__ import annotations

import logging
import os
import threading
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import httpx

from sepkit.corpus import Generation
from sepkit.errors import ConfigError, SamplingError

log = logging.getLogger(__name__)

# Instructions prepended to each source text, keyed by benchmark.
PROMPT_PRESETS = {
    "cnn_dailymail": "Summarize the following article in 3-4 sentences.",
    "samsum": "Summarize the following dialogue in 1-2 sentences.",
    "wmt19_cs": "Translate the following Czech sentence into English.",
    "wmt19_de": "Translate the following German sentence into English.",
    "art": "Write a hypothesis that explains the following observations.",
    "bisect": "Write a simplification of the following sentence.",
}


@dataclass(frozen=True)
class SamplerEndpoint:
    base_url: str
    model_name: str
    api_key_env_var: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    model_id: str | None = None
    system_prompt: str | None = None
    one_call_per_sample: bool = False
    max_parallel: int = 4
    min_interval: float = 0.0
    backoff_base: float = 1.0
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.max_parallel < 1:
            raise ConfigError("max_parallel must be >= 1")
        if not self.base_url:
            raise ConfigError("base_url is required")

    @property
    def label(self) -> str:
        return self.model_id or self.model_name

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> SamplerEndpoint:
        if "api_key" in data:
            raise ConfigError("put the API key in an environment variable and name it in api_key_env_var")
        return cls(**data)


@dataclass(frozen=True)
class SampleError:
    instance_id: str
    model_id: str
    sample_index: int
    error: str
    attempts: int


@dataclass
class SamplingResult:
    generations: list[Generation] = field(default_factory=list)
    errors: list[SampleError] = field(default_factory=list)
    retries: int = 0

    @property
    def ok(self) -> bool:
        return not self.errors


class _Transient(Exception):
    pass


class RateLimiter:
    """Spaces request starts at least ``min_interval`` seconds apart."""

    def __init__(self, min_interval: float) -> None:
        self.min_interval = min_interval
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if self.min_interval <= 0:
            return
        with self._lock:
            now = time.monotonic()
            start = max(now, self._next)
            self._next = start + self.min_interval
        if start > now:
            time.sleep(start - now)


class ChatCompletionsClient:
    def __init__(self, endpoint: SamplerEndpoint, transport: httpx.BaseTransport | None = None) -> None:
        self.endpoint = endpoint
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(endpoint.api_key_env_var)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        else:
            log.warning("environment variable %s is unset; sending no credentials", endpoint.api_key_env_var)
        self._client = httpx.Client(
            base_url=endpoint.base_url.rstrip("/"),
            headers=headers,
            timeout=endpoint.timeout,
            transport=transport,
        )
        self._limiter = RateLimiter(endpoint.min_interval)
        self._lock = threading.Lock()
        self.retries = 0

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> ChatCompletionsClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, payload: dict[str, Any]) -> list[str]:
        self._limiter.wait()
        try:
            resp = self._client.post("/chat/completions", json=payload)
        except httpx.TransportError as exc:
            raise _Transient(f"{type(exc).__name__}: {exc}") from None
        if resp.status_code == 429 or resp.status_code >= 500:
            raise _Transient(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise SamplingError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
            return [choice["message"]["content"] or "" for choice in body["choices"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise SamplingError(f"malformed completion response ({exc})") from None

    def complete(self, messages: list[dict[str, str]], temperature: float, n: int = 1) -> tuple[list[str], int]:
        """Return the completion texts and the number of attempts used."""
        payload: dict[str, Any] = {
            "model": self.endpoint.model_name,
            "messages": messages,
            "temperature": temperature,
            "n": n,
        }
        if self.endpoint.max_tokens is not None:
            payload["max_tokens"] = self.endpoint.max_tokens
        attempts = 0
        while True:
            attempts += 1
            try:
                texts = self._post(payload)
            except _Transient as exc:
                if attempts > self.endpoint.max_retries:
                    raise SamplingError(f"{exc} after {attempts} attempts") from None
                delay = self.endpoint.backoff_base * 2 ** (attempts - 1)
                log.warning("transient failure (%s); retry %d/%d in %.2fs",
                            exc, attempts, self.endpoint.max_retries, delay)
                with self._lock:
                    self.retries += 1
                time.sleep(delay)
                continue
            if attempts > 1:
                log.info("request succeeded after %d retries", attempts - 1)
            return texts, attempts


def build_messages(prompt: str, system_prompt: str | None = None, preset: str | None = None) -> list[dict[str, str]]:
    if preset is not None:
        if preset not in PROMPT_PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PROMPT_PRESETS)}")
        prompt = f"{PROMPT_PRESETS[preset]}\n\n{prompt}"
    messages = []
    if system_prompt:
        messages.append({"role": "system", "content": system_prompt})
    messages.append({"role": "user", "content": prompt})
    return messages


def _sample_instance(client, endpoint, instance_id, prompt, k, temperature, preset):
    model = endpoint.label
    if not prompt:
        return [], [SampleError(instance_id, model, j, "empty prompt", 0) for j in range(k)]
    messages = build_messages(prompt, endpoint.system_prompt, preset)
    texts: list[str | None] = [None] * k
    failures: dict[int, tuple[str, int]] = {}
    if endpoint.one_call_per_sample:
        for j in range(k):
            try:
                got, attempts = client.complete(messages, temperature, 1)
                texts[j] = got[0] if got else ""
            except SamplingError as exc:
                failures[j] = (str(exc), endpoint.max_retries + 1)
    else:
        try:
            got, attempts = client.complete(messages, temperature, k)
            for j in range(k):
                if j < len(got):
                    texts[j] = got[j]
                else:
                    failures[j] = (f"endpoint returned {len(got)} of {k} samples", attempts)
        except SamplingError as exc:
            failures = {j: (str(exc), endpoint.max_retries + 1) for j in range(k)}

    gens, errors = [], []
    for j in range(k):
        if j in failures:
            msg, attempts = failures[j]
            errors.append(SampleError(instance_id, model, j, msg, attempts))
        elif not texts[j] or not texts[j].strip():
            errors.append(SampleError(instance_id, model, j, "empty completion", 1))
        else:
            gens.append(Generation(instance_id, model, j, texts[j]))
    return gens, errors


def sample_generations(
    endpoint: SamplerEndpoint,
    instances: Sequence[tuple[str, str]],
    k: int = 5,
    temperature: float = 0.5,
    preset: str | None = None,
    transport: httpx.BaseTransport | None = None,
) -> SamplingResult:
    """Sample ``k`` generations for every ``(instance_id, prompt)``.

    Output order follows ``instances`` regardless of request parallelism.
    """
    if k < 1:
        raise ConfigError("k must be >= 1")
    result = SamplingResult()
    with ChatCompletionsClient(endpoint, transport) as client:
        def one(item):
            instance_id, prompt = item
            return _sample_instance(client, endpoint, instance_id, prompt, k, temperature, preset)

        with ThreadPoolExecutor(max_workers=endpoint.max_parallel) as pool:
            for gens, errors in pool.map(one, instances):
                result.generations.extend(gens)
                result.errors.extend(errors)
        result.retries = client.retries
    for err in result.errors:
        log.error("sampling failed for %s/%s/%d: %s", err.instance_id, err.model_id, err.sample_index, err.error)
    return result
