"""OpenAI-compatible HTTP plumbing shared by the embedding and chat clients."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import requests

from .errors import EndpointError


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    api_key_env: str = "DIVSYNTH_API_KEY"
    max_batch: int = 256
    concurrency: int = 4
    timeout: float = 60.0
    retries: int = 3

    def __post_init__(self):
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")


def auth_headers(cfg: EndpointConfig) -> dict:
    key = os.environ.get(cfg.api_key_env)
    if key is None:
        raise EndpointError(
            f"API key environment variable {cfg.api_key_env!r} is not set"
        )
    return {"Authorization": f"Bearer {key}"}


def post_json(url: str, payload: dict, headers: dict, timeout: float) -> dict:
    """Single JSON POST; transport and HTTP errors raise EndpointError."""
    try:
        resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
    except requests.RequestException as exc:
        raise EndpointError(f"POST {url} failed: {exc}") from exc
    if resp.status_code != 200:
        raise EndpointError(f"POST {url} returned HTTP {resp.status_code}")
    try:
        return resp.json()
    except ValueError as exc:
        raise EndpointError(f"POST {url} returned non-JSON body") from exc


def post_with_retries(cfg: EndpointConfig, path: str, payload: dict,
                      sleep=time.sleep) -> dict:
    """POST with exponential backoff; gives up after cfg.retries retries."""
    url = cfg.base_url.rstrip("/") + path
    headers = auth_headers(cfg)
    last_error: EndpointError | None = None
    for attempt in range(cfg.retries + 1):
        try:
            return post_json(url, payload, headers, cfg.timeout)
        except EndpointError as exc:
            last_error = exc
            if attempt < cfg.retries:
                sleep(min(2.0 ** attempt, 30.0))
    raise EndpointError(
        f"{url}: giving up after {cfg.retries + 1} attempts ({last_error})"
    )


def embeddings_request(cfg: EndpointConfig, texts: list[str]) -> list[list[float]]:
    """POST /v1/embeddings; returns one vector per input, in input order."""
    body = {"model": cfg.model, "input": texts}
    data = post_with_retries(cfg, "/v1/embeddings", body)
    try:
        items = data["data"]
        vectors = [items[i]["embedding"] for i in range(len(texts))]
    except (KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed embeddings response: {exc}") from exc
    return vectors


def chat_request(cfg: EndpointConfig, messages: list[dict],
                 temperature: float, max_tokens: int) -> tuple[str, str]:
    """POST /v1/chat/completions; returns (content, finish_reason)."""
    body = {
        "model": cfg.model,
        "messages": messages,
        "temperature": temperature,
        "max_tokens": max_tokens,
    }
    data = post_with_retries(cfg, "/v1/chat/completions", body)
    try:
        choice = data["choices"][0]
        return choice["message"]["content"], choice.get("finish_reason", "")
    except (KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed chat response: {exc}") from exc
