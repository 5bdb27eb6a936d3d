"""Chat-completion baseline: ask a model whether each method survives review."""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import httpx
import numpy as np

from .dataset import LabeledSample
from .model import EvalReport, score_folds

log = logging.getLogger(__name__)

INSTRUCTION = (
    "Predict if the following method will be deleted (0) or survived (1) in the code review. "
    "Briefly explain the reason. The output should be in JSON."
)

_PREDICTION_KEYS = ("prediction", "label", "result", "answer", "output")


class LlmError(Exception):
    pass


class TransportError(LlmError):
    pass


class RateLimited(TransportError):
    pass


class MalformedVerdict(LlmError):
    pass


@dataclass(frozen=True)
class LlmVerdict:
    prediction: int  # 0 = deleted, 1 = survived
    reason: str
    raw_response: str

    @property
    def deletion_score(self) -> float:
        return float(1 - self.prediction)


@dataclass(frozen=True)
class ProviderConfig:
    base_url: str = "https://api.openai.com/v1"
    model: str = "gpt-4o"
    token_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    temperature: float = 0.0
    max_concurrency: int = 4
    audit_path: str | None = None


class Provider(Protocol):
    def complete(self, prompt: str) -> str: ...


class HttpChatProvider:
    """OpenAI-compatible ``/chat/completions`` endpoint."""

    def __init__(self, config: ProviderConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self.client = client or httpx.Client(timeout=config.timeout)
        self._audit_lock = threading.Lock()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.config.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def _audit(self, request: dict, response: str | None, status: int | None) -> None:
        if not self.config.audit_path:
            return
        line = json.dumps({"request": request, "status": status, "response": response})
        with self._audit_lock, open(self.config.audit_path, "a", encoding="utf-8") as fp:
            fp.write(line + "\n")

    def complete(self, prompt: str) -> str:
        body = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "n": 1,
        }
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self.client.post(url, json=body, headers=self._headers())
        except httpx.HTTPError as exc:
            self._audit(body, None, None)
            raise TransportError(str(exc)) from exc
        self._audit(body, resp.text, resp.status_code)
        if resp.status_code == 429:
            raise RateLimited("rate limited by provider")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc


def build_prompt(method) -> str:
    """The fixed instruction followed by the method source (a record or plain text)."""
    source_text = method if isinstance(method, str) else method.source_text
    return f"{INSTRUCTION}\n\n{source_text}\n"


def first_json_object(text: str) -> dict | None:
    decoder = json.JSONDecoder()
    start = text.find("{")
    while start != -1:
        try:
            obj, _ = decoder.raw_decode(text, start)
        except json.JSONDecodeError:
            start = text.find("{", start + 1)
            continue
        if isinstance(obj, dict):
            return obj
        start = text.find("{", start + 1)
    return None


def parse_verdict(text: str) -> LlmVerdict:
    obj = first_json_object(text)
    if obj is None:
        raise MalformedVerdict("no JSON object in reply")
    for key in _PREDICTION_KEYS:
        if key in obj:
            value = obj[key]
            break
    else:
        raise MalformedVerdict("reply has no prediction field")
    if isinstance(value, bool) or value not in (0, 1, "0", "1"):
        raise MalformedVerdict(f"prediction {value!r} is not 0 or 1")
    reason = obj.get("reason", obj.get("explanation", ""))
    return LlmVerdict(int(value), str(reason), text)


def query(
    provider: Provider,
    prompt: str,
    max_retries: int = 3,
    backoff: float = 1.0,
    sleep: Callable[[float], None] = time.sleep,
) -> LlmVerdict:
    """One completion, retrying transport failures with exponential backoff."""
    attempt = 0
    while True:
        try:
            reply = provider.complete(prompt)
            break
        except TransportError as exc:
            if attempt >= max_retries:
                raise
            delay = backoff * (2 ** attempt)
            log.info("retrying after %s (%.1fs)", exc, delay)
            sleep(delay)
            attempt += 1
    return parse_verdict(reply)


def collect_verdicts(
    samples: Sequence[LabeledSample],
    provider: Provider,
    config: ProviderConfig = ProviderConfig(),
    sleep: Callable[[float], None] = time.sleep,
) -> list[LlmVerdict | LlmError]:
    """Verdict (or the error) per sample, in input order."""

    def one(sample: LabeledSample) -> LlmVerdict | LlmError:
        try:
            return query(provider, build_prompt(sample), config.max_retries, config.backoff, sleep)
        except LlmError as exc:
            return exc

    workers = max(1, config.max_concurrency)
    if workers == 1:
        return [one(s) for s in samples]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, samples))


def evaluate_llm(
    samples: Sequence[LabeledSample],
    provider: Provider,
    config: ProviderConfig = ProviderConfig(),
    k: int = 1,
    seed: int = 0,
    sleep: Callable[[float], None] = time.sleep,
) -> EvalReport:
    """Score verdicts with the model's metric code; failed replies are excluded and counted."""
    rows = [s for s in samples if s.target is not None]
    results = collect_verdicts(rows, provider, config, sleep)
    y, scores = [], []
    excluded = 0
    for sample, res in zip(rows, results):
        if isinstance(res, LlmVerdict):
            y.append(sample.target)
            scores.append(res.deletion_score)
        else:
            excluded += 1
    return score_folds("llm", np.array(y), np.array(scores), k, seed, excluded)
