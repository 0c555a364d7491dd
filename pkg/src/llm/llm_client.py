"""
Chat-completion client for ranked cause predictions.

Requests go out over httpx with bounded concurrency. Every successful reply is
cached by content hash, so warm reruns make no network calls. Replies that do not
parse are retried with a JSON-only reminder; cases that still fail are reported
in the batch's failure list.

Usage:
    config = LlmClientConfig(model='gpt-5', cache_dir='cache/llm')
    result = predict_batch(records, codebook, load_template('adult'), config)
    write_failure_manifest('out/llm_failures.jsonl', result.failures)
"""
import asyncio
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import httpx

from ..core.codebook import CauseCodebook
from ..core.errors import LlmAuthError, LlmError, ResponseParseError, ValidationError
from ..core.models import PredictionEntry, PredictionSet, RankedPrediction, VARecord
from .prompts import PromptTemplate, build_prompt
from .response_cache import ResponseCache, cache_key
from .response_parser import parse_response

logger = logging.getLogger(__name__)

RETRYABLE_STATUS_CODES = {408, 429, 500, 502, 503, 504}
AUTH_STATUS_CODES = {401, 403}
CORRECTIVE_SUFFIX = (
    "\n\nReturn ONLY a JSON object of the form "
    '{"predictions": [{"cause": "...", "confidence": "high|medium|low"}], "rationale": "..."} '
    "using labels from the allowed list."
)


@dataclass
class LlmClientConfig:
    """Endpoint, retry and cache settings for the chat-completion client."""

    endpoint: str = 'https://api.openai.com/v1/chat/completions'
    model: str = 'gpt-5'
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 1.0
    max_concurrency: int = 4
    cache_dir: str = 'cache/llm'
    api_key_env: str = 'OPENAI_API_KEY'
    temperature: Optional[float] = None
    care_access_fields: List[str] = field(default_factory=list)
    method: str = 'llm'

    def validate(self):
        if self.max_retries < 0:
            raise ValidationError("llm.max_retries must be >= 0")
        if self.max_concurrency < 1:
            raise ValidationError("llm.max_concurrency must be >= 1")
        if self.timeout <= 0 or self.backoff_base < 0:
            raise ValidationError("llm.timeout must be > 0 and llm.backoff_base >= 0")


@dataclass
class CaseFailure:
    record_id: str
    reason: str
    attempts: int

    def to_dict(self) -> Dict:
        return {'id': self.record_id, 'reason': self.reason, 'attempts': self.attempts}


@dataclass
class BatchResult:
    """Predictions that succeeded plus an explicit list of the cases that did not."""

    predictions: PredictionSet
    failures: List[CaseFailure] = field(default_factory=list)
    n_requests: int = 0
    n_cache_hits: int = 0

    def summary(self) -> Dict:
        return {
            'method': self.predictions.method,
            'predicted': len(self.predictions),
            'failed': len(self.failures),
            'requests': self.n_requests,
            'cache_hits': self.n_cache_hits,
        }


def _message_content(body: Dict) -> str:
    choices = body.get('choices') or []
    if not choices:
        raise ResponseParseError("No choices in response")
    content = (choices[0].get('message') or {}).get('content')
    if not isinstance(content, str):
        raise ResponseParseError("Response message has no text content")
    return content


class _BatchRunner:
    """State of one predict_batch call."""

    def __init__(self, config: LlmClientConfig, codebook: CauseCodebook, cache: ResponseCache,
                 api_key: Optional[str], client: httpx.AsyncClient):
        self.config = config
        self.codebook = codebook
        self.cache = cache
        self.api_key = api_key
        self.client = client
        self.semaphore = asyncio.Semaphore(config.max_concurrency)
        self.n_requests = 0

    def _payload(self, system: str, user: str) -> Dict:
        payload = {
            'model': self.config.model,
            'messages': [
                {'role': 'system', 'content': system},
                {'role': 'user', 'content': user},
            ],
        }
        if self.config.temperature is not None:
            payload['temperature'] = self.config.temperature
        return payload

    async def _backoff(self, attempt: int):
        delay = self.config.backoff_base * (2 ** attempt)
        if delay > 0:
            await asyncio.sleep(delay)

    async def predict_case(self, record_id: str, system: str, user: str, key: str):
        """Returns (RankedPrediction, None) or (None, CaseFailure)."""
        headers = {'Authorization': f"Bearer {self.api_key}", 'Content-Type': 'application/json'}
        corrective = False
        last_reason = 'no attempt made'
        attempts = 0

        for attempt in range(self.config.max_retries + 1):
            attempts = attempt + 1
            user_text = user + CORRECTIVE_SUFFIX if corrective else user
            try:
                async with self.semaphore:
                    self.n_requests += 1
                    response = await self.client.post(
                        self.config.endpoint, json=self._payload(system, user_text), headers=headers
                    )
            except httpx.HTTPError as e:
                last_reason = f"transport error: {e}"
                logger.debug("[%s] %s", record_id, last_reason)
                await self._backoff(attempt)
                continue

            if response.status_code in AUTH_STATUS_CODES:
                raise LlmAuthError(
                    f"Endpoint rejected the API key from ${self.config.api_key_env} (HTTP {response.status_code})",
                    record_id,
                )
            if response.status_code in RETRYABLE_STATUS_CODES:
                last_reason = f"HTTP {response.status_code}"
                await self._backoff(attempt)
                continue
            if response.status_code >= 400:
                return None, CaseFailure(record_id, f"HTTP {response.status_code}: {response.text[:200]}", attempts)

            try:
                body = response.json()
                content = _message_content(body)
                prediction = parse_response(content, self.codebook)
            except (ValueError, ResponseParseError) as e:
                last_reason = f"unparseable response: {e}"
                logger.debug("[%s] %s", record_id, last_reason)
                corrective = True
                await self._backoff(attempt)
                continue

            self.cache.put(key, {
                'model': self.config.model,
                'system': system,
                'user': user,
                'response': body,
                'content': content,
            })
            return prediction, None

        return None, CaseFailure(record_id, last_reason, attempts)


def _cached_prediction(cache: ResponseCache, key: str, codebook: CauseCodebook) -> Optional[RankedPrediction]:
    entry = cache.get(key)
    if entry is None:
        return None
    try:
        return parse_response(entry.get('content', ''), codebook)
    except ResponseParseError:
        logger.warning("⚠ Cached response %s no longer parses; requesting again", key[:12])
        return None


async def predict_batch_async(
    records: Sequence[VARecord],
    codebook: CauseCodebook,
    template: PromptTemplate,
    config: LlmClientConfig,
    transport: Optional[httpx.AsyncBaseTransport] = None,
    symptom_labels: Optional[Dict[str, str]] = None,
) -> BatchResult:
    """Async form of predict_batch."""
    config.validate()
    cache = ResponseCache(config.cache_dir)
    ranked: Dict[str, RankedPrediction] = {}
    pending: List[Tuple[str, str, str, str]] = []

    for record in records:
        system, user = build_prompt(record, codebook, template, config.care_access_fields, symptom_labels)
        key = cache_key(config.model, system, user)
        hit = _cached_prediction(cache, key, codebook)
        if hit is not None:
            ranked[record.id] = hit
        else:
            pending.append((record.id, system, user, key))
    n_cache_hits = len(ranked)

    failures: List[CaseFailure] = []
    n_requests = 0
    if pending:
        api_key = os.environ.get(config.api_key_env)
        if not api_key:
            raise LlmAuthError(
                f"No API key: set the {config.api_key_env} environment variable "
                f"({len(pending)} cases are not cached)"
            )
        async with httpx.AsyncClient(transport=transport, timeout=config.timeout) as client:
            runner = _BatchRunner(config, codebook, cache, api_key, client)
            tasks = [asyncio.ensure_future(runner.predict_case(*item)) for item in pending]
            try:
                outcomes = await asyncio.gather(*tasks)
            except LlmAuthError:
                for task in tasks:
                    task.cancel()
                await asyncio.gather(*tasks, return_exceptions=True)
                raise
            n_requests = runner.n_requests

        for (record_id, _, _, _), (prediction, failure) in zip(pending, outcomes):
            if failure is not None:
                failures.append(failure)
            else:
                ranked[record_id] = prediction

    by_id = {r.id: PredictionEntry(ranked=ranked[r.id]) for r in records if r.id in ranked}
    result = BatchResult(PredictionSet(config.method, by_id), failures, n_requests, n_cache_hits)
    if failures:
        logger.warning("⚠ %d cases failed after retries", len(failures))
    logger.info("✓ LLM batch: %d predicted (%d cached, %d requests)", len(by_id), n_cache_hits, n_requests)
    return result


def predict_batch(
    records: Sequence[VARecord],
    codebook: CauseCodebook,
    template: PromptTemplate,
    config: LlmClientConfig,
    transport: Optional[httpx.AsyncBaseTransport] = None,
    symptom_labels: Optional[Dict[str, str]] = None,
) -> BatchResult:
    """
    Predict ranked causes for every record, from cache where possible.

    Args:
        records: Cases to code (one age group)
        codebook: Codebook of that age group
        template: Prompt template of that age group
        config: Client settings
        transport: Optional httpx transport (tests pass httpx.MockTransport)
        symptom_labels: Optional question text per symptom id

    Returns:
        BatchResult

    Raises:
        LlmAuthError: missing key with uncached cases, or the endpoint rejects the key
    """
    return asyncio.run(predict_batch_async(records, codebook, template, config, transport, symptom_labels))


def write_failure_manifest(path: str, failures: Sequence[CaseFailure]):
    """JSON Lines, one failed case per line; an empty file means no failures."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for failure in failures:
            f.write(json.dumps(failure.to_dict()) + '\n')
    if failures:
        logger.info("Wrote %d failures to %s", len(failures), path)
