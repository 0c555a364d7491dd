"""LLM module for LA-VA: prompts, chat-completion client, parsing and caching."""

from .prompts import (
    PromptTemplate, load_template, build_prompt, unresolved_placeholders, cod_list_entries, LABEL_SEPARATOR
)
from .response_parser import parse_response, normalize_label, serialize_prediction, extract_json_object
from .response_cache import ResponseCache, cache_key
from .llm_client import (
    LlmClientConfig, BatchResult, CaseFailure, predict_batch, predict_batch_async, write_failure_manifest,
    CORRECTIVE_SUFFIX
)

__all__ = [
    'PromptTemplate', 'load_template', 'build_prompt', 'unresolved_placeholders', 'cod_list_entries',
    'LABEL_SEPARATOR',
    'parse_response', 'normalize_label', 'serialize_prediction', 'extract_json_object',
    'ResponseCache', 'cache_key',
    'LlmClientConfig', 'BatchResult', 'CaseFailure', 'predict_batch', 'predict_batch_async',
    'write_failure_manifest', 'CORRECTIVE_SUFFIX',
]
