from .gateway import (
    BackendConfig,
    Completion,
    CompletionRecord,
    Gateway,
    HttpBackend,
    OracleBackend,
    ResponseCache,
    ScriptedBackend,
    complete,
    prompt_digest,
)
from .parsing import format_answer, parse_decomposition, parse_relation_list
from .templates import DEFAULT_REQUIREMENTS, PromptTemplate, load_template, render_prompt

__all__ = [
    "BackendConfig", "Completion", "CompletionRecord", "Gateway", "HttpBackend", "OracleBackend",
    "ResponseCache", "ScriptedBackend", "complete", "prompt_digest", "format_answer",
    "parse_decomposition", "parse_relation_list", "DEFAULT_REQUIREMENTS", "PromptTemplate",
    "load_template", "render_prompt",
]
