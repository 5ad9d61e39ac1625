"""Completion backends (HTTP, scripted, oracle) behind a caching gateway."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
import threading
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable

import numpy as np
import requests

from ..errors import BackendError, ConfigError, OracleError, ParseError
from ..relations import EdgeDecomposition, canonical_edge
from .parsing import format_answer
from .templates import ROLES, escape_node_text, literal_prefix, load_template, render_prompt, tail_template

logger = logging.getLogger(__name__)

BACKEND_KINDS = ("http", "scripted", "oracle")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "scripted"
    endpoint: str | None = None
    model: str = "default"
    temperature: float = 0.2
    max_retries: int = 2
    p_noise: float = 0.0
    oracle_path: str | None = None
    graph_path: str | None = None
    fixture_path: str | None = None
    cache_dir: str | None = None
    seed: int = 0
    num_relations: int | None = None
    response_path: str = "choices.0.message.content"
    token_env: str = "SEMEDGE_API_TOKEN"
    timeout: float = 60.0
    backoff: float = 0.5

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ConfigError(f"unknown backend kind {self.kind!r}")
        if not 0.0 <= self.temperature <= 1.0:
            raise ConfigError("temperature must lie in [0, 1]")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if not 0.0 <= self.p_noise <= 1.0:
            raise ConfigError("p_noise must lie in [0, 1]")
        if self.kind == "http" and not self.endpoint:
            raise ConfigError("http backend needs an endpoint URL")

    @classmethod
    def from_json(cls, obj: dict) -> "BackendConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise ConfigError(f"unknown backend config keys: {sorted(unknown)}")
        return cls(**obj)

    @property
    def cache_model(self) -> str:
        # Scripted/oracle answers depend on noise and seed, so those go into the key.
        if self.kind == "http":
            return self.model
        return f"{self.model}[{self.kind} p_noise={self.p_noise} seed={self.seed}]"


@dataclass(frozen=True)
class CompletionRecord:
    digest: str
    response: str
    timestamp: str
    backend: str


@dataclass(frozen=True)
class Completion:
    text: str
    cached: bool
    digest: str


def prompt_digest(role: str, prompt: str, model: str, temperature: float, attempt: int = 0) -> str:
    payload = [role, prompt, model, repr(float(temperature))]
    if attempt:
        payload.append(int(attempt))
    blob = json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


class ResponseCache:
    """Content-addressed response store; on disk when a directory is given."""

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory else None
        self._mem: dict[str, CompletionRecord] = {}
        self._lock = threading.Lock()
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)

    def get(self, digest: str) -> CompletionRecord | None:
        with self._lock:
            rec = self._mem.get(digest)
        if rec is not None or self.directory is None:
            return rec
        path = self.directory / f"{digest}.json"
        if not path.exists():
            return None
        rec = CompletionRecord(**json.loads(path.read_text(encoding="utf-8")))
        with self._lock:
            self._mem[digest] = rec
        return rec

    def put(self, record: CompletionRecord) -> None:
        with self._lock:
            self._mem[record.digest] = record
        if self.directory is None:
            return
        fd, tmp = tempfile.mkstemp(dir=self.directory, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(asdict(record), fh, ensure_ascii=False, indent=1)
            os.replace(tmp, self.directory / f"{record.digest}.json")
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _dig(obj: Any, path: str) -> Any:
    for part in path.split("."):
        if isinstance(obj, list):
            obj = obj[int(part)]
        else:
            obj = obj[part]
    return obj


class HttpBackend:
    kind = "http"

    def __init__(self, config: BackendConfig, session: requests.Session | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.session = session or requests.Session()
        self.sleep = sleep

    def complete(self, role: str, prompt: str, digest: str) -> str:
        cfg = self.config
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(cfg.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        body = {"model": cfg.model, "temperature": cfg.temperature,
                "messages": [{"role": "user", "content": prompt}]}
        last_err: Exception | None = None
        for attempt in range(cfg.max_retries + 1):
            if attempt:
                self.sleep(cfg.backoff * 2 ** (attempt - 1))
            try:
                resp = self.session.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout)
                if resp.status_code >= 400:
                    raise BackendError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                return str(_dig(resp.json(), cfg.response_path))
            except (requests.RequestException, BackendError, KeyError, IndexError,
                    TypeError, ValueError) as exc:
                last_err = exc
                logger.warning("%s request failed (attempt %d/%d): %s", role, attempt + 1,
                               cfg.max_retries + 1, exc)
        raise BackendError(f"{role} request failed after {cfg.max_retries + 1} attempts: {last_err}")


class ScriptedBackend:
    """Canned answers keyed by prompt digest first, then by role.

    A value may be a string or a list of strings served in order; the last
    entry repeats once the list is exhausted.
    """

    kind = "scripted"

    def __init__(self, fixture: dict[str, Any]):
        self.fixture = dict(fixture)
        self._served: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        try:
            return cls(json.loads(Path(path).read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: {exc}") from exc

    def has_answer(self, role: str, digest: str) -> bool:
        return digest in self.fixture or role in self.fixture

    def complete(self, role: str, prompt: str, digest: str) -> str:
        key = digest if digest in self.fixture else role
        if key not in self.fixture:
            raise BackendError(f"scripted fixture has no answer for role {role!r}")
        value = self.fixture[key]
        if isinstance(value, str):
            return value
        with self._lock:
            k = self._served.get(key, 0)
            self._served[key] = k + 1
        return value[min(k, len(value) - 1)]


@dataclass(frozen=True)
class OracleDraw:
    edge: tuple[int, int]
    truth: tuple[int, ...]
    answer: tuple[int, ...]
    noised: bool


class OracleBackend:
    """Answers decomposer prompts from a ground-truth decomposition.

    The edge is recovered by matching the node-text lines of the prompt
    against every oriented edge of the graph. With probability ``p_noise``
    the true set is replaced by a uniformly random nonempty subset of
    ``[0, R)``; the draw depends only on ``(seed, edge)``.
    """

    kind = "oracle"

    def __init__(self, graph, truth: EdgeDecomposition, *, p_noise=0.0, seed=0,
                 num_relations=None, fixture: dict | None = None):
        self.truth = truth
        self.p_noise = float(p_noise)
        self.seed = int(seed)
        self.num_relations = num_relations or max(truth.num_relations(), 1)
        self.scripted = ScriptedBackend(fixture or {})
        self.trace: list[OracleDraw] = []
        self._lock = threading.Lock()

        tmpl = load_template("decomposer")
        self._marker = literal_prefix(tmpl, "node1_text")
        tail = tail_template(tmpl, "node1_text")
        self._index: dict[str, tuple[int, int]] = {}
        texts = graph.texts
        for i, j in graph.edges:
            for a, b in ((i, j), (j, i)):
                key = render_prompt(tail, {"node1_text": escape_node_text(texts[a]),
                                           "node2_text": escape_node_text(texts[b])})
                self._index.setdefault(key, (i, j))

    def locate(self, prompt: str) -> tuple[int, int]:
        start = prompt.find(self._marker)
        while start != -1:
            edge = self._index.get(prompt[start:])
            if edge is not None:
                return edge
            start = prompt.find(self._marker, start + 1)
        raise OracleError("decomposer prompt does not match any graph edge")

    def answer_for(self, edge) -> tuple[int, ...]:
        edge = canonical_edge(*edge)
        truth = self.truth.get(edge)
        if truth is None:
            raise OracleError(f"edge {edge} missing from oracle file")
        rng = np.random.default_rng([self.seed, edge[0], edge[1]])
        noised = bool(rng.random() < self.p_noise)
        if noised:
            mask = int(rng.integers(1, 2 ** self.num_relations))
            answer = tuple(r for r in range(self.num_relations) if mask >> r & 1)
        else:
            answer = tuple(sorted(truth))
        with self._lock:
            self.trace.append(OracleDraw(edge, tuple(sorted(truth)), answer, noised))
        return answer

    def complete(self, role: str, prompt: str, digest: str) -> str:
        if role != "decomposer":
            return self.scripted.complete(role, prompt, digest)
        return format_answer(self.answer_for(self.locate(prompt)))


class Gateway:
    """Role-tagged completion calls with response caching and call counters."""

    def __init__(self, config: BackendConfig, backend=None, *, graph=None, session=None, sleep=time.sleep):
        self.config = config
        self.backend = backend or self._build_backend(config, graph, session, sleep)
        self.cache = ResponseCache(config.cache_dir)
        self.network_calls = 0
        self.cache_hits = 0
        self.calls_by_role: dict[str, int] = {r: 0 for r in ROLES}
        self.transcript: list[dict[str, Any]] | None = None  # set to [] to record exchanges
        self._lock = threading.Lock()

    @staticmethod
    def _build_backend(config, graph, session, sleep):
        if config.kind == "http":
            return HttpBackend(config, session=session, sleep=sleep)
        fixture = {}
        if config.fixture_path:
            fixture = ScriptedBackend.from_file(config.fixture_path).fixture
        if config.kind == "scripted":
            return ScriptedBackend(fixture)
        if not config.oracle_path:
            raise ConfigError("oracle backend needs oracle_path")
        if graph is None:
            if not config.graph_path:
                raise ConfigError("oracle backend needs the graph (graph_path)")
            from ..graph import load_graph
            graph = load_graph(config.graph_path)
        truth = EdgeDecomposition.load(config.oracle_path)
        return OracleBackend(graph, truth, p_noise=config.p_noise, seed=config.seed,
                             num_relations=config.num_relations, fixture=fixture)

    def digest(self, role: str, prompt: str, attempt: int = 0) -> str:
        return prompt_digest(role, prompt, self.config.cache_model, self.config.temperature, attempt)

    def complete_ex(self, role: str, prompt: str, attempt: int = 0) -> Completion:
        if role not in ROLES:
            raise ValueError(f"unknown role {role!r}")
        digest = self.digest(role, prompt, attempt)
        with self._lock:
            self.calls_by_role[role] += 1
        hit = self.cache.get(digest)
        if hit is not None:
            with self._lock:
                self.cache_hits += 1
            return self._record(role, prompt, attempt, Completion(hit.response, True, digest))
        text = self.backend.complete(role, prompt, digest)
        with self._lock:
            self.network_calls += 1
        self.cache.put(CompletionRecord(digest, text, datetime.now(timezone.utc).isoformat(),
                                        self.backend.kind))
        return self._record(role, prompt, attempt, Completion(text, False, digest))

    def _record(self, role, prompt, attempt, comp: Completion) -> Completion:
        if self.transcript is not None:
            with self._lock:
                self.transcript.append({"role": role, "attempt": attempt, "digest": comp.digest,
                                        "cached": comp.cached, "prompt": prompt, "response": comp.text})
        return comp

    def complete(self, role: str, prompt: str, attempt: int = 0) -> str:
        return self.complete_ex(role, prompt, attempt).text

    def stats(self) -> dict[str, Any]:
        return {"backend": self.backend.kind, "network_calls": self.network_calls,
                "cache_hits": self.cache_hits, "calls_by_role": dict(self.calls_by_role)}


def complete(config: BackendConfig, role: str, prompt: str, **kwargs) -> str:
    """One-shot completion through a fresh gateway."""
    return Gateway(config, **kwargs).complete(role, prompt)
