"""Generation providers: remote chat-completions, scripted mock, response cache."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence, Union

import httpx

from .core import ModelOutput
from .errors import ContractViolation, ProviderError

log = logging.getLogger(__name__)

Messages = Sequence[Mapping[str, str]]


class Provider(Protocol):
    model_id: str

    def generate(self, prompt: str, *, refresh: bool = False) -> ModelOutput: ...

    def chat(self, messages: Messages, *, refresh: bool = False) -> ModelOutput: ...


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def messages_key(messages: Messages) -> str:
    """Canonical string used to cache a multi-message request."""
    return json.dumps([dict(m) for m in messages], ensure_ascii=False, sort_keys=True)


# --------------------------------------------------------------------------
# cache


def _safe_model_dir(model_id: str) -> Path:
    parts = [p for p in re.sub(r"[^A-Za-z0-9._/-]", "_", model_id).split("/") if p not in ("", ".", "..")]
    return Path(*parts) if parts else Path("_")


class ResponseCache:
    """Content-addressed store: ``{root}/{model_id}/{sha256(prompt)}.json``."""

    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)

    def path(self, model_id: str, prompt: str) -> Path:
        return self.root / _safe_model_dir(model_id) / f"{prompt_hash(prompt)}.json"

    def get(self, model_id: str, prompt: str) -> str | None:
        p = self.path(model_id, prompt)
        try:
            body = json.loads(p.read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, ValueError) as exc:
            log.warning("ignoring corrupt cache entry %s: %s", p, exc)
            return None
        if not isinstance(body, dict) or body.get("prompt") != prompt or not isinstance(body.get("text"), str):
            log.warning("ignoring mismatched cache entry %s", p)
            return None
        return body["text"]

    def put(self, model_id: str, prompt: str, text: str) -> None:
        p = self.path(model_id, prompt)
        p.parent.mkdir(parents=True, exist_ok=True)
        body = {
            "prompt": prompt,
            "model_id": model_id,
            "text": text,
            "created_at": datetime.now(timezone.utc).isoformat(),
        }
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-", suffix=".json")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(body, fh, ensure_ascii=False)
            os.replace(tmp, p)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise


# --------------------------------------------------------------------------
# remote


@dataclass(frozen=True)
class ProviderConfig:
    endpoint_url: str
    model_id: str
    credential_env_var: str = "FS_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    timeout: float = 60.0
    cache_dir: str | None = None
    max_concurrency: int = 8
    max_tokens: int | None = None

    def __post_init__(self) -> None:
        if self.temperature != 0:
            raise ContractViolation("generation must run at temperature 0")


def default_cache_dir() -> str:
    return os.environ.get("FS_CACHE_DIR") or str(Path.home() / ".cache" / "segshap")


class ChatCompletionsProvider:
    """Client for a ``POST {endpoint}/chat/completions`` API with disk caching."""

    def __init__(
        self,
        config: ProviderConfig,
        *,
        client: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        backoff: float = 0.5,
    ) -> None:
        self.config = config
        self.model_id = config.model_id
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self._backoff = backoff
        self._gate = threading.BoundedSemaphore(max(1, config.max_concurrency))
        self.cache = ResponseCache(config.cache_dir) if config.cache_dir else None
        self.calls = 0

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.credential_env_var)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _post(self, messages: Messages) -> str:
        url = self.config.endpoint_url.rstrip("/") + "/chat/completions"
        payload: dict = {
            "model": self.model_id,
            "messages": [dict(m) for m in messages],
            "temperature": 0,
        }
        if self.config.max_tokens is not None:
            payload["max_tokens"] = self.config.max_tokens
        status: int | None = None
        detail = ""
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                self._sleep(self._backoff * 2 ** (attempt - 1))
            try:
                with self._gate:
                    self.calls += 1
                    resp = self._client.post(url, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                status, detail = None, str(exc)
                continue
            status = resp.status_code
            if resp.status_code == 429 or resp.status_code >= 500:
                detail = resp.text[:200]
                continue
            if resp.status_code >= 400:
                raise ProviderError(resp.text[:200], status=resp.status_code)
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise ProviderError(f"malformed completion payload: {exc}", status=status) from exc
        raise ProviderError(detail or "request failed", status=status)

    def _cached(self, key: str, messages: Messages, refresh: bool) -> ModelOutput:
        if self.cache is not None and not refresh:
            hit = self.cache.get(self.model_id, key)
            if hit is not None:
                return ModelOutput(hit, self.model_id, prompt_hash(key), from_cache=True)
        text = self._post(messages)
        if self.cache is not None:
            self.cache.put(self.model_id, key, text)
        return ModelOutput(text, self.model_id, prompt_hash(key), from_cache=False)

    def generate(self, prompt: str, *, refresh: bool = False) -> ModelOutput:
        return self._cached(prompt, [{"role": "user", "content": prompt}], refresh)

    def chat(self, messages: Messages, *, refresh: bool = False) -> ModelOutput:
        return self._cached(messages_key(messages), messages, refresh)


# --------------------------------------------------------------------------
# mock

Output = Union[str, Callable[[str], str]]


@dataclass
class MockScript:
    """Ordered ``(predicate, output)`` rules with a default; outputs may be
    literal strings or functions of the prompt."""

    rules: list[tuple[Callable[[str], bool], Output]] = field(default_factory=list)
    default: Output = ""

    def respond(self, prompt: str) -> str:
        for predicate, output in self.rules:
            if predicate(prompt):
                return output(prompt) if callable(output) else output
        return self.default(prompt) if callable(self.default) else self.default


def mock_generate(prompt: str, script: MockScript, model_id: str = "mock") -> ModelOutput:
    return ModelOutput(script.respond(prompt), model_id, prompt_hash(prompt), from_cache=False)


class MockProvider:
    """Offline provider driven by a :class:`MockScript`. Chat requests are
    answered from the content of the last message."""

    def __init__(self, script: MockScript, model_id: str = "mock") -> None:
        self.script = script
        self.model_id = model_id
        self.calls = 0
        self._lock = threading.Lock()

    def generate(self, prompt: str, *, refresh: bool = False) -> ModelOutput:
        with self._lock:
            self.calls += 1
        return mock_generate(prompt, self.script, self.model_id)

    def chat(self, messages: Messages, *, refresh: bool = False) -> ModelOutput:
        with self._lock:
            self.calls += 1
        text = self.script.respond(messages[-1]["content"])
        return ModelOutput(text, self.model_id, prompt_hash(messages_key(messages)), from_cache=False)


class CachedProvider:
    """Adds the on-disk response cache in front of any provider."""

    def __init__(self, inner: Provider, cache: ResponseCache) -> None:
        self.inner = inner
        self.cache = cache
        self.model_id = inner.model_id

    def _wrap(self, key: str, call: Callable[[], ModelOutput], refresh: bool) -> ModelOutput:
        if not refresh:
            hit = self.cache.get(self.model_id, key)
            if hit is not None:
                return ModelOutput(hit, self.model_id, prompt_hash(key), from_cache=True)
        out = call()
        self.cache.put(self.model_id, key, out.text)
        return ModelOutput(out.text, self.model_id, prompt_hash(key), from_cache=False)

    def generate(self, prompt: str, *, refresh: bool = False) -> ModelOutput:
        return self._wrap(prompt, lambda: self.inner.generate(prompt, refresh=refresh), refresh)

    def chat(self, messages: Messages, *, refresh: bool = False) -> ModelOutput:
        key = messages_key(messages)
        return self._wrap(key, lambda: self.inner.chat(messages, refresh=refresh), refresh)


def keyword_lines(mapping: Mapping[str, str], separator: str = "\n") -> Callable[[str], str]:
    """Output the mapped line for every whole-word keyword present in the
    prompt, in mapping order. Prompts with no keyword map to ``""``."""
    patterns = [(re.compile(rf"\b{re.escape(k)}\b"), line) for k, line in mapping.items()]

    def respond(prompt: str) -> str:
        return separator.join(line for pat, line in patterns if pat.search(prompt))

    return respond


def first_line(prompt: str) -> str:
    return prompt.split("\n", 1)[0]


def echo(prompt: str) -> str:
    return prompt


def _output_from_spec(spec) -> Output:
    if isinstance(spec, str):
        return spec
    if not isinstance(spec, dict):
        raise ContractViolation(f"bad mock output spec: {spec!r}")
    kind = spec.get("transform")
    if kind == "echo":
        return echo
    if kind == "first_line":
        return first_line
    if kind == "keyword_lines":
        mapping = spec.get("map") or {w: w for w in spec.get("words", [])}
        return keyword_lines(mapping, spec.get("separator", "\n"))
    raise ContractViolation(f"unknown mock transform {kind!r}")


def load_mock_script(path: str | os.PathLike) -> tuple[MockScript, str]:
    """Read a JSON mock script; returns the script and its model id.

    Format::

        {"model_id": "mock",
         "rules": [{"contains": "sort", "output": "..."},
                   {"regex": "^def ", "output": {"transform": "first_line"}}],
         "default": {"transform": "keyword_lines", "map": {"sort": "xs.sort()"}}}
    """
    spec = json.loads(Path(path).read_text(encoding="utf-8"))
    rules = []
    for rule in spec.get("rules", []):
        if "contains" in rule:
            needle = rule["contains"]
            pred = lambda p, n=needle: n in p
        elif "regex" in rule:
            rx = re.compile(rule["regex"])
            pred = lambda p, r=rx: r.search(p) is not None
        else:
            raise ContractViolation(f"mock rule needs 'contains' or 'regex': {rule!r}")
        rules.append((pred, _output_from_spec(rule["output"])))
    script = MockScript(rules, _output_from_spec(spec.get("default", "")))
    return script, spec.get("model_id", "mock")
