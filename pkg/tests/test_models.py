import json
import threading
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest

from segshap.errors import ContractViolation, ProviderError
from segshap.models import (
    CachedProvider,
    ChatCompletionsProvider,
    MockProvider,
    MockScript,
    ProviderConfig,
    ResponseCache,
    keyword_lines,
    load_mock_script,
    prompt_hash,
)


def completion(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


def make_provider(handler, tmp_path=None, **cfg):
    config = ProviderConfig(
        endpoint_url="http://llm.local/v1",
        model_id="m-1",
        cache_dir=str(tmp_path) if tmp_path else None,
        **cfg,
    )
    client = httpx.Client(transport=httpx.MockTransport(handler))
    sleeps = []
    return ChatCompletionsProvider(config, client=client, sleep=sleeps.append), sleeps


def test_payload_headers_and_parsing(monkeypatch):
    seen = {}

    def handler(request):
        seen["url"] = str(request.url)
        seen["auth"] = request.headers.get("authorization")
        seen["body"] = json.loads(request.content)
        return completion("def f(): pass")

    monkeypatch.setenv("FS_API_KEY", "secret")
    provider, _ = make_provider(handler)
    out = provider.generate("write f")
    assert out.text == "def f(): pass"
    assert out.prompt_hash == prompt_hash("write f")
    assert seen["url"] == "http://llm.local/v1/chat/completions"
    assert seen["auth"] == "Bearer secret"
    assert seen["body"] == {"model": "m-1", "messages": [{"role": "user", "content": "write f"}], "temperature": 0}


def test_temperature_must_be_zero():
    with pytest.raises(ContractViolation):
        ProviderConfig(endpoint_url="http://x", model_id="m", temperature=0.7)


def test_retries_then_succeeds():
    statuses = iter([500, 429])

    def handler(request):
        code = next(statuses, 200)
        return completion("ok") if code == 200 else httpx.Response(code, text="busy")

    provider, sleeps = make_provider(handler)
    assert provider.generate("p").text == "ok"
    assert provider.calls == 3
    assert sleeps == [0.5, 1.0]


def test_retries_exhausted():
    provider, sleeps = make_provider(lambda r: httpx.Response(503, text="down"), max_retries=2)
    with pytest.raises(ProviderError) as info:
        provider.generate("p")
    assert info.value.status == 503
    assert provider.calls == 3


def test_client_error_is_not_retried():
    provider, _ = make_provider(lambda r: httpx.Response(401, text="nope"))
    with pytest.raises(ProviderError) as info:
        provider.generate("p")
    assert info.value.status == 401 and provider.calls == 1


def test_transport_error_retried():
    attempts = []

    def handler(request):
        attempts.append(1)
        if len(attempts) == 1:
            raise httpx.ConnectError("refused", request=request)
        return completion("ok")

    provider, _ = make_provider(handler)
    assert provider.generate("p").text == "ok"


def test_malformed_payload():
    provider, _ = make_provider(lambda r: httpx.Response(200, json={"nothing": 1}))
    with pytest.raises(ProviderError):
        provider.generate("p")


def test_cache_hit_skips_network(tmp_path):
    calls = []

    def handler(request):
        calls.append(1)
        return completion("cached text")

    provider, _ = make_provider(handler, tmp_path)
    first = provider.generate("prompt")
    second = provider.generate("prompt")
    assert (first.from_cache, second.from_cache) == (False, True)
    assert second.text == "cached text" and len(calls) == 1
    provider.generate("prompt", refresh=True)
    assert len(calls) == 2
    path = tmp_path / "m-1" / f"{prompt_hash('prompt')}.json"
    body = json.loads(path.read_text())
    assert set(body) == {"prompt", "model_id", "text", "created_at"}


def test_cache_layout_and_corruption(tmp_path):
    cache = ResponseCache(tmp_path)
    cache.put("org/model:7b", "p", "out")
    path = cache.path("org/model:7b", "p")
    assert path.relative_to(tmp_path).parts[:2] == ("org", "model_7b")
    assert cache.get("org/model:7b", "p") == "out"
    path.write_text("{not json")
    assert cache.get("org/model:7b", "p") is None
    cache.put("m", "p", "x")
    cache.path("m", "p").write_text(json.dumps({"prompt": "other", "text": "x"}))
    assert cache.get("m", "p") is None
    assert not list(tmp_path.rglob(".tmp-*"))


def test_cache_concurrent_writers(tmp_path):
    cache = ResponseCache(tmp_path)

    def write(i):
        cache.put("m", "same", f"text-{i % 2}")
        return cache.get("m", "same")

    with ThreadPoolExecutor(8) as pool:
        results = list(pool.map(write, range(64)))
    assert all(r in ("text-0", "text-1") for r in results)


def test_mock_script_rules_and_default():
    script = MockScript([(lambda p: "sort" in p, "sorted(xs)")], default=lambda p: p.upper())
    mock = MockProvider(script)
    assert mock.generate("please sort").text == "sorted(xs)"
    assert mock.generate("abc").text == "ABC"
    assert mock.chat([{"role": "user", "content": "sort me"}]).text == "sorted(xs)"
    assert mock.calls == 3


def test_keyword_lines_whole_words():
    fn = keyword_lines({"sort": "a", "filter": "b"})
    assert fn("sort then filter") == "a\nb"
    assert fn("sorting") == ""


def test_load_mock_script(tmp_path):
    spec = {
        "model_id": "scripted",
        "rules": [{"contains": "zebra", "output": "noise"}, {"regex": "^def ", "output": {"transform": "first_line"}}],
        "default": {"transform": "keyword_lines", "words": ["sort"]},
    }
    path = tmp_path / "mock.json"
    path.write_text(json.dumps(spec))
    script, model_id = load_mock_script(path)
    assert model_id == "scripted"
    assert script.respond("a zebra") == "noise"
    assert script.respond("def f():\n  pass") == "def f():"
    assert script.respond("sort it") == "sort"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"rules": [{"output": "x"}]}))
    with pytest.raises(ContractViolation):
        load_mock_script(bad)


def test_cached_provider_wraps_mock(tmp_path):
    inner = MockProvider(MockScript([], lambda p: p[::-1]))
    provider = CachedProvider(inner, ResponseCache(tmp_path))
    assert provider.generate("abc").text == "cba"
    assert provider.generate("abc").from_cache
    assert inner.calls == 1


def test_concurrency_bound():
    active, peak = [0], [0]
    lock = threading.Lock()

    def handler(request):
        with lock:
            active[0] += 1
            peak[0] = max(peak[0], active[0])
        threading.Event().wait(0.01)
        with lock:
            active[0] -= 1
        return completion("x")

    provider, _ = make_provider(handler, max_concurrency=2)
    with ThreadPoolExecutor(8) as pool:
        list(pool.map(lambda i: provider.generate(str(i)), range(16)))
    assert peak[0] <= 2
