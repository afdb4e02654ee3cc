"""Synthetic corpora and a noise-blind mock model shared by the tests."""

from __future__ import annotations

import random
import re

from segshap.core import InputDocument, Task
from segshap.models import MockProvider, MockScript, keyword_lines

# Each verb maps to the line of code the mock "generates" when the verb is in
# the prompt. None of these words occur in the shipped nonsense pool.
VERB_LINES = {
    "sort": "items = sorted(items)",
    "filter": "items = [x for x in items if x]",
    "reverse": "items = items[::-1]",
    "deduplicate": "items = list(dict.fromkeys(items))",
    "normalize": "items = [x / total for x in items]",
    "truncate": "items = items[:limit]",
    "shuffle": "random.shuffle(items)",
    "encode": "data = json.dumps(items)",
    "compress": "data = zlib.compress(data)",
    "validate": "assert all(isinstance(x, int) for x in items)",
    "flatten": "items = [y for x in items for y in x]",
    "log": "logger.info('%d items', len(items))",
}
VERBS = tuple(VERB_LINES)

_NOUNS = ["records", "values", "rows", "entries", "numbers", "tokens", "items", "lines"]
_TAILS = [
    "before returning them",
    "in place when possible",
    "using the standard library",
    "so the caller gets a stable result",
    "and keep the original order",
    "without touching the input",
]


def noise_blind_script() -> MockScript:
    """Output depends only on which verbs appear in the prompt."""
    return MockScript([], keyword_lines(VERB_LINES))


def noise_blind_model(model_id: str = "mock-blind") -> MockProvider:
    return MockProvider(noise_blind_script(), model_id)


def sentence(rng: random.Random, verb: str) -> str:
    return f"Then {verb} the {rng.choice(_NOUNS)} {rng.choice(_TAILS)}. "


def synthetic_prompt(rng: random.Random, n_features: int) -> str:
    verbs = rng.sample(VERBS, n_features)
    return "".join(sentence(rng, v) for v in verbs)


def synthetic_docs(n_docs: int, seed: int, lo: int = 4, hi: int = 8) -> list[InputDocument]:
    rng = random.Random(seed)
    return [
        InputDocument(f"syn-{i:03d}", Task.CODE_GENERATION, synthetic_prompt(rng, rng.randint(lo, hi)))
        for i in range(n_docs)
    ]


# ---------------------------------------------------------------------------
# code corpus

_BODY_LINES = [
    "total = 0",
    "for x in xs:\n        total += x",
    "if not xs:\n        return None",
    "result = [x * 2 for x in xs]",
    "with open(path) as fh:\n        text = fh.read()",
    "try:\n        value = int(text)\n    except ValueError:\n        value = -1",
    "# a comment line\n    count = len(xs)",
    "while count > 0:\n        count -= 1",
    "names = {k: v for k, v in pairs}",
    "print('done < %s & %s >' % (a, b))",
    "def helper(y):\n        return y + 1",
    "class Box:\n        pass",
    "return total",
]


def synthetic_function(rng: random.Random, n_statements: int, docstring: bool) -> str:
    name = rng.choice(["process", "compute", "load", "merge_all", "run"])
    lines = [f"def {name}(xs, path=None, *args, **kw):"]
    if docstring:
        lines.append('    """Do the thing.\n\n    Returns a value.\n    """')
    for _ in range(n_statements):
        lines.append("    " + rng.choice(_BODY_LINES))
        if rng.random() < 0.2:
            lines.append("")
    text = "\n".join(lines)
    if rng.random() < 0.5:
        text += "\n"
    if rng.random() < 0.2:
        text = "import os\n\n" + text
    return text


def word_count(text: str) -> int:
    return len(re.findall(r"\S+", text))


def write_mock_script(path, model_id: str = "mock-blind"):
    """The noise-blind model as a JSON mock script for the CLI."""
    import json

    spec = {"model_id": model_id, "default": {"transform": "keyword_lines", "map": VERB_LINES}}
    path.write_text(json.dumps(spec), encoding="utf-8")
    return path
