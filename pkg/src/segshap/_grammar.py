"""Grammar registry on top of tree-sitter."""

from __future__ import annotations

import threading
from functools import lru_cache
from typing import Iterator

from tree_sitter import Language, Node, Parser, Tree

from .errors import SplitError

_ALIASES = {"python": "python", "py": "python", "python3": "python"}
_local = threading.local()


def resolve_language(hint: str | None) -> str:
    name = (hint or "python").strip().lower()
    if name not in _ALIASES:
        raise SplitError("parse", f"no grammar available for language {hint!r}")
    return _ALIASES[name]


@lru_cache(maxsize=None)
def _language(name: str) -> Language:
    if name == "python":
        import tree_sitter_python

        return Language(tree_sitter_python.language())
    raise SplitError("parse", f"no grammar available for language {name!r}")


def parse(source: bytes, hint: str | None = None) -> Tree:
    """Parse ``source`` with a per-thread parser (parsers are not thread-safe)."""
    name = resolve_language(hint)
    parsers = getattr(_local, "parsers", None)
    if parsers is None:
        parsers = _local.parsers = {}
    if name not in parsers:
        parsers[name] = Parser(_language(name))
    return parsers[name].parse(source)


def walk(node: Node) -> Iterator[Node]:
    """Iterative pre-order traversal, ``node`` included."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(n.children))


def node_text(source: bytes, node: Node) -> str:
    return source[node.start_byte:node.end_byte].decode("utf-8", errors="replace")
