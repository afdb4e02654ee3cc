"""Tokenization shared by the lexical comparators."""

from __future__ import annotations

import re

_TOKEN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Word runs and single punctuation characters; whitespace is dropped."""
    return _TOKEN.findall(text)


def whitespace_tokens(text: str) -> list[str]:
    return text.split()
