"""Splitters: partition an input into features.

Three strategies are available:

* ``code``    - grammar-based; one block for the declaration (signature plus
  docstring) and one block per top-level statement of the function body.
* ``nl_llm``  - asks a chat model to segment a docstring into an indexed JSON
  map of exact substrings, validated for losslessness, with a deterministic
  rule-based fallback.
* ``nl_rule`` - sentence/newline boundary splitter.

Every partition returned here reconcatenates to the input byte-exactly.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Sequence

from . import _grammar
from .core import FeaturePartition, InputDocument
from .errors import ContractViolation, ProviderError, SplitError

if TYPE_CHECKING:
    from .models import Provider

log = logging.getLogger(__name__)


class SplitterKind(str, Enum):
    CODE = "code"
    NL_LLM = "nl_llm"
    NL_RULE = "nl_rule"

    @classmethod
    def parse(cls, value: str | SplitterKind) -> SplitterKind:
        if isinstance(value, SplitterKind):
            return value
        return cls(value.replace("-", "_"))


# Demonstration pairs shown to the segmenting model. The first is the
# JSON-search docstring; line breaks are kept inside the segment that ends the
# line so the segments reconcatenate to the input.
_JSON_SEARCH_SEGMENTS = [
    "Search for a specific string within the JSON data of files in a given "
    "directory and its subdirectories. ",
    "This function recursively scans the specified directory for JSON files, ",
    "then checks each file to see if the given string is present within the "
    "JSON data structure.\n",
    "Note that: ",
    "The string search is case-sensitive and looks for a match within the "
    "structure of the JSON data,",
    " not just as a substring in the file content. ",
    "If the directory does not contain any JSON files or if no JSON files "
    "contain the string, an empty list is returned.\n",
    "The function should output with:\n",
    "    list: A list of file paths (str) containing the string within their "
    "JSON data.",
]
JSON_SEARCH_EXAMPLE = ("".join(_JSON_SEARCH_SEGMENTS), _JSON_SEARCH_SEGMENTS)

_CSV_EXAMPLE_SEGMENTS = [
    "Read a CSV file and compute the mean of every numeric column. ",
    "Rows with missing values are skipped.\n",
    "The function should raise the exception for: ",
    "FileNotFoundError if the file does not exist.\n",
    "The function should output with:\n",
    "    dict: A mapping from column name to its mean.",
]
_PLOT_EXAMPLE_SEGMENTS = [
    "Generate a histogram of random integers ",
    "and return the Axes object of the plot.\n",
    "Note that: ",
    "The random seed is fixed for reproducibility.\n",
    "The function should output with:\n",
    "    matplotlib.axes.Axes: The histogram plot.\n",
    "You should write self-contained code starting with:\n",
    "```\nimport random\nimport matplotlib.pyplot as plt\ndef task_func(n=100):\n```",
]

DEFAULT_ICL_EXAMPLES: tuple[tuple[str, list[str]], ...] = (
    JSON_SEARCH_EXAMPLE,
    ("".join(_CSV_EXAMPLE_SEGMENTS), _CSV_EXAMPLE_SEGMENTS),
    ("".join(_PLOT_EXAMPLE_SEGMENTS), _PLOT_EXAMPLE_SEGMENTS),
)

SEGMENTER_SYSTEM_PROMPT = """\
You are a docstring segmenter. Split the user given docstring into granular sections.

CRITICAL REQUIREMENTS:
- You MUST always output a list of strings - no other format is acceptable
- You MUST NOT paraphrase, rewrite, or modify any text - only extract exactly as written
- Each string must be an exact substring from the original docstring
- Include all original whitespace, newlines, and formatting exactly as they appear

JSON FORMATTING REQUIREMENTS:
- Output ONLY valid JSON - an object with numeric keys and string values: {"0": "string1", "1": "string2", "2": "string3"}
- Each string value must be a meaningful coding sentence segments.
- Every key must be a string representing the index: "0", "1", "2", etc.
- Every value must be a string segment enclosed in double quotes
- Ensure all quotes and special characters are properly escaped

Here are examples, your response should follow this format:
"""


@dataclass(frozen=True)
class SplitterConfig:
    kind: SplitterKind = SplitterKind.NL_RULE
    llm_model_id: str | None = None
    max_retries: int = 3
    icl_examples: tuple[tuple[str, Sequence[str]], ...] = field(
        default=DEFAULT_ICL_EXAMPLES
    )
    strict_parse: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", SplitterKind.parse(self.kind))
        if self.max_retries < 0:
            raise ContractViolation("max_retries must be non-negative")
        if self.kind is SplitterKind.NL_LLM:
            if not self.llm_model_id:
                raise ContractViolation("the nl_llm splitter needs llm_model_id")
            if not self.icl_examples:
                raise ContractViolation("the nl_llm splitter needs in-context examples")
        for inp, segs in self.icl_examples:
            if "".join(segs) != inp:
                raise ContractViolation("an in-context example is not lossless")


def verify_lossless(partition: FeaturePartition, doc: InputDocument) -> bool:
    return partition.text.encode("utf-8") == doc.text.encode("utf-8")


def _degenerate(doc: InputDocument, name: str) -> FeaturePartition:
    return FeaturePartition.from_texts(doc.id, [doc.text], name)


# --------------------------------------------------------------------------
# code


def _is_docstring(stmt) -> bool:
    if stmt.type != "expression_statement" or stmt.named_child_count != 1:
        return False
    return stmt.named_children[0].type in ("string", "concatenated_string")


def _first_function(root):
    for node in _grammar.walk(root):
        if node.type == "function_definition":
            return node
    return None


def statement_starts(source: bytes, language_hint: str | None = None) -> list[int] | None:
    """Byte offsets of the top-level statements of the first function.

    The leading docstring is not a statement boundary. Returns ``None`` when
    the source has syntax errors or contains no function.
    """
    tree = _grammar.parse(source, language_hint)
    if tree.root_node.has_error:
        return None
    func = _first_function(tree.root_node)
    if func is None:
        return None
    body = func.child_by_field_name("body")
    stmts = [c for c in body.named_children if c.type != "comment"] if body else []
    if stmts and _is_docstring(stmts[0]):
        stmts = stmts[1:]
    return [s.start_byte for s in stmts]


def split_code(doc: InputDocument, *, strict: bool = False) -> FeaturePartition:
    """Split a single function into declaration and top-level statement blocks.

    Each block runs from its statement's first byte up to the next statement's
    first byte, so inter-statement whitespace and comments stay with the
    preceding block. Bytes before the declaration join the first block and the
    last block runs to end-of-input.

    Inputs that do not parse as a function yield a single whole-input feature
    named ``code(degenerate)``; with ``strict=True`` a syntax error raises
    ``SplitError("parse")`` instead.
    """
    source = doc.text.encode("utf-8")
    starts = statement_starts(source, doc.language_hint)
    if starts is None:
        if strict:
            raise SplitError("parse", f"{doc.id!r} does not parse as a function")
        return _degenerate(doc, "code(degenerate)")
    if not starts:
        return _degenerate(doc, "code(degenerate)")
    bounds = [0, *starts, len(source)]
    texts = [source[a:b].decode("utf-8") for a, b in zip(bounds, bounds[1:])]
    return FeaturePartition.from_texts(doc.id, texts, "code")


# --------------------------------------------------------------------------
# natural language

_BOUNDARY = re.compile(r"(?:[.?!]+(?=\s|$)|\n)\s*")


def rule_segments(text: str) -> list[str]:
    """Cut after sentence terminators and newline runs, keeping the delimiter
    and the whitespace that follows it with the left-hand segment."""
    cuts = [0]
    for m in _BOUNDARY.finditer(text):
        if cuts[-1] < m.end() < len(text):
            cuts.append(m.end())
    cuts.append(len(text))
    return [text[a:b] for a, b in zip(cuts, cuts[1:])]


def split_nl_rule(doc: InputDocument, *, name: str = "nl_rule") -> FeaturePartition:
    if not doc.text:
        raise SplitError("empty", f"{doc.id!r} is empty")
    return FeaturePartition.from_texts(doc.id, rule_segments(doc.text), name)


def build_segmenter_messages(
    docstring: str, icl_examples: Sequence[tuple[str, Sequence[str]]]
) -> list[dict[str, str]]:
    parts = [SEGMENTER_SYSTEM_PROMPT]
    for k, (inp, segs) in enumerate(icl_examples, 1):
        out = json.dumps({str(i): s for i, s in enumerate(segs)}, ensure_ascii=False)
        parts.append(
            f"ICL Example {k}\nINPUT:\n{json.dumps(inp, ensure_ascii=False)}\nOUTPUT:\n{out}\n"
        )
    return [
        {"role": "system", "content": "\n".join(parts)},
        {"role": "user", "content": f"Docstring: {docstring}"},
    ]


_FENCE = re.compile(r"^\s*```(?:json)?\s*\n?(.*?)\n?```\s*$", re.DOTALL)


def parse_segment_map(response: str, original: str) -> list[str]:
    """Validate an indexed segment map and return segments in key order.

    Raises ``ValueError`` on malformed JSON, non-contiguous keys, non-string
    values, or segments that do not reconcatenate to ``original``.
    """
    m = _FENCE.match(response)
    payload = json.loads(m.group(1) if m else response)
    if not isinstance(payload, dict) or not payload:
        raise ValueError("expected a non-empty JSON object")
    expected = {str(i) for i in range(len(payload))}
    if set(payload) != expected:
        raise ValueError(f"keys are not 0..{len(payload) - 1}")
    segments = [payload[str(i)] for i in range(len(payload))]
    if not all(isinstance(s, str) for s in segments):
        raise ValueError("segment values must be strings")
    if "".join(segments) != original:
        raise ValueError("segments do not reproduce the input exactly")
    return [s for s in segments if s]


def split_nl_llm(
    doc: InputDocument, client: Provider, config: SplitterConfig | None = None
) -> FeaturePartition:
    """Segment with a chat model; fall back to :func:`split_nl_rule`.

    A response is accepted only if its indexed map reconcatenates to the
    input. Rejected responses are retried (bypassing the response cache) up to
    ``config.max_retries`` times.
    """
    config = config or SplitterConfig(
        kind=SplitterKind.NL_LLM, llm_model_id=getattr(client, "model_id", "llm")
    )
    messages = build_segmenter_messages(doc.text, config.icl_examples)
    for attempt in range(config.max_retries + 1):
        try:
            out = client.chat(messages, refresh=attempt > 0)
        except ProviderError as exc:
            log.warning("segmenter call failed for %s: %s", doc.id, exc)
            break
        try:
            segments = parse_segment_map(out.text, doc.text)
        except (ValueError, TypeError) as exc:
            log.info("segmenter attempt %d rejected for %s: %s", attempt + 1, doc.id, exc)
            continue
        return FeaturePartition.from_texts(doc.id, segments, "nl_llm")
    return split_nl_rule(doc, name="nl_rule(fallback)")


def split(
    doc: InputDocument, config: SplitterConfig, client: Provider | None = None
) -> FeaturePartition:
    if config.kind is SplitterKind.CODE:
        part = split_code(doc, strict=config.strict_parse)
    elif config.kind is SplitterKind.NL_RULE:
        part = split_nl_rule(doc)
    else:
        if client is None:
            raise ContractViolation("the nl_llm splitter needs a model client")
        part = split_nl_llm(doc, client, config)
    if not verify_lossless(part, doc):
        raise SplitError("lossless", f"partition of {doc.id!r} does not reproduce the input")
    return part
