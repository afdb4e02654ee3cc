"""CodeBLEU-style code similarity.

The score is a weighted sum of four components, each in [0, 1]:

1. BLEU over code tokens up to ``ngram_order`` with add-one smoothing on
   orders two and above;
2. the same BLEU with a keyword-weighted unigram precision;
3. AST subtree match: the share of reference subtrees (identifier text
   replaced by node types) that also occur in the candidate;
4. data-flow match: the share of reference def-use triples
   ``(variable, def-site, use-site)`` found in the candidate, with variables
   renamed by order of first appearance.

Components 3 and 4 are undefined, and dropped with the remaining weights
renormalized, when the reference does not parse or has no data flow. A
candidate that does not parse scores 0 on both.
"""

from __future__ import annotations

import keyword
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .. import _grammar
from ..errors import ComparatorError, SplitError
from .tokenize import tokenize

PYTHON_KEYWORDS = frozenset(keyword.kwlist) | frozenset(keyword.softkwlist)


@dataclass(frozen=True)
class CodeBleuWeights:
    ngram: float = 0.25
    weighted_ngram: float = 0.25
    ast: float = 0.25
    dataflow: float = 0.25

    def __post_init__(self) -> None:
        vals = (self.ngram, self.weighted_ngram, self.ast, self.dataflow)
        if any(w < 0 for w in vals) or abs(sum(vals) - 1.0) > 1e-9:
            raise ValueError("CodeBLEU weights must be non-negative and sum to 1")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.ngram, self.weighted_ngram, self.ast, self.dataflow)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(
    candidate: Sequence[str],
    reference: Sequence[str],
    order: int = 4,
    unigram_weight=None,
) -> float:
    """Sentence BLEU with uniform n-gram weights and add-one smoothing for n >= 2.

    ``unigram_weight`` maps a token to its weight in the unigram precision;
    ``None`` gives every token weight 1.
    """
    if not candidate or not reference:
        return 0.0
    log_sum = 0.0
    for n in range(1, order + 1):
        cand, ref = _ngrams(candidate, n), _ngrams(reference, n)
        if n == 1:
            w = unigram_weight or (lambda _t: 1.0)
            num = sum(w(g[0]) * min(c, ref[g]) for g, c in cand.items())
            den = sum(w(g[0]) * c for g, c in cand.items())
            if num <= 0.0:
                return 0.0
            p = num / den
        else:
            num = sum(min(c, ref[g]) for g, c in cand.items())
            den = sum(cand.values())
            p = (num + 1) / (den + 1)
        log_sum += math.log(p) / order
    c, r = len(candidate), len(reference)
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return min(1.0, bp * math.exp(log_sum))


def weighted_bleu(
    candidate: Sequence[str],
    reference: Sequence[str],
    keywords: Iterable[str] = PYTHON_KEYWORDS,
    keyword_weight: float = 1.0,
    base_weight: float = 0.2,
    order: int = 4,
) -> float:
    kw = frozenset(keywords)
    return bleu(
        candidate,
        reference,
        order,
        unigram_weight=lambda t: keyword_weight if t in kw else base_weight,
    )


# --------------------------------------------------------------------------
# syntax


def ast_subtrees(root) -> Counter:
    """Multiset of normalized subtree strings for every internal named node.

    Leaves collapse to their node type, so identifier and literal text is
    ignored.
    """
    shapes: dict[int, str] = {}
    counts: Counter = Counter()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if not expanded:
            stack.append((node, True))
            stack.extend((c, False) for c in node.named_children)
            continue
        kids = node.named_children
        if not kids:
            shapes[node.id] = node.type
            continue
        shape = "(" + node.type + " " + " ".join(shapes[c.id] for c in kids) + ")"
        shapes[node.id] = shape
        counts[shape] += 1
    return counts


def match_ratio(candidate: Counter, reference: Counter) -> float:
    total = sum(reference.values())
    if total == 0:
        return 0.0
    return sum(min(c, candidate[k]) for k, c in reference.items()) / total


# --------------------------------------------------------------------------
# data flow

_TARGET_CONTAINERS = {
    "pattern_list", "tuple_pattern", "list_pattern", "tuple", "list",
    "parenthesized_expression", "list_splat_pattern", "as_pattern_target",
    "expression_list", "list_splat", "dictionary_splat_pattern",
}
_COMPREHENSIONS = {
    "list_comprehension", "set_comprehension", "generator_expression",
    "dictionary_comprehension",
}


class _DataFlow:
    """Flow-insensitive def-use extraction: each use links to the textually
    latest definition of the same name."""

    def __init__(self, source: bytes) -> None:
        self.src = source
        self.defs: dict[str, str] = {}
        self.names: dict[str, str] = {}
        self.triples: Counter = Counter()

    def _name(self, node) -> str:
        return _grammar.node_text(self.src, node)

    def _norm(self, name: str) -> str:
        return self.names.setdefault(name, f"var_{len(self.names)}")

    def use(self, node, ctx: str) -> None:
        name = self._name(node)
        if name in self.defs:
            self.triples[(self._norm(name), self.defs[name], ctx)] += 1

    def define(self, target, kind: str, ctx: str) -> None:
        t = target.type
        if t == "identifier":
            name = self._name(target)
            self._norm(name)
            self.defs[name] = kind
        elif t in _TARGET_CONTAINERS:
            for c in target.named_children:
                self.define(c, kind, ctx)
        elif t in ("attribute", "subscript"):
            self.visit(target, ctx)

    def _params(self, params, ctx: str) -> None:
        for p in params.named_children:
            if p.type == "identifier":
                self.define(p, "parameter", ctx)
            elif p.type in ("default_parameter", "typed_default_parameter"):
                self.visit(p.child_by_field_name("value"), ctx)
                self.define(p.child_by_field_name("name"), "parameter", ctx)
            elif p.type == "typed_parameter":
                for c in p.named_children:
                    if c.type != "type":
                        self.define(c, "parameter", ctx)
            elif p.type in ("list_splat_pattern", "dictionary_splat_pattern"):
                self.define(p, "parameter", ctx)

    def visit(self, node, ctx: str = "module") -> None:
        if node is None:
            return
        parent = node.parent
        if parent is not None and parent.type in ("block", "module"):
            ctx = node.type
            if node.type == "expression_statement" and node.named_child_count:
                ctx += ":" + node.named_children[0].type
        t = node.type
        field = node.child_by_field_name
        if t == "identifier":
            self.use(node, ctx)
        elif t == "attribute":
            self.visit(field("object"), ctx)
        elif t == "keyword_argument":
            self.visit(field("value"), ctx)
        elif t == "assignment":
            self.visit(field("right"), ctx)
            self.define(field("left"), "assignment", ctx)
        elif t == "augmented_assignment":
            self.visit(field("right"), ctx)
            self.visit(field("left"), ctx)
            self.define(field("left"), "augmented_assignment", ctx)
        elif t == "for_statement":
            self.visit(field("right"), ctx)
            self.define(field("left"), "for", ctx)
            self.visit(field("body"), ctx)
            self.visit(field("alternative"), ctx)
        elif t in _COMPREHENSIONS:
            kids = node.named_children
            for c in kids[1:]:
                self.visit(c, ctx)
            self.visit(kids[0], ctx)
        elif t == "for_in_clause":
            self.visit(field("right"), ctx)
            self.define(field("left"), "comprehension", ctx)
        elif t == "function_definition":
            self.define(field("name"), "function", ctx)
            self._params(field("parameters"), ctx)
            self.visit(field("body"), ctx)
        elif t == "lambda":
            params = field("parameters")
            if params is not None:
                self._params(params, ctx)
            self.visit(field("body"), ctx)
        elif t == "class_definition":
            self.visit(field("superclasses"), ctx)
            self.define(field("name"), "class", ctx)
            self.visit(field("body"), ctx)
        elif t == "as_pattern":
            kids = node.named_children
            self.visit(kids[0], ctx)
            kind = "except" if parent is not None and parent.type == "except_clause" else "with"
            self.define(field("alias"), kind, ctx)
        elif t in ("import_statement", "import_from_statement"):
            for c in node.children_by_field_name("name"):
                if c.type == "aliased_import":
                    self.define(c.child_by_field_name("alias"), "import", ctx)
                elif c.type == "dotted_name" and c.named_child_count:
                    ident = c.named_children[0 if t == "import_statement" else -1]
                    self.define(ident, "import", ctx)
        elif t == "named_expression":
            self.visit(field("value"), ctx)
            self.define(field("name"), "walrus", ctx)
        elif t in ("global_statement", "nonlocal_statement", "type"):
            return
        else:
            for c in node.named_children:
                self.visit(c, ctx)


def dataflow_triples(root, source: bytes) -> Counter:
    df = _DataFlow(source)
    df.visit(root)
    return df.triples


# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CodeBleuBreakdown:
    ngram: float
    weighted_ngram: float
    ast: float | None
    dataflow: float | None
    total: float


def codebleu_components(
    candidate: str,
    reference: str,
    language_hint: str | None = "python",
    weights: CodeBleuWeights = CodeBleuWeights(),
    keyword_weight: float = 1.0,
    base_weight: float = 0.2,
    ngram_order: int = 4,
) -> CodeBleuBreakdown:
    if candidate == reference:
        return CodeBleuBreakdown(1.0, 1.0, 1.0, 1.0, 1.0)
    try:
        lang = _grammar.resolve_language(language_hint)
    except SplitError as exc:
        raise ComparatorError("language", str(exc)) from exc
    if not candidate.strip():
        return CodeBleuBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
    cand_tokens, ref_tokens = tokenize(candidate), tokenize(reference)
    keywords = PYTHON_KEYWORDS if lang == "python" else frozenset()
    ngram = bleu(cand_tokens, ref_tokens, ngram_order)
    wngram = weighted_bleu(
        cand_tokens, ref_tokens, keywords, keyword_weight, base_weight, ngram_order
    )

    ast_score: float | None = None
    df_score: float | None = None
    ref_src = reference.encode("utf-8")
    ref_tree = _grammar.parse(ref_src, lang)
    if not ref_tree.root_node.has_error:
        ref_shapes = ast_subtrees(ref_tree.root_node)
        ref_flow = dataflow_triples(ref_tree.root_node, ref_src)
        cand_src = candidate.encode("utf-8")
        cand_tree = _grammar.parse(cand_src, lang)
        cand_ok = not cand_tree.root_node.has_error
        if ref_shapes:
            ast_score = match_ratio(ast_subtrees(cand_tree.root_node), ref_shapes) if cand_ok else 0.0
        if ref_flow:
            df_score = (
                match_ratio(dataflow_triples(cand_tree.root_node, cand_src), ref_flow)
                if cand_ok
                else 0.0
            )

    parts = [
        (weights.ngram, ngram),
        (weights.weighted_ngram, wngram),
        (weights.ast, ast_score),
        (weights.dataflow, df_score),
    ]
    used = [(w, s) for w, s in parts if s is not None]
    wsum = sum(w for w, _ in used)
    total = sum(w * s for w, s in used) / wsum if wsum > 0 else 0.0
    return CodeBleuBreakdown(ngram, wngram, ast_score, df_score, min(1.0, max(0.0, total)))


def codebleu(candidate: str, reference: str, language_hint: str | None = "python", **kwargs) -> float:
    return codebleu_components(candidate, reference, language_hint, **kwargs).total
