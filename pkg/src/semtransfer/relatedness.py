"""Semantic relatedness between category and attribute terms.

Four pluggable measures over different evidence sources:

* ``dice_hit``      -- Dice coefficient on document hit counts.
* ``dice_snippet``  -- Dice coefficient on sliding token windows.
* ``lin``           -- information-theoretic similarity on a probability
                       annotated taxonomy.
* ``esa``           -- cosine of tf-idf concept vectors.

plus a tf*idf association miner for per-category script text, fusion of
several measures into one matrix, and binarization policies that turn a
real-valued relatedness matrix into a binary association matrix.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping, Sequence

import numpy as np

from .core import AssociationMatrix, RelatednessMatrix, ValidationError, clean_identifier

_STRIP = string.punctuation


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip surrounding punctuation.

    No stemming; empty fragments (pure punctuation) are dropped.
    """
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_STRIP)
        if tok:
            out.append(tok)
    return out


@dataclass(frozen=True, eq=False)
class CorpusIndex:
    doc_ids: tuple[str, ...]
    doc_tokens: tuple[tuple[str, ...], ...]
    postings: Mapping[str, frozenset[int]]

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)


def build_corpus_index(documents: Sequence[tuple[str, str]]) -> CorpusIndex:
    """Index (doc_id, text) pairs for the co-occurrence measures."""
    if not documents:
        raise ValidationError("empty corpus")
    doc_ids: list[str] = []
    doc_tokens: list[tuple[str, ...]] = []
    postings: dict[str, set[int]] = {}
    seen: set[str] = set()
    for doc_id, text in documents:
        doc_id = clean_identifier(doc_id)
        if doc_id in seen:
            raise ValidationError(f"duplicate document id: {doc_id!r}")
        seen.add(doc_id)
        idx = len(doc_ids)
        toks = tuple(tokenize(text))
        doc_ids.append(doc_id)
        doc_tokens.append(toks)
        for tok in set(toks):
            postings.setdefault(tok, set()).add(idx)
    frozen = {tok: frozenset(ixs) for tok, ixs in postings.items()}
    return CorpusIndex(tuple(doc_ids), tuple(doc_tokens), frozen)


def _term_tokens(term: str) -> list[str]:
    toks = tokenize(term)
    if not toks:
        raise ValidationError(f"term has no tokens: {term!r}")
    return toks


def _term_docs(index: CorpusIndex, term: str) -> frozenset[int]:
    # A document matches a multi-word term when it contains every token.
    toks = _term_tokens(term)
    docs = index.postings.get(toks[0], frozenset())
    for tok in toks[1:]:
        docs = docs & index.postings.get(tok, frozenset())
        if not docs:
            break
    return docs


def dice_hitcount(index: CorpusIndex, a: str, b: str) -> float:
    da = _term_docs(index, a)
    db = _term_docs(index, b)
    denom = len(da) + len(db)
    if denom == 0:
        return 0.0
    return 2.0 * len(da & db) / denom


@lru_cache(maxsize=8)
def _token_windows(index: CorpusIndex, window: int | None) -> dict[str, frozenset[int]]:
    """Map token -> global ids of sliding windows containing it.

    ``window=None`` treats each whole document as a single window. Windows
    shorter than ``window`` occur only for documents shorter than the window.
    """
    occupancy: dict[str, set[int]] = {}
    next_id = 0
    for toks in index.doc_tokens:
        if window is None:
            spans = [toks] if toks else []
        else:
            n = len(toks)
            spans = [toks[i:i + window] for i in range(max(1, n - window + 1))] if n else []
        for span in spans:
            for tok in set(span):
                occupancy.setdefault(tok, set()).add(next_id)
            next_id += 1
    return {tok: frozenset(ids) for tok, ids in occupancy.items()}


def _term_windows(index: CorpusIndex, term: str, window: int | None) -> frozenset[int]:
    toks = _term_tokens(term)
    table = _token_windows(index, window)
    wins = table.get(toks[0], frozenset())
    for tok in toks[1:]:
        wins = wins & table.get(tok, frozenset())
        if not wins:
            break
    return wins


def dice_snippet(index: CorpusIndex, a: str, b: str, window: int | None = 20) -> float:
    """Dice coefficient over sliding windows of ``window`` tokens.

    ``window=None`` degrades to whole documents and agrees exactly with
    :func:`dice_hitcount`.
    """
    if window is not None and window < 1:
        raise ValidationError(f"window must be >= 1 or None, got {window}")
    wa = _term_windows(index, a, window)
    wb = _term_windows(index, b, window)
    denom = len(wa) + len(wb)
    if denom == 0:
        return 0.0
    return 2.0 * len(wa & wb) / denom


# ---------------------------------------------------------------------------
# Taxonomy-based similarity


@dataclass(frozen=True, eq=False)
class Taxonomy:
    """Rooted tree with per-node occurrence probabilities.

    ``parent`` maps every node to its parent; the single root maps to None.
    ``prob`` maps every node to p in (0, 1], with p(root) == 1 and children
    never more probable than their parents.
    """

    parent: Mapping[str, str | None]
    prob: Mapping[str, float]
    _children: Mapping[str, tuple[str, ...]] = field(init=False, repr=False, compare=False)
    root: str = field(init=False)

    def __post_init__(self):
        parent = dict(self.parent)
        if not parent:
            raise ValidationError("empty taxonomy")
        roots = [n for n, p in parent.items() if p is None]
        if len(roots) != 1:
            raise ValidationError(f"taxonomy needs exactly one root, found {len(roots)}")
        for node, par in parent.items():
            if par is not None and par not in parent:
                raise ValidationError(f"parent of {node!r} is unknown node {par!r}")
        root = roots[0]
        # Walking to the root must terminate for every node.
        for node in parent:
            seen = set()
            cur: str | None = node
            while cur is not None:
                if cur in seen:
                    raise ValidationError(f"cycle in taxonomy at {cur!r}")
                seen.add(cur)
                cur = parent[cur]
        prob = dict(self.prob)
        missing = set(parent) - set(prob)
        if missing:
            raise ValidationError(f"missing probabilities for nodes: {sorted(missing)}")
        extra = set(prob) - set(parent)
        if extra:
            raise ValidationError(f"probabilities for unknown nodes: {sorted(extra)}")
        for node, p in prob.items():
            if not (0.0 < p <= 1.0) or not math.isfinite(p):
                raise ValidationError(f"probability of {node!r} outside (0, 1]: {p}")
        if abs(prob[root] - 1.0) > 1e-12:
            raise ValidationError(f"root probability must be 1, got {prob[root]}")
        for node, par in parent.items():
            if par is not None and prob[node] > prob[par] + 1e-12:
                raise ValidationError(
                    f"{node!r} more probable than its parent {par!r}")
        children: dict[str, list[str]] = {n: [] for n in parent}
        for node, par in parent.items():
            if par is not None:
                children[par].append(node)
        object.__setattr__(self, "parent", parent)
        object.__setattr__(self, "prob", prob)
        object.__setattr__(self, "root", root)
        object.__setattr__(self, "_children",
                           {n: tuple(c) for n, c in children.items()})

    def _require(self, node: str) -> None:
        if node not in self.parent:
            raise ValidationError(f"unknown taxonomy node: {node!r}")

    def ancestors(self, node: str) -> list[str]:
        """Path from node up to and including the root."""
        self._require(node)
        path = [node]
        while (par := self.parent[path[-1]]) is not None:
            path.append(par)
        return path

    def lca(self, a: str, b: str) -> str:
        above_a = set(self.ancestors(a))
        for node in self.ancestors(b):
            if node in above_a:
                return node
        return self.root

    def tree_distance(self, a: str, b: str) -> int:
        join = self.lca(a, b)
        pa = self.ancestors(a)
        pb = self.ancestors(b)
        return pa.index(join) + pb.index(join)

    def children(self, node: str) -> tuple[str, ...]:
        self._require(node)
        return self._children[node]

    def leaf_descendants(self, node: str) -> list[str]:
        """Leaves under ``node`` (the node itself if it is a leaf)."""
        self._require(node)
        out: list[str] = []
        stack = [node]
        while stack:
            cur = stack.pop()
            kids = self._children[cur]
            if kids:
                stack.extend(reversed(kids))
            else:
                out.append(cur)
        return out


def lin_relatedness(tax: Taxonomy, a: str, b: str) -> float:
    """2 log p(lcs) / (log p(a) + log p(b)), zero when only the root joins them."""
    p_join = max(tax.prob[tax.lca(a, b)], 1e-12)
    pa = max(tax.prob[a], 1e-12)
    pb = max(tax.prob[b], 1e-12)
    denom = math.log(pa) + math.log(pb)
    if denom == 0.0:
        return 0.0
    return 2.0 * math.log(p_join) / denom


# ---------------------------------------------------------------------------
# ESA: concept-vector cosine


@lru_cache(maxsize=8)
def _tfidf_table(index: CorpusIndex) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Per-token tf-idf document vectors; tf is the raw in-document count."""
    n = index.n_docs
    counts: dict[str, np.ndarray] = {}
    for j, toks in enumerate(index.doc_tokens):
        for tok in toks:
            vec = counts.get(tok)
            if vec is None:
                vec = np.zeros(n)
                counts[tok] = vec
            vec[j] += 1.0
    table = {}
    for tok, vec in counts.items():
        df = len(index.postings[tok])
        idf = math.log(n / df)
        table[tok] = vec * idf
    return table, np.zeros(n)


def _concept_vector(index: CorpusIndex, term: str) -> np.ndarray:
    toks = _term_tokens(term)
    table, zero = _tfidf_table(index)
    vec = zero.copy()
    for tok in toks:
        tv = table.get(tok)
        if tv is not None:
            vec += tv
    return vec


def esa_relatedness(index: CorpusIndex, a: str, b: str) -> float:
    """Cosine similarity of summed tf-idf concept vectors, clipped to [0, 1]."""
    va = _concept_vector(index, a)
    vb = _concept_vector(index, b)
    na = float(np.linalg.norm(va))
    nb = float(np.linalg.norm(vb))
    if na == 0.0 or nb == 0.0:
        return 0.0
    if _term_tokens(a) == _term_tokens(b):
        return 1.0
    cos = float(va @ vb) / (na * nb)
    return min(max(cos, 0.0), 1.0)


# ---------------------------------------------------------------------------
# tf*idf association mining from per-category script text


def _phrase_count(tokens: Sequence[str], phrase: Sequence[str]) -> int:
    n, m = len(tokens), len(phrase)
    if m == 0 or n < m:
        return 0
    first = phrase[0]
    hits = 0
    for i in range(n - m + 1):
        if tokens[i] == first and list(tokens[i:i + m]) == list(phrase):
            hits += 1
    return hits


def tfidf_associations(script_docs: Mapping[str, Sequence[str]],
                       attribute_vocab: Sequence[str]) -> RelatednessMatrix:
    """Mine category-attribute strengths from per-category text collections.

    Entry (y, a) = (occurrences of a in y's text / y's token count) *
    log(#categories / #categories mentioning a). Attributes mentioned
    nowhere get zero everywhere.
    """
    if not script_docs:
        raise ValidationError("no script text given")
    categories = tuple(clean_identifier(c) for c in script_docs)
    if len(set(categories)) != len(categories):
        raise ValidationError("duplicate category in script collection")
    attributes = tuple(clean_identifier(a) for a in attribute_vocab)
    if len(set(attributes)) != len(attributes):
        raise ValidationError("duplicate attribute in vocabulary")
    if not attributes:
        raise ValidationError("empty attribute vocabulary")
    phrases = [tuple(_term_tokens(a)) for a in attributes]

    cat_tokens: list[list[str]] = []
    for cat, docs in script_docs.items():
        toks: list[str] = []
        for text in docs:
            toks.extend(tokenize(text))
        if not toks:
            raise ValidationError(f"category without script text: {cat!r}")
        cat_tokens.append(toks)

    counts = np.zeros((len(categories), len(attributes)))
    for i, toks in enumerate(cat_tokens):
        for j, phrase in enumerate(phrases):
            counts[i, j] = _phrase_count(toks, phrase)
    df = (counts > 0).sum(axis=0)
    n_cat = len(categories)
    values = np.zeros_like(counts)
    lengths = np.array([len(t) for t in cat_tokens], dtype=float)
    for j in range(len(attributes)):
        if df[j] == 0:
            continue
        idf = math.log(n_cat / df[j])
        values[:, j] = counts[:, j] / lengths * idf
    return RelatednessMatrix(categories, attributes, values, measure="tfidf")


# ---------------------------------------------------------------------------
# Whole-matrix mining, fusion, binarization


def mine_relatedness(index: CorpusIndex, categories: Sequence[str],
                     attributes: Sequence[str], measure: str, *,
                     window: int | None = 20,
                     taxonomy: Taxonomy | None = None) -> RelatednessMatrix:
    """Fill a categories x attributes matrix with one relatedness measure."""
    categories = tuple(clean_identifier(c) for c in categories)
    attributes = tuple(clean_identifier(a) for a in attributes)
    if len(set(categories)) != len(categories):
        raise ValidationError("duplicate category term")
    if len(set(attributes)) != len(attributes):
        raise ValidationError("duplicate attribute term")
    values = np.zeros((len(categories), len(attributes)))
    if measure == "dice_hit":
        fn = lambda c, a: dice_hitcount(index, c, a)
    elif measure == "dice_snippet":
        fn = lambda c, a: dice_snippet(index, c, a, window)
    elif measure == "esa":
        fn = lambda c, a: esa_relatedness(index, c, a)
    elif measure == "lin":
        if taxonomy is None:
            raise ValidationError("lin measure needs a taxonomy")
        fn = lambda c, a: lin_relatedness(taxonomy, c, a)
    else:
        raise ValidationError(f"unknown relatedness measure: {measure!r}")
    for i, cat in enumerate(categories):
        for j, att in enumerate(attributes):
            values[i, j] = fn(cat, att)
    return RelatednessMatrix(categories, attributes, values, measure=measure)


def _minmax(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi - lo <= 0.0:
        return np.zeros_like(values)
    return (values - lo) / (hi - lo)


def fuse_measures(matrices: Sequence[RelatednessMatrix],
                  mode: str = "classifier_fusion") -> RelatednessMatrix:
    """Combine several relatedness matrices.

    ``classifier_fusion`` averages min-max normalized scores over matrices
    with identical axes. ``expanded`` concatenates normalized score blocks
    along the attribute axis, namespacing attribute ids by source measure.
    """
    if not matrices:
        raise ValidationError("nothing to fuse")
    cats = matrices[0].categories
    for m in matrices[1:]:
        if m.categories != cats:
            raise ValidationError("fusion inputs disagree on categories")
    if mode == "classifier_fusion":
        attrs = matrices[0].attributes
        for m in matrices[1:]:
            if m.attributes != attrs:
                raise ValidationError("classifier_fusion inputs disagree on attributes")
        stack = np.stack([_minmax(m.values) for m in matrices])
        return RelatednessMatrix(cats, attrs, stack.mean(axis=0), measure="fused")
    if mode == "expanded":
        tags = [m.measure for m in matrices]
        counts: dict[str, int] = {}
        names = []
        for tag in tags:
            k = counts.get(tag, 0)
            counts[tag] = k + 1
            names.append(tag if tags.count(tag) == 1 else f"{tag}{k}")
        attrs: list[str] = []
        blocks = []
        for name, m in zip(names, matrices):
            attrs.extend(f"{name}:{a}" for a in m.attributes)
            blocks.append(_minmax(m.values))
        return RelatednessMatrix(cats, tuple(attrs), np.hstack(blocks), measure="fused")
    raise ValidationError(f"unknown fusion mode: {mode!r}")


def binarize(rel: RelatednessMatrix, policy: str, *, k: int | None = None,
             threshold: float | None = None) -> AssociationMatrix:
    """Turn real-valued relatedness into binary associations.

    ``per_attribute_topk`` marks the k strongest categories per attribute
    (ties resolved toward earlier categories), ``global_threshold`` marks
    entries >= threshold, ``per_attribute_mean`` marks entries at or above
    their column mean.
    """
    values = rel.values
    out = np.zeros_like(values)
    if policy == "per_attribute_topk":
        if k is None or k < 1:
            raise ValidationError("per_attribute_topk needs k >= 1")
        kk = min(k, values.shape[0])
        for j in range(values.shape[1]):
            top = np.argsort(-values[:, j], kind="stable")[:kk]
            out[top, j] = 1.0
    elif policy == "global_threshold":
        if threshold is None:
            raise ValidationError("global_threshold needs a threshold")
        out = (values >= threshold).astype(float)
    elif policy == "per_attribute_mean":
        means = values.mean(axis=0, keepdims=True)
        out = (values >= means).astype(float)
    else:
        raise ValidationError(f"unknown binarize policy: {policy!r}")
    return AssociationMatrix(rel.categories, rel.attributes, out, binary=True)
