import math

import numpy as np
import pytest

from semtransfer import (
    AssociationMatrix,
    Taxonomy,
    ValidationError,
    binarize,
    build_corpus_index,
    dice_hitcount,
    dice_snippet,
    esa_relatedness,
    fuse_measures,
    lin_relatedness,
    mine_relatedness,
    tfidf_associations,
    tokenize,
)
from semtransfer import RelatednessMatrix


def brute_dice_docs(docs, a, b):
    """Oracle: scan raw documents for term containment."""
    def contains(text, term):
        toks = set(tokenize(text))
        return all(t in toks for t in tokenize(term))

    da = {i for i, (_, text) in enumerate(docs) if contains(text, a)}
    db = {i for i, (_, text) in enumerate(docs) if contains(text, b)}
    denom = len(da) + len(db)
    return 0.0 if denom == 0 else 2.0 * len(da & db) / denom


def brute_dice_windows(docs, a, b, window):
    """Oracle: enumerate every sliding window explicitly."""
    ta, tb = tokenize(a), tokenize(b)
    na = nb = nab = 0
    for _, text in docs:
        toks = tokenize(text)
        if not toks:
            continue
        if window is None:
            spans = [toks]
        else:
            spans = [toks[i:i + window] for i in range(max(1, len(toks) - window + 1))]
        for span in spans:
            s = set(span)
            ha = all(t in s for t in ta)
            hb = all(t in s for t in tb)
            na += ha
            nb += hb
            nab += ha and hb
    denom = na + nb
    return 0.0 if denom == 0 else 2.0 * nab / denom


class TestTokenize:
    def test_lowercases_and_strips_punctuation(self):
        assert tokenize("The Bear, (quickly) ran!") == ["the", "bear", "quickly", "ran"]

    def test_pure_punctuation_dropped(self):
        assert tokenize("... --- !!!") == []

    def test_inner_punctuation_kept(self):
        assert tokenize("it's a sea-otter") == ["it's", "a", "sea-otter"]


class TestDiceHitcount:
    def test_hand_value(self):
        # 4 docs mention x, 5 mention y, 3 mention both: 2*3/(4+5)
        docs = []
        for i in range(3):
            docs.append((f"b{i}", "x y"))
        docs.append(("x0", "x only"))
        docs += [("y0", "y fill"), ("y1", "y fill")]
        idx = build_corpus_index(docs)
        assert dice_hitcount(idx, "x", "y") == pytest.approx(2 * 3 / (4 + 5), abs=0)

    def test_matches_document_scan_oracle(self):
        rng = np.random.default_rng(42)
        vocab = [f"w{i}" for i in range(12)]
        docs = []
        for d in range(60):
            n = rng.integers(1, 9)
            docs.append((f"d{d}", " ".join(rng.choice(vocab, size=n))))
        idx = build_corpus_index(docs)
        for _ in range(100):
            a, b = rng.choice(vocab, size=2)
            assert dice_hitcount(idx, a, b) == brute_dice_docs(docs, a, b)

    def test_symmetry_and_unit_range(self):
        rng = np.random.default_rng(7)
        vocab = [f"w{i}" for i in range(8)]
        docs = [(f"d{d}", " ".join(rng.choice(vocab, size=5))) for d in range(30)]
        idx = build_corpus_index(docs)
        for _ in range(50):
            a, b = rng.choice(vocab, size=2)
            v = dice_hitcount(idx, a, b)
            assert v == dice_hitcount(idx, b, a)
            assert 0.0 <= v <= 1.0

    def test_self_dice_is_one_when_present(self):
        idx = build_corpus_index([("d0", "bear"), ("d1", "otter")])
        assert dice_hitcount(idx, "bear", "bear") == 1.0

    def test_absent_terms_give_zero(self):
        idx = build_corpus_index([("d0", "bear")])
        assert dice_hitcount(idx, "yeti", "unicorn") == 0.0

    def test_multiword_term_needs_all_tokens(self):
        idx = build_corpus_index([("d0", "polar bear swims"), ("d1", "bear cave")])
        # "polar bear" only matches d0
        assert dice_hitcount(idx, "polar bear", "swims") == 1.0

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValidationError):
            build_corpus_index([])

    def test_duplicate_doc_id_rejected(self):
        with pytest.raises(ValidationError):
            build_corpus_index([("d0", "a"), ("d0", "b")])

    def test_empty_term_rejected(self):
        idx = build_corpus_index([("d0", "a")])
        with pytest.raises(ValidationError):
            dice_hitcount(idx, "...", "a")


class TestDiceSnippet:
    def test_hand_value_window_two(self):
        # windows of "a b c a": [a b] [b c] [c a]; both terms share only [a b]
        idx = build_corpus_index([("d0", "a b c a")])
        assert dice_snippet(idx, "a", "b", window=2) == pytest.approx(0.5, abs=0)

    def test_matches_window_enumeration_oracle(self):
        rng = np.random.default_rng(101)
        vocab = [f"w{i}" for i in range(10)]
        docs = [(f"d{d}", " ".join(rng.choice(vocab, size=rng.integers(1, 15))))
                for d in range(40)]
        idx = build_corpus_index(docs)
        for window in (1, 3, 5, None):
            for _ in range(40):
                a, b = rng.choice(vocab, size=2)
                assert dice_snippet(idx, a, b, window) == brute_dice_windows(docs, a, b, window)

    def test_unbounded_window_equals_hitcount(self):
        rng = np.random.default_rng(55)
        vocab = [f"w{i}" for i in range(9)]
        docs = [(f"d{d}", " ".join(rng.choice(vocab, size=rng.integers(1, 20))))
                for d in range(50)]
        idx = build_corpus_index(docs)
        for _ in range(200):
            a, b = rng.choice(vocab, size=2)
            assert dice_snippet(idx, a, b, None) == dice_hitcount(idx, a, b)

    def test_window_grows_toward_document_level(self):
        # wider windows can only add co-occurrences for adjacent terms
        idx = build_corpus_index([("d0", "a x x x b"), ("d1", "a b")])
        narrow = dice_snippet(idx, "a", "b", window=2)
        wide = dice_snippet(idx, "a", "b", window=5)
        assert narrow <= wide

    def test_zero_window_rejected(self):
        idx = build_corpus_index([("d0", "a")])
        with pytest.raises(ValidationError):
            dice_snippet(idx, "a", "a", window=0)


class TestLin:
    def _tax(self):
        return Taxonomy(
            parent={"root": None, "mid": "root", "n1": "mid", "n2": "mid", "far": "root"},
            prob={"root": 1.0, "mid": 0.25, "n1": 0.0625, "n2": 0.0625, "far": 0.5},
        )

    def test_hand_value(self):
        # 2 log 0.25 / (log 0.0625 + log 0.0625) = 0.5
        assert lin_relatedness(self._tax(), "n1", "n2") == pytest.approx(0.5, abs=1e-12)

    def test_identity_is_one(self):
        assert lin_relatedness(self._tax(), "n1", "n1") == pytest.approx(1.0, abs=1e-12)

    def test_root_join_gives_zero(self):
        assert lin_relatedness(self._tax(), "n1", "far") == 0.0

    def test_unknown_node_rejected(self):
        with pytest.raises(ValidationError):
            lin_relatedness(self._tax(), "n1", "ghost")

    def test_taxonomy_validation(self):
        with pytest.raises(ValidationError):  # two roots
            Taxonomy(parent={"a": None, "b": None}, prob={"a": 1.0, "b": 1.0})
        with pytest.raises(ValidationError):  # root prob must be one
            Taxonomy(parent={"a": None}, prob={"a": 0.5})
        with pytest.raises(ValidationError):  # child above parent
            Taxonomy(parent={"a": None, "b": "a", "c": "b"},
                     prob={"a": 1.0, "b": 0.1, "c": 0.2})
        with pytest.raises(ValidationError):  # cycle
            Taxonomy(parent={"a": None, "b": "c", "c": "b"},
                     prob={"a": 1.0, "b": 0.5, "c": 0.5})

    def test_tree_distance(self):
        tax = self._tax()
        assert tax.tree_distance("n1", "n2") == 2
        assert tax.tree_distance("n1", "far") == 3
        assert tax.tree_distance("n1", "n1") == 0

    def test_leaf_descendants(self):
        tax = self._tax()
        assert set(tax.leaf_descendants("mid")) == {"n1", "n2"}
        assert tax.leaf_descendants("far") == ["far"]


class TestEsa:
    def _docs(self):
        return [
            ("d0", "bear claw claw forest"),
            ("d1", "otter river fish"),
            ("d2", "bear forest den"),
            ("d3", "fish river water"),
        ]

    def test_identical_terms_give_exactly_one(self):
        idx = build_corpus_index(self._docs())
        assert esa_relatedness(idx, "bear", "bear") == 1.0
        assert esa_relatedness(idx, "Bear", "bear  ") == 1.0

    def test_disjoint_concepts_give_zero(self):
        idx = build_corpus_index(self._docs())
        # bear and otter never share a document
        assert esa_relatedness(idx, "bear", "otter") == 0.0

    def test_matches_manual_tfidf_cosine(self):
        docs = self._docs()
        idx = build_corpus_index(docs)
        # independent reconstruction of the concept vectors
        texts = [d[1].split() for d in docs]
        n = len(texts)

        def vec(term):
            df = sum(term in t for t in texts)
            out = np.array([t.count(term) for t in texts], dtype=float)
            return out * (math.log(n / df) if df else 0.0)

        va, vb = vec("claw"), vec("forest")
        want = float(va @ vb / (np.linalg.norm(va) * np.linalg.norm(vb)))
        assert 0.0 < want < 1.0
        got = esa_relatedness(idx, "claw", "forest")
        assert got == pytest.approx(want, abs=1e-12)

    def test_unseen_term_gives_zero(self):
        idx = build_corpus_index(self._docs())
        assert esa_relatedness(idx, "yeti", "bear") == 0.0

    def test_range(self):
        rng = np.random.default_rng(17)
        vocab = [f"w{i}" for i in range(10)]
        docs = [(f"d{d}", " ".join(rng.choice(vocab, size=6))) for d in range(25)]
        idx = build_corpus_index(docs)
        for _ in range(60):
            a, b = rng.choice(vocab, size=2)
            assert 0.0 <= esa_relatedness(idx, a, b) <= 1.0


class TestTfidfAssociations:
    def test_hand_value(self):
        # category X: 5 tokens, one "claw" -> tf 0.2; only 1 of 2 categories
        # mentions it -> idf log 2
        rel = tfidf_associations(
            {"X": ["claw den rock tree moss"], "Y": ["river fish water reed mud"]},
            ["claw"])
        i = rel.categories.index("X")
        j = rel.attributes.index("claw")
        assert rel.values[i, j] == pytest.approx(0.2 * math.log(2), abs=1e-12)
        assert rel.values[rel.categories.index("Y"), j] == 0.0

    def test_attribute_in_every_category_gets_zero_idf(self):
        rel = tfidf_associations({"X": ["claw claw"], "Y": ["claw den"]}, ["claw"])
        assert np.all(rel.values == 0.0)

    def test_unseen_attribute_is_zero_everywhere(self):
        rel = tfidf_associations({"X": ["den"], "Y": ["river"]}, ["wings"])
        assert np.all(rel.values == 0.0)

    def test_multiword_attribute_counts_contiguous_occurrences(self):
        rel = tfidf_associations(
            {"X": ["long tail swims long tail"], "Y": ["tail long nothing here now"]},
            ["long tail"])
        # X has 2 contiguous matches of 5 tokens; Y has none (wrong order)
        x = rel.categories.index("X")
        y = rel.categories.index("Y")
        j = rel.attributes.index("long tail")
        assert rel.values[x, j] == pytest.approx((2 / 5) * math.log(2), abs=1e-12)
        assert rel.values[y, j] == 0.0

    def test_category_without_text_rejected(self):
        with pytest.raises(ValidationError):
            tfidf_associations({"X": [], "Y": ["den"]}, ["claw"])


class TestMineRelatedness:
    def test_fills_full_matrix(self):
        docs = [("d0", "bear claw"), ("d1", "otter fin"), ("d2", "bear fin")]
        idx = build_corpus_index(docs)
        rel = mine_relatedness(idx, ["bear", "otter"], ["claw", "fin"], "dice_hit")
        assert rel.categories == ("bear", "otter")
        assert rel.attributes == ("claw", "fin")
        assert rel.values[0, 0] == dice_hitcount(idx, "bear", "claw")
        assert rel.measure == "dice_hit"

    def test_unknown_measure_rejected(self):
        idx = build_corpus_index([("d0", "a")])
        with pytest.raises(ValidationError):
            mine_relatedness(idx, ["a"], ["b"], "bogus")

    def test_lin_requires_taxonomy(self):
        idx = build_corpus_index([("d0", "a")])
        with pytest.raises(ValidationError):
            mine_relatedness(idx, ["a"], ["b"], "lin")


class TestFusion:
    def _rel(self, values, measure="dice_hit"):
        values = np.asarray(values, dtype=float)
        cats = tuple(f"c{i}" for i in range(values.shape[0]))
        attrs = tuple(f"a{j}" for j in range(values.shape[1]))
        return RelatednessMatrix(cats, attrs, values, measure=measure)

    def test_classifier_fusion_averages_minmax_scores(self):
        r1 = self._rel([[0.0, 1.0]])                    # minmax -> [0, 1]
        r2 = self._rel([[2.0, 6.0]], measure="esa")     # minmax -> [0, 1]
        fused = fuse_measures([r1, r2], "classifier_fusion")
        assert np.allclose(fused.values, [[0.0, 1.0]])
        assert fused.measure == "fused"

    def test_constant_matrix_normalizes_to_zeros(self):
        r1 = self._rel([[0.0, 1.0]])
        r2 = self._rel([[0.7, 0.7]], measure="esa")
        fused = fuse_measures([r1, r2], "classifier_fusion")
        assert np.allclose(fused.values, [[0.0, 0.5]])

    def test_expanded_concatenates_and_namespaces(self):
        r1 = self._rel([[0.0, 1.0]])
        r2 = self._rel([[1.0, 0.0]], measure="esa")
        fused = fuse_measures([r1, r2], "expanded")
        assert fused.attributes == ("dice_hit:a0", "dice_hit:a1", "esa:a0", "esa:a1")
        assert np.allclose(fused.values, [[0.0, 1.0, 1.0, 0.0]])

    def test_expanded_disambiguates_repeated_measures(self):
        r1 = self._rel([[0.0, 1.0]])
        r2 = self._rel([[1.0, 0.0]])
        fused = fuse_measures([r1, r2], "expanded")
        assert len(set(fused.attributes)) == 4

    def test_mismatched_axes_rejected(self):
        r1 = self._rel([[0.0, 1.0]])
        r2 = RelatednessMatrix(("other",), ("a0", "a1"), np.zeros((1, 2)))
        with pytest.raises(ValidationError):
            fuse_measures([r1, r2], "classifier_fusion")


class TestBinarize:
    def _rel(self):
        values = np.array([
            [0.9, 0.1, 0.5],
            [0.8, 0.1, 0.5],
            [0.1, 0.7, 0.2],
        ])
        return RelatednessMatrix(("c0", "c1", "c2"), ("a0", "a1", "a2"), values)

    def test_topk_marks_exactly_k_per_attribute(self):
        assoc = binarize(self._rel(), "per_attribute_topk", k=2)
        assert assoc.binary
        assert np.array_equal(assoc.values.sum(axis=0), [2, 2, 2])

    def test_topk_ties_prefer_earlier_categories(self):
        # a2 column ties c0 and c1 at 0.5; both beat c2, so k=1 keeps c0
        assoc = binarize(self._rel(), "per_attribute_topk", k=1)
        assert assoc.values[0, 2] == 1.0
        assert assoc.values[1, 2] == 0.0

    def test_topk_caps_at_category_count(self):
        assoc = binarize(self._rel(), "per_attribute_topk", k=10)
        assert np.all(assoc.values == 1.0)

    def test_global_threshold(self):
        assoc = binarize(self._rel(), "global_threshold", threshold=0.5)
        assert np.array_equal(assoc.values, self._rel().values >= 0.5)

    def test_per_attribute_mean(self):
        rel = self._rel()
        assoc = binarize(rel, "per_attribute_mean")
        want = rel.values >= rel.values.mean(axis=0, keepdims=True)
        assert np.array_equal(assoc.values.astype(bool), want)

    def test_missing_parameters_rejected(self):
        with pytest.raises(ValidationError):
            binarize(self._rel(), "per_attribute_topk")
        with pytest.raises(ValidationError):
            binarize(self._rel(), "global_threshold")
        with pytest.raises(ValidationError):
            binarize(self._rel(), "bogus_policy")
