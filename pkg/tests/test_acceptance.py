"""Acceptance suite: eleven end-to-end behavioral guarantees.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them)
and asserts the same condition, so the suite is meaningful both as a
human-readable checklist and as a CI gate.
"""

import json
import math
import time

import numpy as np
import pytest

import semtransfer as st
from semtransfer.cli import main as cli_main
from semtransfer.propagate import SeedLabels


def _verdict(criterion: str, ok: bool, detail: str = "") -> bool:
    print(f"[{'PASS' if ok else 'FAIL'}] {criterion}" + (f" ({detail})" if detail else ""))
    return ok


# ---------------------------------------------------------------------------
# Shared pipeline runner for the synthetic recognition criteria


def _run_recognition(seed: int, fewshot_per_novel: int):
    """Train on known categories, score novel ones, then propagate.

    Returns (zero-shot accuracy, propagated accuracy) on novel test rows.
    """
    ds = st.gen_dataset(st.SynthConfig(
        n_known=6, n_novel=2, n_attributes=16, feature_dim=16,
        train_per_known=30, test_per_novel=60,
        fewshot_per_novel=fewshot_per_novel,
        flip_noise=0.2, cluster_noise=0.25, seed=seed))
    model = st.train_attribute_classifiers(
        ds.features, ds.split.train_instances, ds.associations,
        st.TrainConfig(max_iters=500))
    scores = st.predict_attribute_scores(model, ds.features)

    cats = ds.associations.categories
    known = [c for c in cats if c in ds.split.known_categories]
    novel = [c for c in cats if c in ds.split.novel_categories]

    def sub(group):
        rows = [ds.associations.category_index(c) for c in group]
        return st.AssociationMatrix(tuple(group), ds.associations.attributes,
                                    ds.associations.values[rows], binary=True)

    prior = st.attribute_prior_from_associations(sub(known))
    zs = st.dap_scores(scores, sub(novel), prior)
    test_rows = list(ds.split.test_instances)
    dap_acc = st.multiclass_accuracy(zs, ds.labels, test_rows)

    rows = [i for i in ds.features.instances
            if i in ds.split.fewshot_instances or i in ds.split.test_instances]
    zi = {inst: k for k, inst in enumerate(zs.instances)}
    sel = [zi[r] for r in rows]
    zs_sub = st.CategoryScoreMatrix(tuple(rows), zs.categories, zs.values[sel])
    vec_sub = st.AttributeScoreMatrix(tuple(rows), scores.attributes,
                                      scores.values[sel])
    result = st.pst(zs_sub, vec_sub, ds.split.fewshot_instances,
                    st.PropagationConfig(k=15, rho=0.15, alpha=0.8))
    pst_acc = float(np.mean([result.predictions[i] == ds.labels[i]
                             for i in test_rows]))
    return dap_acc, pst_acc


class TestCriterion01IterativeMatchesClosedForm:
    def test_fifty_random_graphs(self):
        rng = np.random.default_rng(1001)
        start = time.time()
        worst = 0.0
        for trial in range(50):
            n = int(rng.integers(20, 201))
            X = rng.normal(size=(n, 5))
            k = int(rng.integers(4, 11))
            graph = st.build_knn_graph(X, k=k)
            Y = rng.random((n, 3))
            seeds = SeedLabels(tuple(f"i{j}" for j in range(n)),
                               ("c0", "c1", "c2"), Y)
            alpha = (0.1, 0.5, 0.9)[trial % 3]
            closed = st.propagate_closed_form(graph, seeds, alpha)
            # tight sweep tolerance keeps the fixed-point gap below the bound
            result = st.propagate(graph, seeds,
                                  st.PropagationConfig(alpha=alpha, tol=1e-9,
                                                       max_iters=50000))
            assert result.converged
            gap = float(np.abs(result.scores.values - closed.values).max())
            worst = max(worst, gap)
        elapsed = time.time() - start
        ok = worst <= 1e-6 and elapsed < 30.0
        assert _verdict("criterion 1: iterative propagation matches closed form "
                        "on 50 random graphs",
                        ok, f"max gap {worst:.2e}, {elapsed:.1f}s")


class TestCriterion02AlphaZeroReturnsSeeds:
    def test_bitwise_identity_after_one_sweep(self):
        rng = np.random.default_rng(1002)
        X = rng.normal(size=(40, 4))
        graph = st.build_knn_graph(X, k=5)
        Y = rng.random((40, 3))
        seeds = SeedLabels(tuple(f"i{j}" for j in range(40)), ("a", "b", "c"), Y)
        result = st.propagate(graph, seeds, st.PropagationConfig(alpha=0.0))
        ok = (result.iterations == 1 and result.converged
              and np.array_equal(result.scores.values, Y))
        assert _verdict("criterion 2: alpha=0 returns the seed matrix bitwise "
                        "after one sweep", ok,
                        f"iterations={result.iterations}")


class TestCriterion03GradientCheck:
    def test_twenty_random_points(self):
        rng = np.random.default_rng(1003)
        h = 1e-5
        worst = 0.0
        for _ in range(20):
            n, d = int(rng.integers(5, 30)), int(rng.integers(2, 8))
            X = rng.normal(size=(n, d))
            t = rng.random(n)
            w = rng.normal(size=d)
            b = float(rng.normal())
            l2 = float(rng.uniform(0, 0.1))
            _, gw, gb = st.logistic_loss_and_grad(w, b, X, t, l2)
            fd = np.zeros(d + 1)
            for i in range(d):
                wp, wm = w.copy(), w.copy()
                wp[i] += h
                wm[i] -= h
                lp, _, _ = st.logistic_loss_and_grad(wp, b, X, t, l2)
                lm, _, _ = st.logistic_loss_and_grad(wm, b, X, t, l2)
                fd[i] = (lp - lm) / (2 * h)
            lp, _, _ = st.logistic_loss_and_grad(w, b + h, X, t, l2)
            lm, _, _ = st.logistic_loss_and_grad(w, b - h, X, t, l2)
            fd[d] = (lp - lm) / (2 * h)
            analytic = np.append(gw, gb)
            rel = float(np.linalg.norm(analytic - fd)
                        / max(np.linalg.norm(fd), 1e-12))
            worst = max(worst, rel)
        ok = worst < 1e-4
        assert _verdict("criterion 3: analytic gradient matches central "
                        "differences at 20 random points", ok,
                        f"worst relative error {worst:.2e}")


class TestCriterion04NoiselessPipelinePerfect:
    def test_end_to_end_noiseless(self):
        start = time.time()
        ds = st.gen_dataset(st.SynthConfig(
            n_known=6, n_novel=2, n_attributes=12, feature_dim=12,
            train_per_known=30, test_per_novel=40,
            flip_noise=0.0, cluster_noise=0.0, seed=4))
        # text route: corpus realizes the associations, mining recovers them
        plan = st.corpus_plan_from_associations(ds.associations, docs_per_pair=3)
        index = st.build_corpus_index(st.gen_corpus(plan))
        rel = st.mine_relatedness(index, ds.associations.categories,
                                  ds.associations.attributes, "dice_hit")
        mined = st.binarize(rel, "global_threshold", threshold=0.05)
        assert np.array_equal(mined.values, ds.associations.values)

        model = st.train_attribute_classifiers(
            ds.features, ds.split.train_instances, mined,
            st.TrainConfig(max_iters=500))
        scores = st.predict_attribute_scores(model, ds.features)
        cats = mined.categories
        novel = [c for c in cats if c in ds.split.novel_categories]
        known = [c for c in cats if c in ds.split.known_categories]

        def sub(group):
            rows = [mined.category_index(c) for c in group]
            return st.AssociationMatrix(tuple(group), mined.attributes,
                                        mined.values[rows], binary=True)

        prior = st.attribute_prior_from_associations(sub(known))
        zs = st.dap_scores(scores, sub(novel), prior)
        acc = st.multiclass_accuracy(zs, ds.labels, list(ds.split.test_instances))
        elapsed = time.time() - start
        ok = acc == 1.0 and elapsed < 10.0
        assert _verdict("criterion 4: noiseless synthetic pipeline reaches "
                        "accuracy 1.0 on novel categories", ok,
                        f"accuracy {acc:.3f}, {elapsed:.1f}s")


class TestCriterion05PropagationBeatsZeroShot:
    def test_ten_seeds(self):
        wins = 0
        pairs = []
        for seed in range(10):
            dap_acc, pst_acc = _run_recognition(seed, fewshot_per_novel=0)
            wins += pst_acc >= dap_acc
            pairs.append((dap_acc, pst_acc))
        ok = wins >= 8
        assert _verdict("criterion 5: propagation matches or beats zero-shot "
                        "scores on at least 8 of 10 seeds", ok,
                        f"wins {wins}/10, mean zero-shot "
                        f"{np.mean([p[0] for p in pairs]):.3f}, mean propagated "
                        f"{np.mean([p[1] for p in pairs]):.3f}")


class TestCriterion06FewShotMonotonicity:
    def test_mean_accuracy_never_drops_more_than_one_point(self):
        shots = [0, 1, 2, 5, 10]
        means = []
        for s in shots:
            accs = [_run_recognition(seed, fewshot_per_novel=s)[1]
                    for seed in range(10)]
            means.append(float(np.mean(accs)))
        drops = [means[i] - means[i + 1] for i in range(len(means) - 1)]
        ok = all(d <= 0.01 for d in drops)
        assert _verdict("criterion 6: mean accuracy over 10 seeds is "
                        "non-decreasing in the few-shot budget (tolerance one "
                        "point)", ok,
                        "means " + ", ".join(f"{s}:{m:.3f}" for s, m in zip(shots, means)))


class TestCriterion07CorpusStatisticsExact:
    def test_mined_dice_equals_plan_and_infinite_window_equals_hitcount(self):
        rng = np.random.default_rng(1007)
        sig = rng.integers(0, 2, size=(8, 10)).astype(float)
        sig[sig.sum(axis=1) == 0, 0] = 1.0
        sig[:, sig.sum(axis=0) == 0] = 1.0
        assoc = st.AssociationMatrix(tuple(f"c{i}" for i in range(8)),
                                     tuple(f"a{j}" for j in range(10)),
                                     sig, binary=True)
        plan = st.corpus_plan_from_associations(assoc, docs_per_pair=3,
                                                filler_docs=20, seed=7)
        index = st.build_corpus_index(st.gen_corpus(plan))
        exact = all(
            st.dice_hitcount(index, c, a) == plan.dice(c, a)
            for c in assoc.categories for a in assoc.attributes)

        vocab = [f"w{i}" for i in range(40)]
        docs = [(f"d{i}", " ".join(rng.choice(vocab, size=rng.integers(1, 25))))
                for i in range(300)]
        idx2 = st.build_corpus_index(docs)
        agree = 0
        for _ in range(1000):
            a, b = rng.choice(vocab, size=2)
            agree += st.dice_snippet(idx2, a, b, None) == st.dice_hitcount(idx2, a, b)
        ok = exact and agree == 1000
        assert _verdict("criterion 7: mined hit-count statistics equal the "
                        "corpus plan exactly; unbounded snippet windows equal "
                        "document hits on 1000 random pairs", ok,
                        f"plan exact: {exact}, window agreement {agree}/1000")


class TestCriterion08TaxonomyHandCase:
    def test_four_node_tree(self):
        tax = st.Taxonomy(
            parent={"root": None, "mid": "root", "n1": "mid", "n2": "mid"},
            prob={"root": 1.0, "mid": 0.25, "n1": 0.0625, "n2": 0.0625})
        value = st.lin_relatedness(tax, "n1", "n2")
        ok = abs(value - 0.5) <= 1e-12
        assert _verdict("criterion 8: probability-tree similarity of the "
                        "four-node hand case is 0.5", ok, f"value {value!r}")


class TestCriterion09RankingMetricHandCases:
    def test_auc_and_mean_ap(self):
        scores = [0.9, 0.4, 0.6, 0.1]
        auc_ok = (st.roc_auc(scores, [True, False, True, False]) == 1.0
                  and st.roc_auc(scores, [False, True, True, False]) == 0.5
                  and st.roc_auc(scores, [False, False, True, True]) == 0.25)

        front = st.CategoryScoreMatrix(("i0", "i1", "i2"), ("A",),
                                       np.array([[0.9], [0.8], [0.1]]))
        ap1 = st.mean_ap(front, {"i0": "A", "i1": "A", "i2": "B"})
        second = st.CategoryScoreMatrix(("i0", "i1", "i2", "i3"), ("A",),
                                        np.array([[0.9], [0.8], [0.7], [0.6]]))
        ap2 = st.mean_ap(second, {"i0": "B", "i1": "A", "i2": "B", "i3": "B"})
        pair = st.CategoryScoreMatrix(
            ("i0", "i1", "i2", "i3"), ("A", "B"),
            np.array([[0.9, 0.9], [0.1, 0.8], [0.8, 0.2], [0.7, 0.1]]))
        ap3 = st.mean_ap(pair, {"i0": "A", "i1": "B", "i2": "A", "i3": "A"})
        ap_ok = ap1 == 1.0 and ap2 == 0.5 and ap3 == 0.75

        ok = auc_ok and ap_ok
        assert _verdict("criterion 9: ranking metrics reproduce the 1.0/0.5/0.25 "
                        "AUC examples and the exact mean-AP hand cases", ok,
                        f"mean AP values {ap1:.1f}, {ap2:.1f}, {ap3:.2f}")


class TestCriterion10DistractorProtocol:
    def test_both_protocols_and_adversarial_bound(self):
        ds = st.gen_dataset(st.SynthConfig(
            n_known=4, n_novel=2, n_attributes=10, feature_dim=10,
            train_per_known=15, test_per_novel=20, distractor_per_known=10,
            flip_noise=0.1, cluster_noise=0.25, seed=10))
        model = st.train_attribute_classifiers(
            ds.features, ds.split.train_instances, ds.associations,
            st.TrainConfig(max_iters=300))
        scores = st.predict_attribute_scores(model, ds.features)
        cats = ds.associations.categories
        novel = [c for c in cats if c in ds.split.novel_categories]
        known = [c for c in cats if c in ds.split.known_categories]

        def sub(group):
            rows = [ds.associations.category_index(c) for c in group]
            return st.AssociationMatrix(tuple(group), ds.associations.attributes,
                                        ds.associations.values[rows], binary=True)

        zs = st.dap_scores(scores, sub(novel),
                           st.attribute_prior_from_associations(sub(known)))
        novel_rep = st.evaluate_zero_shot(zs, ds.labels, ds.split, "novel_only")
        mixed_rep = st.evaluate_zero_shot(zs, ds.labels, ds.split, "with_distractors")
        both_ok = (novel_rep.counts["distractor_instances"] == 0
                   and mixed_rep.counts["distractor_instances"] == 40
                   and set(novel_rep.per_category_auc) == set(novel))

        # adversarial: distractor rows outscore every novel row
        values = zs.values.copy()
        top = values.max() + 1.0
        distractors = [i for i, inst in enumerate(zs.instances)
                       if ds.split.test_instances.get(inst) in ds.split.known_categories]
        values[distractors] = top
        adv = st.CategoryScoreMatrix(zs.instances, zs.categories, values)
        adv_novel = st.evaluate_zero_shot(adv, ds.labels, ds.split, "novel_only")
        adv_mixed = st.evaluate_zero_shot(adv, ds.labels, ds.split, "with_distractors")
        bound_ok = adv_mixed.mean_auc <= adv_novel.mean_auc + 1e-9
        strictly_lower = adv_mixed.mean_auc < adv_novel.mean_auc

        ok = both_ok and bound_ok and strictly_lower
        assert _verdict("criterion 10: both evaluation protocols run on "
                        "synthetic data and adversarial distractors never "
                        "raise the reported AUC", ok,
                        f"novel {adv_novel.mean_auc:.3f} vs mixed "
                        f"{adv_mixed.mean_auc:.3f}")


class TestCriterion11PipelineDeterminism:
    def test_reruns_byte_identical(self, tmp_path, capsys):
        config = {
            "output_dir": str(tmp_path / "run1"),
            "seed": 11,
            "synth": {"n_known": 4, "n_novel": 2, "n_attributes": 8,
                      "feature_dim": 8, "train_per_known": 10,
                      "test_per_novel": 10, "fewshot_per_novel": 2,
                      "distractor_per_known": 3, "cluster_noise": 0.2,
                      "flip_noise": 0.1},
            "corpus": {"docs_per_pair": 3},
            "mine": {"measure": "dice_hit"},
            "assoc": {"policy": "global_threshold", "threshold": 0.05},
            "train": {"max_iters": 400},
            "transfer": {"method": "dap"},
            "pst": {"k": 8, "rho": 0.15, "alpha": 0.8},
            "eval": {"protocol": "both"},
        }
        path = tmp_path / "config.json"
        path.write_text(json.dumps(config))
        code1 = cli_main(["pipeline", "--config", str(path)])
        code2 = cli_main(["pipeline", "--config", str(path),
                          "--out-dir", str(tmp_path / "run2")])
        capsys.readouterr()
        identical = all(
            (tmp_path / "run1" / name).read_bytes()
            == (tmp_path / "run2" / name).read_bytes()
            for name in ("report.json", "zeroshot_scores.tsv", "pst_scores.tsv",
                         "model.json", "relatedness.tsv"))
        ok = code1 == 0 and code2 == 0 and identical
        assert _verdict("criterion 11: rerunning the pipeline produces "
                        "byte-identical reports and artifacts", ok,
                        f"exit codes {code1}/{code2}")
