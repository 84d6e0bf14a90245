"""Command-line interface.

Subcommands cover each pipeline step (mine, assoc, train, zeroshot, pst,
eval, synth) plus an end-to-end ``pipeline`` driver configured by one
JSON file. Exit codes: 0 success, 2 parse or I/O failure, 3 validation
failure, 4 non-convergence under --strict. Errors go to stderr as a
single JSON line with ``error``, ``code``, and ``stage`` fields. All
outputs are deterministic functions of inputs and seeds, so reruns are
byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import io
from .classify import TrainConfig, predict_attribute_scores, train_attribute_classifiers
from .core import (
    AssociationMatrix,
    AttributeScoreMatrix,
    CategoryScoreMatrix,
    ParseError,
    RelatednessMatrix,
    ValidationError,
)
from .metrics import evaluate_zero_shot
from .propagate import PropagationConfig, pst
from .relatedness import binarize, build_corpus_index, mine_relatedness, tfidf_associations
from .synth import SynthConfig, corpus_plan_from_associations, gen_corpus, gen_dataset
from .transfer import (
    attribute_prior_from_associations,
    dap_scores,
    direct_similarity_scores,
    hierarchy_transfer,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_NO_CONVERGENCE = 4

_PARSE_ERRORS = (ParseError, OSError, json.JSONDecodeError)


class StageError(Exception):
    """A pipeline stage failed; carries the stage name and the original error."""

    def __init__(self, stage: str, original: Exception):
        super().__init__(f"{stage}: {original}")
        self.stage = stage
        self.original = original


@contextmanager
def _stage(name: str):
    try:
        yield
    except StageError:
        raise
    except (ValidationError, *_PARSE_ERRORS) as exc:
        raise StageError(name, exc) from exc


def _emit_error(message: str, code: int, stage: str) -> None:
    line = json.dumps({"error": message, "code": code, "stage": stage}, sort_keys=True)
    print(line, file=sys.stderr)


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


def _load_json(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    return doc


def _load_terms(path) -> tuple[list[str], list[str]]:
    doc = _load_json(path)
    for key in ("categories", "attributes"):
        if key not in doc or not isinstance(doc[key], list):
            raise ParseError(f"{path}: terms file needs a {key!r} list")
    return [str(t) for t in doc["categories"]], [str(t) for t in doc["attributes"]]


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ValidationError(f"unknown {where} keys: {sorted(unknown)}")


# ---------------------------------------------------------------------------
# Single-step commands


def cmd_mine(args) -> int:
    categories, attributes = _load_terms(args.terms)
    docs = io.read_corpus_jsonl(args.corpus)
    if args.measure == "tfidf":
        groups: dict[str, list[str]] = {}
        for doc_id, text in docs:
            groups.setdefault(doc_id.split("/", 1)[0], []).append(text)
        script_docs = {c: groups.get(c, []) for c in categories}
        rel = tfidf_associations(script_docs, attributes)
    else:
        index = build_corpus_index(docs)
        taxonomy = None
        if args.measure == "lin":
            if not (args.taxonomy_edges and args.taxonomy_probs):
                raise ValidationError("lin measure needs --taxonomy-edges and --taxonomy-probs")
            taxonomy = io.read_taxonomy(args.taxonomy_edges, args.taxonomy_probs)
        window = None if args.window == 0 else args.window
        rel = mine_relatedness(index, categories, attributes, args.measure,
                               window=window, taxonomy=taxonomy)
    io.write_relatedness(args.out, rel)
    return EXIT_OK


def cmd_assoc(args) -> int:
    rel = io.read_relatedness(args.relatedness)
    assoc = binarize(rel, args.policy, k=args.k, threshold=args.threshold)
    io.write_association(args.out, assoc)
    return EXIT_OK


def _unconverged_attributes(model) -> list[str]:
    iters = model.metadata.get("iterations", [])
    limit = model.metadata.get("config", {}).get("max_iters")
    return [a for a, n in zip(model.attributes, iters) if limit is not None and n >= limit]


def cmd_train(args) -> int:
    features = io.read_features(args.features)
    labels = io.read_labels(args.labels)
    assoc = io.read_association(args.assoc)
    config = TrainConfig(l2=args.l2, lr=args.lr, max_iters=args.max_iters,
                         tol=args.tol, seed=args.seed)
    model = train_attribute_classifiers(features, labels, assoc, config)
    io.save_model(args.out, model)
    stuck = _unconverged_attributes(model)
    if stuck:
        _warn(f"{len(stuck)} attribute classifiers hit the iteration cap: {stuck[:5]}")
        if args.strict:
            return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_zeroshot(args) -> int:
    model = io.load_model(args.model)
    features = io.read_features(args.features)
    novel_assoc = io.read_association(args.assoc)
    prior_assoc = io.read_association(args.prior_assoc) if args.prior_assoc else novel_assoc
    prior = attribute_prior_from_associations(prior_assoc)
    scores = predict_attribute_scores(model, features)
    zs = dap_scores(scores, novel_assoc, prior)
    io.write_category_scores(args.out, zs)
    return EXIT_OK


def cmd_pst(args) -> int:
    zs = io.read_category_scores(args.zeroshot)
    vectors = io.read_attribute_scores(args.vectors)
    fewshot = io.read_labels(args.fewshot) if args.fewshot else {}
    config = PropagationConfig(k=args.k, kernel=args.kernel, sigma=args.sigma,
                               alpha=args.alpha, tol=args.tol,
                               max_iters=args.max_iters, rho=args.rho)
    result = pst(zs, vectors, fewshot, config)
    io.write_category_scores(args.out, result.scores)
    if args.predictions:
        io.write_labels(args.predictions, result.predictions)
    if not result.converged:
        _warn(f"propagation stopped after {result.iterations} sweeps without converging")
        if args.strict:
            return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_eval(args) -> int:
    scores = io.read_category_scores(args.scores)
    truth = io.read_labels(args.truth)
    split = io.read_split(args.split)
    protocols = ["novel_only", "with_distractors"] if args.protocol == "both" else [args.protocol]
    doc = {p: io.report_to_dict(evaluate_zero_shot(scores, truth, split, p))
           for p in protocols}
    if args.protocol != "both":
        doc = doc[args.protocol]
    Path(args.out).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                              encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    config = SynthConfig(
        n_known=args.n_known, n_novel=args.n_novel,
        n_attributes=args.n_attributes, feature_dim=args.feature_dim,
        train_per_known=args.train_per_known, test_per_novel=args.test_per_novel,
        distractor_per_known=args.distractor_per_known,
        fewshot_per_novel=args.fewshot_per_novel,
        flip_noise=args.flip_noise, cluster_noise=args.cluster_noise,
        seed=args.seed)
    ds = gen_dataset(config)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_features(out / "features.tsv", ds.features)
    io.write_labels(out / "labels.tsv", ds.labels)
    io.write_association(out / "associations.tsv", ds.associations)
    io.write_split(out / "split.json", ds.split)
    if args.corpus_docs_per_pair > 0:
        plan = corpus_plan_from_associations(ds.associations,
                                             docs_per_pair=args.corpus_docs_per_pair,
                                             filler_docs=args.corpus_filler_docs,
                                             seed=config.seed)
        io.write_corpus_jsonl(out / "corpus.jsonl", gen_corpus(plan))
        terms = {"categories": list(ds.associations.categories),
                 "attributes": list(ds.associations.attributes)}
        (out / "terms.json").write_text(json.dumps(terms, indent=2, sort_keys=True) + "\n",
                                        encoding="utf-8")
    return EXIT_OK


# ---------------------------------------------------------------------------
# End-to-end pipeline


_TOP_KEYS = {"output_dir", "seed", "synth", "data", "corpus", "mine", "assoc",
             "train", "transfer", "pst", "eval"}
_SYNTH_KEYS = {"n_known", "n_novel", "n_attributes", "feature_dim",
               "train_per_known", "test_per_novel", "distractor_per_known",
               "fewshot_per_novel", "flip_noise", "cluster_noise", "seed"}


def _sub_association(assoc: AssociationMatrix, categories) -> AssociationMatrix:
    rows = [assoc.category_index(c) for c in categories]
    return AssociationMatrix(tuple(categories), assoc.attributes,
                             assoc.values[rows], binary=assoc.binary)


def _signature_relatedness(assoc: AssociationMatrix, novel, known) -> RelatednessMatrix:
    # Dice overlap of binary attribute signatures, novel rows x known columns.
    if not assoc.binary:
        raise ValidationError("similarity transfer needs binary associations")
    V = assoc.values
    idx = {c: i for i, c in enumerate(assoc.categories)}
    out = np.zeros((len(novel), len(known)))
    for i, nc in enumerate(novel):
        for j, kc in enumerate(known):
            a, b = V[idx[nc]], V[idx[kc]]
            denom = a.sum() + b.sum()
            out[i, j] = 2.0 * float((a * b).sum()) / denom if denom > 0 else 0.0
    return RelatednessMatrix(tuple(novel), tuple(known), out, measure="fused")


def run_pipeline(config_path, out_dir_override, strict: bool) -> int:
    with _stage("config"):
        cfg = _load_json(config_path)
        _check_keys(cfg, _TOP_KEYS, "config")
        # paths inside the config resolve against the config file itself;
        # the --out-dir flag resolves against the working directory as usual
        base = Path(config_path).resolve().parent
        if out_dir_override:
            out = Path(out_dir_override)
        elif cfg.get("output_dir"):
            out = base / cfg["output_dir"]
        else:
            raise ValidationError("no output directory (config output_dir or --out-dir)")
        out.mkdir(parents=True, exist_ok=True)
        seed = int(cfg.get("seed", 0))

    with _stage("data"):
        if ("synth" in cfg) == ("data" in cfg):
            raise ValidationError("config needs exactly one of 'synth' or 'data'")
        if "synth" in cfg:
            sec = dict(cfg["synth"])
            _check_keys(sec, _SYNTH_KEYS, "synth")
            sec.setdefault("seed", seed)
            ds = gen_dataset(SynthConfig(**sec))
            features, labels = ds.features, ds.labels
            base_assoc, split = ds.associations, ds.split
            io.write_features(out / "features.tsv", features)
            io.write_labels(out / "labels.tsv", labels)
            io.write_association(out / "associations.tsv", base_assoc)
            io.write_split(out / "split.json", split)
        else:
            sec = dict(cfg["data"])
            _check_keys(sec, {"features", "labels", "associations", "split"}, "data")
            for key in ("features", "labels", "associations", "split"):
                if key not in sec:
                    raise ValidationError(f"data section needs {key!r}")
            features = io.read_features(base / sec["features"])
            labels = io.read_labels(base / sec["labels"])
            base_assoc = io.read_association(base / sec["associations"])
            split = io.read_split(base / sec["split"])

    corpus = None
    with _stage("corpus"):
        if "corpus" in cfg:
            sec = dict(cfg["corpus"])
            _check_keys(sec, {"path", "docs_per_pair", "filler_docs"}, "corpus")
            if "path" in sec:
                corpus = io.read_corpus_jsonl(base / sec["path"])
            else:
                plan = corpus_plan_from_associations(
                    base_assoc,
                    docs_per_pair=int(sec.get("docs_per_pair", 3)),
                    filler_docs=int(sec.get("filler_docs", 0)),
                    seed=seed)
                corpus = gen_corpus(plan)
                io.write_corpus_jsonl(out / "corpus.jsonl", corpus)

    rel = None
    with _stage("mine"):
        if "mine" in cfg:
            if corpus is None:
                raise ValidationError("mining needs a corpus section")
            sec = dict(cfg["mine"])
            _check_keys(sec, {"measure", "window", "taxonomy_edges", "taxonomy_probs"}, "mine")
            measure = sec.get("measure", "dice_hit")
            taxonomy = None
            if measure == "lin":
                if "taxonomy_edges" not in sec or "taxonomy_probs" not in sec:
                    raise ValidationError("lin measure needs taxonomy_edges and taxonomy_probs")
                taxonomy = io.read_taxonomy(base / sec["taxonomy_edges"],
                                            base / sec["taxonomy_probs"])
            index = build_corpus_index(corpus)
            window = sec.get("window", 20)
            window = None if window in (0, None) else int(window)
            rel = mine_relatedness(index, base_assoc.categories, base_assoc.attributes,
                                   measure, window=window, taxonomy=taxonomy)
            io.write_relatedness(out / "relatedness.tsv", rel)

    with _stage("assoc"):
        if rel is not None:
            if "assoc" not in cfg:
                raise ValidationError("mined relatedness needs an assoc section to binarize")
            sec = dict(cfg["assoc"])
            _check_keys(sec, {"policy", "k", "threshold"}, "assoc")
            if "policy" not in sec:
                raise ValidationError("assoc section needs a policy")
            assoc = binarize(rel, sec["policy"], k=sec.get("k"),
                             threshold=sec.get("threshold"))
            io.write_association(out / "associations_mined.tsv", assoc)
        else:
            if "assoc" in cfg:
                raise ValidationError("assoc section given but nothing was mined")
            assoc = base_assoc

    with _stage("train"):
        sec = dict(cfg.get("train", {}))
        _check_keys(sec, {"l2", "lr", "max_iters", "tol"}, "train")
        tconfig = TrainConfig(seed=seed, **sec)
        model = train_attribute_classifiers(features, split.train_instances, assoc, tconfig)
        io.save_model(out / "model.json", model)
        stuck = _unconverged_attributes(model)

    with _stage("score"):
        attr_scores = predict_attribute_scores(model, features)
        io.write_attribute_scores(out / "attribute_scores.tsv", attr_scores)

    with _stage("transfer"):
        sec = dict(cfg.get("transfer", {}))
        _check_keys(sec, {"method", "top_k", "taxonomy_edges", "taxonomy_probs",
                          "attachments", "mode"}, "transfer")
        method = sec.get("method", "dap")
        known = [c for c in assoc.categories if c in split.known_categories]
        novel = [c for c in assoc.categories if c in split.novel_categories]
        if not known or not novel:
            raise ValidationError("associations must cover known and novel categories")
        known_assoc = _sub_association(assoc, known)
        novel_assoc = _sub_association(assoc, novel)
        prior = attribute_prior_from_associations(known_assoc)
        if method == "dap":
            zeroshot = dap_scores(attr_scores, novel_assoc, prior)
        elif method == "sim":
            known_scores = dap_scores(attr_scores, known_assoc, prior)
            rel_nk = _signature_relatedness(assoc, novel, known)
            zeroshot = direct_similarity_scores(known_scores, rel_nk,
                                                top_k=int(sec.get("top_k", 5)))
        elif method == "hier":
            for key in ("taxonomy_edges", "taxonomy_probs", "attachments"):
                if key not in sec:
                    raise ValidationError(f"hier transfer needs {key!r}")
            taxonomy = io.read_taxonomy(base / sec["taxonomy_edges"],
                                        base / sec["taxonomy_probs"])
            known_scores = dap_scores(attr_scores, known_assoc, prior)
            zeroshot = hierarchy_transfer(taxonomy, known_scores, sec["attachments"],
                                          mode=sec.get("mode", "all"))
        else:
            raise ValidationError(f"unknown transfer method: {method!r}")
        io.write_category_scores(out / "zeroshot_scores.tsv", zeroshot)

    pst_result = None
    with _stage("pst"):
        if "pst" in cfg:
            sec = dict(cfg["pst"])
            _check_keys(sec, {"k", "kernel", "sigma", "alpha", "tol", "max_iters", "rho"},
                        "pst")
            pconfig = PropagationConfig(**sec)
            rows = [inst for inst in features.instances
                    if inst in split.fewshot_instances or inst in split.test_instances]
            if not rows:
                raise ValidationError("no few-shot or test instances to propagate over")
            zindex = {inst: i for i, inst in enumerate(zeroshot.instances)}
            sel = [zindex[r] for r in rows]
            zs_sub = CategoryScoreMatrix(tuple(rows), zeroshot.categories,
                                         zeroshot.values[sel])
            vec_sub = AttributeScoreMatrix(tuple(rows), attr_scores.attributes,
                                           attr_scores.values[sel])
            pst_result = pst(zs_sub, vec_sub, split.fewshot_instances, pconfig)
            io.write_category_scores(out / "pst_scores.tsv", pst_result.scores)
            io.write_labels(out / "pst_predictions.tsv", pst_result.predictions)

    with _stage("eval"):
        sec = dict(cfg.get("eval", {}))
        _check_keys(sec, {"protocol"}, "eval")
        protocol = sec.get("protocol", "novel_only")
        if protocol not in ("novel_only", "with_distractors", "both"):
            raise ValidationError(f"unknown protocol: {protocol!r}")
        protocols = ["novel_only", "with_distractors"] if protocol == "both" else [protocol]
        results: dict[str, dict] = {"zeroshot": {}}
        for p in protocols:
            results["zeroshot"][p] = io.report_to_dict(
                evaluate_zero_shot(zeroshot, labels, split, p))
        if pst_result is not None:
            results["pst"] = {p: io.report_to_dict(
                evaluate_zero_shot(pst_result.scores, labels, split, p))
                for p in protocols}
        report = {
            "seed": seed,
            "converged": {
                "train": not stuck,
                "pst": None if pst_result is None else pst_result.converged,
            },
            "results": results,
        }
        (out / "report.json").write_text(
            json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    unconverged = bool(stuck) or (pst_result is not None and not pst_result.converged)
    if unconverged:
        _warn("some stages stopped at their iteration caps (see report.json)")
        if strict:
            return EXIT_NO_CONVERGENCE
    return EXIT_OK


def cmd_pipeline(args) -> int:
    return run_pipeline(args.config, args.out_dir, args.strict)


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="semtransfer",
        description="Zero- and few-shot category recognition from attribute knowledge.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mine", help="mine a relatedness matrix from a corpus")
    p.add_argument("--corpus", required=True, help="JSONL documents with id/text fields")
    p.add_argument("--terms", required=True, help="JSON with categories/attributes lists")
    p.add_argument("--measure", required=True,
                   choices=["dice_hit", "dice_snippet", "esa", "lin", "tfidf"])
    p.add_argument("--window", type=int, default=20,
                   help="snippet window in tokens; 0 means whole documents")
    p.add_argument("--taxonomy-edges", help="child<TAB>parent edge list (lin)")
    p.add_argument("--taxonomy-probs", help="node<TAB>probability list (lin)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_mine)

    p = sub.add_parser("assoc", help="binarize relatedness into associations")
    p.add_argument("--relatedness", required=True)
    p.add_argument("--policy", required=True,
                   choices=["per_attribute_topk", "global_threshold", "per_attribute_mean"])
    p.add_argument("--k", type=int)
    p.add_argument("--threshold", type=float)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_assoc)

    p = sub.add_parser("train", help="train per-attribute classifiers")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--assoc", required=True)
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--strict", action="store_true",
                   help="exit 4 if any classifier hits the iteration cap")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("zeroshot", help="score novel categories from attribute evidence")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--assoc", required=True, help="binary novel-category associations")
    p.add_argument("--prior-assoc", help="associations for the attribute prior "
                                         "(defaults to --assoc)")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_zeroshot)

    p = sub.add_parser("pst", help="refine scores by graph label propagation")
    p.add_argument("--zeroshot", required=True, help="category score TSV")
    p.add_argument("--vectors", required=True, help="attribute score TSV (graph coordinates)")
    p.add_argument("--fewshot", help="labels TSV of clamped instances")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--kernel", choices=["gaussian", "cosine"], default="gaussian")
    p.add_argument("--sigma", type=float)
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iters", type=int, default=1000)
    p.add_argument("--rho", type=float, default=0.05)
    p.add_argument("--predictions", help="also write argmax labels TSV here")
    p.add_argument("--strict", action="store_true",
                   help="exit 4 if propagation does not converge")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_pst)

    p = sub.add_parser("eval", help="evaluate category scores against truth")
    p.add_argument("--scores", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--split", required=True)
    p.add_argument("--protocol", choices=["novel_only", "with_distractors", "both"],
                   default="novel_only")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("synth", help="generate a synthetic benchmark")
    p.add_argument("--n-known", type=int, default=6)
    p.add_argument("--n-novel", type=int, default=2)
    p.add_argument("--n-attributes", type=int, default=12)
    p.add_argument("--feature-dim", type=int, default=12)
    p.add_argument("--train-per-known", type=int, default=30)
    p.add_argument("--test-per-novel", type=int, default=40)
    p.add_argument("--distractor-per-known", type=int, default=0)
    p.add_argument("--fewshot-per-novel", type=int, default=0)
    p.add_argument("--flip-noise", type=float, default=0.0)
    p.add_argument("--cluster-noise", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus-docs-per-pair", type=int, default=0,
                   help="if > 0, also write a corpus realizing the associations")
    p.add_argument("--corpus-filler-docs", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("pipeline", help="run the full pipeline from one JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", help="overrides output_dir from the config")
    p.add_argument("--strict", action="store_true",
                   help="exit 4 if any stage stops at its iteration cap")
    p.set_defaults(handler=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except StageError as exc:
        code = EXIT_VALIDATION if isinstance(exc.original, ValidationError) else EXIT_PARSE
        _emit_error(str(exc), code, exc.stage)
        return code
    except _PARSE_ERRORS as exc:
        _emit_error(str(exc), EXIT_PARSE, args.command)
        return EXIT_PARSE
    except ValidationError as exc:
        _emit_error(str(exc), EXIT_VALIDATION, args.command)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
