"""File formats: TSV matrices, JSONL corpora, taxonomy TSV pairs, JSON models and reports.

All TSVs are UTF-8 and tab-separated. Matrix files put row identifiers in
the first column and leave the first header cell empty; numbers carry 9
significant digits. Lines starting with '#' are ``key=value`` metadata
comments.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import (
    AssociationMatrix,
    AttributeScoreMatrix,
    CategoryScoreMatrix,
    DatasetSplit,
    FeatureMatrix,
    ParseError,
    RelatednessMatrix,
)


def format_number(value: float) -> str:
    return f"{value:.9g}"


def _parse_bool(text: str) -> bool:
    if text == "true":
        return True
    if text == "false":
        return False
    raise ParseError(f"expected true/false, got {text!r}")


def write_matrix_tsv(path, row_ids: Sequence[str], col_ids: Sequence[str],
                     values: np.ndarray, tags: Mapping[str, str] | None = None) -> None:
    lines = []
    for key, val in (tags or {}).items():
        lines.append(f"# {key}={val}")
    lines.append("\t" + "\t".join(col_ids))
    for rid, row in zip(row_ids, np.asarray(values, dtype=float)):
        lines.append(rid + "\t" + "\t".join(format_number(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix_tsv(path):
    """Read a matrix TSV, returning (row_ids, col_ids, values, tags)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    tags: dict[str, str] = {}
    header = None
    row_ids: list[str] = []
    rows: list[list[float]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, val = body.partition("=")
                tags[key.strip()] = val.strip()
            continue
        cells = line.split("\t")
        if header is None:
            if cells[0] != "":
                raise ParseError(f"{path}:{lineno}: first header cell must be empty")
            header = cells[1:]
            continue
        if len(cells) != len(header) + 1:
            raise ParseError(f"{path}:{lineno}: expected {len(header) + 1} cells, got {len(cells)}")
        row_ids.append(cells[0])
        try:
            rows.append([float(c) for c in cells[1:]])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if header is None:
        raise ParseError(f"{path}: missing header row")
    values = np.array(rows, dtype=float).reshape(len(row_ids), len(header))
    return row_ids, header, values, tags


def write_association(path, assoc: AssociationMatrix) -> None:
    tags = {"type": "association", "binary": "true" if assoc.binary else "false"}
    write_matrix_tsv(path, assoc.categories, assoc.attributes, assoc.values, tags)


def read_association(path) -> AssociationMatrix:
    rows, cols, values, tags = read_matrix_tsv(path)
    binary = _parse_bool(tags.get("binary", "false"))
    return AssociationMatrix(tuple(rows), tuple(cols), values, binary=binary)


def write_relatedness(path, rel: RelatednessMatrix) -> None:
    tags = {"type": "relatedness", "measure": rel.measure}
    write_matrix_tsv(path, rel.categories, rel.attributes, rel.values, tags)


def read_relatedness(path) -> RelatednessMatrix:
    rows, cols, values, tags = read_matrix_tsv(path)
    return RelatednessMatrix(tuple(rows), tuple(cols), values, measure=tags.get("measure", "fused"))


def write_attribute_scores(path, scores: AttributeScoreMatrix) -> None:
    write_matrix_tsv(path, scores.instances, scores.attributes, scores.values,
                     {"type": "attribute_scores"})


def read_attribute_scores(path) -> AttributeScoreMatrix:
    rows, cols, values, _ = read_matrix_tsv(path)
    return AttributeScoreMatrix(tuple(rows), tuple(cols), values)


def write_features(path, features: FeatureMatrix) -> None:
    dims = tuple(f"x{i}" for i in range(features.dim))
    write_matrix_tsv(path, features.instances, dims, features.values, {"type": "features"})


def read_features(path) -> FeatureMatrix:
    rows, _, values, _ = read_matrix_tsv(path)
    return FeatureMatrix(tuple(rows), values)


def write_category_scores(path, scores: CategoryScoreMatrix) -> None:
    tags = {"type": "category_scores",
            "normalized": "true" if scores.normalized else "false"}
    write_matrix_tsv(path, scores.instances, scores.categories, scores.values, tags)


def read_category_scores(path) -> CategoryScoreMatrix:
    rows, cols, values, tags = read_matrix_tsv(path)
    normalized = _parse_bool(tags.get("normalized", "false"))
    return CategoryScoreMatrix(tuple(rows), tuple(cols), values, normalized=normalized)


def write_labels(path, labels: Mapping[str, str]) -> None:
    """Instance -> category map as a two-column TSV."""
    lines = ["\tcategory"]
    for inst, cat in labels.items():
        lines.append(f"{inst}\t{cat}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_labels(path) -> dict[str, str]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    labels: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip() or line.startswith("#") or line.startswith("\t"):
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise ParseError(f"{path}:{lineno}: expected 2 cells, got {len(cells)}")
        if cells[0] in labels:
            raise ParseError(f"{path}:{lineno}: duplicate instance {cells[0]!r}")
        labels[cells[0]] = cells[1]
    return labels


def write_corpus_jsonl(path, documents: Sequence[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc_id, text in documents:
            fh.write(json.dumps({"id": doc_id, "text": text}, sort_keys=True) + "\n")


def read_corpus_jsonl(path) -> list[tuple[str, str]]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    docs: list[tuple[str, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "id" not in obj or "text" not in obj:
            raise ParseError(f"{path}:{lineno}: corpus lines need 'id' and 'text' fields")
        docs.append((str(obj["id"]), str(obj["text"])))
    return docs


def write_taxonomy(edges_path, probs_path, parent: Mapping[str, str | None],
                   prob: Mapping[str, float]) -> None:
    edge_lines = [f"{child}\t{par}" for child, par in parent.items() if par is not None]
    Path(edges_path).write_text("\n".join(edge_lines) + "\n", encoding="utf-8")
    prob_lines = [f"{node}\t{format_number(p)}" for node, p in prob.items()]
    Path(probs_path).write_text("\n".join(prob_lines) + "\n", encoding="utf-8")


def read_taxonomy(edges_path, probs_path):
    """Read the edge-list / probability TSV pair into a Taxonomy."""
    from .relatedness import Taxonomy

    parent: dict[str, str | None] = {}
    edges_path = Path(edges_path)
    try:
        edge_text = edges_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {edges_path}: {exc}") from exc
    for lineno, line in enumerate(edge_text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise ParseError(f"{edges_path}:{lineno}: expected child<TAB>parent")
        child, par = cells
        if child in parent:
            raise ParseError(f"{edges_path}:{lineno}: duplicate child {child!r}")
        parent[child] = par
        parent.setdefault(par, None)
    for node in list(parent):
        parent.setdefault(node, None)

    probs_path = Path(probs_path)
    try:
        prob_text = probs_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {probs_path}: {exc}") from exc
    prob: dict[str, float] = {}
    for lineno, line in enumerate(prob_text.splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        cells = line.split("\t")
        if len(cells) != 2:
            raise ParseError(f"{probs_path}:{lineno}: expected node<TAB>probability")
        try:
            prob[cells[0]] = float(cells[1])
        except ValueError as exc:
            raise ParseError(f"{probs_path}:{lineno}: {exc}") from exc
    return Taxonomy(parent=parent, prob=prob)


def write_split(path, split: DatasetSplit) -> None:
    doc = {
        "known_categories": sorted(split.known_categories),
        "novel_categories": sorted(split.novel_categories),
        "train_instances": dict(sorted(split.train_instances.items())),
        "test_instances": dict(sorted(split.test_instances.items())),
        "fewshot_instances": dict(sorted(split.fewshot_instances.items())),
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_split(path) -> DatasetSplit:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    required = {"known_categories", "novel_categories", "train_instances", "test_instances"}
    missing = required - set(doc)
    if missing:
        raise ParseError(f"{path}: missing split fields: {sorted(missing)}")
    return DatasetSplit(
        known_categories=frozenset(doc["known_categories"]),
        novel_categories=frozenset(doc["novel_categories"]),
        train_instances=doc["train_instances"],
        test_instances=doc["test_instances"],
        fewshot_instances=doc.get("fewshot_instances", {}),
    )


def save_model(path, model) -> None:
    """Serialize an AttributeModel to JSON (loss histories are not persisted)."""
    meta = dict(model.metadata)
    meta.pop("loss_history", None)
    doc = {
        "attributes": list(model.attributes),
        "weights": model.weights.tolist(),
        "biases": model.biases.tolist(),
        "feature_mean": model.feature_mean.tolist(),
        "feature_std": model.feature_std.tolist(),
        "metadata": meta,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_model(path):
    from .classify import AttributeModel

    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    try:
        return AttributeModel(
            attributes=tuple(doc["attributes"]),
            weights=np.array(doc["weights"], dtype=float),
            biases=np.array(doc["biases"], dtype=float),
            feature_mean=np.array(doc["feature_mean"], dtype=float),
            feature_std=np.array(doc["feature_std"], dtype=float),
            metadata=doc.get("metadata", {}),
        )
    except KeyError as exc:
        raise ParseError(f"{path}: missing model field {exc}") from exc


def report_to_dict(report) -> dict:
    return {
        "protocol": report.protocol,
        "per_category_auc": dict(sorted(report.per_category_auc.items())),
        "mean_auc": report.mean_auc,
        "accuracy": report.accuracy,
        "per_category_ap": dict(sorted(report.per_category_ap.items())),
        "mean_ap": report.mean_ap,
        "counts": dict(sorted(report.counts.items())),
    }


def write_report(path, report) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_report_tsv(path, report) -> None:
    """Flat per-category metrics: category, auc, ap."""
    lines = ["\tauc\tap"]
    for cat in sorted(report.per_category_auc):
        auc = format_number(report.per_category_auc[cat])
        ap = format_number(report.per_category_ap.get(cat, float("nan")))
        lines.append(f"{cat}\t{auc}\t{ap}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_graph_edges(path, graph, instance_ids: Sequence[str] | None = None) -> None:
    """Export the symmetric weight matrix as an (i, j, weight) TSV edge list."""
    coo = graph.W.tocoo()
    lines = []
    for i, j, w in zip(coo.row, coo.col, coo.data):
        if i < j:
            a = instance_ids[i] if instance_ids is not None else str(i)
            b = instance_ids[j] if instance_ids is not None else str(j)
            lines.append(f"{a}\t{b}\t{format_number(w)}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
