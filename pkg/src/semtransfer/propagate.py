"""Few-shot refinement: label propagation over a kNN instance graph.

Zero-shot category scores pick seed instances per category; the seeds
diffuse over a symmetrically normalized similarity graph,
F <- alpha * S F + (1 - alpha) * Y, with few-shot labeled rows clamped
to their one-hot assignment after every sweep. For unclamped seeds the
fixed point has the closed form (1 - alpha) (I - alpha S)^(-1) Y, which
doubles as an independent check on the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.spatial.distance import pdist, squareform

from .core import (
    AttributeScoreMatrix,
    CategoryScoreMatrix,
    ValidationError,
)

KERNELS = ("gaussian", "cosine")


@dataclass(frozen=True)
class PropagationConfig:
    k: int = 10
    kernel: str = "gaussian"
    sigma: float | None = None
    alpha: float = 0.8
    tol: float = 1e-6
    max_iters: int = 1000
    rho: float = 0.05

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be >= 1, got {self.k}")
        if self.kernel not in KERNELS:
            raise ValidationError(f"unknown kernel: {self.kernel!r}")
        if self.sigma is not None and not self.sigma > 0:
            raise ValidationError(f"sigma must be positive, got {self.sigma}")
        if not (0.0 <= self.alpha < 1.0):
            raise ValidationError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.tol > 0:
            raise ValidationError(f"tol must be > 0, got {self.tol}")
        if self.max_iters < 1:
            raise ValidationError(f"max_iters must be >= 1, got {self.max_iters}")
        if not (0.0 < self.rho <= 1.0):
            raise ValidationError(f"rho must lie in (0, 1], got {self.rho}")


@dataclass(frozen=True, eq=False)
class SimilarityGraph:
    """Symmetric weights W and the normalized operator S = D^-1/2 W D^-1/2."""

    n: int
    W: sp.csr_matrix
    S: sp.csr_matrix

    def __post_init__(self):
        if self.W.shape != (self.n, self.n) or self.S.shape != (self.n, self.n):
            raise ValidationError("graph matrices must be n x n")
        deg = np.asarray(self.W.sum(axis=1)).ravel()
        isolated = np.nonzero(deg <= 0)[0]
        if isolated.size:
            raise ValidationError(f"isolated graph nodes: {isolated.tolist()}")


def _median_heuristic(vectors: np.ndarray) -> float:
    # Median positive pairwise distance; strided subsample keeps this cheap
    # and deterministic for big inputs.
    n = vectors.shape[0]
    if n > 1000:
        stride = int(np.ceil(n / 1000))
        vectors = vectors[::stride]
    d = pdist(vectors)
    d = d[d > 0]
    if d.size == 0:
        return 1.0
    return float(np.median(d))


def build_knn_graph(vectors, k: int, kernel: str = "gaussian",
                    sigma: float | None = None) -> SimilarityGraph:
    """Mutual-max kNN graph: each node keeps its k most similar neighbors,
    and an edge survives if either endpoint selected it."""
    if isinstance(vectors, AttributeScoreMatrix):
        vectors = vectors.values
    X = np.asarray(vectors, dtype=float)
    if X.ndim != 2:
        raise ValidationError(f"vectors must be 2-d, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise ValidationError(f"graph needs at least 2 nodes, got {n}")
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if kernel not in KERNELS:
        raise ValidationError(f"unknown kernel: {kernel!r}")
    k = min(k, n - 1)

    if kernel == "gaussian":
        if sigma is None:
            sigma = _median_heuristic(X)
        d2 = squareform(pdist(X, "sqeuclidean"))
        sim = np.exp(-d2 / (2.0 * sigma * sigma))
    else:
        norms = np.linalg.norm(X, axis=1, keepdims=True)
        safe = np.where(norms < 1e-12, 1.0, norms)
        unit = X / safe
        sim = np.clip(unit @ unit.T, 0.0, None)
    np.fill_diagonal(sim, -np.inf)

    rows = np.repeat(np.arange(n), k)
    cols = np.argsort(-sim, axis=1, kind="stable")[:, :k].ravel()
    vals = sim[rows, cols]
    vals = np.where(np.isfinite(vals), np.maximum(vals, 0.0), 0.0)
    W = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    W = W.maximum(W.T)
    W.eliminate_zeros()

    deg = np.asarray(W.sum(axis=1)).ravel()
    if (deg <= 0).any():
        bad = np.nonzero(deg <= 0)[0]
        raise ValidationError(f"isolated graph nodes: {bad.tolist()}")
    dinv = 1.0 / np.sqrt(deg)
    D = sp.diags(dinv)
    S = (D @ W @ D).tocsr()
    return SimilarityGraph(n=n, W=W, S=S)


@dataclass(frozen=True, eq=False)
class SeedLabels:
    """Per-category seed weights Y plus the rows held fixed while propagating."""

    instances: tuple[str, ...]
    categories: tuple[str, ...]
    Y: np.ndarray
    clamped: frozenset[int] = frozenset()

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        if Y.shape != (len(self.instances), len(self.categories)):
            raise ValidationError(
                f"seed matrix must be {(len(self.instances), len(self.categories))}, got {Y.shape}")
        if not np.isfinite(Y).all() or (Y < 0).any():
            raise ValidationError("seed weights must be finite and non-negative")
        bad = [i for i in self.clamped if not 0 <= i < len(self.instances)]
        if bad:
            raise ValidationError(f"clamped rows out of range: {bad}")
        Y.setflags(write=False)
        object.__setattr__(self, "Y", Y)


def seed_from_zeroshot(zeroshot: CategoryScoreMatrix, rho: float) -> SeedLabels:
    """Seed the ceil(rho * n) highest scoring instances per category.

    Seed weights are the column scores min-max rescaled to [0, 1]; a
    constant column yields no usable seeds (all-zero weights).
    """
    if not (0.0 < rho <= 1.0):
        raise ValidationError(f"rho must lie in (0, 1], got {rho}")
    V = zeroshot.values
    n, m = V.shape
    take = int(np.ceil(rho * n))
    Y = np.zeros((n, m))
    for j in range(m):
        col = V[:, j]
        lo, hi = float(col.min()), float(col.max())
        if hi - lo <= 0.0:
            continue
        scaled = (col - lo) / (hi - lo)
        top = np.argsort(-col, kind="stable")[:take]
        Y[top, j] = scaled[top]
    return SeedLabels(zeroshot.instances, zeroshot.categories, Y)


def clamp_fewshot(seeds: SeedLabels, labels: Mapping[str, str]) -> SeedLabels:
    """Overwrite labeled rows with one-hot targets and pin them."""
    if not labels:
        return seeds
    inst_index = {inst: i for i, inst in enumerate(seeds.instances)}
    cat_index = {cat: j for j, cat in enumerate(seeds.categories)}
    Y = seeds.Y.copy()
    clamped = set(seeds.clamped)
    for inst, cat in labels.items():
        if inst not in inst_index:
            raise ValidationError(f"labeled instance not in graph: {inst!r}")
        if cat not in cat_index:
            raise ValidationError(f"label category not scored: {cat!r}")
        i = inst_index[inst]
        Y[i] = 0.0
        Y[i, cat_index[cat]] = 1.0
        clamped.add(i)
    return SeedLabels(seeds.instances, seeds.categories, Y, frozenset(clamped))


@dataclass(frozen=True, eq=False)
class PropagationResult:
    scores: CategoryScoreMatrix
    converged: bool
    iterations: int


def propagate(graph: SimilarityGraph, seeds: SeedLabels,
              config: PropagationConfig = PropagationConfig()) -> PropagationResult:
    """Iterate F <- alpha S F + (1 - alpha) Y until the max-abs change
    drops below tol, re-clamping pinned rows after every sweep."""
    if graph.n != len(seeds.instances):
        raise ValidationError(
            f"graph has {graph.n} nodes but seeds cover {len(seeds.instances)} instances")
    Y = seeds.Y
    clamped = sorted(seeds.clamped)
    alpha = config.alpha
    F = Y.copy()
    if clamped:
        F[clamped] = Y[clamped]
    converged = False
    iterations = 0
    for _ in range(config.max_iters):
        Fn = alpha * (graph.S @ F) + (1.0 - alpha) * Y
        if clamped:
            Fn[clamped] = Y[clamped]
        delta = float(np.abs(Fn - F).max())
        F = Fn
        iterations += 1
        if delta < config.tol:
            converged = True
            break
    scores = CategoryScoreMatrix(seeds.instances, seeds.categories, F)
    return PropagationResult(scores=scores, converged=converged, iterations=iterations)


def propagate_closed_form(graph: SimilarityGraph, seeds: SeedLabels,
                          alpha: float) -> CategoryScoreMatrix:
    """Exact fixed point (1 - alpha) (I - alpha S)^(-1) Y for unclamped seeds."""
    if seeds.clamped:
        raise ValidationError("closed form requires unclamped seeds")
    if not (0.0 <= alpha < 1.0):
        raise ValidationError(f"alpha must lie in [0, 1), got {alpha}")
    if graph.n != len(seeds.instances):
        raise ValidationError(
            f"graph has {graph.n} nodes but seeds cover {len(seeds.instances)} instances")
    A = (sp.identity(graph.n, format="csc") - alpha * graph.S.tocsc())
    solver = splu(A.tocsc())
    F = (1.0 - alpha) * solver.solve(seeds.Y)
    return CategoryScoreMatrix(seeds.instances, seeds.categories, F)


@dataclass(frozen=True, eq=False)
class PstResult:
    predictions: dict[str, str]
    scores: CategoryScoreMatrix
    converged: bool
    iterations: int


def pst(zeroshot: CategoryScoreMatrix, vectors,
        fewshot_labels: Mapping[str, str] | None = None,
        config: PropagationConfig = PropagationConfig()) -> PstResult:
    """Full propagation pipeline from zero-shot scores to predictions.

    ``vectors`` gives the graph coordinates (attribute score matrix or a
    plain array aligned row-for-row with the zero-shot instances).
    """
    if isinstance(vectors, AttributeScoreMatrix):
        if vectors.instances != zeroshot.instances:
            raise ValidationError("graph vectors and zero-shot scores disagree on instances")
        coords = vectors.values
    else:
        coords = np.asarray(vectors, dtype=float)
        if coords.shape[0] != len(zeroshot.instances):
            raise ValidationError("graph vectors and zero-shot scores disagree on instances")
    graph = build_knn_graph(coords, config.k, config.kernel, config.sigma)
    seeds = seed_from_zeroshot(zeroshot, config.rho)
    if fewshot_labels:
        seeds = clamp_fewshot(seeds, fewshot_labels)
    result = propagate(graph, seeds, config)
    F = result.scores.values
    picks = np.argmax(F, axis=1)  # np.argmax takes the first maximum on ties
    predictions = {inst: zeroshot.categories[j]
                   for inst, j in zip(zeroshot.instances, picks)}
    return PstResult(predictions=predictions, scores=result.scores,
                     converged=result.converged, iterations=result.iterations)
