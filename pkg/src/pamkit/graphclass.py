"""Graph classification from power-product fingerprints.

A graph is summarised by ``g_m``, the product of the non-zero entries of
the m-th power of its sum-aggregated PAM, for m = 1..k.  The products get
astronomically large, so kernels work on ``log g_m``; the exact integers are
kept when the stack is computed in exact mode.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from sklearn.model_selection import StratifiedKFold
from sklearn.svm import SVC

from .errors import NormalizationError, StratificationError
from .graph_io import KnowledgeGraph
from .pam import build_pam, compute_powers
from .primes import RelationMapping

GAMMA_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
C_GRID = (1e-2, 1e-1, 1.0, 10.0, 100.0)


@dataclass(frozen=True)
class GraphFeature:
    log_g: tuple[float, ...]
    exact_g: tuple[int, ...] | None = None
    empty: bool = False

    @property
    def max_hop(self) -> int:
        return len(self.log_g)


def graph_feature(
    graph: KnowledgeGraph,
    mapping: RelationMapping,
    max_hop: int,
    scalar: str = "int",
) -> GraphFeature:
    """Power-product fingerprint ``[g_1, ..., g_k]`` of one graph.

    A graph without edges gets all-zero ``log_g`` (empty products) and
    ``empty=True``.
    """
    if graph.node_count == 0:
        raise ValueError("graph has no nodes")
    stack = compute_powers(build_pam(graph, mapping, "sum", scalar), max_hop)
    log_g, exact = [], []
    for m in stack:
        values = m.data.tolist()
        log_g.append(math.fsum(math.log(v) for v in values))
        if scalar == "int":
            exact.append(math.prod(values))
    return GraphFeature(tuple(log_g), tuple(exact) if scalar == "int" else None, graph.edge_count == 0)


def graph_features(graphs: Sequence[KnowledgeGraph], mapping: RelationMapping, max_hop: int, scalar: str = "int"):
    return [graph_feature(g, mapping, max_hop, scalar) for g in graphs]


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    values: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def shape(self):
        return self.values.shape


def standardized(features: Sequence[GraphFeature]) -> np.ndarray:
    """Zero-mean, unit-variance ``log_g`` columns; constant columns dropped."""
    X = np.array([f.log_g for f in features], dtype=np.float64)
    if len({f.max_hop for f in features}) > 1:
        raise ValueError("features differ in max_hop")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    keep = std > 0
    if not keep.all():
        warnings.warn(
            f"dropping {int((~keep).sum())} zero-variance feature dimension(s) from the RBF distance",
            RuntimeWarning,
            stacklevel=2,
        )
    return (X[:, keep] - mean[keep]) / std[keep]


def rbf_kernel(features: Sequence[GraphFeature], gamma: float) -> KernelMatrix:
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    Z = standardized(features)
    sq = np.sum(Z**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (Z @ Z.T), 0.0)
    K = np.exp(-gamma * d2)
    K = (K + K.T) / 2.0
    np.fill_diagonal(K, 1.0)
    return KernelMatrix(K, "pp-rbf", {"gamma": gamma})


def vertex_histogram_kernel(graphs: Sequence[KnowledgeGraph], label_count: int | None = None) -> KernelMatrix:
    """Dot products of node-label count histograms."""
    for i, g in enumerate(graphs):
        if g.node_labels is None:
            raise ValueError(f"graph {i} has no node labels")
    if label_count is None:
        label_count = max((int(g.node_labels.max()) + 1 for g in graphs if g.node_count), default=0)
    H = np.array([np.bincount(g.node_labels, minlength=label_count) for g in graphs], dtype=np.float64)
    return KernelMatrix(H @ H.T, "vh", {"labels": label_count})


def cosine_normalize(kernel: KernelMatrix) -> np.ndarray:
    K = kernel.values
    diag = np.diag(K)
    bad = np.flatnonzero(diag <= 0)
    if len(bad):
        raise NormalizationError(f"graph {int(bad[0])} has zero self-similarity in the {kernel.kind} kernel")
    s = np.sqrt(diag)
    return K / np.outer(s, s)


def combine_pp_vh(pp: KernelMatrix, vh: KernelMatrix) -> KernelMatrix:
    """Sum of the cosine-normalised power-product and vertex-histogram kernels."""
    if pp.shape != vh.shape:
        raise ValueError("kernels differ in size")
    return KernelMatrix(cosine_normalize(pp) + cosine_normalize(vh), "pp-vh-sum", {**pp.params})


def kernel_grid(
    features: Sequence[GraphFeature],
    gammas: Sequence[float] = GAMMA_GRID,
    vh: KernelMatrix | None = None,
) -> dict[float, KernelMatrix]:
    """Candidate kernels per gamma, combined with ``vh`` when given."""
    out = {}
    for g in gammas:
        k = rbf_kernel(features, g)
        out[g] = combine_pp_vh(k, vh) if vh is not None else k
    return out


@dataclass(frozen=True)
class ClassificationReport:
    per_fold: list
    mean: float
    std: float
    chosen: list
    seed: int
    outer_folds: int
    inner_folds: int

    def to_dict(self) -> dict:
        return {
            "per_fold": self.per_fold,
            "mean": self.mean,
            "std": self.std,
            "params": {
                "chosen": self.chosen,
                "seed": self.seed,
                "outer_folds": self.outer_folds,
                "inner_folds": self.inner_folds,
            },
        }


def _check_strata(labels: np.ndarray, folds: int, where: str) -> None:
    classes, counts = np.unique(labels, return_counts=True)
    if len(classes) < 2:
        raise StratificationError(f"{where}: fewer than two classes")
    if counts.min() < folds:
        raise StratificationError(
            f"{where}: class {classes[counts.argmin()]} has {counts.min()} member(s), fewer than {folds} folds"
        )


def _fit_score(K: np.ndarray, y: np.ndarray, train, test, C: float) -> float:
    clf = SVC(kernel="precomputed", C=C)
    clf.fit(K[np.ix_(train, train)], y[train])
    return float(np.mean(clf.predict(K[np.ix_(test, train)]) == y[test]))


def evaluate_classification(
    kernels: KernelMatrix | Mapping[object, KernelMatrix],
    labels,
    outer_folds: int = 5,
    inner_folds: int = 3,
    seed: int = 0,
    c_grid: Sequence[float] = C_GRID,
) -> ClassificationReport:
    """Nested stratified cross-validation of an SVM on precomputed kernels.

    ``kernels`` is a single kernel or a mapping from a parameter value (e.g.
    gamma) to its kernel.  The inner folds pick (kernel, C) by mean accuracy,
    first in grid order on ties; the outer folds report test accuracy.
    """
    if isinstance(kernels, KernelMatrix):
        kernels = {None: kernels}
    y = np.asarray(labels)
    for key, k in kernels.items():
        if len(k) != len(y):
            raise ValueError(f"kernel {key!r} has {len(k)} rows for {len(y)} labels")
    _check_strata(y, outer_folds, "outer split")
    grid = [(key, C) for key in kernels for C in c_grid]
    outer = StratifiedKFold(n_splits=outer_folds, shuffle=True, random_state=seed)
    per_fold, chosen = [], []
    for train, test in outer.split(np.zeros(len(y)), y):
        _check_strata(y[train], inner_folds, "inner split")
        inner = StratifiedKFold(n_splits=inner_folds, shuffle=True, random_state=seed)
        inner_splits = [(train[a], train[b]) for a, b in inner.split(np.zeros(len(train)), y[train])]
        best, best_score = grid[0], -1.0
        for key, C in grid:
            K = kernels[key].values
            score = float(np.mean([_fit_score(K, y, a, b, C) for a, b in inner_splits]))
            if score > best_score:
                best, best_score = (key, C), score
        key, C = best
        per_fold.append(_fit_score(kernels[key].values, y, train, test, C))
        chosen.append({"kernel_param": key, "C": C, "inner_accuracy": best_score})
    acc = np.asarray(per_fold)
    return ClassificationReport(per_fold, float(acc.mean()), float(acc.std()), chosen, seed, outer_folds, inner_folds)
