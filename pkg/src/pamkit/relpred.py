"""Relation prediction by nearest neighbours over PAM pair features.

Each pair ``(h, t)`` is described by ``4k`` categorical values taken from a
sum-aggregated power stack::

    [ P^1..k[h, t] | P^1..k[t, h] | prod(row h of P^1..k) | prod(col t of P^1..k) ]

Training triples become labelled samples.  A query is ranked by letting its
``k_neighbors`` closest samples (Hamming distance over the categorical
positions) vote for their relation with weight ``1 / (1 + distance)``.
Relations nobody voted for follow in order of training frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from numba import njit, prange

from .graph_io import KnowledgeGraph
from .pam import PowerStack, thread_count

DEFAULT_K_NEIGHBORS = 5
K_CANDIDATES = (1, 3, 5, 10, 20)
DEFAULT_CUTOFFS = (1, 3, 10)


@dataclass(frozen=True, eq=False)
class PairFeature:
    pair: tuple[int, int]
    values: np.ndarray

    @property
    def max_hop(self) -> int:
        return len(self.values) // 4

    def _block(self, b: int) -> list:
        k = self.max_hop
        return self.values[b * k : (b + 1) * k].tolist()

    @property
    def path_forward(self) -> list:
        return self._block(0)

    @property
    def path_backward(self) -> list:
        return self._block(1)

    @property
    def head_profile(self) -> list:
        return self._block(2)

    @property
    def tail_profile(self) -> list:
        return self._block(3)


def _require_sum(stack: PowerStack) -> None:
    if stack.aggregation != "sum":
        raise ValueError("pair features need a sum-aggregated power stack")


def _absent_values(max_hop: int) -> np.ndarray:
    # value meaning "nothing there": 0 for path cells, 1 for empty-row products
    return np.repeat(np.array([0.0, 0.0, 1.0, 1.0]), max_hop)


def _lookup(stack: PowerStack, hop: int, heads: np.ndarray, tails: np.ndarray) -> np.ndarray:
    m = stack[hop]
    n = np.int64(m.n)
    rows = np.repeat(np.arange(m.n, dtype=np.int64), np.diff(m.indptr))
    keys = rows * n + m.indices.astype(np.int64)
    want = heads.astype(np.int64) * n + tails.astype(np.int64)
    pos = np.searchsorted(keys, want)
    pos_c = np.minimum(pos, max(len(keys) - 1, 0))
    hit = (pos < len(keys)) & (keys[pos_c] == want) if len(keys) else np.zeros(len(want), bool)
    out = np.zeros(len(want), dtype=m.data.dtype)
    out[hit] = m.data[pos_c[hit]]
    return out


def pair_features(stack: PowerStack, heads, tails) -> np.ndarray:
    """Feature rows for many pairs at once, shape ``(len(heads), 4k)``."""
    _require_sum(stack)
    heads = np.asarray(heads, dtype=np.int64)
    tails = np.asarray(tails, dtype=np.int64)
    if len(heads) and (min(heads.min(), tails.min()) < 0 or max(heads.max(), tails.max()) >= stack.n):
        raise IndexError("node id outside the stack dimension")
    row_prod, col_prod = stack.node_profiles()
    k = stack.max_hop
    dtype = object if stack.scalar == "int" else np.float64
    out = np.empty((len(heads), 4 * k), dtype=dtype)
    for m in range(k):
        out[:, m] = _lookup(stack, m + 1, heads, tails)
        out[:, k + m] = _lookup(stack, m + 1, tails, heads)
    out[:, 2 * k : 3 * k] = row_prod[heads]
    out[:, 3 * k :] = col_prod[tails]
    return out


def pair_feature(stack: PowerStack, h: int, t: int) -> PairFeature:
    values = pair_features(stack, [h], [t])[0]
    return PairFeature((int(h), int(t)), values)


@dataclass(frozen=True, eq=False)
class NeighborIndex:
    features: np.ndarray
    labels: np.ndarray
    pairs: np.ndarray
    relation_count: int
    max_hop: int
    vocabularies: tuple[np.ndarray, ...]
    codes: np.ndarray
    prior: np.ndarray
    one_hot: bool = False
    _onehot: dict = field(default_factory=dict, init=False, repr=False)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dims(self) -> int:
        return self.codes.shape[1]

    def encode(self, features: np.ndarray) -> np.ndarray:
        """Per-dimension category codes; values unseen in training get -1."""
        codes = np.full(features.shape, -1, dtype=np.int32)
        for d, vocab in enumerate(self.vocabularies):
            col = features[:, d]
            if not len(vocab):
                continue
            pos = np.searchsorted(vocab, col)
            pos_c = np.minimum(pos, len(vocab) - 1)
            hit = vocab[pos_c] == col
            codes[hit, d] = pos_c[hit]
        return codes

    def prior_order(self) -> list[int]:
        return sorted(range(self.relation_count), key=lambda r: (-self.prior[r], r))


def _triples_array(triples) -> np.ndarray:
    if isinstance(triples, KnowledgeGraph):
        return triples.edges
    arr = np.asarray(list(triples) if not isinstance(triples, np.ndarray) else triples, dtype=np.int64)
    return arr.reshape(-1, 3)


def build_index(
    stack: PowerStack,
    triples,
    one_hot: bool = False,
    relation_count: int | None = None,
) -> NeighborIndex:
    """One labelled sample per training triple.

    ``one_hot=True`` measures distances on an explicit one-hot encoding
    (squared L2 / 2); the default compares category codes directly.  Both
    give the same neighbours.
    """
    edges = _triples_array(triples)
    if relation_count is None:
        relation_count = triples.relation_count if isinstance(triples, KnowledgeGraph) else (
            int(edges[:, 1].max()) + 1 if len(edges) else 0
        )
    heads, labels, tails = edges[:, 0], edges[:, 1], edges[:, 2]
    feats = pair_features(stack, heads, tails)
    vocabularies = tuple(np.unique(feats[:, d]) for d in range(feats.shape[1]))
    prior = np.bincount(labels, minlength=relation_count).astype(np.int64)
    index = NeighborIndex(
        features=feats,
        labels=labels.copy(),
        pairs=np.stack([heads, tails], axis=1),
        relation_count=relation_count,
        max_hop=stack.max_hop,
        vocabularies=vocabularies,
        codes=np.empty((0, feats.shape[1]), dtype=np.int32),
        prior=prior,
        one_hot=one_hot,
    )
    object.__setattr__(index, "codes", index.encode(feats))
    return index


# --- neighbour search --------------------------------------------------------


@njit(parallel=True, cache=True)
def _knn_hamming(train_codes, train_pairs, query_codes, query_informative, query_pairs, exclude_self, k):
    n, dims = train_codes.shape
    q_count = query_codes.shape[0]
    out_idx = np.full((q_count, k), -1, np.int64)
    out_dist = np.full((q_count, k), -1, np.int64)
    for qi in prange(q_count):
        # bucket[d] holds the first k eligible samples at distance d, in index order
        bucket = np.empty((dims + 1, k), np.int64)
        filled = np.zeros(dims + 1, np.int64)
        for s in range(n):
            if exclude_self and train_pairs[s, 0] == query_pairs[qi, 0] and train_pairs[s, 1] == query_pairs[qi, 1]:
                continue
            d = 0
            shared = False
            for c in range(dims):
                if train_codes[s, c] == query_codes[qi, c]:
                    if query_informative[qi, c]:
                        shared = True
                else:
                    d += 1
            if shared and filled[d] < k:
                bucket[d, filled[d]] = s
                filled[d] += 1
        taken = 0
        for d in range(dims + 1):
            for b in range(filled[d]):
                if taken == k:
                    break
                out_idx[qi, taken] = bucket[d, b]
                out_dist[qi, taken] = d
                taken += 1
    return out_idx, out_dist


def _informative(features: np.ndarray, max_hop: int) -> np.ndarray:
    return features != _absent_values(max_hop)[None, :]


def _knn_onehot(index: NeighborIndex, query_codes, query_informative, query_pairs, exclude_self, k, batch=512):
    import scipy.sparse as sp

    dims = index.dims
    if "X" not in index._onehot:
        # one column per (dim, category) plus one out-of-vocabulary column per dim
        offsets = np.concatenate(([0], np.cumsum([len(v) + 1 for v in index.vocabularies])))
        absent = _absent_values(index.max_hop)
        informative_cols = np.ones(offsets[-1], dtype=bool)
        for d, vocab in enumerate(index.vocabularies):
            hit = np.flatnonzero(vocab == absent[d])
            informative_cols[offsets[d] + hit] = False
            informative_cols[offsets[d] + len(vocab)] = False
        index._onehot.update(offsets=offsets, informative=informative_cols)
        index._onehot["X"] = _onehot_rows(index.codes, index.vocabularies, offsets)
    X = index._onehot["X"]
    offsets = index._onehot["offsets"]
    inf_cols = sp.diags(index._onehot["informative"].astype(np.float64))
    X_inf = (X @ inf_cols).tocsr()
    q_count = len(query_codes)
    out_idx = np.full((q_count, k), -1, np.int64)
    out_dist = np.full((q_count, k), -1, np.int64)
    for lo in range(0, q_count, batch):
        hi = min(lo + batch, q_count)
        Q = _onehot_rows(query_codes[lo:hi], index.vocabularies, offsets)
        # ||x - q||^2 = 2 * dims - 2 * matches for one-hot rows with exactly dims ones
        sq = 2.0 * dims - 2.0 * (X @ Q.T).toarray()
        dist = np.rint(sq / 2.0).astype(np.int64)
        shared = (X_inf @ Q.T).toarray() > 0
        for j in range(hi - lo):
            ok = shared[:, j].copy()
            if exclude_self:
                same = (index.pairs[:, 0] == query_pairs[lo + j, 0]) & (index.pairs[:, 1] == query_pairs[lo + j, 1])
                ok &= ~same
            cand = np.flatnonzero(ok)
            order = cand[np.lexsort((cand, dist[cand, j]))][:k]
            out_idx[lo + j, : len(order)] = order
            out_dist[lo + j, : len(order)] = dist[order, j]
    return out_idx, out_dist


def _onehot_rows(codes: np.ndarray, vocabularies, offsets: np.ndarray):
    import scipy.sparse as sp

    n, dims = codes.shape
    oov = np.array([len(v) for v in vocabularies], dtype=np.int64)
    cols = np.where(codes >= 0, codes, oov[None, :]) + offsets[:-1][None, :]
    return sp.csr_matrix(
        (np.ones(n * dims), cols.ravel(), np.arange(0, n * dims + 1, dims)), shape=(n, int(offsets[-1]))
    )


def nearest_neighbors(
    index: NeighborIndex,
    features: np.ndarray,
    pairs: np.ndarray,
    k_neighbors: int,
    exclude_self: bool = False,
    threads: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """``(indices, distances)`` of each query's neighbours sorted by (distance, sample order).

    Only samples sharing at least one informative value (a non-zero path
    cell or a non-empty profile) with the query qualify; rows are padded
    with -1 when fewer than ``k_neighbors`` qualify.
    """
    if k_neighbors < 1:
        raise ValueError("k_neighbors must be >= 1")
    if len(index) == 0:
        raise RuntimeError("neighbour index is empty")
    codes = index.encode(features)
    informative = _informative(features, index.max_hop)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if index.one_hot:
        return _knn_onehot(index, codes, informative, pairs, exclude_self, k_neighbors)
    with thread_count(threads):
        return _knn_hamming(index.codes, index.pairs, codes, informative, pairs, exclude_self, k_neighbors)


def _ranking(index: NeighborIndex, neighbors: np.ndarray, distances: np.ndarray) -> list[tuple[int, float]]:
    scores: dict[int, float] = {}
    for s, d in zip(neighbors.tolist(), distances.tolist()):
        if s < 0:
            break
        label = int(index.labels[s])
        scores[label] = scores.get(label, 0.0) + 1.0 / (1.0 + d)
    voted = sorted(scores, key=lambda r: (-scores[r], r))
    rest = [r for r in index.prior_order() if r not in scores]
    return [(r, scores[r]) for r in voted] + [(r, 0.0) for r in rest]


def rank_relations(
    index: NeighborIndex,
    stack: PowerStack,
    h: int,
    t: int,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    exclude_self: bool = False,
) -> list[tuple[int, float]]:
    """All relations ordered best first, as ``(relation, score)`` pairs."""
    if len(index) == 0:
        raise RuntimeError("neighbour index is empty")
    feats = pair_features(stack, [h], [t])
    idx, dist = nearest_neighbors(index, feats, [[h, t]], k_neighbors, exclude_self)
    return _ranking(index, idx[0], dist[0])


@dataclass(frozen=True)
class EvalReport:
    mrr: float
    hits: dict
    evaluated: int
    skipped: int
    k_neighbors: int
    max_hop: int

    def to_dict(self) -> dict:
        return {
            "mrr": self.mrr,
            "hits": {str(c): v for c, v in sorted(self.hits.items())},
            "evaluated": self.evaluated,
            "skipped": self.skipped,
            "k_neighbors": self.k_neighbors,
            "max_hop": self.max_hop,
        }


def ranking_metrics(ranks: Sequence[int], cutoffs: Iterable[int]) -> tuple[float, dict]:
    ranks = np.asarray(ranks, dtype=np.float64)
    mrr = float(np.mean(1.0 / ranks))
    hits = {int(c): float(np.mean(ranks <= c)) for c in sorted(set(cutoffs))}
    return mrr, hits


def ground_truth_ranks(
    index: NeighborIndex,
    stack: PowerStack,
    triples: np.ndarray,
    k_neighbors: int,
    exclude_self: bool = False,
    threads: int | None = None,
    max_neighbors: Sequence[int] | None = None,
) -> dict[int, np.ndarray]:
    """Rank of each triple's relation, for one or several neighbour counts.

    Neighbours are searched once with the largest count; smaller counts use
    prefixes, which is exact because the order is (distance, sample order).
    """
    ks = [k_neighbors] if max_neighbors is None else sorted(set(max_neighbors))
    feats = pair_features(stack, triples[:, 0], triples[:, 2])
    idx, dist = nearest_neighbors(index, feats, triples[:, [0, 2]], max(ks), exclude_self, threads)
    out = {}
    for k in ks:
        ranks = np.empty(len(triples), dtype=np.int64)
        for q in range(len(triples)):
            order = [r for r, _ in _ranking(index, idx[q, :k], dist[q, :k])]
            ranks[q] = order.index(int(triples[q, 1])) + 1
        out[k] = ranks
    return out


def _usable(triples, stack: PowerStack, relation_count: int) -> tuple[np.ndarray, int]:
    skipped = triples.skipped if isinstance(triples, KnowledgeGraph) else 0
    edges = _triples_array(triples)
    ok = (
        (edges[:, 0] < stack.n) & (edges[:, 2] < stack.n) & (edges[:, 1] < relation_count)
        & (edges.min(axis=1) >= 0) if len(edges) else np.zeros(0, bool)
    )
    return edges[ok], skipped + int((~ok).sum())


def evaluate(
    index: NeighborIndex,
    stack: PowerStack,
    triples,
    k_neighbors: int = DEFAULT_K_NEIGHBORS,
    cutoffs: Sequence[int] = DEFAULT_CUTOFFS,
    exclude_self: bool = False,
    threads: int | None = None,
) -> EvalReport:
    """MRR and Hits@c of the ground-truth relation over ``triples``.

    Triples whose entities fall outside the stack (or that the loader
    already skipped as unknown) are counted in ``skipped``.
    """
    if not cutoffs:
        raise ValueError("at least one cutoff is required")
    edges, skipped = _usable(triples, stack, index.relation_count)
    if len(edges) == 0:
        raise ValueError("no evaluable test triples")
    ranks = ground_truth_ranks(index, stack, edges, k_neighbors, exclude_self, threads)[k_neighbors]
    mrr, hits = ranking_metrics(ranks, cutoffs)
    return EvalReport(mrr, hits, len(edges), skipped, k_neighbors, stack.max_hop)


def select_k_neighbors(
    index: NeighborIndex,
    stack: PowerStack,
    triples,
    candidates: Sequence[int] = K_CANDIDATES,
    exclude_self: bool = False,
    threads: int | None = None,
) -> tuple[int, dict[int, float]]:
    """Pick the neighbour count with the best validation MRR (ties: smaller k)."""
    edges, _ = _usable(triples, stack, index.relation_count)
    if len(edges) == 0:
        raise ValueError("no evaluable validation triples")
    ranks = ground_truth_ranks(index, stack, edges, max(candidates), exclude_self, threads, candidates)
    scores = {k: float(np.mean(1.0 / ranks[k])) for k in sorted(ranks)}
    best = max(scores, key=lambda k: (scores[k], -k))
    return best, scores
