"""Slow reference implementations used as independent checks.

Nothing here imports the code under test beyond plain data containers.
"""

from __future__ import annotations

import math
from collections import defaultdict


def typed_edges(triples, primes):
    """``{(i, j): [p_r, ...]}`` from raw ``(h, r, t)`` triples."""
    out = defaultdict(list)
    for h, r, t in triples:
        out[(h, t)].append(primes[r])
    return out


def brute_force_power(triples, primes, n, k, aggregation="sum"):
    """Cell values of the k-th power by enumerating every directed k-walk.

    Sum aggregation: each typed edge is its own step, so a walk's weight is
    the product of one prime per step, summed over all typed walks.
    Product aggregation: a step between ``i`` and ``j`` weighs the product of
    all primes on that pair.
    """
    edges = typed_edges(triples, primes)
    step = {}
    for (i, j), ps in edges.items():
        step.setdefault(i, []).append((j, ps))
    result = defaultdict(int)

    def walk(start, node, depth, weight):
        if depth == k:
            result[(start, node)] += weight
            return
        for nxt, ps in step.get(node, ()):
            if aggregation == "sum":
                for p in ps:
                    walk(start, nxt, depth + 1, weight * p)
            else:
                walk(start, nxt, depth + 1, weight * math.prod(ps))

    for s in range(n):
        walk(s, s, 0, 1)
    return {key: v for key, v in result.items() if v}


def brute_force_pair_features(triples, primes, n, k, pairs):
    powers = [brute_force_power(triples, primes, n, m) for m in range(1, k + 1)]
    feats = []
    for h, t in pairs:
        fwd = [pw.get((h, t), 0) for pw in powers]
        bwd = [pw.get((t, h), 0) for pw in powers]
        head = [math.prod(v for (i, _), v in sorted(pw.items()) if i == h) for pw in powers]
        tail = [math.prod(v for (_, j), v in sorted(pw.items(), key=lambda kv: (kv[0][0], kv[0][1])) if j == t)
                for pw in powers]
        feats.append(fwd + bwd + head + tail)
    return feats


def brute_force_ranking(train_feats, train_labels, query, k_neighbors, relation_count):
    """Linear-scan reference of the neighbour vote (see pamkit.relpred)."""
    dims = len(query)
    hop = dims // 4
    absent = [0] * (2 * hop) + [1] * (2 * hop)
    cands = []
    for s, f in enumerate(train_feats):
        d = sum(1 for a, b in zip(f, query) if a != b)
        shared = any(a == b and b != absent[c] for c, (a, b) in enumerate(zip(f, query)))
        if shared:
            cands.append((d, s))
    cands.sort()
    scores = defaultdict(float)
    for d, s in cands[:k_neighbors]:
        scores[train_labels[s]] += 1.0 / (1.0 + d)
    prior = [0] * relation_count
    for lab in train_labels:
        prior[lab] += 1
    voted = sorted(scores, key=lambda r: (-scores[r], r))
    rest = sorted((r for r in range(relation_count) if r not in scores), key=lambda r: (-prior[r], r))
    return [(r, scores[r]) for r in voted] + [(r, 0.0) for r in rest]


def naive_mrr_hits(ranks, cutoffs):
    total = 0.0
    for r in ranks:
        total += 1.0 / r
    hits = {}
    for c in cutoffs:
        hits[c] = sum(1 for r in ranks if r <= c) / len(ranks)
    return total / len(ranks), hits


def trial_division_primes(count, start):
    out, n = [], start
    while len(out) < count:
        if n > 1 and all(n % d for d in range(2, int(n**0.5) + 1)):
            out.append(n)
        n += 1
    return out
