"""Loading multi-relational graphs into a normalized in-memory form.

Two inputs are supported: triple TSV files (``head<TAB>relation<TAB>tail``)
and the TUDataset plain-text layout used by the graph classification
benchmarks.  Node and relation identifiers are dense integers assigned in
order of first appearance.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from .errors import ConsistencyError, ParseError, VocabularyError

log = logging.getLogger(__name__)


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


@dataclass(frozen=True, eq=False)
class KnowledgeGraph:
    """Directed (or undirected) typed edge list with its vocabularies.

    ``edges`` is an ``(E, 3)`` int64 array of ``(head, relation, tail)`` rows.
    Use :meth:`from_triples` to get deduplication and canonical orientation;
    the raw constructor only validates.
    """

    node_count: int
    relation_count: int
    edges: np.ndarray
    directed: bool = True
    node_names: tuple[str, ...] | None = None
    relation_names: tuple[str, ...] | None = None
    node_labels: np.ndarray | None = None
    duplicates: int = 0
    skipped: int = 0

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 3)
        object.__setattr__(self, "edges", edges)
        if len(edges):
            if edges[:, [0, 2]].min() < 0 or edges[:, [0, 2]].max() >= self.node_count:
                raise ConsistencyError("edge endpoint outside node range")
            if edges[:, 1].min() < 0 or edges[:, 1].max() >= self.relation_count:
                raise ConsistencyError("relation id outside relation range")
            if not self.directed and np.any(edges[:, 0] > edges[:, 2]):
                raise ConsistencyError("undirected graph must store head <= tail")
        if self.node_names is not None and len(self.node_names) != self.node_count:
            raise ConsistencyError("node vocabulary size does not match node_count")
        if self.relation_names is not None and len(self.relation_names) != self.relation_count:
            raise ConsistencyError("relation vocabulary size does not match relation_count")
        if self.node_labels is not None:
            labels = np.asarray(self.node_labels, dtype=np.int64)
            if labels.shape != (self.node_count,):
                raise ConsistencyError("node_labels must have one entry per node")
            object.__setattr__(self, "node_labels", labels)

    @classmethod
    def from_triples(
        cls,
        triples,
        node_count: int,
        relation_count: int,
        *,
        directed: bool = True,
        **kwargs,
    ) -> "KnowledgeGraph":
        """Build a graph, dropping duplicate triples (first occurrence kept)."""
        seen: dict[tuple[int, int, int], None] = {}
        dropped = 0
        for h, r, t in triples:
            h, r, t = int(h), int(r), int(t)
            if not directed and h > t:
                h, t = t, h
            key = (h, r, t)
            if key in seen:
                dropped += 1
            else:
                seen[key] = None
        edges = np.array(list(seen), dtype=np.int64).reshape(-1, 3)
        kwargs["duplicates"] = kwargs.get("duplicates", 0) + dropped
        return cls(node_count, relation_count, edges, directed, **kwargs)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @cached_property
    def triples(self) -> list[Triple]:
        return [Triple(*row) for row in self.edges.tolist()]

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __len__(self) -> int:
        return self.edge_count

    def node_index(self) -> dict[str, int]:
        names = self.node_names or tuple(str(i) for i in range(self.node_count))
        return {n: i for i, n in enumerate(names)}

    def relation_index(self) -> dict[str, int]:
        names = self.relation_names or tuple(str(i) for i in range(self.relation_count))
        return {n: i for i, n in enumerate(names)}

    def relabel_nodes(self, permutation: Sequence[int]) -> "KnowledgeGraph":
        """Return the graph with node ``i`` renamed to ``permutation[i]``."""
        perm = np.asarray(permutation, dtype=np.int64)
        if sorted(perm.tolist()) != list(range(self.node_count)):
            raise ValueError("permutation must be a bijection on node ids")
        edges = self.edges.copy()
        edges[:, 0] = perm[edges[:, 0]]
        edges[:, 2] = perm[edges[:, 2]]
        labels = None
        if self.node_labels is not None:
            labels = np.empty_like(self.node_labels)
            labels[perm] = self.node_labels
        names = None
        if self.node_names is not None:
            names_list = [""] * self.node_count
            for old, new in enumerate(perm.tolist()):
                names_list[new] = self.node_names[old]
            names = tuple(names_list)
        return KnowledgeGraph.from_triples(
            edges.tolist(),
            self.node_count,
            self.relation_count,
            directed=self.directed,
            node_names=names,
            relation_names=self.relation_names,
            node_labels=labels,
        )


@dataclass(frozen=True, eq=False)
class GraphCollection:
    graphs: list[KnowledgeGraph]
    graph_labels: np.ndarray
    class_names: tuple[str, ...]
    relation_names: tuple[str, ...]
    node_label_names: tuple[str, ...] = ()
    name: str = ""

    def __post_init__(self):
        if len(self.graphs) != len(self.graph_labels):
            raise ConsistencyError("graphs and graph_labels differ in length")

    def __len__(self) -> int:
        return len(self.graphs)


class _Vocab:
    def __init__(self, names: Sequence[str] | None = None, kind: str = "token"):
        self.frozen = names is not None
        self.kind = kind
        self.index: dict[str, int] = {n: i for i, n in enumerate(names or ())}

    def get(self, name: str) -> int:
        idx = self.index.get(name)
        if idx is None:
            if self.frozen:
                raise VocabularyError(name, self.kind)
            idx = self.index[name] = len(self.index)
        return idx

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.index)


def load_triples(
    path,
    vocab: KnowledgeGraph | None = None,
    *,
    directed: bool = True,
    on_unknown: str = "error",
) -> KnowledgeGraph:
    """Read a triple TSV file.

    With ``vocab`` given, node and relation ids are taken from that graph
    (the *reuse* policy) and unknown names either raise
    :class:`VocabularyError` or, with ``on_unknown="skip"``, drop the line and
    count it in ``KnowledgeGraph.skipped``.
    """
    if on_unknown not in ("error", "skip"):
        raise ValueError("on_unknown must be 'error' or 'skip'")
    path = Path(path)
    if vocab is not None:
        nodes = _Vocab(vocab.node_names or [str(i) for i in range(vocab.node_count)], "node")
        rels = _Vocab(vocab.relation_names or [str(i) for i in range(vocab.relation_count)], "relation")
    else:
        nodes, rels = _Vocab(kind="node"), _Vocab(kind="relation")

    triples = []
    skipped = 0
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(f"expected 3 tab-separated fields, got {len(fields)}", path, lineno)
            h, r, t = fields
            try:
                triples.append((nodes.get(h), rels.get(r), nodes.get(t)))
            except VocabularyError:
                if on_unknown == "error":
                    raise
                skipped += 1

    graph = KnowledgeGraph.from_triples(
        triples,
        len(nodes.index),
        len(rels.index),
        directed=directed,
        node_names=nodes.names,
        relation_names=rels.names,
        skipped=skipped,
    )
    if graph.duplicates:
        log.info("%s: dropped %d duplicate triples", path, graph.duplicates)
    if skipped:
        log.info("%s: skipped %d triples with unknown names", path, skipped)
    return graph


def save_triples(graph: KnowledgeGraph, path) -> None:
    """Write ``graph`` as triple TSV using its vocabularies."""
    nodes = graph.node_names or tuple(str(i) for i in range(graph.node_count))
    rels = graph.relation_names or tuple(str(i) for i in range(graph.relation_count))
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for h, r, t in graph.edges.tolist():
            fh.write(f"{nodes[h]}\t{rels[r]}\t{nodes[t]}\n")


def _read_int_column(path: Path, width: int = 1) -> np.ndarray:
    try:
        data = np.loadtxt(path, delimiter=",", dtype=np.int64, ndmin=2)
    except ValueError as exc:
        raise ParseError(str(exc), path) from exc
    if data.size == 0:
        data = data.reshape(0, width)
    if data.shape[1] != width:
        raise ParseError(f"expected {width} comma-separated column(s)", path)
    return data if width > 1 else data[:, 0]


def load_tudataset(directory, name: str | None = None) -> GraphCollection:
    """Read a TUDataset directory (``DS_A.txt``, ``DS_graph_indicator.txt``, ...).

    Every line of ``DS_A.txt`` becomes one directed triple, so undirected
    benchmark graphs keep both orientations of each bond.
    """
    directory = Path(directory)
    if name is None:
        found = sorted(directory.glob("*_A.txt"))
        if not found:
            raise FileNotFoundError(f"no *_A.txt file in {directory}")
        name = found[0].name[: -len("_A.txt")]

    def part(suffix: str, required: bool = True) -> Path | None:
        p = directory / f"{name}_{suffix}.txt"
        if not p.exists():
            if required:
                raise FileNotFoundError(f"missing required file {p.name} in {directory}")
            return None
        return p

    a_path = part("A")
    indicator_path = part("graph_indicator")
    graph_labels_path = part("graph_labels")
    edge_labels_path = part("edge_labels")
    node_labels_path = part("node_labels", required=False)

    adjacency = _read_int_column(a_path, 2)
    indicator = _read_int_column(indicator_path)
    raw_graph_labels = _read_int_column(graph_labels_path)
    edge_labels = _read_int_column(edge_labels_path)
    node_labels = _read_int_column(node_labels_path) if node_labels_path else None

    n_nodes = len(indicator)
    n_graphs = len(raw_graph_labels)
    if len(edge_labels) != len(adjacency):
        raise ConsistencyError(f"{edge_labels_path.name} has {len(edge_labels)} lines, expected {len(adjacency)}")
    if node_labels is not None and len(node_labels) != n_nodes:
        raise ConsistencyError(f"{node_labels_path.name} has {len(node_labels)} lines, expected {n_nodes}")
    if n_nodes and (indicator.min() < 1 or indicator.max() > n_graphs):
        raise ConsistencyError("graph indicator references a graph id outside the label file")

    src = adjacency[:, 0] - 1
    dst = adjacency[:, 1] - 1
    bad = (src < 0) | (src >= n_nodes) | (dst < 0) | (dst >= n_nodes)
    if bad.any():
        line = int(np.flatnonzero(bad)[0]) + 1
        raise ConsistencyError(f"{a_path.name}:{line}: node id outside 1..{n_nodes}")
    graph_of = indicator - 1
    cross = graph_of[src] != graph_of[dst]
    if cross.any():
        line = int(np.flatnonzero(cross)[0]) + 1
        raise ConsistencyError(f"{a_path.name}:{line}: edge joins nodes of different graphs")

    rel_values, rel_ids = np.unique(edge_labels, return_inverse=True)
    class_values, class_ids = np.unique(raw_graph_labels, return_inverse=True)
    if node_labels is not None:
        nl_values, nl_ids = np.unique(node_labels, return_inverse=True)
    else:
        nl_values, nl_ids = np.array([], dtype=np.int64), None

    # local id = rank of the node among the nodes of its graph
    order = np.argsort(graph_of, kind="stable")
    counts = np.bincount(graph_of, minlength=n_graphs)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    local = np.empty(n_nodes, dtype=np.int64)
    local[order] = np.arange(n_nodes) - np.repeat(starts, counts)

    edge_graph = graph_of[src]
    edge_order = np.argsort(edge_graph, kind="stable")
    edge_counts = np.bincount(edge_graph, minlength=n_graphs)
    edge_starts = np.concatenate(([0], np.cumsum(edge_counts)))
    R = len(rel_values)
    rel_names = tuple(str(v) for v in rel_values.tolist())

    graphs = []
    for g in range(n_graphs):
        sel = edge_order[edge_starts[g] : edge_starts[g + 1]]
        triples = np.stack([local[src[sel]], rel_ids[sel], local[dst[sel]]], axis=1)
        labels = None
        if nl_ids is not None:
            members = order[starts[g] : starts[g] + counts[g]]
            labels = nl_ids[members]
        graphs.append(
            KnowledgeGraph.from_triples(
                triples.tolist(), int(counts[g]), R, relation_names=rel_names, node_labels=labels
            )
        )

    return GraphCollection(
        graphs=graphs,
        graph_labels=class_ids.astype(np.int64),
        class_names=tuple(str(v) for v in class_values.tolist()),
        relation_names=rel_names,
        node_label_names=tuple(str(v) for v in nl_values.tolist()),
        name=name,
    )
