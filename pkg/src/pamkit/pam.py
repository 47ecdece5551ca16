"""Prime adjacency matrices and their powers.

A :class:`PamMatrix` is an N x N CSR matrix whose cell ``(i, j)`` holds the
product (``aggregation="product"``) or the sum (``aggregation="sum"``) of the
primes of every relation ``i -> j``.  Powers are plain ``(+, x)`` sparse
products, so cell ``(i, j)`` of the k-th power sums the prime products along
every directed k-path from ``i`` to ``j``.

Two scalar modes are supported: ``"float"`` (float64, fast, exact while
values stay below 2**53) and ``"int"`` (Python integers, exact at any size,
single-threaded and slow).
"""

from __future__ import annotations

import logging
import math
import time
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np
from numba import njit, prange

from .errors import ConsistencyError, MappingError, ResourceError
from .graph_io import KnowledgeGraph
from .primes import RelationMapping

log = logging.getLogger(__name__)

if numba.config.THREADING_LAYER == "default":
    # the bundled TBB is too old for numba; omp avoids the fallback warning
    numba.config.THREADING_LAYER = "omp"

SCALAR_MODES = ("int", "float")
AGGREGATIONS = ("product", "sum")
FLOAT_EXACT_LIMIT = float(2**53)
DEFAULT_DENSITY_FRACTION = 0.5

_ROW_CHUNK = 256


def _check_mode(scalar: str, aggregation: str) -> None:
    if scalar not in SCALAR_MODES:
        raise ValueError(f"scalar mode must be one of {SCALAR_MODES}, got {scalar!r}")
    if aggregation not in AGGREGATIONS:
        raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {aggregation!r}")


@dataclass(frozen=True, eq=False)
class PamMatrix:
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    scalar: str = "float"
    aggregation: str = "product"
    hop: int = 1
    # upper-triangular storage of an undirected graph
    triangular: bool = False

    def __post_init__(self):
        _check_mode(self.scalar, self.aggregation)
        if self.hop < 1:
            raise ValueError("hop must be >= 1")

    @property
    def nnz(self) -> int:
        return int(self.indptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def _check_node(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n:
            raise IndexError(f"node {i} outside 0..{self.n - 1}")
        return i

    def get(self, i: int, j: int):
        """Stored value at ``(i, j)`` or 0."""
        i, j = self._check_node(i), self._check_node(j)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        pos = lo + np.searchsorted(self.indices[lo:hi], j)
        if pos < hi and self.indices[pos] == j:
            return self.data[pos]
        return 0

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        i = self._check_node(i)
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.data[lo:hi]

    @cached_property
    def _csc(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        order = np.argsort(self.indices, kind="stable")
        counts = np.bincount(self.indices, minlength=self.n) if self.nnz else np.zeros(self.n, np.int64)
        colptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(counts, out=colptr[1:])
        return colptr, rows[order], self.data[order]

    def col(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        j = self._check_node(j)
        colptr, rows, data = self._csc
        lo, hi = colptr[j], colptr[j + 1]
        return rows[lo:hi], data[lo:hi]

    def transpose(self) -> "PamMatrix":
        colptr, rows, data = self._csc
        return PamMatrix(self.n, colptr, rows.astype(self.indices.dtype), data, self.scalar, self.aggregation, self.hop)

    def symmetrized(self) -> "PamMatrix":
        """Mirror an upper-triangular matrix into a full symmetric one."""
        if not self.triangular:
            return self
        rows = np.repeat(np.arange(self.n, dtype=np.int64), np.diff(self.indptr))
        cols = self.indices.astype(np.int64)
        off = rows != cols
        all_rows = np.concatenate([rows, cols[off]])
        all_cols = np.concatenate([cols, rows[off]])
        all_data = np.concatenate([self.data, self.data[off]])
        indptr, indices, data = _coo_to_csr(self.n, all_rows, all_cols, all_data)
        return PamMatrix(self.n, indptr, indices, data, self.scalar, self.aggregation, self.hop)

    def to_dense(self) -> np.ndarray:
        dtype = object if self.scalar == "int" else np.float64
        out = np.zeros((self.n, self.n), dtype=dtype)
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        out[rows, self.indices] = self.data
        return out

    def to_scipy(self):
        import scipy.sparse as sp

        data = self.data.astype(np.float64)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)

    def max_value(self):
        if not self.nnz:
            return 0
        return max(self.data.tolist()) if self.scalar == "int" else float(self.data.max())

    def check(self) -> None:
        """Raise ConsistencyError unless the CSR invariants hold."""
        if len(self.indptr) != self.n + 1 or self.indptr[0] != 0 or np.any(np.diff(self.indptr) < 0):
            raise ConsistencyError("malformed row pointer")
        if len(self.indices) != self.nnz or len(self.data) != self.nnz:
            raise ConsistencyError("index/data length does not match row pointer")
        if self.nnz:
            if self.indices.min() < 0 or self.indices.max() >= self.n:
                raise ConsistencyError("column index out of range")
            steps = np.diff(self.indices.astype(np.int64))
            row_start = np.zeros(self.nnz, dtype=bool)
            row_start[self.indptr[:-1][np.diff(self.indptr) > 0]] = True
            if np.any(steps[~row_start[1:]] <= 0):
                raise ConsistencyError("column indices not strictly increasing within a row")
            if self.scalar == "int":
                if any((not isinstance(v, int)) or v <= 0 for v in self.data.tolist()):
                    raise ConsistencyError("exact-integer matrix holds a non-positive or non-integer value")
            elif not np.all(np.isfinite(self.data)) or np.any(self.data <= 0):
                raise ConsistencyError("float matrix holds a non-positive or non-finite value")

    def same_values(self, other: "PamMatrix") -> bool:
        """Cell-for-cell equality regardless of scalar mode."""
        if self.n != other.n or self.nnz != other.nnz:
            return False
        if not (np.array_equal(self.indptr, other.indptr) and np.array_equal(self.indices, other.indices)):
            return False
        return all(int(a) == int(b) if self.scalar != other.scalar else a == b
                   for a, b in zip(self.data.tolist(), other.data.tolist()))


def _coo_to_csr(n, rows, cols, data, reduce=None):
    """Sort COO entries into CSR; duplicates combined with ``reduce`` ufunc."""
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    order = np.lexsort((cols, rows))
    rows, cols, data = rows[order], cols[order], data[order]
    if reduce is not None and len(rows):
        keys = rows * n + cols
        first = np.concatenate(([True], keys[1:] != keys[:-1]))
        starts = np.flatnonzero(first)
        data = reduce.reduceat(data, starts)
        rows, cols = rows[starts], cols[starts]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(rows, minlength=n), out=indptr[1:])
    return indptr, cols.astype(_index_dtype(n)), data


def _index_dtype(n: int):
    return np.int32 if n < 2**31 else np.int64


def build_pam(
    graph: KnowledgeGraph,
    mapping: RelationMapping,
    aggregation: str = "product",
    scalar: str = "float",
) -> PamMatrix:
    """One-hop PAM of ``graph``: product (lossless) or sum of relation primes per cell."""
    _check_mode(scalar, aggregation)
    if len(mapping) < graph.relation_count:
        raise MappingError(
            f"mapping covers {len(mapping)} relations but the graph has {graph.relation_count}"
        )
    n = graph.node_count
    edges = graph.edges
    if scalar == "int":
        prime_values = np.array(list(mapping.primes), dtype=object)
    else:
        prime_values = mapping.as_array(np.float64)
    values = prime_values[edges[:, 1]] if len(edges) else prime_values[:0]
    ufunc = np.multiply if aggregation == "product" else np.add
    indptr, indices, data = _coo_to_csr(n, edges[:, 0], edges[:, 2], values, reduce=ufunc)
    if scalar == "int":
        data = np.array([int(v) for v in data.tolist()], dtype=object)
    return PamMatrix(n, indptr, indices, data, scalar, aggregation, 1, triangular=not graph.directed)


# --- sparse x sparse -------------------------------------------------------


@njit(parallel=True, cache=True)
def _spgemm_symbolic(a_indptr, a_indices, b_indptr, b_indices, n_rows, n_cols, chunk):
    counts = np.zeros(n_rows + 1, np.int64)
    n_chunks = (n_rows + chunk - 1) // chunk
    for c in prange(n_chunks):
        marker = np.full(n_cols, -1, np.int64)
        start = c * chunk
        stop = min(start + chunk, n_rows)
        for i in range(start, stop):
            cnt = 0
            for p in range(a_indptr[i], a_indptr[i + 1]):
                j = a_indices[p]
                for q in range(b_indptr[j], b_indptr[j + 1]):
                    k = b_indices[q]
                    if marker[k] != i:
                        marker[k] = i
                        cnt += 1
            counts[i + 1] = cnt
    return counts


@njit(parallel=True, cache=True)
def _spgemm_numeric(a_indptr, a_indices, a_data, b_indptr, b_indices, b_data, indptr, indices, data, n_cols, chunk):
    n_rows = len(indptr) - 1
    n_chunks = (n_rows + chunk - 1) // chunk
    for c in prange(n_chunks):
        marker = np.full(n_cols, -1, np.int64)
        acc = np.zeros(n_cols, np.float64)
        start = c * chunk
        stop = min(start + chunk, n_rows)
        for i in range(start, stop):
            pos = indptr[i]
            for p in range(a_indptr[i], a_indptr[i + 1]):
                j = a_indices[p]
                av = a_data[p]
                for q in range(b_indptr[j], b_indptr[j + 1]):
                    k = b_indices[q]
                    if marker[k] != i:
                        marker[k] = i
                        indices[pos] = k
                        pos += 1
                        acc[k] = av * b_data[q]
                    else:
                        acc[k] += av * b_data[q]
            indices[indptr[i]:pos].sort()
            for s in range(indptr[i], pos):
                data[s] = acc[indices[s]]


def _spgemm_float(a: PamMatrix, b: PamMatrix, density_limit: float | None = None):
    n = a.n
    counts = _spgemm_symbolic(a.indptr, a.indices, b.indptr, b.indices, n, n, _ROW_CHUNK)
    indptr = np.cumsum(counts)
    nnz = int(indptr[-1])
    dense = density_limit is not None and nnz > density_limit
    indices = np.empty(nnz, dtype=_index_dtype(n))
    data = np.empty(nnz, dtype=np.float64)
    _spgemm_numeric(
        a.indptr, a.indices, a.data, b.indptr, b.indices, b.data, indptr, indices, data, n, _ROW_CHUNK
    )
    return indptr, indices, data, dense


def _spgemm_exact(a: PamMatrix, b: PamMatrix):
    a_ip, a_ix, a_d = a.indptr.tolist(), a.indices.tolist(), a.data.tolist()
    b_ip, b_ix, b_d = b.indptr.tolist(), b.indices.tolist(), b.data.tolist()
    indptr = [0]
    indices: list[int] = []
    data: list[int] = []
    for i in range(a.n):
        acc: dict[int, int] = {}
        for p in range(a_ip[i], a_ip[i + 1]):
            j = a_ix[p]
            av = a_d[p]
            for q in range(b_ip[j], b_ip[j + 1]):
                k = b_ix[q]
                acc[k] = acc.get(k, 0) + av * b_d[q]
        for k in sorted(acc):
            indices.append(k)
            data.append(acc[k])
        indptr.append(len(indices))
    out = np.empty(len(data), dtype=object)
    out[:] = data
    return np.asarray(indptr, dtype=np.int64), np.asarray(indices, dtype=_index_dtype(a.n)), out


def multiply(a: PamMatrix, b: PamMatrix) -> PamMatrix:
    """``a @ b`` under ordinary arithmetic; hop of the result is the sum of hops."""
    if a.n != b.n or a.scalar != b.scalar:
        raise ValueError("operands differ in dimension or scalar mode")
    if a.scalar == "int":
        indptr, indices, data = _spgemm_exact(a, b)
    else:
        indptr, indices, data, _ = _spgemm_float(a, b)
    return PamMatrix(a.n, indptr, indices, data, a.scalar, a.aggregation, a.hop + b.hop)


@contextmanager
def thread_count(threads: int | None):
    """Temporarily set the numba worker count (clamped to what numba allows)."""
    if threads is None:
        yield
        return
    previous = numba.get_num_threads()
    numba.set_num_threads(max(1, min(int(threads), numba.config.NUMBA_NUM_THREADS)))
    try:
        yield
    finally:
        numba.set_num_threads(previous)


@dataclass(frozen=True, eq=False)
class PowerStack:
    """``[P^1, ..., P^k]`` sharing one mapping, scalar mode and aggregation."""

    matrices: tuple[PamMatrix, ...]
    mapping: RelationMapping | None = None
    overflow_hop: int | None = None
    density_hops: tuple[int, ...] = ()
    timings: tuple[float, ...] = ()
    _profiles: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "matrices", tuple(self.matrices))
        for i, m in enumerate(self.matrices):
            if m.hop != i + 1:
                raise ConsistencyError(f"matrix {i} has hop {m.hop}")
            if m.n != self.matrices[0].n:
                raise ConsistencyError("matrices differ in dimension")

    @property
    def max_hop(self) -> int:
        return len(self.matrices)

    @property
    def n(self) -> int:
        return self.matrices[0].n

    @property
    def scalar(self) -> str:
        return self.matrices[0].scalar

    @property
    def aggregation(self) -> str:
        return self.matrices[0].aggregation

    def __getitem__(self, hop: int) -> PamMatrix:
        if not 1 <= hop <= self.max_hop:
            raise IndexError(f"hop {hop} outside 1..{self.max_hop}")
        return self.matrices[hop - 1]

    def __iter__(self):
        return iter(self.matrices)

    def __len__(self) -> int:
        return self.max_hop

    def cell(self, hop: int, i: int, j: int):
        return self[hop].get(i, j)

    def node_profiles(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-node ``(row_products, col_products)``, each shaped ``(N, k)``; cached."""
        if "rows" not in self._profiles:
            rows = np.stack([row_products(m) for m in self.matrices], axis=1)
            cols = np.stack([row_products(m.transpose()) for m in self.matrices], axis=1)
            self._profiles["rows"], self._profiles["cols"] = rows, cols
        return self._profiles["rows"], self._profiles["cols"]

    def manifest(self) -> dict:
        return {
            "dimension": self.n,
            "hops": self.max_hop,
            "scalar_mode": self.scalar,
            "aggregation": self.aggregation,
            "nnz": [m.nnz for m in self.matrices],
            "overflow_hop": self.overflow_hop,
            "density_warning_hops": list(self.density_hops),
        }


def compute_powers(
    base: PamMatrix,
    max_hop: int,
    *,
    threads: int | None = None,
    density_fraction: float = DEFAULT_DENSITY_FRACTION,
    mapping: RelationMapping | None = None,
) -> PowerStack:
    """Iterated products ``P^(k) = P^(k-1) @ P`` for k = 1..max_hop.

    Float mode records ``overflow_hop``, the first hop holding a value above
    2**53 (beyond which float64 no longer represents every integer).  Hops
    whose non-zero count exceeds ``density_fraction * N**2`` are listed in
    ``density_hops``; computation carries on regardless.
    """
    if max_hop < 1:
        raise ValueError("max_hop must be >= 1")
    if base.hop != 1:
        raise ValueError("base matrix must be a one-hop PAM")
    operand = base.symmetrized()
    density_limit = density_fraction * float(base.n) ** 2
    matrices = [base]
    timings = [0.0]
    density_hops = [1] if base.nnz > density_limit else []
    overflow_hop = None
    if base.scalar == "float" and base.nnz and base.max_value() > FLOAT_EXACT_LIMIT:
        overflow_hop = 1
    current = operand
    with thread_count(threads):
        for hop in range(2, max_hop + 1):
            t0 = time.perf_counter()
            try:
                if base.scalar == "int":
                    indptr, indices, data = _spgemm_exact(current, operand)
                    dense = int(indptr[-1]) > density_limit
                else:
                    indptr, indices, data, dense = _spgemm_float(current, operand, density_limit)
            except MemoryError as exc:
                raise ResourceError(f"out of memory computing hop {hop} (reached hop {hop - 1})") from exc
            current = PamMatrix(base.n, indptr, indices, data, base.scalar, base.aggregation, hop)
            current.check()
            timings.append(time.perf_counter() - t0)
            if dense:
                density_hops.append(hop)
                log.info("hop %d: %d non-zeros exceed %.2f of N^2", hop, current.nnz, density_fraction)
            if overflow_hop is None and base.scalar == "float" and current.nnz:
                if float(data.max()) > FLOAT_EXACT_LIMIT:
                    overflow_hop = hop
                    log.warning("hop %d: values exceed 2^53, float results are no longer exact", hop)
            matrices.append(current)
    return PowerStack(tuple(matrices), mapping, overflow_hop, tuple(density_hops), tuple(timings))


# --- queries ---------------------------------------------------------------


def cell(stack: PowerStack, hop: int, i: int, j: int):
    return stack.cell(hop, i, j)


def value_histogram(matrix: PamMatrix) -> dict:
    """Occurrences of each distinct non-zero value, keys ascending."""
    counts = Counter(matrix.data.tolist())
    return {_plain(k): counts[k] for k in sorted(counts)}


def row_profile(matrix: PamMatrix, i: int) -> tuple[int, list]:
    _, values = matrix.row(i)
    return len(values), [_plain(v) for v in values.tolist()]


def col_profile(matrix: PamMatrix, j: int) -> tuple[int, list]:
    _, values = matrix.col(j)
    return len(values), [_plain(v) for v in values.tolist()]


def row_products(matrix: PamMatrix) -> np.ndarray:
    """Product of the non-zero entries of every row (1 for empty rows).

    Float products multiply left to right in column order and saturate at
    ``inf``; exact mode returns Python integers.
    """
    counts = np.diff(matrix.indptr)
    if matrix.scalar == "int":
        out = np.empty(matrix.n, dtype=object)
        data = matrix.data.tolist()
        ip = matrix.indptr.tolist()
        for i in range(matrix.n):
            out[i] = math.prod(data[ip[i] : ip[i + 1]])
        return out
    out = np.ones(matrix.n, dtype=np.float64)
    nonempty = counts > 0
    if matrix.nnz:
        with np.errstate(over="ignore"):
            out[nonempty] = np.multiply.reduceat(matrix.data, matrix.indptr[:-1][nonempty])
    return out


def _plain(v):
    """Integral floats as ints, so histograms print as in the integer case."""
    if isinstance(v, float) and v.is_integer():
        return int(v)
    return v
