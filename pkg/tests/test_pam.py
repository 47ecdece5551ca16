import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import FIVE_NODE_MATRIX, FIVE_NODE_SQUARED
from oracles import brute_force_power
from pamkit import pam
from pamkit.errors import MappingError, ResourceError
from pamkit.graph_io import KnowledgeGraph
from pamkit.pam import (
    build_pam,
    cell,
    col_profile,
    compute_powers,
    multiply,
    row_products,
    row_profile,
    value_histogram,
)
from pamkit.primes import build_mapping

A, B, C, D, E = range(5)

# 3-walks of the example graph, from brute-force enumeration (oracles.brute_force_power)
FIVE_NODE_CUBE_CELLS = {(A, D): 105, (A, E): 175, (E, B): 210}


def dense_int(m):
    return [[int(v) for v in row] for row in m.to_dense().tolist()]


@pytest.mark.parametrize("scalar", ["int", "float"])
def test_five_node_one_hop(five_node, five_node_mapping, scalar):
    P = build_pam(five_node, five_node_mapping, "product", scalar)
    assert dense_int(P) == FIVE_NODE_MATRIX
    assert P.nnz == 8 and P.hop == 1


@pytest.mark.parametrize("scalar", ["int", "float"])
@pytest.mark.parametrize("agg", ["product", "sum"])
def test_five_node_square(five_node, five_node_mapping, scalar, agg):
    stack = compute_powers(build_pam(five_node, five_node_mapping, agg, scalar), 2)
    assert dense_int(stack[2]) == FIVE_NODE_SQUARED


def test_five_node_cube_oracle_and_frozen(five_node, five_node_mapping):
    oracle = brute_force_power(five_node.edges.tolist(), five_node_mapping.primes, 5, 3)
    for key, value in FIVE_NODE_CUBE_CELLS.items():
        assert oracle[key] == value
    stack = compute_powers(build_pam(five_node, five_node_mapping, "sum", "int"), 3)
    for (i, j), value in FIVE_NODE_CUBE_CELLS.items():
        assert cell(stack, 3, i, j) == value
    assert {(i, j): v for i, row in enumerate(dense_int(stack[3])) for j, v in enumerate(row) if v} == oracle


def test_cell_lookups(five_node, five_node_mapping):
    stack = compute_powers(build_pam(five_node, five_node_mapping, "sum"), 2)
    assert cell(stack, 2, D, B) == 30
    assert cell(stack, 1, A, D) == 0
    assert cell(stack, 2, E, A) == 21


@pytest.mark.parametrize("args", [(0, 0, 0), (3, 0, 0), (1, 5, 0), (1, 0, -1)])
def test_cell_out_of_range(five_node, five_node_mapping, args):
    stack = compute_powers(build_pam(five_node, five_node_mapping, "sum"), 2)
    with pytest.raises(IndexError):
        cell(stack, *args)


def test_histograms(five_node, five_node_mapping):
    stack = compute_powers(build_pam(five_node, five_node_mapping, "sum"), 2)
    assert value_histogram(stack[1]) == {3: 3, 5: 2, 7: 3}
    assert value_histogram(stack[2]) == {15: 2, 21: 2, 30: 1, 35: 4, 49: 1}


def test_empty_histogram():
    g = KnowledgeGraph.from_triples([], 3, 1)
    assert value_histogram(build_pam(g, build_mapping(1))) == {}


def test_profiles(five_node, five_node_mapping):
    P = build_pam(five_node, five_node_mapping)
    assert row_profile(P, A) == (2, [3, 5])
    assert col_profile(P, A) == (1, [3])
    assert col_profile(P, B) == (3, [3, 7, 7])
    with pytest.raises(IndexError):
        row_profile(P, 9)


def test_isolated_node_profile():
    g = KnowledgeGraph.from_triples([(0, 0, 1)], 3, 1)
    P = build_pam(g, build_mapping(1))
    assert row_profile(P, 2) == (0, []) and col_profile(P, 2) == (0, [])


def test_three_node(three_node):
    m = build_mapping(2)
    prod = compute_powers(build_pam(three_node, m, "product", "int"), 2)
    plus = compute_powers(build_pam(three_node, m, "sum", "int"), 2)
    assert cell(prod, 1, 0, 1) == 15 and cell(prod, 2, 0, 2) == 45
    assert cell(plus, 1, 0, 1) == 8 and cell(plus, 2, 0, 2) == 24


def test_product_equals_sum_single_relation_pairs(five_node, five_node_mapping):
    a = build_pam(five_node, five_node_mapping, "product")
    b = build_pam(five_node, five_node_mapping, "sum")
    assert np.array_equal(a.data, b.data) and np.array_equal(a.indices, b.indices)


def test_mapping_coverage(five_node):
    with pytest.raises(MappingError):
        build_pam(five_node, build_mapping(2))


def test_bad_arguments(five_node, five_node_mapping):
    P = build_pam(five_node, five_node_mapping)
    with pytest.raises(ValueError):
        compute_powers(P, 0)
    with pytest.raises(ValueError):
        build_pam(five_node, five_node_mapping, "max")
    with pytest.raises(ValueError):
        compute_powers(multiply(P, P), 2)


def test_k1_only_base(five_node, five_node_mapping):
    stack = compute_powers(build_pam(five_node, five_node_mapping), 1)
    assert stack.max_hop == 1


def test_against_scipy(five_node, five_node_mapping):
    base = build_pam(five_node, five_node_mapping, "sum")
    stack = compute_powers(base, 5)
    S = base.to_scipy()
    ref = S
    for hop in range(2, 6):
        ref = (ref @ S).tocsr()
        ref.sort_indices()
        got = stack[hop].to_scipy()
        assert np.array_equal(got.indptr, ref.indptr)
        assert np.array_equal(got.indices, ref.indices)
        assert np.array_equal(got.data, ref.data)


@st.composite
def random_graphs(draw, max_nodes=8, max_rel=4, max_prob=0.4):
    n = draw(st.integers(1, max_nodes))
    R = draw(st.integers(1, max_rel))
    prob = draw(st.floats(0.0, max_prob))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    mask = rng.random((n, n, R)) < prob
    triples = [(int(h), int(r), int(t)) for h, t, r in zip(*np.nonzero(mask))]
    return KnowledgeGraph.from_triples(triples, n, R)


@settings(max_examples=150, deadline=None)
@given(random_graphs(), st.integers(1, 4), st.sampled_from(["sum", "product"]))
def test_oracle_equivalence(g, k, agg):
    mapping = build_mapping(g.relation_count)
    exact = compute_powers(build_pam(g, mapping, agg, "int"), k)
    fl = compute_powers(build_pam(g, mapping, agg, "float"), k)
    for hop in range(1, k + 1):
        oracle = brute_force_power(g.edges.tolist(), mapping.primes, g.node_count, hop, agg)
        got = {(i, j): v for i, row in enumerate(dense_int(exact[hop])) for j, v in enumerate(row) if v}
        assert got == oracle
        exact[hop].check()
        fl[hop].check()
        if fl.overflow_hop is None or hop < fl.overflow_hop:
            assert fl[hop].same_values(exact[hop])


@settings(max_examples=100, deadline=None)
@given(random_graphs(), st.integers(1, 4))
def test_support_matches_boolean_powers(g, k):
    stack = compute_powers(build_pam(g, build_mapping(g.relation_count), "sum"), k)
    Bm = np.zeros((g.node_count, g.node_count), dtype=np.int64)
    Bm[g.edges[:, 0], g.edges[:, 2]] = 1
    power = np.eye(g.node_count, dtype=np.int64)
    for hop in range(1, k + 1):
        power = np.minimum(power @ Bm, 1)
        assert np.array_equal(stack[hop].to_dense() > 0, power > 0)


def test_overflow_sentinel():
    # complete digraph on 12 nodes with a large prime: hop-5 cells reach ~1e19
    n = 12
    triples = [(i, 0, j) for i in range(n) for j in range(n)]
    g = KnowledgeGraph.from_triples(triples, n, 1)
    m = build_mapping(1, explicit=[1009])
    fl = compute_powers(build_pam(g, m, "sum", "float"), 5)
    exact = compute_powers(build_pam(g, m, "sum", "int"), 5)
    expected = n**4 * 1009**5
    assert expected > 2**53
    assert exact.cell(5, 0, 0) == expected
    assert fl.overflow_hop == 5
    assert exact.overflow_hop is None
    assert fl[4].same_values(exact[4])


def test_density_warning():
    n = 6
    g = KnowledgeGraph.from_triples([(i, 0, (i + 1) % n) for i in range(n)] + [(0, 0, 3), (3, 0, 0)], n, 1)
    stack = compute_powers(build_pam(g, build_mapping(1), "sum"), 6, density_fraction=0.3)
    assert stack.density_hops
    assert all(stack[h].nnz > 0.3 * n * n for h in stack.density_hops)


def test_resource_error(five_node, five_node_mapping, monkeypatch):
    def boom(*a, **k):
        raise MemoryError

    monkeypatch.setattr(pam, "_spgemm_float", boom)
    with pytest.raises(ResourceError, match="hop 2"):
        compute_powers(build_pam(five_node, five_node_mapping, "sum"), 3)


def test_undirected_uses_symmetric_operand():
    und = KnowledgeGraph.from_triples([(1, 0, 0), (1, 1, 2), (2, 0, 2)], 3, 2, directed=False)
    both = KnowledgeGraph.from_triples([(0, 0, 1), (1, 0, 0), (1, 1, 2), (2, 1, 1), (2, 0, 2)], 3, 2)
    m = build_mapping(2)
    base = build_pam(und, m, "sum")
    assert base.triangular
    dense = base.to_dense()
    assert np.all(np.tril(dense, -1) == 0)
    s_und = compute_powers(base, 3)
    s_dir = compute_powers(build_pam(both, m, "sum"), 3)
    for hop in (2, 3):
        assert np.array_equal(s_und[hop].to_dense(), s_dir[hop].to_dense())


def test_row_products(five_node, five_node_mapping):
    stack = compute_powers(build_pam(five_node, five_node_mapping, "sum"), 3)
    rows, cols = stack.node_profiles()
    assert rows[A].tolist() == [15, 525, 18375]
    assert cols[A].tolist()[0] == 3
    g = KnowledgeGraph.from_triples([(0, 0, 1)], 3, 1)
    assert row_products(build_pam(g, build_mapping(1))).tolist() == [3, 1, 1]


def test_row_products_saturate():
    n = 400
    g = KnowledgeGraph.from_triples([(0, 0, j) for j in range(n)], n, 1)
    out = row_products(build_pam(g, build_mapping(1, explicit=[1009])))
    assert out[0] == np.inf and out[1] == 1


def test_manifest(five_node, five_node_mapping):
    stack = compute_powers(build_pam(five_node, five_node_mapping, "sum"), 3)
    man = stack.manifest()
    assert man["dimension"] == 5 and man["hops"] == 3
    assert man["nnz"] == [8, 10, stack[3].nnz]
    assert man["overflow_hop"] is None
