import os
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pamkit.graph_io import load_triples, load_tudataset  # noqa: E402
from pamkit.primes import build_mapping  # noqa: E402

DATA = Path(__file__).parent / "data"

# A,B,C,D,E = 0..4 ; green=3, blue=5, magenta=7
FIVE_NODE_MATRIX = [
    [0, 3, 5, 0, 0],
    [0, 0, 0, 0, 5],
    [0, 7, 0, 0, 0],
    [3, 7, 3, 0, 0],
    [0, 0, 0, 7, 0],
]
FIVE_NODE_SQUARED = [
    [0, 35, 0, 0, 15],
    [0, 0, 0, 35, 0],
    [0, 0, 0, 0, 35],
    [0, 30, 15, 0, 35],
    [21, 49, 21, 0, 0],
]


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def five_node():
    return load_triples(DATA / "five_node.tsv")


@pytest.fixture(scope="session")
def three_node():
    return load_triples(DATA / "three_node.tsv")


@pytest.fixture(scope="session")
def five_node_mapping(five_node):
    return build_mapping(five_node.relation_count, names=five_node.relation_names)


@pytest.fixture(scope="session")
def mutag():
    return load_tudataset(DATA / "MUTAG")


@pytest.fixture(scope="session")
def benchmark_dir():
    """Directory holding WN18RR/, DDB14/, FB15k-237/ splits, from $PAMKIT_DATA."""
    root = os.environ.get("PAMKIT_DATA")
    return Path(root) if root else None
