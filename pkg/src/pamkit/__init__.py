"""Prime Adjacency Matrices for multi-relational graphs."""

from .errors import (
    ConsistencyError,
    MappingError,
    NormalizationError,
    PamError,
    ParseError,
    ResourceError,
    StratificationError,
    VocabularyError,
)
from .graph_io import GraphCollection, KnowledgeGraph, Triple, load_triples, load_tudataset, save_triples
from .pam import (
    PamMatrix,
    PowerStack,
    build_pam,
    cell,
    col_profile,
    compute_powers,
    row_profile,
    value_histogram,
)
from .primes import Factorization, RelationMapping, build_mapping, factorize_cell

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "MappingError",
    "NormalizationError",
    "PamError",
    "ParseError",
    "ResourceError",
    "StratificationError",
    "VocabularyError",
    "GraphCollection",
    "KnowledgeGraph",
    "Triple",
    "load_triples",
    "load_tudataset",
    "save_triples",
    "PamMatrix",
    "PowerStack",
    "build_pam",
    "cell",
    "col_profile",
    "compute_powers",
    "row_profile",
    "value_histogram",
    "Factorization",
    "RelationMapping",
    "build_mapping",
    "factorize_cell",
]
