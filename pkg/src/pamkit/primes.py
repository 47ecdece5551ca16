"""Relation-to-prime mapping and factorization of one-hop cell values."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import MappingError, ParseError

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin; exact for n < 3.3e24."""
    n = int(n)
    if n < 2:
        return False
    for p in _MR_BASES:
        if n % p == 0:
            return n == p
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for a in _MR_BASES:
        x = pow(a, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


def primes_below(limit: int) -> np.ndarray:
    """Sieve of Eratosthenes: all primes < limit."""
    if limit < 3:
        return np.array([], dtype=np.int64)
    sieve = np.ones(limit, dtype=bool)
    sieve[:2] = False
    sieve[4::2] = False
    for p in range(3, math.isqrt(limit - 1) + 1, 2):
        if sieve[p]:
            sieve[p * p :: 2 * p] = False
    return np.flatnonzero(sieve).astype(np.int64)


def first_primes(count: int, skip_two: bool = True) -> list[int]:
    """The first ``count`` primes, starting at 3 when ``skip_two``."""
    if count <= 0:
        return []
    need = count + int(skip_two)
    limit = 16
    while True:
        found = primes_below(limit)
        if len(found) >= need:
            return found[int(skip_two) : need].tolist()
        # grow past the n(log n + log log n) bound for the n-th prime
        n = max(need, 6)
        limit = max(2 * limit, int(n * (math.log(n) + math.log(math.log(n)))) + 2)


@dataclass(frozen=True)
class RelationMapping:
    """Injective assignment ``relation-id -> prime``."""

    primes: tuple[int, ...]
    names: tuple[str, ...] | None = None
    skip_two: bool | None = None
    _inverse: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "primes", tuple(int(p) for p in self.primes))
        if self.names is not None:
            object.__setattr__(self, "names", tuple(self.names))
            if len(self.names) != len(self.primes):
                raise MappingError("names and primes differ in length")
        inverse = {}
        for r, p in enumerate(self.primes):
            if not is_prime(p):
                raise MappingError(f"{p} (relation {r}) is not prime")
            if p in inverse:
                raise MappingError(f"prime {p} assigned to relations {inverse[p]} and {r}")
            inverse[p] = r
        object.__setattr__(self, "_inverse", inverse)
        if self.skip_two is None:
            object.__setattr__(self, "skip_two", 2 not in inverse)
        elif self.skip_two and 2 in inverse:
            raise MappingError("skip_two mapping may not contain 2")

    def __len__(self) -> int:
        return len(self.primes)

    def prime(self, relation: int) -> int:
        return self.primes[relation]

    def relation_of(self, prime: int) -> int:
        return self._inverse[int(prime)]

    def as_array(self, dtype=np.int64) -> np.ndarray:
        return np.asarray(self.primes, dtype=dtype)


def build_mapping(
    relation_count: int,
    skip_two: bool = True,
    explicit: Sequence[int] | None = None,
    names: Sequence[str] | None = None,
) -> RelationMapping:
    if relation_count < 0:
        raise ValueError("relation_count must be >= 0")
    if explicit is None:
        primes = first_primes(relation_count, skip_two)
    else:
        primes = [int(p) for p in explicit]
        if len(primes) != relation_count:
            raise MappingError(f"explicit mapping has {len(primes)} primes for {relation_count} relations")
    return RelationMapping(
        tuple(primes),
        tuple(names) if names is not None else None,
        skip_two=skip_two if explicit is None else None,
    )


@dataclass(frozen=True)
class Factorization:
    """Relations recovered from a cell value plus whatever did not divide out.

    ``complete`` is False when ``residue > 1``, which happens for sum-mode
    cells or values containing primes outside the mapping.
    """

    value: int
    relations: Counter
    residue: int

    @property
    def complete(self) -> bool:
        return self.residue == 1

    def relation_list(self) -> list[int]:
        return sorted(self.relations.elements())


def factorize_cell(value, mapping: RelationMapping) -> Factorization:
    """Trial division of ``value`` by the mapping's primes only."""
    if isinstance(value, float):
        if not value.is_integer():
            raise ValueError(f"{value} is not an integer cell value")
        value = int(value)
    value = int(value)
    if value == 0:
        raise ValueError("0 encodes 'no edge' and has no factorization")
    if value < 0:
        raise ValueError("cell values are positive")
    rest = value
    found: Counter = Counter()
    for r, p in enumerate(mapping.primes):
        while rest % p == 0:
            rest //= p
            found[r] += 1
        if rest == 1:
            break
    return Factorization(value, found, rest)


def save_mapping(mapping: RelationMapping, path, names: Sequence[str] | None = None) -> None:
    names = names if names is not None else mapping.names
    if names is None:
        names = [str(r) for r in range(len(mapping))]
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for name, p in zip(names, mapping.primes):
            fh.write(f"{name}\t{p}\n")


def load_mapping(path) -> RelationMapping:
    names, primes = [], []
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError("expected 'relation<TAB>prime'", path, lineno)
            try:
                primes.append(int(fields[1]))
            except ValueError:
                raise ParseError(f"bad prime {fields[1]!r}", path, lineno) from None
            names.append(fields[0])
    return RelationMapping(tuple(primes), tuple(names))
