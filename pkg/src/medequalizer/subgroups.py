"""Coverage analysis over protected-attribute patterns.

Counting, the set of under-covered full combinations used by the augmentation
loop, maximal uncovered patterns (MUPs) and greedy combination selection.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset, Schema, SchemaError
from .pattern import Pattern


@dataclass(frozen=True)
class CoverageEntry:
    pattern: Pattern
    count: int
    covered: bool


@dataclass(frozen=True)
class CoverageReport:
    tau: int
    attributes: tuple[str, ...]
    entries: tuple[CoverageEntry, ...]

    @property
    def uncovered(self) -> list[CoverageEntry]:
        return [e for e in self.entries if not e.covered]


@dataclass(frozen=True)
class MupSet:
    patterns: tuple[Pattern, ...]

    def __len__(self) -> int:
        return len(self.patterns)

    def __iter__(self):
        return iter(self.patterns)


def _attributes(schema: Schema, attributes: Sequence[str] | None) -> tuple[str, ...]:
    if attributes is None:
        return schema.require_protected()
    attributes = tuple(attributes)
    if not attributes:
        raise SchemaError("attribute list is empty")
    for a in attributes:
        schema.column(a)
    return attributes


def pattern_sort_key(schema: Schema, p: Pattern) -> tuple:
    """Order by schema column position, then value position; unbound sorts first."""
    d = p.as_dict()
    key = []
    for col in schema.columns:
        if col.name in d:
            key.append((1, col.index(d[col.name])))
        else:
            key.append((0, 0))
    return tuple(key)


def full_combinations(schema: Schema, attributes: Sequence[str]) -> list[Pattern]:
    """Cross-product of values over ``attributes``, in lexicographic schema order."""
    cols = [schema.column(a) for a in attributes]
    return [
        Pattern(zip(attributes, values))
        for values in itertools.product(*(c.values for c in cols))
    ]


def count_matches(d: Dataset, p: Pattern) -> int:
    return int(d.mask(p).sum())


def combination_counts(d: Dataset, attributes: Sequence[str]) -> np.ndarray:
    """Counts for every full combination, shaped by the attribute cardinalities."""
    cols = [d.schema.column(a) for a in attributes]
    shape = tuple(c.cardinality for c in cols)
    if len(d) == 0:
        return np.zeros(shape, dtype=np.int64)
    pos = [d.schema.position(a) for a in attributes]
    flat = np.ravel_multi_index(tuple(d.codes[:, p] for p in pos), shape)
    return np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape)


def coverage_report(d: Dataset, tau: int, attributes: Sequence[str] | None = None) -> CoverageReport:
    if tau < 1:
        raise ValueError("tau must be at least 1")
    attrs = _attributes(d.schema, attributes)
    counts = combination_counts(d, attrs).ravel()
    entries = tuple(
        CoverageEntry(p, int(c), bool(c >= tau))
        for p, c in zip(full_combinations(d.schema, attrs), counts)
    )
    return CoverageReport(tau, attrs, entries)


def uncovered_combinations(
    d: Dataset, tau: int, attributes: Sequence[str] | None = None
) -> list[tuple[Pattern, int]]:
    """Full combinations over ``attributes`` with fewer than ``tau`` rows, zero-count included."""
    return [(e.pattern, e.count) for e in coverage_report(d, tau, attributes).uncovered]


def enumerate_mups(d: Dataset, tau: int, attributes: Sequence[str] | None = None) -> MupSet:
    """Breadth-first walk of the pattern lattice from the wildcard root.

    Children are only expanded from covered nodes.  An uncovered node is
    maximal when every parent (one binding removed) is covered.
    """
    if tau < 1:
        raise ValueError("tau must be at least 1")
    attrs = _attributes(d.schema, attributes)
    cache: dict[Pattern, int] = {}

    def count(p: Pattern) -> int:
        if p not in cache:
            cache[p] = count_matches(d, p)
        return cache[p]

    root = Pattern()
    mups = []
    seen = {root}
    queue = deque([root])
    while queue:
        p = queue.popleft()
        if count(p) < tau:
            if all(count(p.drop(k)) >= tau for k in p.columns):
                mups.append(p)
            continue
        bound = p.as_dict()
        for a in attrs:
            if a in bound:
                continue
            for v in d.schema.column(a).values:
                child = p.bind(a, v)
                if child not in seen:
                    seen.add(child)
                    queue.append(child)
    mups.sort(key=lambda m: (len(m), pattern_sort_key(d.schema, m)))
    return MupSet(tuple(mups))


def greedy_combination_selection(
    mups: MupSet, schema: Schema, attributes: Sequence[str] | None = None
) -> list[Pattern]:
    """Pick full combinations that together generalise-cover every MUP.

    Each step takes the combination matching the most still-uncovered MUPs;
    ties go to the lexicographically smallest combination.
    """
    if not len(mups):
        raise ValueError("MUP set is empty")
    attrs = _attributes(schema, attributes)
    candidates = full_combinations(schema, attrs)
    remaining = set(range(len(mups)))
    hits = [
        {i for i, m in enumerate(mups.patterns) if m.generalizes(c)} for c in candidates
    ]
    chosen = []
    while remaining:
        best = max(range(len(candidates)), key=lambda k: (len(hits[k] & remaining), -k))
        gained = hits[best] & remaining
        if not gained:
            raise SchemaError("some MUPs bind attributes outside the selection attributes")
        chosen.append(candidates[best])
        remaining -= gained
    return chosen
