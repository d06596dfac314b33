"""Pluggable categorical record generators.

Every generator follows the same small contract: ``fit(dataset)`` returns the
fitted generator and ``sample(n, seed, condition)`` returns a
:class:`SampleBatch` of schema-valid records, all matching ``condition`` on
its bound columns.  Deep generative models are out of scope; their output can
be plugged in through :class:`ExternalPool`.
"""
from __future__ import annotations

import copy
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, Schema, SchemaError, load_csv
from .pattern import Pattern

DEFAULT_SMOOTHING = 0.5


class GeneratorError(RuntimeError):
    pass


class PoolExhaustedError(GeneratorError):
    def __init__(self, pattern: Pattern, wanted: int, available: int):
        super().__init__(
            f"external pool exhausted for {pattern.label()}: wanted {wanted}, {available} left"
        )
        self.pattern = pattern


@dataclass(frozen=True)
class SampleBatch:
    records: tuple[tuple[str, ...], ...]
    origin: str
    condition: Pattern | None
    seed: int
    codes: np.ndarray = field(default=None, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_codes(cls, schema: Schema, codes: np.ndarray, origin: str,
                   condition: Pattern | None, seed: int) -> "SampleBatch":
        cols = schema.columns
        records = tuple(tuple(cols[j].values[c] for j, c in enumerate(r)) for r in codes.tolist())
        return cls(records, origin, condition, seed, np.asarray(codes, dtype=np.int64))

    def as_dataset(self, schema: Schema) -> Dataset:
        ds = Dataset(schema, self.records)
        if self.codes is not None:
            ds.__dict__["codes"] = self.codes
        return ds


def _draw(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draw; ``probs`` is (k,) or (n, k), ``u`` uniform of length n."""
    cdf = np.cumsum(probs, axis=-1)
    cdf = cdf / cdf[..., -1:]
    if cdf.ndim == 1:
        return np.minimum(np.searchsorted(cdf, u, side="right"), probs.shape[-1] - 1)
    return np.minimum((cdf <= u[:, None]).sum(axis=1), probs.shape[-1] - 1)


def _condition_codes(schema: Schema, condition: Pattern | None) -> dict[int, int]:
    if condition is None:
        return {}
    try:
        schema.validate_pattern(condition)
    except SchemaError as exc:
        raise SchemaError(f"condition {condition.label()} inconsistent with schema: {exc}") from exc
    return {schema.position(k): schema.column(k).index(v) for k, v in condition.bindings}


def _smoothed_counts(codes: np.ndarray, card: int, smoothing: float) -> np.ndarray:
    return np.bincount(codes, minlength=card).astype(float) + smoothing


class Generator:
    """Base class: subclasses implement ``_fit`` and ``_sample_codes``."""

    name = "generator"

    def __init__(self):
        self.schema: Schema | None = None

    def clone(self) -> "Generator":
        """Unfitted copy with the same hyper-parameters."""
        g = copy.copy(self)
        g.schema = None
        return g

    def fit(self, d: Dataset) -> "Generator":
        if len(d) == 0:
            raise GeneratorError(f"{self.name}: cannot fit on an empty dataset")
        self.schema = d.schema
        self._fit(d)
        return self

    def sample(self, n: int, seed: int, condition: Pattern | None = None) -> SampleBatch:
        if self.schema is None:
            raise GeneratorError(f"{self.name}: sample() before fit()")
        if n < 1:
            raise ValueError("batch size must be at least 1")
        cond = _condition_codes(self.schema, condition)
        rng = np.random.default_rng(seed)
        codes = self._sample_codes(n, rng, cond)
        return SampleBatch.from_codes(self.schema, codes, self.name, condition, seed)

    def _fit(self, d: Dataset) -> None:
        raise NotImplementedError

    def _sample_codes(self, n: int, rng: np.random.Generator, cond: dict[int, int]) -> np.ndarray:
        raise NotImplementedError


class IndependentMarginals(Generator):
    """Each column drawn independently from its empirical frequency."""

    name = "marginals"

    def __init__(self, smoothing: float = 0.0):
        super().__init__()
        self.smoothing = smoothing
        self.marginals: list[np.ndarray] = []

    def _fit(self, d: Dataset) -> None:
        self.marginals = []
        for j, col in enumerate(d.schema.columns):
            c = _smoothed_counts(d.codes[:, j], col.cardinality, self.smoothing)
            self.marginals.append(c / c.sum())

    def _sample_codes(self, n, rng, cond):
        out = np.empty((n, len(self.marginals)), dtype=np.int64)
        for j, p in enumerate(self.marginals):
            u = rng.random(n)
            out[:, j] = cond[j] if j in cond else _draw(p, u)
        return out


class ConditionalEmpirical(Generator):
    """Unbound columns drawn independently from their smoothed frequencies
    among the training rows that match the condition.

    If no training row matches, frequencies over the whole training set are
    used instead.
    """

    name = "cond-empirical"

    def __init__(self, smoothing: float = DEFAULT_SMOOTHING):
        super().__init__()
        self.smoothing = smoothing
        self.codes: np.ndarray | None = None

    def _fit(self, d: Dataset) -> None:
        self.codes = d.codes.copy()

    def _sample_codes(self, n, rng, cond):
        m = np.ones(len(self.codes), dtype=bool)
        for j, c in cond.items():
            m &= self.codes[:, j] == c
        ref = self.codes[m] if m.any() else self.codes
        out = np.empty((n, self.codes.shape[1]), dtype=np.int64)
        for j, col in enumerate(self.schema.columns):
            u = rng.random(n)
            if j in cond:
                out[:, j] = cond[j]
                continue
            c = _smoothed_counts(ref[:, j], col.cardinality, self.smoothing)
            out[:, j] = _draw(c / c.sum(), u)
        return out


def mutual_information(d: Dataset, col_a: str, col_b: str, smoothing: float = 0.0) -> float:
    """Mutual information (nats) of the empirical joint of two columns.

    ``smoothing`` is added to every cell of the contingency table before
    normalisation.
    """
    if len(d) == 0:
        raise ValueError("mutual information of an empty dataset")
    ia, ib = d.schema.position(col_a), d.schema.position(col_b)
    ka, kb = d.schema.columns[ia].cardinality, d.schema.columns[ib].cardinality
    joint = np.zeros((ka, kb))
    np.add.at(joint, (d.codes[:, ia], d.codes[:, ib]), 1.0)
    return _mi_from_table(joint + smoothing)


def _mi_from_table(table: np.ndarray) -> float:
    p = table / table.sum()
    pa = p.sum(axis=1, keepdims=True)
    pb = p.sum(axis=0, keepdims=True)
    nz = p > 0
    return max(0.0, float(np.sum(p[nz] * np.log(p[nz] / (pa @ pb)[nz]))))


@dataclass
class ChowLiuModel:
    """Tree-structured categorical distribution rooted at ``order[0]``.

    ``cpts[child]`` has shape (parent cardinality, child cardinality); rows
    sum to one.
    """

    schema: Schema
    edges: list[tuple[str, str]]
    parent: dict[str, str | None]
    order: tuple[str, ...]
    root_probs: np.ndarray
    cpts: dict[str, np.ndarray]
    weights: dict[tuple[str, str], float] = field(default_factory=dict)

    def children(self, name: str) -> list[str]:
        return [c for c in self.order if self.parent[c] == name]


def build_chow_liu_tree(d: Dataset, smoothing: float = DEFAULT_SMOOTHING) -> ChowLiuModel:
    names = d.schema.names
    if len(names) < 2:
        raise SchemaError("a Chow-Liu tree needs at least two columns")
    if len(d) == 0:
        raise GeneratorError("cannot build a Chow-Liu tree from an empty dataset")
    weights = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            weights[(names[i], names[j])] = mutual_information(d, names[i], names[j], smoothing)

    # Kruskal; ties resolved by column order of the edge endpoints
    ranked = sorted(weights, key=lambda e: (-weights[e], names.index(e[0]), names.index(e[1])))
    root_of = {n: n for n in names}

    def find(x):
        while root_of[x] != x:
            root_of[x] = root_of[root_of[x]]
            x = root_of[x]
        return x

    edges = []
    for a, b in ranked:
        ra, rb = find(a), find(b)
        if ra != rb:
            root_of[ra] = rb
            edges.append((a, b))
        if len(edges) == len(names) - 1:
            break

    adj = {n: [] for n in names}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    parent: dict[str, str | None] = {names[0]: None}
    order = [names[0]]
    i = 0
    while i < len(order):
        v = order[i]
        for w in sorted(adj[v], key=names.index):
            if w not in parent:
                parent[w] = v
                order.append(w)
        i += 1

    schema = d.schema
    root = schema.column(names[0])
    rc = _smoothed_counts(d.codes[:, 0], root.cardinality, smoothing)
    cpts = {}
    for child in order[1:]:
        pi, ci = schema.position(parent[child]), schema.position(child)
        table = np.zeros((schema.columns[pi].cardinality, schema.columns[ci].cardinality))
        np.add.at(table, (d.codes[:, pi], d.codes[:, ci]), 1.0)
        table += smoothing
        sums = table.sum(axis=1, keepdims=True)
        # parent values never observed (smoothing off): fall back to uniform
        table = np.where(sums > 0, table / np.where(sums > 0, sums, 1.0), 1.0 / table.shape[1])
        cpts[child] = table
    if rc.sum() <= 0:
        raise GeneratorError(f"column {root.name!r} has no observed categories")
    return ChowLiuModel(schema, edges, parent, tuple(order), rc / rc.sum(), cpts, weights)


class ChowLiuGenerator(Generator):
    """Ancestral sampler over a maximum-mutual-information spanning tree.

    Conditioning is exact: evidence likelihoods are passed up the tree and
    values are drawn top-down from the resulting posterior.  Conditions with
    zero posterior mass fall back to :class:`ConditionalEmpirical`.
    """

    name = "chowliu"

    def __init__(self, smoothing: float = DEFAULT_SMOOTHING):
        super().__init__()
        self.smoothing = smoothing
        self.model: ChowLiuModel | None = None
        self._fallback: ConditionalEmpirical | None = None

    def _fit(self, d: Dataset) -> None:
        self.model = build_chow_liu_tree(d, self.smoothing)
        self._fallback = ConditionalEmpirical(self.smoothing).fit(d)

    def evidence_likelihoods(self, cond: dict[int, int]) -> dict[str, np.ndarray]:
        m = self.model
        lam = {}
        for name in reversed(m.order):
            col = m.schema.column(name)
            v = np.ones(col.cardinality)
            pos = m.schema.position(name)
            if pos in cond:
                v = np.zeros(col.cardinality)
                v[cond[pos]] = 1.0
            for c in m.children(name):
                v = v * (m.cpts[c] @ lam[c])
            lam[name] = v
        return lam

    def _sample_codes(self, n, rng, cond):
        m = self.model
        lam = self.evidence_likelihoods(cond)
        root = m.order[0]
        root_post = m.root_probs * lam[root]
        if root_post.sum() <= 0:
            return self._fallback._sample_codes(n, rng, cond)
        out = np.empty((n, len(m.schema.columns)), dtype=np.int64)
        u = rng.random((n, len(m.order)))
        out[:, m.schema.position(root)] = _draw(root_post, u[:, 0])
        for k, name in enumerate(m.order[1:], start=1):
            parent_codes = out[:, m.schema.position(m.parent[name])]
            post = m.cpts[name][parent_codes] * lam[name]
            out[:, m.schema.position(name)] = _draw(post, u[:, k])
        return out


class ExternalPool(Generator):
    """Serves rows from an externally generated CSV pool.

    Rows are handed out in file order and never reused within one run, so two
    calls with the same condition return disjoint batches.  ``seed`` is ignored.
    """

    name = "external"

    def __init__(self, source: str | Path | Dataset):
        super().__init__()
        self.source = source
        self.pool: Dataset | None = None
        self._used: np.ndarray | None = None
        self._lock = threading.Lock()

    def clone(self) -> "ExternalPool":
        # the cursor is shared: per-subgroup copies must not replay the pool
        return self

    def fit(self, d: Dataset) -> "ExternalPool":
        if self.pool is None:
            pool = self.source if isinstance(self.source, Dataset) else load_csv(self.source, d.schema)
            if pool.schema != d.schema:
                raise SchemaError("external pool schema differs from the dataset schema")
            self.pool = pool
            self._used = np.zeros(len(pool), dtype=bool)
        elif self.pool.schema != d.schema:
            raise SchemaError("external pool schema differs from the dataset schema")
        self.schema = d.schema
        return self

    def sample(self, n: int, seed: int = 0, condition: Pattern | None = None) -> SampleBatch:
        if self.pool is None:
            raise GeneratorError("external pool used before fit()")
        if n < 1:
            raise ValueError("batch size must be at least 1")
        cond = condition or Pattern()
        with self._lock:
            free = np.flatnonzero(self.pool.mask(cond) & ~self._used)
            if len(free) < n:
                raise PoolExhaustedError(cond, n, len(free))
            take = free[:n]
            self._used[take] = True
        return SampleBatch.from_codes(self.schema, self.pool.codes[take], self.name, condition, seed)


def external_pool_sample(pool: ExternalPool, n: int, cond: Pattern | None = None) -> SampleBatch:
    return pool.sample(n, 0, cond)


GENERATORS = {
    "marginals": IndependentMarginals,
    "cond-empirical": ConditionalEmpirical,
    "chowliu": ChowLiuGenerator,
}


def make_generator(kind: str, pool: str | Path | None = None) -> Generator:
    if kind == "external":
        if pool is None:
            raise ValueError("the external generator needs a pool CSV")
        return ExternalPool(pool)
    try:
        return GENERATORS[kind]()
    except KeyError:
        raise ValueError(f"unknown generator {kind!r}") from None
