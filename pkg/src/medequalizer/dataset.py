"""Schema-validated categorical datasets, CSV I/O and the demo cohort."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pattern import Pattern


class SchemaError(ValueError):
    """Raised when a schema, pattern or record is inconsistent."""


class DataValidationError(ValueError):
    """Raised when file contents do not conform to a schema."""


@dataclass(frozen=True)
class ColumnSpec:
    name: str
    values: tuple[str, ...]
    protected: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if not self.name:
            raise SchemaError("column name must be non-empty")
        if not self.values:
            raise SchemaError(f"column {self.name!r} has no allowed values")
        if len(set(self.values)) != len(self.values):
            raise SchemaError(f"column {self.name!r} has duplicate values")

    @property
    def cardinality(self) -> int:
        return len(self.values)

    def index(self, value: str) -> int:
        return self.values.index(value)


@dataclass(frozen=True)
class Schema:
    columns: tuple[ColumnSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if not self.columns:
            raise SchemaError("schema needs at least one column")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def protected(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns if c.protected)

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"unknown column {name!r}")

    def position(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}") from None

    def validate_pattern(self, p: Pattern) -> None:
        for k, v in p.bindings:
            col = self.column(k)
            if v not in col.values:
                raise SchemaError(f"value {v!r} not allowed in column {k!r}")

    def require_protected(self) -> tuple[str, ...]:
        if not self.protected:
            raise SchemaError("schema declares no protected columns")
        return self.protected

    def to_dict(self) -> dict:
        return {
            "columns": [
                {"name": c.name, "values": list(c.values), "protected": c.protected}
                for c in self.columns
            ]
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Schema":
        try:
            cols = [
                ColumnSpec(c["name"], tuple(c["values"]), bool(c.get("protected", False)))
                for c in data["columns"]
            ]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from exc
        return cls(tuple(cols))


def load_schema(path: str | Path) -> Schema:
    with open(path, encoding="utf-8") as fh:
        return Schema.from_dict(json.load(fh))


def save_schema(schema: Schema, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(schema.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True)
class Dataset:
    """Immutable table of categorical records.

    Rows are tuples aligned with ``schema.columns``.  Integer codes (the
    position of each label within its column's allowed values) are computed
    lazily and used by the counting and encoding paths.
    """

    schema: Schema
    rows: tuple[tuple[str, ...], ...] = field(default=())

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.rows)
        object.__setattr__(self, "rows", rows)
        width = len(self.schema.columns)
        allowed = [set(c.values) for c in self.schema.columns]
        for i, row in enumerate(rows, start=1):
            if len(row) != width:
                raise DataValidationError(f"row {i}: expected {width} fields, got {len(row)}")
            for col, value, ok in zip(self.schema.columns, row, allowed):
                if value not in ok:
                    raise DataValidationError(
                        f"row {i}, column {col.name!r}: unknown category {value!r}"
                    )

    def __len__(self) -> int:
        return len(self.rows)

    @cached_property
    def codes(self) -> np.ndarray:
        if not self.rows:
            return np.zeros((0, len(self.schema.columns)), dtype=np.int64)
        lookup = [{v: j for j, v in enumerate(c.values)} for c in self.schema.columns]
        return np.array(
            [[lk[v] for lk, v in zip(lookup, row)] for row in self.rows], dtype=np.int64
        )

    def records(self) -> list[dict[str, str]]:
        names = self.schema.names
        return [dict(zip(names, r)) for r in self.rows]

    def mask(self, p: Pattern) -> np.ndarray:
        self.schema.validate_pattern(p)
        m = np.ones(len(self.rows), dtype=bool)
        for k, v in p.bindings:
            pos = self.schema.position(k)
            m &= self.codes[:, pos] == self.schema.columns[pos].index(v)
        return m

    def with_rows(self, rows: Iterable[Sequence[str]]) -> "Dataset":
        return Dataset(self.schema, tuple(tuple(r) for r in rows))

    def concat(self, rows: Iterable[Sequence[str]]) -> "Dataset":
        return Dataset(self.schema, self.rows + tuple(tuple(r) for r in rows))

    @classmethod
    def from_codes(cls, schema: Schema, codes: np.ndarray) -> "Dataset":
        cols = schema.columns
        rows = tuple(tuple(cols[j].values[c] for j, c in enumerate(r)) for r in codes.tolist())
        ds = cls(schema, rows)
        ds.__dict__["codes"] = np.asarray(codes, dtype=np.int64).reshape(len(rows), len(cols))
        return ds


def load_csv(path: str | Path, schema: Schema) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: missing header row") from None
        if tuple(header) != schema.names:
            raise DataValidationError(
                f"{path}: header {header} does not match schema columns {list(schema.names)}"
            )
        rows = [tuple(r) for r in reader if r]
    return Dataset(schema, tuple(rows))


def save_csv(d: Dataset, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(d.schema.names)
        writer.writerows(d.rows)


def subset_by_pattern(d: Dataset, p: Pattern) -> Dataset:
    m = d.mask(p)
    out = Dataset(d.schema, tuple(r for r, keep in zip(d.rows, m) if keep))
    out.__dict__["codes"] = d.codes[m]
    return out


# Published cohort marginals (percent); the race row sums to 99.99 and is renormalised.
AGE_BINS = ("≤45", "45-65", "66-80", "81+")
DEMO_MARGINALS: dict[str, dict[str, float]] = {
    "gender": {"Male": 56.6, "Female": 43.4},
    "race": {"Asian": 2.37, "Black": 7.64, "White": 71.23, "Other": 3.53, "Unknown": 15.22},
    "age": dict(zip(AGE_BINS, (15.45, 33.61, 30.85, 20.09))),
    "mortality": {"Died": 40.57, "Alive": 59.43},
}


def demo_schema() -> Schema:
    return Schema((
        ColumnSpec("gender", ("Male", "Female"), protected=True),
        ColumnSpec("race", ("Asian", "Black", "White", "Other", "Unknown"), protected=True),
        ColumnSpec("age", AGE_BINS, protected=True),
        ColumnSpec("mortality", ("Died", "Alive")),
        ColumnSpec("insurance", ("Medicare", "Medicaid", "Private", "Self Pay", "Government")),
        ColumnSpec("admission_type", ("elective", "urgent", "emergency", "newborn")),
        ColumnSpec("disease", ("malignancy", "CHF", "both", "other")),
    ))


@dataclass(frozen=True)
class CohortSpec:
    """Independent per-column marginals for the synthetic demo cohort.

    ``marginals`` maps column name to a probability vector in the column's
    value order.  Columns without an entry are sampled uniformly.
    """

    n: int
    marginals: Mapping[str, Sequence[float]]
    seed: int = 0
    schema: Schema = field(default_factory=demo_schema)

    def __post_init__(self):
        if self.n < 1:
            raise SchemaError("cohort size must be positive")
        if self.seed < 0:
            raise SchemaError("seed must be unsigned")
        for name, probs in self.marginals.items():
            col = self.schema.column(name)
            p = np.asarray(probs, dtype=float)
            if p.shape != (col.cardinality,):
                raise SchemaError(
                    f"marginal for {name!r} has {p.size} entries, column has {col.cardinality}"
                )
            if (p < 0).any() or abs(p.sum() - 1.0) > 1e-9:
                raise SchemaError(f"marginal for {name!r} must be non-negative and sum to 1")

    def probabilities(self, name: str) -> np.ndarray:
        col = self.schema.column(name)
        if name in self.marginals:
            return np.asarray(self.marginals[name], dtype=float)
        return np.full(col.cardinality, 1.0 / col.cardinality)


def demo_marginals(schema: Schema | None = None) -> dict[str, list[float]]:
    """Cohort marginals as normalised vectors in schema value order."""
    schema = schema or demo_schema()
    out = {}
    for name, pct in DEMO_MARGINALS.items():
        col = schema.column(name)
        v = np.array([pct[x] for x in col.values], dtype=float)
        out[name] = (v / v.sum()).tolist()
    return out


def demo_cohort_spec(n: int = 10000, seed: int = 42) -> CohortSpec:
    return CohortSpec(n=n, marginals=demo_marginals(), seed=seed)


def generate_demo_cohort(spec: CohortSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    cols = []
    for col in spec.schema.columns:
        cols.append(rng.choice(col.cardinality, size=spec.n, p=spec.probabilities(col.name)))
    return Dataset.from_codes(spec.schema, np.column_stack(cols))
