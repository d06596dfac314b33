"""One-hot encoding of categorical records."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .dataset import Dataset, Schema, SchemaError


@dataclass(frozen=True)
class Encoder:
    schema: Schema

    @property
    def layout(self) -> tuple[tuple[str, str], ...]:
        return tuple((c.name, v) for c in self.schema.columns for v in c.values)

    @property
    def dimension(self) -> int:
        return sum(c.cardinality for c in self.schema.columns)

    @property
    def offsets(self) -> np.ndarray:
        card = [c.cardinality for c in self.schema.columns]
        return np.concatenate([[0], np.cumsum(card)[:-1]]).astype(np.int64)

    def encode(self, row: Sequence[str] | Mapping[str, str]) -> np.ndarray:
        if isinstance(row, Mapping):
            row = [row[n] for n in self.schema.names]
        if len(row) != len(self.schema.columns):
            raise SchemaError("row width does not match schema")
        codes = []
        for col, v in zip(self.schema.columns, row):
            if v not in col.values:
                raise SchemaError(f"unknown category {v!r} for column {col.name!r}")
            codes.append(col.index(v))
        return self.encode_codes(np.array([codes]))[0]

    def encode_codes(self, codes: np.ndarray) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64).reshape(-1, len(self.schema.columns))
        out = np.zeros((codes.shape[0], self.dimension))
        rows = np.arange(codes.shape[0])[:, None]
        out[rows, codes + self.offsets] = 1.0
        return out

    def encode_rows(self, rows: Sequence[Sequence[str]]) -> np.ndarray:
        return self.encode_codes(Dataset(self.schema, tuple(rows)).codes)

    def encode_dataset(self, d: Dataset) -> np.ndarray:
        return self.encode_codes(d.codes)


def fit_encoder(schema: Schema) -> Encoder:
    return Encoder(schema)
